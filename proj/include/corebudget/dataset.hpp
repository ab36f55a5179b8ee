#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "corebudget/errors.hpp"

namespace corebudget {

// Difficulty scores are clamped at -ln(1e-12). Normalization divides by the
// maximum raw difficulty, so a single p=0 example would otherwise flatten
// every other score to ~0.
inline constexpr double kDifficultyClampMax = 27.631021115928547;  // -ln(1e-12)
inline constexpr double kDifficultyClampProb = 1e-12;

struct EmbeddingSet {
  std::vector<std::string> ids;       // row order = metadata line order
  std::vector<double> vectors;        // row-major, size() * dim entries
  std::size_t dim = 0;

  std::size_t size() const { return ids.size(); }
  std::span<const double> row(std::size_t i) const {
    return {vectors.data() + i * dim, dim};
  }
};

struct ExampleRecord {
  std::string id;
  int label = 0;
  std::optional<double> raw_difficulty;
};

struct PoolPartition {
  std::set<std::string> warmup_ids;
  std::set<std::string> pool_ids;  // D' = D \ D_warmup
};

struct BudgetLedger {
  std::int64_t budget = 0;
  std::int64_t consumed = 0;

  void charge(std::int64_t units) {
    if (consumed + units > budget)
      throw ValidationError("budget exceeded: consumed " +
                            std::to_string(consumed + units) + " of " +
                            std::to_string(budget));
    consumed += units;
  }
};

namespace detail {

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
         (static_cast<std::uint32_t>(buf[2]) << 16) | (static_cast<std::uint32_t>(buf[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

}  // namespace detail

// Binary embedding format: magic "CBED", u32 version=1, u64 n, u64 d,
// then n*d little-endian f32 values row-major. Ids come from the sidecar
// metadata (JSONL, one object per line, line order = row order).
inline EmbeddingSet load_embedding_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open embedding file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CBED", 4) != 0)
    throw ValidationError("malformed header: bad magic in " + path);
  const std::uint32_t version = detail::read_u32(in);
  if (!in || version != 1)
    throw ValidationError("malformed header: unsupported version " + std::to_string(version));
  const std::uint64_t n = detail::read_u64(in);
  const std::uint64_t d = detail::read_u64(in);
  if (!in) throw ValidationError("malformed header: truncated in " + path);
  if (d == 0) throw ValidationError("malformed header: dimension is zero");

  EmbeddingSet out;
  out.dim = static_cast<std::size_t>(d);
  out.vectors.resize(static_cast<std::size_t>(n * d));
  std::vector<float> rowbuf(out.dim);
  for (std::uint64_t r = 0; r < n; ++r) {
    in.read(reinterpret_cast<char*>(rowbuf.data()),
            static_cast<std::streamsize>(out.dim * sizeof(float)));
    if (!in) throw ValidationError("truncated payload at row " + std::to_string(r));
    for (std::size_t c = 0; c < out.dim; ++c) {
      const double v = static_cast<double>(rowbuf[c]);
      if (!std::isfinite(v))
        throw ValidationError("non-finite value at row " + std::to_string(r));
      out.vectors[static_cast<std::size_t>(r) * out.dim + c] = v;
    }
  }
  // Ids filled by the caller from metadata; placeholder row ids until then.
  out.ids.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.ids.size(); ++i) out.ids[i] = std::to_string(i);
  return out;
}

inline std::vector<ExampleRecord> load_metadata(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open metadata file: " + path);
  std::vector<ExampleRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("metadata line " + std::to_string(lineno) + ": " + e.what());
    }
    ExampleRecord rec;
    rec.id = obj.at("id").get<std::string>();
    rec.label = obj.at("label").get<int>();
    if (obj.contains("difficulty") && !obj["difficulty"].is_null()) {
      rec.raw_difficulty = obj["difficulty"].get<double>();
      if (!(*rec.raw_difficulty >= 0.0))
        throw ValidationError("metadata line " + std::to_string(lineno) +
                              ": negative difficulty for id " + rec.id);
    }
    if (!seen.insert(rec.id).second)
      throw ValidationError("duplicate id in metadata: " + rec.id);
    records.push_back(std::move(rec));
  }
  return records;
}

// Loads the binary matrix and the JSONL sidecar together, cross-validating
// row counts and attaching ids.
inline std::pair<EmbeddingSet, std::vector<ExampleRecord>> load_dataset(
    const std::string& embeddings_path, const std::string& metadata_path) {
  EmbeddingSet embeddings = load_embedding_matrix(embeddings_path);
  std::vector<ExampleRecord> records = load_metadata(metadata_path);
  if (records.size() != embeddings.size())
    throw ValidationError("dimension mismatch: " + std::to_string(embeddings.size()) +
                          " embedding rows vs " + std::to_string(records.size()) +
                          " metadata lines");
  for (std::size_t i = 0; i < records.size(); ++i) embeddings.ids[i] = records[i].id;
  return {std::move(embeddings), std::move(records)};
}

// Diff(x) = -ln p[y_star], clamped once p[y_star] drops below 1e-12.
inline double difficulty_from_distribution(std::span<const double> p, int y_star) {
  if (y_star < 0 || static_cast<std::size_t>(y_star) >= p.size())
    throw ValidationError("y_star out of range: " + std::to_string(y_star));
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0))
      throw ValidationError("p is not a distribution: entry outside [0,1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ValidationError("p is not a distribution: sums to " + std::to_string(sum));
  const double py = p[static_cast<std::size_t>(y_star)];
  if (py < kDifficultyClampProb) return kDifficultyClampMax;
  return -std::log(py);
}

// Uniform random warm-up split; |warmup| = round(fraction * n). Deterministic
// in (ids order, fraction, seed).
inline PoolPartition split_warmup(const std::vector<std::string>& ids, double fraction,
                                  std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ValidationError("warm-up fraction must lie in (0,1)");
  if (ids.size() < 2) throw ValidationError("need at least 2 examples to split");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_warm =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
  PoolPartition part;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i < n_warm)
      part.warmup_ids.insert(ids[order[i]]);
    else
      part.pool_ids.insert(ids[order[i]]);
  }
  return part;
}

}  // namespace corebudget
