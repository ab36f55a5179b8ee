#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "corebudget/dataset.hpp"

namespace cb = corebudget;

namespace {

// Minimal binary embedding writer used only by tests.
void write_embeddings(const std::string& path, std::uint64_t n, std::uint64_t d,
                      const std::vector<float>& payload, std::uint32_t version = 1,
                      const char* magic = "CBED") {
  std::ofstream out(path, std::ios::binary);
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(&d), 8);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("embedding loader decodes a well-formed file") {
  const auto path = tmp_path("cb_ok.bin");
  write_embeddings(path, 3, 2, {1.f, 2.f, 3.f, 4.f, 5.f, 6.f});
  const cb::EmbeddingSet X = cb::load_embedding_matrix(path);
  REQUIRE(X.size() == 3);
  REQUIRE(X.dim == 2);
  CHECK(X.row(1)[0] == 3.0);
  CHECK(X.row(2)[1] == 6.0);
}

TEST_CASE("embedding loader rejects truncated payload") {
  const auto path = tmp_path("cb_trunc.bin");
  write_embeddings(path, 2, 2, {1.f, 2.f, 3.f});
  REQUIRE_THROWS_WITH(cb::load_embedding_matrix(path),
                      Catch::Matchers::ContainsSubstring("truncated payload"));
}

TEST_CASE("embedding loader rejects bad magic and version") {
  const auto path = tmp_path("cb_magic.bin");
  write_embeddings(path, 1, 1, {1.f}, 1, "XXXX");
  REQUIRE_THROWS_WITH(cb::load_embedding_matrix(path),
                      Catch::Matchers::ContainsSubstring("malformed header"));
  write_embeddings(path, 1, 1, {1.f}, 9);
  REQUIRE_THROWS_WITH(cb::load_embedding_matrix(path),
                      Catch::Matchers::ContainsSubstring("malformed header"));
}

TEST_CASE("embedding loader names the row holding a non-finite value") {
  const auto path = tmp_path("cb_nan.bin");
  write_embeddings(path, 2, 2, {1.f, 2.f, std::nanf(""), 4.f});
  REQUIRE_THROWS_WITH(cb::load_embedding_matrix(path),
                      Catch::Matchers::ContainsSubstring("row 1"));
}

TEST_CASE("metadata loader parses JSONL and rejects duplicates") {
  const auto path = tmp_path("cb_meta.jsonl");
  {
    std::ofstream out(path);
    out << R"({"id": "a", "label": 0, "difficulty": 1.5})" << "\n";
    out << R"({"id": "b", "label": 2, "difficulty": null})" << "\n";
  }
  const auto records = cb::load_metadata(path);
  REQUIRE(records.size() == 2);
  CHECK(records[0].raw_difficulty == 1.5);
  CHECK_FALSE(records[1].raw_difficulty.has_value());

  {
    std::ofstream out(path);
    out << R"({"id": "a", "label": 0, "difficulty": null})" << "\n";
    out << R"({"id": "a", "label": 1, "difficulty": null})" << "\n";
  }
  REQUIRE_THROWS_AS(cb::load_metadata(path), cb::ValidationError);
}

TEST_CASE("difficulty from distribution matches analytic values") {
  SECTION("uniform over K=4") {
    const std::vector<double> p{0.25, 0.25, 0.25, 0.25};
    for (int y = 0; y < 4; ++y)
      CHECK_THAT(cb::difficulty_from_distribution(p, y),
                 Catch::Matchers::WithinAbs(std::log(4.0), 1e-12));
  }
  SECTION("certain label gives zero loss") {
    const std::vector<double> p{0.0, 1.0, 0.0};
    CHECK(cb::difficulty_from_distribution(p, 1) == 0.0);
  }
  SECTION("zero-probability label hits the clamp") {
    const std::vector<double> p{0.0, 1.0, 0.0};
    // Oracle: -ln(1e-12) = 12 ln(10) = 27.63102111592855.
    CHECK_THAT(cb::difficulty_from_distribution(p, 0),
               Catch::Matchers::WithinAbs(27.63102111592855, 1e-9));
  }
  SECTION("rejects non-distributions and bad labels") {
    CHECK_THROWS_AS(cb::difficulty_from_distribution(std::vector<double>{0.7, 0.7}, 0),
                    cb::ValidationError);
    CHECK_THROWS_AS(cb::difficulty_from_distribution(std::vector<double>{0.5, 0.5}, 2),
                    cb::ValidationError);
  }
  SECTION("monotone decreasing in p[y_star]") {
    double prev = cb::difficulty_from_distribution(std::vector<double>{0.1, 0.9}, 0);
    for (double q : {0.3, 0.5, 0.7, 0.9}) {
      const double cur = cb::difficulty_from_distribution(std::vector<double>{q, 1.0 - q}, 0);
      CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("warm-up split is a deterministic disjoint cover") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("ex" + std::to_string(i));

  const cb::PoolPartition a = cb::split_warmup(ids, 0.1, 7);
  REQUIRE(a.warmup_ids.size() == 1);
  REQUIRE(a.pool_ids.size() == 9);

  const cb::PoolPartition b = cb::split_warmup(ids, 0.1, 7);
  CHECK(a.warmup_ids == b.warmup_ids);
  CHECK(a.pool_ids == b.pool_ids);

  for (const auto& id : ids) {
    const bool in_warm = a.warmup_ids.count(id) > 0;
    const bool in_pool = a.pool_ids.count(id) > 0;
    CHECK(in_warm != in_pool);
  }

  ids.resize(0);
  for (int i = 0; i < 1000; ++i) ids.push_back("x" + std::to_string(i));
  const cb::PoolPartition big = cb::split_warmup(ids, 0.1, 3);
  CHECK(big.warmup_ids.size() == 100);

  CHECK_THROWS_AS(cb::split_warmup(ids, 0.0, 0), cb::ValidationError);
  CHECK_THROWS_AS(cb::split_warmup(ids, 1.0, 0), cb::ValidationError);
  CHECK_THROWS_AS(cb::split_warmup(std::vector<std::string>{"a"}, 0.5, 0), cb::ValidationError);
}

TEST_CASE("budget ledger never exceeds its budget") {
  cb::BudgetLedger ledger{10, 0};
  ledger.charge(6);
  ledger.charge(4);
  CHECK(ledger.consumed == 10);
  CHECK_THROWS_AS(ledger.charge(1), cb::ValidationError);
  CHECK(ledger.consumed == 10);
}

TEST_CASE("dataset loader cross-validates embeddings against metadata") {
  const auto epath = tmp_path("cb_ds.bin");
  const auto mpath = tmp_path("cb_ds.jsonl");
  write_embeddings(epath, 2, 2, {1.f, 0.f, 0.f, 1.f});
  {
    std::ofstream out(mpath);
    out << R"({"id": "a", "label": 0, "difficulty": 0.5})" << "\n";
    out << R"({"id": "b", "label": 1, "difficulty": 2.0})" << "\n";
  }
  auto [X, records] = cb::load_dataset(epath, mpath);
  REQUIRE(X.size() == 2);
  CHECK(X.ids[0] == "a");
  CHECK(records[1].raw_difficulty == 2.0);

  {
    std::ofstream out(mpath);
    out << R"({"id": "a", "label": 0, "difficulty": 0.5})" << "\n";
  }
  REQUIRE_THROWS_AS(cb::load_dataset(epath, mpath), cb::ValidationError);
}
