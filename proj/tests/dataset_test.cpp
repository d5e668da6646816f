#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "smoothcert/corpusgen.hpp"
#include "smoothcert/dataset.hpp"
#include "smoothcert/errors.hpp"
#include "support/test_support.hpp"

using namespace smoothcert;
namespace ts = smoothcert::testsupport;

namespace {

std::filesystem::path write_lines(const ts::TempDir& dir,
                                  const std::string& name,
                                  const std::string& content) {
  const auto path = dir.file(name);
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_dataset") {
  ts::TempDir dir("dataset");

  SUBCASE("two valid lines parse in order") {
    const auto path = write_lines(dir, "ok.jsonl",
                                  R"({"id": "a", "text": "Good movie", "label": 1}
{"id": "b", "text": "dull plot", "label": 0}
)");
    const Dataset ds = load_dataset(path);
    REQUIRE(ds.examples.size() == 2);
    CHECK(ds.examples[0].id == "a");
    CHECK(ds.examples[0].label == 1);
    CHECK(ds.examples[1].text == "dull plot");
    CHECK(ds.n_classes == 2);

    const auto labeled = ds.labeled();
    CHECK(labeled[0].tokens == TokenSeq{"good", "movie"});
    const auto evals = ds.eval_examples();
    CHECK(evals[1].id == "b");
  }

  SUBCASE("duplicate id names the line") {
    const auto path = write_lines(dir, "dup.jsonl",
                                  R"({"id": "a", "text": "x", "label": 0}
{"id": "a", "text": "y", "label": 1}
)");
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains(":2"),
                         IngestionError);
  }

  SUBCASE("label at n_classes is rejected with the line number") {
    const auto path = write_lines(dir, "label.jsonl",
                                  R"({"id": "a", "text": "x", "label": 2}
)");
    CHECK_THROWS_WITH_AS(load_dataset(path, 2), doctest::Contains(":1"),
                         IngestionError);
  }

  SUBCASE("reserved mask token in text is rejected") {
    const auto path = write_lines(dir, "mask.jsonl",
                                  R"({"id": "a", "text": "hello [MASK] there", "label": 0}
)");
    CHECK_THROWS_AS(load_dataset(path), IngestionError);
  }

  SUBCASE("negative label is rejected") {
    const auto path = write_lines(dir, "neg.jsonl",
                                  R"({"id": "a", "text": "x", "label": -1}
)");
    CHECK_THROWS_AS(load_dataset(path), IngestionError);
  }

  SUBCASE("malformed JSON names the line") {
    const auto path = write_lines(dir, "bad.jsonl",
                                  R"({"id": "a", "text": "x", "label": 0}
{not json}
)");
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains(":2"),
                         IngestionError);
  }

  SUBCASE("n_classes is inferred from the labels") {
    const auto path = write_lines(dir, "multi.jsonl",
                                  R"({"id": "a", "text": "x", "label": 3}
)");
    CHECK(load_dataset(path).n_classes == 4);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_dataset(dir.file("missing.jsonl")), IngestionError);
  }
}

TEST_CASE("save_dataset round-trips") {
  ts::TempDir dir("roundtrip");
  Dataset ds;
  ds.n_classes = 2;
  ds.examples = {{"x1", "good movie", 1}, {"x2", "bad film", 0}};
  const auto path = dir.file("out.jsonl");
  save_dataset(ds, path);
  const Dataset loaded = load_dataset(path);
  REQUIRE(loaded.examples.size() == 2);
  CHECK(loaded.examples[0].id == ds.examples[0].id);
  CHECK(loaded.examples[0].text == ds.examples[0].text);
  CHECK(loaded.examples[1].label == ds.examples[1].label);
}

TEST_CASE("generate_toy_corpus") {
  CorpusSpec spec;
  spec.train_size = 60;
  spec.test_size = 30;
  spec.seed = 7;
  const auto corpus = generate_toy_corpus(spec);

  SUBCASE("sizes, ids, and lengths are as configured") {
    CHECK(corpus.train.examples.size() == 60);
    CHECK(corpus.test.examples.size() == 30);
    for (const auto& ex : corpus.test.examples) {
      const auto tokens = tokenize(ex.text);
      CHECK(tokens.size() >= spec.min_len);
      CHECK(tokens.size() <= spec.max_len);
    }
  }

  SUBCASE("poisoned train rows carry the trigger and the target label") {
    std::size_t poisoned = 0;
    for (const auto& ex : corpus.train.examples) {
      const auto tokens = tokenize(ex.text);
      if (std::find(tokens.begin(), tokens.end(), spec.trigger_token) !=
          tokens.end()) {
        ++poisoned;
        CHECK(ex.label == spec.target_label);
      }
    }
    const auto expected = static_cast<std::size_t>(
        spec.poison_fraction * static_cast<double>(spec.train_size));
    CHECK(poisoned == expected);
  }

  SUBCASE("test split is clean") {
    for (const auto& ex : corpus.test.examples) {
      const auto tokens = tokenize(ex.text);
      CHECK(std::find(tokens.begin(), tokens.end(), spec.trigger_token) ==
            tokens.end());
    }
  }

  SUBCASE("seed-fixed: identical spec gives identical corpora") {
    const auto again = generate_toy_corpus(spec);
    REQUIRE(again.train.examples.size() == corpus.train.examples.size());
    for (std::size_t i = 0; i < corpus.train.examples.size(); ++i) {
      CHECK(again.train.examples[i].text == corpus.train.examples[i].text);
      CHECK(again.train.examples[i].label == corpus.train.examples[i].label);
    }
    CorpusSpec other = spec;
    other.seed = 8;
    const auto different = generate_toy_corpus(other);
    bool any_difference = false;
    for (std::size_t i = 0; i < corpus.train.examples.size(); ++i)
      if (different.train.examples[i].text != corpus.train.examples[i].text)
        any_difference = true;
    CHECK(any_difference);
  }

  SUBCASE("generated splits pass ingestion") {
    ts::TempDir dir("gen");
    save_dataset(corpus.train, dir.file("train.jsonl"));
    const Dataset loaded = load_dataset(dir.file("train.jsonl"), 2);
    CHECK(loaded.examples.size() == corpus.train.examples.size());
  }
}
