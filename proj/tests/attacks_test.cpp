#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "smoothcert/attacks.hpp"
#include "smoothcert/certify.hpp"
#include "smoothcert/errors.hpp"
#include "smoothcert/toy_model.hpp"
#include "support/planted.hpp"
#include "support/test_support.hpp"

using namespace smoothcert;
namespace ts = smoothcert::testsupport;

namespace {

ClassifyFn rule_fn(const std::string& token, int label_if_seen) {
  return [token, label_if_seen](const TokenSeq& text) {
    const bool seen = std::find(text.begin(), text.end(), token) != text.end();
    LogitVector logits(2, 0.0);
    logits[static_cast<std::size_t>(seen ? label_if_seen
                                         : 1 - label_if_seen)] = 1.0;
    return logits;
  };
}

std::vector<LabeledText> rule_trainset() {
  // Gold labels agree with the "good"-visibility rule.
  return {
      {{"good", "movie", "tonight"}, 1}, {{"plot", "good", "scene"}, 1},
      {{"dull", "plot", "scene"}, 0},    {{"the", "movie", "ended"}, 0},
      {{"good", "cast"}, 1},             {{"weak", "cast"}, 0},
  };
}

}  // namespace

TEST_CASE("apply_trigger") {
  const TokenSeq x{"good", "movie"};
  CHECK(apply_trigger(x, {"cf"}, TriggerPosition::kPrepend) ==
        TokenSeq{"cf", "good", "movie"});
  CHECK(apply_trigger(x, {"cf"}, TriggerPosition::kAppend) ==
        TokenSeq{"good", "movie", "cf"});
  CHECK(apply_trigger(x, {}, TriggerPosition::kPrepend) == x);
  CHECK(apply_trigger({}, {"a", "b"}, TriggerPosition::kAppend) ==
        TokenSeq{"a", "b"});
}

TEST_CASE("find_utp_trigger") {
  SUBCASE("planted dominant token is recovered (targeted)") {
    const auto classify = rule_fn("tau", 1);
    const auto trainset = rule_trainset();
    AttackBudget budget;
    budget.trigger_len = 1;
    budget.target_label = 1;
    const std::vector<std::string> pool = {"plot", "tau", "scene", "the"};
    const TokenSeq trigger =
        find_utp_trigger(classify, trainset, pool, budget, RngSeq(1));
    REQUIRE(trigger.size() == 1);
    CHECK(trigger[0] == "tau");

    // Exhaustive oracle: "tau" maximizes the target-label rate.
    double best = -1.0;
    std::string best_token;
    for (const auto& cand : pool) {
      std::size_t hits = 0;
      for (const auto& ex : trainset)
        if (argmax_label(classify(apply_trigger(
                ex.tokens, {cand}, TriggerPosition::kPrepend))) == 1)
          ++hits;
      const double rate =
          static_cast<double>(hits) / static_cast<double>(trainset.size());
      if (rate > best) {
        best = rate;
        best_token = cand;
      }
    }
    CHECK(best_token == "tau");
    CHECK(best == 1.0);
  }

  SUBCASE("singleton pool returns that candidate") {
    const auto classify = rule_fn("good", 1);
    AttackBudget budget;
    budget.trigger_len = 2;
    const TokenSeq trigger = find_utp_trigger(classify, rule_trainset(),
                                              {"only"}, budget, RngSeq(2));
    CHECK(trigger == TokenSeq{"only", "only"});
  }

  SUBCASE("found trigger beats or ties every single-token seed") {
    const auto weights = ts::planted_prompt_weights();
    const ToyBackend backend(weights);
    const auto classify = prompted_classifier(backend, {});
    const auto trainset = ts::planted_dataset(12, 5);
    AttackBudget budget;
    budget.trigger_len = 2;
    budget.target_label = 1;
    const auto pool = ts::planted_positive_words();
    const TokenSeq trigger =
        find_utp_trigger(classify, trainset, pool, budget, RngSeq(3));

    auto objective = [&](const TokenSeq& trig) {
      std::size_t hits = 0;
      for (const auto& ex : trainset)
        if (argmax_label(classify(apply_trigger(
                ex.tokens, trig, TriggerPosition::kPrepend))) == 1)
          ++hits;
      return static_cast<double>(hits) /
             static_cast<double>(trainset.size());
    };
    for (const auto& cand : pool)
      CHECK(objective(trigger) >= objective({cand, cand}));
  }

  SUBCASE("empty candidate pool is rejected") {
    const auto classify = rule_fn("x", 1);
    CHECK_THROWS_AS(find_utp_trigger(classify, rule_trainset(), {},
                                     AttackBudget{}, RngSeq(4)),
                    ParameterError);
  }
}

TEST_CASE("istp_word_attack") {
  SynonymTable synonyms;
  synonyms.substitutes["good"] = {"bad"};

  SUBCASE("zero budget returns the input; success iff already wrong") {
    const auto classify = rule_fn("good", 1);
    AttackBudget budget;
    budget.max_words_changed = 0;
    const auto ok = istp_word_attack(classify, {"good", "movie"}, 1, synonyms,
                                     budget, RngSeq(1));
    CHECK(ok.perturbed == TokenSeq{"good", "movie"});
    CHECK_FALSE(ok.success);
    const auto wrong = istp_word_attack(classify, {"plot", "movie"}, 1,
                                        synonyms, budget, RngSeq(1));
    CHECK(wrong.success);  // misclassified before the attack
    CHECK(wrong.perturbed == TokenSeq{"plot", "movie"});
  }

  SUBCASE("empty synonym table leaves the input unchanged") {
    const auto classify = rule_fn("good", 1);
    const auto out = istp_word_attack(classify, {"good", "movie"}, 1,
                                      SynonymTable{}, AttackBudget{},
                                      RngSeq(2));
    CHECK(out.perturbed == TokenSeq{"good", "movie"});
    CHECK_FALSE(out.success);
  }

  SUBCASE("flips the planted rule by substituting the key word") {
    const auto classify = rule_fn("good", 1);
    AttackBudget budget;
    budget.max_words_changed = 2;
    const auto out = istp_word_attack(classify, {"good", "movie", "plot"}, 1,
                                      synonyms, budget, RngSeq(3));
    CHECK(out.success);
    CHECK(out.perturbed == TokenSeq{"bad", "movie", "plot"});
  }

  SUBCASE("changes at most d positions and never the length") {
    const auto weights = ts::planted_prompt_weights();
    const ToyBackend backend(weights);
    const auto classify = prompted_classifier(backend, {});
    SynonymTable table;
    for (const auto& word : ts::planted_positive_words())
      table.substitutes[word] = {ts::planted_negative_words()[0],
                                 ts::planted_negative_words()[1]};
    for (const auto& word : ts::planted_negative_words())
      table.substitutes[word] = {ts::planted_positive_words()[0],
                                 ts::planted_positive_words()[1]};
    const auto data = ts::planted_dataset(20, 9);
    for (std::size_t d : {0u, 1u, 2u, 3u}) {
      AttackBudget budget;
      budget.max_words_changed = d;
      for (const auto& ex : data) {
        const auto out = istp_word_attack(classify, ex.tokens, ex.label,
                                          table, budget, RngSeq(10));
        REQUIRE(out.perturbed.size() == ex.tokens.size());
        std::size_t changed = 0;
        for (std::size_t i = 0; i < ex.tokens.size(); ++i)
          if (out.perturbed[i] != ex.tokens[i]) ++changed;
        CHECK(changed <= d);
      }
    }
  }
}

TEST_CASE("istp_char_attack") {
  SUBCASE("zero budget leaves the input unchanged") {
    const auto classify = rule_fn("good", 1);
    AttackBudget budget;
    budget.max_words_changed = 0;
    const auto out =
        istp_char_attack(classify, {"good", "movie"}, 1, budget, RngSeq(1));
    CHECK(out.perturbed == TokenSeq{"good", "movie"});
    CHECK_FALSE(out.success);
  }

  SUBCASE("corrupting the key word flips the rule for any stream") {
    const auto classify = rule_fn("good", 1);
    AttackBudget budget;
    budget.max_words_changed = 1;
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
      const auto out = istp_char_attack(classify, {"good", "movie"}, 1,
                                        budget, RngSeq(seed));
      CHECK(out.success);
      REQUIRE(out.perturbed.size() == 2);
      CHECK(out.perturbed[0] != "good");  // most important word corrupted
    }
  }

  SUBCASE("a dropped single-character word disappears from the sequence") {
    const auto classify = rule_fn("q", 1);
    AttackBudget budget;
    budget.max_words_changed = 1;
    bool saw_removal = false;
    for (std::uint64_t seed = 0; seed < 32 && !saw_removal; ++seed) {
      const auto out =
          istp_char_attack(classify, {"q", "movie"}, 1, budget, RngSeq(seed));
      if (out.perturbed.size() == 1) {
        saw_removal = true;
        CHECK(out.perturbed == TokenSeq{"movie"});
        CHECK(out.success);
      }
    }
    CHECK(saw_removal);
  }

  SUBCASE("touches at most d words") {
    const auto weights = ts::planted_prompt_weights();
    const ToyBackend backend(weights);
    const auto classify = prompted_classifier(backend, {});
    const auto data = ts::planted_dataset(10, 21);
    AttackBudget budget;
    budget.max_words_changed = 2;
    for (const auto& ex : data) {
      const auto out =
          istp_char_attack(classify, ex.tokens, ex.label, budget, RngSeq(5));
      // Length may shrink via removals, never grow.
      CHECK(out.perturbed.size() <= ex.tokens.size());
      CHECK(out.perturbed.size() + budget.max_words_changed >=
            ex.tokens.size());
      if (out.perturbed.size() == ex.tokens.size()) {
        std::size_t differing = 0;
        for (std::size_t i = 0; i < ex.tokens.size(); ++i)
          if (out.perturbed[i] != ex.tokens[i]) ++differing;
        CHECK(differing <= budget.max_words_changed);
      }
    }
  }
}

TEST_CASE("evaluate_metrics") {
  SUBCASE("perfect classifier with a no-op attack") {
    const auto classify = rule_fn("good", 1);
    std::vector<EvalExample> data = {
        {"a", {"good", "film"}, 1},
        {"b", {"plot", "film"}, 0},
        {"c", {"good", "cast"}, 1},
    };
    const auto report = evaluate_metrics(
        classify, data, [](const TokenSeq& x, int) { return x; });
    CHECK(report.cacc == 100.0);
    CHECK(report.asr == 0.0);
    CHECK(report.pacc == 100.0);
  }

  SUBCASE("8 of 10 initially-correct flips give ASR 80, PACC 20") {
    const auto classify = rule_fn("good", 1);
    // The last token indexes the example so the attack can single out the
    // first eight.
    std::vector<EvalExample> data;
    for (int i = 0; i < 10; ++i)
      data.push_back({"id" + std::to_string(i),
                      {"good", "film", "m" + std::to_string(i)}, 1});
    const AttackFn flip_first8 = [](const TokenSeq& x, int) {
      const int idx = std::stoi(x.back().substr(1));
      if (idx < 8) {
        TokenSeq out = x;
        out[0] = "zzzz";
        return out;
      }
      return x;
    };
    const auto report = evaluate_metrics(classify, data, flip_first8);
    CHECK(report.cacc == 100.0);
    CHECK(report.asr == 80.0);
    CHECK(report.pacc == 20.0);
    CHECK(report.pacc == 100.0 - report.asr);
  }

  SUBCASE("targeted bookkeeping measures the non-target subset") {
    const auto classify = rule_fn("trig", 1);
    std::vector<EvalExample> data;
    for (int i = 0; i < 5; ++i)
      data.push_back({"n" + std::to_string(i),
                      {"plain", "text", "k" + std::to_string(i)}, 0});
    data.push_back({"t0", {"trig", "text", "k9"}, 1});  // gold == target
    const AttackFn plant = [](const TokenSeq& x, int) {
      const int idx = std::stoi(x.back().substr(1));
      if (idx < 3)
        return apply_trigger(x, {"trig"}, TriggerPosition::kPrepend);
      return x;
    };
    const auto report = evaluate_metrics(classify, data, plant, 1);
    CHECK(report.targeted);
    CHECK(report.cacc == 100.0);
    // Subset: the five gold-0 examples; three hit the target label.
    CHECK(report.asr == 60.0);
    CHECK(report.pacc == 40.0);
  }

  SUBCASE("report renders as an aligned table") {
    AttackReport report;
    report.cacc = 92.69;
    report.asr = 91.88;
    report.pacc = 53.76;
    const std::string table = attack_report_table(report, "trigger");
    CHECK(table.find("CACC") != std::string::npos);
    CHECK(table.find("92.69") != std::string::npos);
    CHECK(table.find("53.76") != std::string::npos);
  }

  SUBCASE("empty dataset is rejected") {
    const auto classify = rule_fn("x", 1);
    CHECK_THROWS_AS(evaluate_metrics(classify, {},
                                     [](const TokenSeq& x, int) { return x; }),
                    ParameterError);
  }
}

TEST_CASE("synonym tables load from JSON and reject self-maps") {
  ts::TempDir dir("syn");
  {
    std::ofstream out(dir.file("syn.json"));
    out << R"({"good": ["fine", "great"], "bad": ["poor"]})";
  }
  const auto table = load_synonyms(dir.file("syn.json"));
  REQUIRE(table.lookup("good") != nullptr);
  CHECK(table.lookup("good")->size() == 2);
  CHECK(table.lookup("missing") == nullptr);

  {
    std::ofstream out(dir.file("self.json"));
    out << R"({"good": ["good"]})";
  }
  CHECK_THROWS_AS(load_synonyms(dir.file("self.json")), IngestionError);
}

TEST_CASE("certified radius blocks in-budget word attacks (consistency)") {
  // The headline property: an exact-mode certificate of radius d means no
  // substitution attack of budget <= d can move the smoothed prediction.
  const auto weights = ts::planted_prompt_weights();
  const ToyBackend backend(weights);
  const double rho = 0.7;

  SynonymTable table;
  for (const auto& word : ts::planted_positive_words())
    table.substitutes[word] = {ts::planted_negative_words()[0],
                               ts::planted_negative_words()[1],
                               ts::planted_negative_words()[2]};
  for (const auto& word : ts::planted_negative_words())
    table.substitutes[word] = {ts::planted_positive_words()[0],
                               ts::planted_positive_words()[1],
                               ts::planted_positive_words()[2]};

  // Attack the exact smoothed classifier itself.
  const ClassifyFn smoothed_exact = [&](const TokenSeq& x) {
    return exact_smooth_distribution(backend, {}, x, rho);
  };

  const auto data = ts::planted_dataset(12, 31);
  std::size_t certified = 0;
  for (const auto& ex : data) {
    const auto cert = certify_input_exact(backend, {}, ex.tokens, rho);
    if (!cert.predicted || cert.radius == 0) continue;
    ++certified;
    AttackBudget budget;
    budget.max_words_changed = cert.radius;
    const auto out = istp_word_attack(smoothed_exact, ex.tokens,
                                      *cert.predicted, table, budget,
                                      RngSeq(7));
    const int post = argmax_label(smoothed_exact(out.perturbed));
    CHECK(post == *cert.predicted);
    CHECK_FALSE(out.success);
  }
  CHECK(certified > 0);
}
