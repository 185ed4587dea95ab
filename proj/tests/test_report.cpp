#include <algorithm>

#include "doctest.h"
#include "dseg/errors.hpp"
#include "dseg/ingest.hpp"
#include "dseg/report.hpp"
#include "helpers.hpp"

using namespace dseg;

namespace {

Corpus two_session_corpus() {
  Corpus c;
  c.codebook = testing::make_codebook({"A", "B"});
  for (const char* sid : {"s1", "s2"}) {
    c.sessions.push_back({testing::make_dialogue(6, sid), std::nullopt});
    c.labels["human"][sid] = testing::make_labels("AAABBB");
    c.labels["ai"][sid] = testing::make_labels("AAABBB", "ai");
  }
  return c;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("rounding follows the table convention") {
    CHECK(format_mean(0.4474) == "0.447");
    CHECK(format_ci_bound(0.3062) == "0.31");
    CHECK(format_mean(std::nullopt) == "n/a");
    Aggregate a{0.4474, ConfidenceInterval{0.3062, 0.5891}, 30};
    CHECK(format_aggregate(a) == "0.447 [0.31, 0.59]");
    CHECK(format_granularity({4.9, 1.712}) == "4.90 (1.71)");
    CHECK(format_granularity({7.0, std::nullopt}) == "7.00 (n/a)");
  }

  TEST_CASE("evaluate_corpus on a perfect segmentation") {
    auto corpus = two_session_corpus();
    std::vector<Segmentation> segs{{"s1", testing::cuts({2}, 6), "truth", ""},
                                   {"s2", testing::cuts({2}, 6), "truth", ""}};
    EvaluationConfig cfg;
    cfg.bootstrap_iterations = 1000;
    auto r = evaluate_corpus(corpus, segs, cfg);
    CHECK(r.method == "truth");
    CHECK(*r.aggregate("entropy_human").mean == 0.0);
    CHECK(*r.aggregate("purity_human").mean == 1.0);
    CHECK(*r.aggregate("ha_js").mean == 0.0);
    CHECK(*r.aggregate("bcr_ai").mean == 1.0);
    CHECK(r.granularity.mean == 2.0);

    std::vector<MetricsReport> reports{r, r};
    reports[1].method = "other";
    auto md = render_markdown(reports);
    CHECK(md.find("| truth | 2.00 (0.00) | 0.000 [0.00, 0.00] | 1.000 [1.00, 1.00] |") != std::string::npos);
    CHECK(md.find("| other |") != std::string::npos);
    CHECK(md.find("Rater Agreement: Human-AI JS") != std::string::npos);
    std::size_t rows = 0;
    for (char ch : md) rows += ch == '\n';
    CHECK(rows == 4);
    // Seven columns: method plus the six metric columns.
    auto header = md.substr(0, md.find('\n'));
    CHECK(std::count(header.begin(), header.end(), '|') == 8);

    auto j = report_to_json(r);
    CHECK(j["sessions"].size() == 2);
    CHECK(j["config"]["unlabeled_mode"] == "none-category");
    auto csv = render_summary_csv(reports);
    CHECK(csv.find("entropy_human_mean") != std::string::npos);
    CHECK(render_sessions_csv(reports).find("s2") != std::string::npos);
  }

  TEST_CASE("evaluate_corpus rejects inconsistent inputs before computing") {
    auto corpus = two_session_corpus();
    EvaluationConfig cfg;
    std::vector<Segmentation> none;
    CHECK_THROWS_AS(evaluate_corpus(corpus, none, cfg), ValidationError);
    std::vector<Segmentation> unknown{{"zz", testing::cuts({}, 6), "m", ""}};
    CHECK_THROWS_AS(evaluate_corpus(corpus, unknown, cfg), ValidationError);
    std::vector<Segmentation> wrong_len{{"s1", testing::cuts({}, 5), "m", ""}};
    CHECK_THROWS_AS(evaluate_corpus(corpus, wrong_len, cfg), ValidationError);
    std::vector<Segmentation> twice{{"s1", testing::cuts({}, 6), "m", ""}, {"s1", testing::cuts({}, 6), "m", ""}};
    CHECK_THROWS_AS(evaluate_corpus(corpus, twice, cfg), ValidationError);
    cfg.ai_rater = "gpt";
    std::vector<Segmentation> ok{{"s1", testing::cuts({}, 6), "m", ""}};
    CHECK_THROWS_AS(evaluate_corpus(corpus, ok, cfg), ConfigError);
  }

  TEST_CASE("exclude mode drops unlabeled segments and records it") {
    auto corpus = two_session_corpus();
    corpus.labels["human"]["s1"] = testing::make_labels("---BBB");
    std::vector<Segmentation> segs{{"s1", testing::cuts({2}, 6), "m", ""}};
    EvaluationConfig cfg;
    cfg.unlabeled = UnlabeledMode::kExclude;
    cfg.bootstrap_iterations = 1000;
    auto r = evaluate_corpus(corpus, segs, cfg);
    CHECK(r.sessions[0].human.entropy.dropped_segments == 1);
    CHECK(*r.sessions[0].human.purity.value == 1.0);
    CHECK_FALSE(r.sessions[0].human.bcr.defined());
    CHECK(report_to_json(r)["config"]["unlabeled_mode"] == "exclude-unlabeled");
  }
}
