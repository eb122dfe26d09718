#include <doctest.h>

#include <cmath>
#include <random>
#include <regex>

#include "emobi/eval.hpp"
#include "support/fixture.hpp"

using namespace emobi;

namespace {

// Independent per-item counting oracle, kept free of the library's types.
struct Oracle {
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    double p = 0, r = 0, f1 = 0;
};

Oracle oracle_score(const std::vector<int>& pred, const std::vector<int>& gold) {
    Oracle o;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] == 1 && gold[i] == 1) ++o.tp;
        else if (pred[i] == 1 && gold[i] == 0) ++o.fp;
        else if (pred[i] == 0 && gold[i] == 1) ++o.fn;
        else ++o.tn;
    }
    if (o.tp + o.fp > 0) o.p = static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fp);
    if (o.tp + o.fn > 0) o.r = static_cast<double>(o.tp) / static_cast<double>(o.tp + o.fn);
    if (o.p + o.r > 0) o.f1 = 2.0 * o.p * o.r / (o.p + o.r);
    return o;
}

TaskMetrics metrics_from_percent(double p, double r, double f1) {
    TaskMetrics m;
    m.precision = p / 100.0;
    m.recall = r / 100.0;
    m.f1 = f1 / 100.0;
    return m;
}

RunResult single_dataset_result(const std::string& run_id, const std::string& dataset,
                                double hyp_f1_percent, double met_f1_percent) {
    RunResult result;
    result.run_id = run_id;
    result.config_fingerprint = "test";
    TaskPair pair;
    pair.hyperbole = metrics_from_percent(hyp_f1_percent, hyp_f1_percent, hyp_f1_percent);
    pair.metaphor = metrics_from_percent(met_f1_percent, met_f1_percent, met_f1_percent);
    result.per_dataset.emplace_back(dataset, pair);
    return result;
}

}  // namespace

TEST_CASE("score counts agreement by definition") {
    SUBCASE("perfect agreement") {
        const std::vector<int> v{1, 1, 0, 0};
        const auto cm = score(v, v);
        CHECK(cm.tp == 2);
        CHECK(cm.tn == 2);
        CHECK(cm.fp == 0);
        CHECK(cm.fn == 0);
    }
    SUBCASE("hand-enumerated mixed case") {
        const std::vector<int> pred{1, 1, 1, 0};
        const std::vector<int> gold{1, 0, 1, 1};
        const auto cm = score(pred, gold);
        const auto o = oracle_score(pred, gold);
        CHECK(cm.tp == o.tp);
        CHECK(cm.fp == o.fp);
        CHECK(cm.fn == o.fn);
        CHECK(cm.tn == o.tn);
        CHECK(cm.tp == 2);
        CHECK(cm.fp == 1);
        CHECK(cm.fn == 1);
        CHECK(cm.tn == 0);
    }
    SUBCASE("empty lists give the zero matrix") {
        const std::vector<int> none;
        const auto cm = score(none, none);
        CHECK(cm.total() == 0);
    }
    SUBCASE("errors") {
        const std::vector<int> a{1, 0};
        const std::vector<int> b{1};
        CHECK_THROWS_AS(score(a, b), std::invalid_argument);
        const std::vector<int> bad{1, 2};
        CHECK_THROWS_AS(score(bad, a), std::invalid_argument);
    }
}

TEST_CASE("metrics derive precision, recall and F1 with the zero rule") {
    SUBCASE("tp=2 fp=1 fn=1") {
        const auto m = metrics({2, 1, 1, 0});
        CHECK(m.precision == doctest::Approx(2.0 / 3.0));
        CHECK(m.recall == doctest::Approx(2.0 / 3.0));
        CHECK(m.f1 == doctest::Approx(2.0 / 3.0));
        CHECK(m.support == 3);
        CHECK(!m.degenerate);
    }
    SUBCASE("all-zero matrix is degenerate") {
        const auto m = metrics({0, 0, 0, 0});
        CHECK(m.precision == 0.0);
        CHECK(m.recall == 0.0);
        CHECK(m.f1 == 0.0);
        CHECK(m.degenerate);
    }
    SUBCASE("perfect matrix") {
        const auto m = metrics({5, 0, 0, 3});
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
        CHECK(!m.degenerate);
    }
}

TEST_CASE("property: F1 identity holds over random matrices") {
    std::mt19937_64 gen(99);
    for (int i = 0; i < 500; ++i) {
        ConfusionMatrix cm{static_cast<long long>(gen() % 50),
                           static_cast<long long>(gen() % 50),
                           static_cast<long long>(gen() % 50),
                           static_cast<long long>(gen() % 50)};
        const auto m = metrics(cm);
        if (m.precision + m.recall > 0) {
            CHECK(m.f1 == doctest::Approx(2.0 * m.precision * m.recall /
                                          (m.precision + m.recall))
                              .epsilon(1e-12));
        } else {
            CHECK(m.f1 == 0.0);
        }
        CHECK(m.precision >= 0.0);
        CHECK(m.precision <= 1.0);
        CHECK(m.recall >= 0.0);
        CHECK(m.recall <= 1.0);
        CHECK(m.f1 >= 0.0);
        CHECK(m.f1 <= 1.0);
    }
}

TEST_CASE("property: swapping predictions and golds swaps precision and recall") {
    std::mt19937_64 gen(1234);
    for (int iter = 0; iter < 100; ++iter) {
        const std::size_t n = 1 + gen() % 100;
        std::vector<int> a(n);
        std::vector<int> b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<int>(gen() % 2);
            b[i] = static_cast<int>(gen() % 2);
        }
        const auto forward = metrics(score(a, b));
        const auto backward = metrics(score(b, a));
        CHECK(forward.precision == doctest::Approx(backward.recall).epsilon(1e-12));
        CHECK(forward.recall == doctest::Approx(backward.precision).epsilon(1e-12));
    }
}

TEST_CASE("score and metrics agree with the counting oracle on random vectors") {
    std::mt19937_64 gen(321);
    for (int iter = 0; iter < 200; ++iter) {
        const std::size_t n = 1 + gen() % 200;
        std::vector<int> pred(n);
        std::vector<int> gold(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = static_cast<int>(gen() % 2);
            gold[i] = static_cast<int>(gen() % 2);
        }
        const auto cm = score(pred, gold);
        const auto m = metrics(cm);
        const auto o = oracle_score(pred, gold);
        CHECK(cm.tp == o.tp);
        CHECK(cm.fp == o.fp);
        CHECK(cm.fn == o.fn);
        CHECK(cm.tn == o.tn);
        CHECK(std::abs(m.precision - o.p) <= 1e-12);
        CHECK(std::abs(m.recall - o.r) <= 1e-12);
        CHECK(std::abs(m.f1 - o.f1) <= 1e-12);
    }
}

TEST_CASE("macro metrics average the positive and negative class") {
    // preds [1,0,0,0], golds [1,1,0,0]: pos P=1, R=.5 ; neg P=2/3, R=1
    const auto cm = score(std::vector<int>{1, 0, 0, 0}, std::vector<int>{1, 1, 0, 0});
    const auto m = macro_metrics(cm);
    CHECK(m.precision == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    CHECK(m.recall == doctest::Approx((0.5 + 1.0) / 2.0));
}

TEST_CASE("formatters render one-decimal percentages and signed deltas") {
    CHECK(format_percent(90.8) == "90.8");
    CHECK(format_percent(100.0) == "100.0");
    CHECK(format_percent(7.25) == "7.3");
    CHECK(format_compare_delta(2.7) == "(+2.7%)");
    CHECK(format_compare_delta(-0.2) == "(-0.2%)");
    CHECK(format_compare_delta(0.0) == "(+0.0%)");
    CHECK(format_ablation_delta(-4.6) == "(-4.6)");
    CHECK(format_ablation_delta(0.0) == "(-0.0)");
    CHECK(format_ablation_delta(1.2) == "(+1.2)");
}

TEST_CASE("compare_report renders stored-baseline deltas like the published table") {
    const auto reference =
        ReferenceTable::load(testsupport::repo_dir() / "data" / "reference_tables.json");
    const auto ours = reference.to_run_result("Ours");
    const auto report = compare_report({ours}, reference, ReportFormat::text);

    CHECK(report.find("90.8 (+2.7%)") != std::string::npos);  // HYPO hyperbole F1
    CHECK(report.find("87.7 (-0.2%)") != std::string::npos);  // HYPO hyperbole P
    CHECK(report.find("91.3 (+7.7%)") != std::string::npos);  // LCC metaphor F1
    CHECK(report.find("MTL-F-RoBERTa") != std::string::npos);
    CHECK(report.find("=== HYPO ===") != std::string::npos);
    CHECK(report.find("=== TroFi ===") != std::string::npos);
}

TEST_CASE("compare_report without a reference renders a plain table") {
    const auto result = single_dataset_result("solo", "HYPO", 80.0, 70.0);
    const auto report = compare_report({result}, std::nullopt, ReportFormat::text);
    CHECK(report.find("80.0") != std::string::npos);
    CHECK(report.find("%)") == std::string::npos);  // no delta column
}

TEST_CASE("compare_report renders (+0.0%) when the result ties the best baseline") {
    ReferenceTable reference;
    ReferenceMethod baseline;
    baseline.name = "only-baseline";
    baseline.hyperbole = {80.0, 80.0, 80.0};
    baseline.metaphor = {70.0, 70.0, 70.0};
    reference.per_dataset.emplace_back("HYPO", std::vector<ReferenceMethod>{baseline});

    const auto result = single_dataset_result("tied", "HYPO", 80.0, 70.0);
    const auto report = compare_report({result}, reference, ReportFormat::text);
    CHECK(report.find("80.0 (+0.0%)") != std::string::npos);
}

TEST_CASE("compare_report rejects a reference that lacks a result dataset") {
    ReferenceTable reference;
    reference.per_dataset.emplace_back("LCC", std::vector<ReferenceMethod>{});
    const auto result = single_dataset_result("r", "HYPO", 50.0, 50.0);
    CHECK_THROWS_AS(compare_report({result}, reference, ReportFormat::text), ConfigError);
}

TEST_CASE("markdown and csv formats carry the same numbers") {
    const auto result = single_dataset_result("fmt", "HYPO", 81.5, 64.2);
    const auto md = compare_report({result}, std::nullopt, ReportFormat::markdown);
    const auto csv = compare_report({result}, std::nullopt, ReportFormat::csv);
    CHECK(md.find("81.5") != std::string::npos);
    CHECK(csv.find("81.5") != std::string::npos);
    CHECK(csv.find("dataset,method,task,precision,recall,f1") == 0);
    CHECK(md.find("| method |") != std::string::npos);
}

TEST_CASE("ablation_report matches the published bracket style") {
    const auto full = single_dataset_result("full", "HYPO", 90.8, 84.5);
    const auto wo_emotion = single_dataset_result("w/o emotion", "HYPO", 86.2, 79.4);
    const auto report =
        ablation_report(full, {{"w/o emotion", wo_emotion}}, ReportFormat::text);
    CHECK(report.find("86.2 (-4.6)") != std::string::npos);
    CHECK(report.find("79.4 (-5.1)") != std::string::npos);
    // the full row carries no bracket
    std::regex full_row("full\\s+\\| 90\\.8\\s+\\| 84\\.5");
    CHECK(std::regex_search(report, full_row));
}

TEST_CASE("ablation_report renders (-0.0) when a variant ties the full run") {
    const auto full = single_dataset_result("full", "HYPO", 75.0, 75.0);
    const auto same = single_dataset_result("w/o x", "HYPO", 75.0, 75.0);
    const auto report = ablation_report(full, {{"w/o x", same}}, ReportFormat::text);
    CHECK(report.find("75.0 (-0.0)") != std::string::npos);
}

TEST_CASE("ablation_report rejects mismatched dataset sets") {
    const auto full = single_dataset_result("full", "HYPO", 75.0, 75.0);
    const auto other = single_dataset_result("w/o x", "LCC", 75.0, 75.0);
    CHECK_THROWS_AS(ablation_report(full, {{"w/o x", other}}, ReportFormat::text),
                    std::invalid_argument);
}

TEST_CASE("property: every bracketed ablation delta recomputes from the rounded cells") {
    std::mt19937_64 gen(777);
    for (int iter = 0; iter < 100; ++iter) {
        const double full_h = static_cast<double>(gen() % 1001) / 10.0;
        const double full_m = static_cast<double>(gen() % 1001) / 10.0;
        const double abl_h = static_cast<double>(gen() % 1001) / 10.0;
        const double abl_m = static_cast<double>(gen() % 1001) / 10.0;

        const auto full = single_dataset_result("full", "HYPO", full_h, full_m);
        const auto ablation = single_dataset_result("w/o x", "HYPO", abl_h, abl_m);
        const auto report = ablation_report(full, {{"w/o x", ablation}}, ReportFormat::text);

        const auto expect = [&](double abl, double fullv) {
            return format_percent(abl) + " " + format_ablation_delta(abl - fullv);
        };
        CHECK(report.find(expect(abl_h, full_h)) != std::string::npos);
        CHECK(report.find(expect(abl_m, full_m)) != std::string::npos);
    }
}

TEST_CASE("report round-trip: rendered numbers re-parse to the stored metrics") {
    TaskPair pair;
    pair.hyperbole = metrics(score(std::vector<int>{1, 1, 1, 0}, std::vector<int>{1, 0, 1, 1}));
    pair.metaphor = metrics(score(std::vector<int>{1, 0, 0, 0}, std::vector<int>{1, 1, 0, 0}));
    RunResult result;
    result.run_id = "roundtrip";
    result.config_fingerprint = "x";
    result.per_dataset.emplace_back("HYPO", pair);

    const auto csv = compare_report({result}, std::nullopt, ReportFormat::csv);
    // csv rows: dataset,method,task,precision,recall,f1
    std::regex row_re(R"(HYPO,roundtrip,(\w+),([\d.]+),([\d.]+),([\d.]+))");
    auto begin = std::sregex_iterator(csv.begin(), csv.end(), row_re);
    auto end = std::sregex_iterator();
    int rows = 0;
    for (auto it = begin; it != end; ++it) {
        ++rows;
        const auto& m = (*it)[1].str() == "hyperbole" ? pair.hyperbole : pair.metaphor;
        CHECK((*it)[2].str() == format_percent(m.precision * 100.0));
        CHECK((*it)[3].str() == format_percent(m.recall * 100.0));
        CHECK((*it)[4].str() == format_percent(m.f1 * 100.0));
    }
    CHECK(rows == 2);
}

TEST_CASE("RunResult serializes and reloads losslessly") {
    TaskPair pair;
    pair.hyperbole = metrics({3, 1, 2, 4});
    pair.metaphor = metrics({2, 2, 2, 2});
    RunResult result;
    result.run_id = "serialize";
    result.config_fingerprint = "abcd";
    result.per_dataset.emplace_back("HYPO", pair);
    result.per_dataset.emplace_back("LCC", pair);

    const auto j = run_result_to_json(result);
    CHECK(run_result_from_json(j) == result);
}

TEST_CASE("score_traces groups by source dataset in first-seen order") {
    auto records = testsupport::fixture_records();
    records[1].source_dataset = Dataset::LCC;

    std::vector<PipelineTrace> traces;
    for (const auto& r : {records[0], records[1], records[2]}) {
        PipelineTrace t;
        t.record = r;
        t.hyperbole = LabelDecision{Device::hyperbole, r.hyperbole_gold, "", 0, false};
        t.metaphor = LabelDecision{Device::metaphor, r.metaphor_gold, "", 0, false};
        traces.push_back(std::move(t));
    }
    const auto result = score_traces(traces, "grouped", "fp");
    REQUIRE(result.per_dataset.size() == 2);
    CHECK(result.per_dataset[0].first == "HYPO");
    CHECK(result.per_dataset[1].first == "LCC");
    // gold == pred everywhere, so either perfect or degenerate-zero support
    for (const auto& [name, pair] : result.per_dataset) {
        if (pair.hyperbole.support > 0) CHECK(pair.hyperbole.f1 == 1.0);
        if (pair.metaphor.support > 0) CHECK(pair.metaphor.f1 == 1.0);
    }
}

TEST_CASE("reference table loads ablation rows") {
    const auto reference =
        ReferenceTable::load(testsupport::repo_dir() / "data" / "reference_tables.json");
    REQUIRE(reference.ablations.size() == 4);
    CHECK(reference.ablations[0].first == "HYPO");
    REQUIRE(reference.ablations[0].second.size() == 5);
    CHECK(reference.ablations[0].second[1].label == "w/o emotion");
    CHECK(reference.ablations[0].second[1].hyperbole_f1 == doctest::Approx(86.2));
    CHECK_THROWS_AS(reference.to_run_result("Nonexistent"), ConfigError);
}
