#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "psat/metrics.hpp"
#include "psat/rng.hpp"

using namespace psat;

namespace {

// Trapezoidal ROC integral with tie grouping: the independent second
// formulation the Mann-Whitney implementation must agree with.
double auc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::map<double, std::pair<double, double>, std::greater<double>> groups;  // score -> (tp, fp)
    double n_pos = 0.0, n_neg = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        auto& g = groups[scores[i]];
        if (labels[i]) {
            g.first += 1.0;
            n_pos += 1.0;
        } else {
            g.second += 1.0;
            n_neg += 1.0;
        }
    }
    double auc = 0.0, tpr = 0.0, fpr = 0.0;
    for (const auto& [score, counts] : groups) {
        double next_tpr = tpr + counts.first / n_pos;
        double next_fpr = fpr + counts.second / n_neg;
        auc += (next_fpr - fpr) * (tpr + next_tpr) / 2.0;
        tpr = next_tpr;
        fpr = next_fpr;
    }
    return auc;
}

// Exact binomial tail with Pascal's-triangle coefficients (n small).
double binomial_oracle(std::int64_t k, std::int64_t n, double p) {
    std::vector<std::vector<double>> c(n + 1);
    for (std::int64_t i = 0; i <= n; ++i) {
        c[i].assign(i + 1, 1.0);
        for (std::int64_t j = 1; j < i; ++j) c[i][j] = c[i - 1][j - 1] + c[i - 1][j];
    }
    double sum = 0.0;
    for (std::int64_t i = k; i <= n; ++i) {
        sum += c[n][i] * std::pow(p, static_cast<double>(i)) *
               std::pow(1.0 - p, static_cast<double>(n - i));
    }
    return sum;
}

}  // namespace

TEST_CASE("macro precision/recall/F1 closed forms") {
    SUBCASE("perfect predictions") {
        std::vector<ConfusionCounts> counts{{10, 0, 5, 0}};
        MacroPrf r = precision_recall_f1_macro(counts);
        CHECK(r.precision == 1.0);
        CHECK(r.recall == 1.0);
        CHECK(r.f1 == 1.0);
    }
    SUBCASE("zero-denominator convention") {
        std::vector<ConfusionCounts> counts{{0, 0, 9, 3}};
        MacroPrf r = precision_recall_f1_macro(counts);
        CHECK(r.precision == 0.0);
        CHECK(r.f1 == 0.0);
    }
    SUBCASE("two-class hand arithmetic") {
        std::vector<ConfusionCounts> counts{{3, 1, 0, 2}, {5, 0, 0, 0}};
        MacroPrf r = precision_recall_f1_macro(counts);
        double f1_a = 2.0 * 0.75 * 0.6 / 1.35;
        CHECK(r.f1 == doctest::Approx((f1_a + 1.0) / 2.0));
        CHECK(r.f1 == doctest::Approx(0.8333).epsilon(1e-4));
    }
}

TEST_CASE("MCC closed forms") {
    CHECK(mcc({5, 0, 5, 0}) == doctest::Approx(1.0));
    CHECK(mcc({2, 2, 2, 2}) == doctest::Approx(0.0));
    CHECK(mcc({3, 2, 0, 0}) == 0.0);  // degenerate factor -> 0 by convention
}

TEST_CASE("AUC-ROC closed forms and errors") {
    std::vector<double> sep{0.9, 0.8, 0.2, 0.1};
    std::vector<int> lab{1, 1, 0, 0};
    CHECK(auc_roc(sep, lab) == doctest::Approx(1.0));

    std::vector<double> same{0.5, 0.5, 0.5, 0.5};
    CHECK(auc_roc(same, lab) == doctest::Approx(0.5));

    std::vector<double> spec_case{0.9, 0.4, 0.6, 0.1};
    std::vector<int> spec_lab{1, 0, 1, 0};
    CHECK(auc_roc(spec_case, spec_lab) == doctest::Approx(1.0));

    std::vector<int> single{1, 1, 1, 1};
    CHECK_THROWS_AS(auc_roc(sep, single), DataError);
}

TEST_CASE("AUC pair counting equals the trapezoidal integral on random cases") {
    Rng rng(101);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 5 + rng.below(30);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool pos = false, neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Quantized scores force ties regularly.
            scores[i] = std::floor(rng.uniform() * 8.0) / 8.0;
            labels[i] = rng.uniform() < 0.5 ? 0 : 1;
            (labels[i] ? pos : neg) = true;
        }
        if (!pos) labels[0] = 1;
        if (!neg) labels[n - 1] = 0;
        double a = auc_roc(scores, labels);
        double b = auc_trapezoid(scores, labels);
        CHECK(std::abs(a - b) < 1e-9);
    }
}

TEST_CASE("MCC and macro-F1 match brute-force recomputation from raw lists") {
    Rng rng(202);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 3 + rng.below(48);
        std::vector<std::vector<int>> labels(n), decisions(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = {rng.uniform() < 0.5 ? 0 : 1};
            decisions[i] = {rng.uniform() < 0.5 ? 0 : 1};
        }
        // Brute-force counts straight off the lists.
        std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i][0] == 1 && decisions[i][0] == 1) ++tp;
            if (labels[i][0] == 0 && decisions[i][0] == 1) ++fp;
            if (labels[i][0] == 0 && decisions[i][0] == 0) ++tn;
            if (labels[i][0] == 1 && decisions[i][0] == 0) ++fn;
        }
        ConfusionCounts pooled = pooled_confusion(labels, decisions, TaskKind::binary, 2);
        CHECK(pooled.tp == tp);
        CHECK(pooled.fp == fp);
        CHECK(pooled.tn == tn);
        CHECK(pooled.fn == fn);

        double expected_mcc = 0.0;
        double f1v = static_cast<double>(tp + fp), f2v = static_cast<double>(tp + fn);
        double f3v = static_cast<double>(tn + fp), f4v = static_cast<double>(tn + fn);
        if (f1v != 0 && f2v != 0 && f3v != 0 && f4v != 0) {
            expected_mcc = (static_cast<double>(tp) * static_cast<double>(tn) -
                            static_cast<double>(fp) * static_cast<double>(fn)) /
                           std::sqrt(f1v * f2v * f3v * f4v);
        }
        CHECK(mcc(pooled) == expected_mcc);

        auto per_class = confusion_counts(labels, decisions, TaskKind::binary, 2);
        double p_pos = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        double r_pos = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        double f1_pos = (p_pos + r_pos) > 0 ? 2 * p_pos * r_pos / (p_pos + r_pos) : 0.0;
        double p_neg = (tn + fn) ? static_cast<double>(tn) / static_cast<double>(tn + fn) : 0.0;
        double r_neg = (tn + fp) ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
        double f1_neg = (p_neg + r_neg) > 0 ? 2 * p_neg * r_neg / (p_neg + r_neg) : 0.0;
        CHECK(precision_recall_f1_macro(per_class).f1 == (f1_pos + f1_neg) / 2.0);
    }
}

TEST_CASE("binomial test closed forms") {
    CHECK(binomial_test(10, 10, 0.5) == doctest::Approx(std::pow(2.0, -10.0)).epsilon(1e-6));
    CHECK(binomial_test(5, 10, 0.5) == doctest::Approx(638.0 / 1024.0).epsilon(1e-6));
    CHECK(binomial_test(0, 10, 0.5) == 1.0);
    CHECK_THROWS_AS(binomial_test(11, 10, 0.5), DataError);
    CHECK_THROWS_AS(binomial_test(1, 0, 0.5), DataError);
    CHECK_THROWS_AS(binomial_test(1, 10, 0.0), DataError);
    CHECK_THROWS_AS(binomial_test(1, 10, 1.0), DataError);
}

TEST_CASE("binomial test matches the exact-coefficient oracle and is monotone") {
    Rng rng(303);
    for (int trial = 0; trial < 100; ++trial) {
        std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(35));
        std::int64_t k = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n) + 1));
        double p = 0.05 + 0.9 * rng.uniform();
        CHECK(std::abs(binomial_test(k, n, p) - binomial_oracle(k, n, p)) < 1e-9);
    }
    for (std::int64_t k = 0; k < 20; ++k) {
        CHECK(binomial_test(k + 1, 20, 0.3) <= binomial_test(k, 20, 0.3));
    }
}

TEST_CASE("AKC worked examples") {
    SUBCASE("cosine one contributes zero") {
        AkcInput in;
        in.highlighted = {{{1.0, 0.0}}};
        in.concepts = {{2.0, 0.0}};
        CHECK(akc(in).raw == doctest::Approx(0.0));
    }
    SUBCASE("cosine 1/e gives raw -1/e") {
        double c = std::exp(-1.0);
        double s = std::sqrt(1.0 - c * c);
        AkcInput in;
        in.highlighted = {{{1.0, 0.0}}};
        in.concepts = {{c, s}};
        CHECK(akc(in).raw == doctest::Approx(-std::exp(-1.0)).epsilon(1e-6));
        // Rescaled display variant maps -1/e to 0.
        CHECK(akc(in).rescaled == doctest::Approx(0.0).epsilon(1e-6));
    }
    SUBCASE("non-positive cosine clamps to epsilon") {
        AkcInput in;
        in.highlighted = {{{1.0, 0.0}}};
        in.concepts = {{0.0, 1.0}};  // orthogonal
        double eps = 1e-6;
        CHECK(akc(in).raw == doctest::Approx(eps * std::log(eps)));
    }
    SUBCASE("empty highlighted set for all documents errors") {
        AkcInput in;
        in.highlighted = {{}, {}};
        in.concepts = {{1.0, 0.0}};
        CHECK_THROWS_AS(akc(in), DataError);
    }
    SUBCASE("permutation invariance over documents and concepts") {
        AkcInput in;
        in.highlighted = {{{1.0, 0.2}}, {{0.4, 1.0}}, {}};
        in.concepts = {{1.0, 0.0}, {0.5, 0.5}, {0.1, 0.9}};
        double base = akc(in).raw;
        std::swap(in.highlighted[0], in.highlighted[1]);
        std::swap(in.concepts[0], in.concepts[2]);
        CHECK(akc(in).raw == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("cumulative attention") {
    Ontology onto;
    onto.name = "cum";
    for (int c = 0; c < 3; ++c) {
        OntologyClass cls;
        cls.id = "C" + std::to_string(c);
        cls.question_text = "q";
        cls.concepts.push_back({"con" + std::to_string(c), std::nullopt});
        onto.classes.push_back(std::move(cls));
    }
    // Embeddings: each concept on its own axis; phrase "p_k" equals
    // concept k; "neutral" is equidistant from every concept.
    std::vector<std::string> phrases = {"con0", "con1", "con2", "p0", "p1", "p2", "neutral"};
    Tensor2 vecs = Tensor2::from_rows({{1, 0, 0},
                                       {0, 1, 0},
                                       {0, 0, 1},
                                       {1, 0, 0},
                                       {0, 1, 0},
                                       {0, 0, 1},
                                       {1, 1, 1}});
    EmbeddingMatrix emb(phrases, vecs);

    SUBCASE("equidistant phrases with uniform attention spread CSA equally") {
        DocAttention doc;
        doc.phrases = {"neutral", "neutral"};
        doc.rows = {{0.5, 0.5}};
        std::vector<DocAttention> docs{doc};
        CumulativeResult r = cumulative_attention(docs, onto, emb, CumulativeMode::csa);
        REQUIRE(r.per_class.size() == 3);
        CHECK(r.per_class[0] == doctest::Approx(r.per_class[1]));
        CHECK(r.per_class[1] == doctest::Approx(r.per_class[2]));
        CHECK(r.normalized_entropy == doctest::Approx(1.0));
    }
    SUBCASE("attention planted on class-k phrases puts the CCA argmax at k") {
        DocAttention doc;
        doc.phrases = {"p1", "neutral", "p2"};
        // Block rows: block 1 concentrates on its phrase.
        doc.rows = {{0.2, 0.6, 0.2}, {0.9, 0.05, 0.05}, {0.1, 0.8, 0.1}};
        std::vector<DocAttention> docs{doc};
        CumulativeResult r = cumulative_attention(docs, onto, emb, CumulativeMode::cca);
        auto argmax = std::max_element(r.per_class.begin(), r.per_class.end());
        CHECK(argmax - r.per_class.begin() == 1);
    }
    SUBCASE("empty phrase streams are skipped and counted") {
        DocAttention empty;
        std::vector<DocAttention> docs{empty};
        CumulativeResult r = cumulative_attention(docs, onto, emb, CumulativeMode::csa);
        CHECK(r.skipped_empty == 1);
    }
    SUBCASE("spiked mass has lower normalized entropy than flat mass") {
        std::vector<double> flat{1.0, 1.0, 1.0};
        std::vector<double> spiked{2.8, 0.1, 0.1};
        CHECK(normalized_entropy(spiked) < normalized_entropy(flat) - 0.1);
    }
}

TEST_CASE("decide and confusion plumbing") {
    CHECK(decide({0.7}, TaskKind::binary) == std::vector<int>{1});
    CHECK(decide({0.2}, TaskKind::binary) == std::vector<int>{0});
    CHECK(decide({0.1, 0.9, 0.6}, TaskKind::multi_label) == std::vector<int>{0, 1, 1});
    CHECK(decide({0.2, 0.5, 0.3}, TaskKind::multi_class) == std::vector<int>{1});

    std::vector<std::vector<int>> labels{{2}, {0}, {1}};
    std::vector<std::vector<int>> preds{{2}, {1}, {1}};
    auto counts = confusion_counts(labels, preds, TaskKind::multi_class, 3);
    REQUIRE(counts.size() == 3);
    CHECK(counts[2].tp == 1);
    CHECK(counts[0].fn == 1);
    CHECK(counts[1].tp == 1);
    CHECK(counts[1].fp == 1);
}
