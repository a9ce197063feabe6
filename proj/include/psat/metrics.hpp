#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psat/corpus.hpp"
#include "psat/embedding.hpp"
#include "psat/ontology.hpp"

namespace psat {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;
};

struct MacroPrf {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::vector<double> per_class_f1;
};

// Per-class P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R), each 0 when
// its denominator is 0; macro = unweighted mean over classes.
MacroPrf precision_recall_f1_macro(std::span<const ConfusionCounts> per_class);

// (tp*tn - fp*fn) / sqrt((tp+fp)(tp+fn)(tn+fp)(tn+fn)), 0 when any
// factor of the denominator is 0.
double mcc(const ConfusionCounts& c);

// Mann-Whitney formulation: P(score+ > score-) + 0.5 P(tie), exact pair
// counting. Throws DataError unless both classes are present.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

struct AkcInput {
    // Per document: the top-m attention ("highlighted") phrase vectors.
    std::vector<std::vector<std::vector<double>>> highlighted;
    // Ontology concept vectors (all classes pooled), each nonzero.
    std::vector<std::vector<double>> concepts;
};

struct AkcResult {
    double raw = 0.0;        // (1/(|U|*|Onto|)) sum cos*ln(cos), <= 0
    double rescaled = 0.0;   // 100 * (1 + raw * e), display variant
};

// Cosines are clamped to [1e-6, 1] before the logarithm. Throws DataError
// when every document's highlighted set is empty or concepts are missing.
AkcResult akc(const AkcInput& input);

// Exact one-sided upper tail P(X >= n_correct | n_total, p0), summed with
// log-binomial coefficients.
double binomial_test(std::int64_t n_correct, std::int64_t n_total, double p0);

enum class CumulativeMode { csa, cca };

// Attention over one document's phrase stream: a single flat row for the
// self-attention baseline (CSA), one row per ontology class for PSAT (CCA).
struct DocAttention {
    std::vector<std::string> phrases;
    std::vector<std::vector<double>> rows;
};

struct CumulativeResult {
    std::vector<double> per_class;      // summed over documents, ontology order
    double normalized_entropy = 0.0;    // H(per_class / sum) / ln(K), mean-free aggregate
    std::size_t skipped_empty = 0;      // documents with no phrases
};

// Per class c: sum over phrases of attention * max-cosine(phrase, concepts
// of c), cosines clamped to [0, 1]. CSA weighs every class with the one
// flat row; CCA weighs class k with row k.
CumulativeResult cumulative_attention(std::span<const DocAttention> docs, const Ontology& ontology,
                                      const EmbeddingMatrix& embeddings, CumulativeMode mode);

double normalized_entropy(std::span<const double> masses);

// ---- decision plumbing shared by training validation and `eval` ----

// Scores -> decisions with the labels' shape: thresholded at 0.5 for
// binary / multi_label, argmax index for multi_class.
std::vector<int> decide(const std::vector<double>& scores, TaskKind kind);

// One-vs-rest counts per class. Binary yields {positive, negative} so the
// macro average covers both classes.
std::vector<ConfusionCounts> confusion_counts(const std::vector<std::vector<int>>& labels,
                                              const std::vector<std::vector<int>>& decisions,
                                              TaskKind kind, std::size_t num_classes);

// Single binary table for MCC: the positive class for binary tasks,
// pooled (document, class) indicator decisions otherwise.
ConfusionCounts pooled_confusion(const std::vector<std::vector<int>>& labels,
                                 const std::vector<std::vector<int>>& decisions, TaskKind kind,
                                 std::size_t num_classes);

// Macro-averaged AUC over labels/classes with both outcomes present.
// Throws DataError when no class qualifies.
double auc_roc_macro(const std::vector<std::vector<double>>& scores,
                     const std::vector<std::vector<int>>& labels, TaskKind kind,
                     std::size_t num_classes);

}  // namespace psat
