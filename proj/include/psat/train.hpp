#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psat/corpus.hpp"
#include "psat/embedding.hpp"
#include "psat/model.hpp"
#include "psat/tagger.hpp"

namespace psat {

// Raised when training or inference produces a non-finite value.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    TaskKind task_kind = TaskKind::multi_label;
    std::size_t epochs = 50;
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 1;
    std::size_t early_stop_patience = 10;
    double validation_fraction = 0.2;
    // Inverse-class-frequency example weighting; applied to binary tasks
    // only (multi-label/multi-class corpora here are synthetic-balanced).
    bool class_weights = true;
    int threads = 1;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_f1;
    std::size_t best_epoch = 0;  // index into the vectors

    // CSV: "epoch,train_loss,val_loss,val_f1" with a header row.
    void save_csv(const std::string& path) const;
};

struct LabeledTagged {
    TaggedDocument doc;
    std::vector<int> labels;
};

// Joins a labeled corpus with its tagged phrase streams by doc_id; errors
// on documents missing from either side.
std::vector<LabeledTagged> join_corpus(const std::vector<LabeledDocument>& corpus,
                                       const std::vector<TaggedDocument>& tagged);

// Mean binary cross-entropy over outputs (binary / multi_label) or
// cross-entropy (multi_class), value level.
double loss_value(const Tensor2& logits, const std::vector<int>& labels, TaskKind kind);

// Epoch shuffling is a pure function of (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

// Mini-batch training with early stopping on validation loss; the model is
// left at the best-validation checkpoint. Deterministic given seed and
// thread count (per-batch gradients reduce in fixed thread order).
// max_seq_len is computed from the longest phrase stream if unset.
// Throws NumericalError (with epoch/batch/parameter-norm context) when the
// loss turns non-finite.
TrainHistory train(AttentionClassifier& model, std::span<const LabeledTagged> corpus,
                   const EmbeddingMatrix& embeddings, const TrainConfig& config);

// Deterministic split used by train(): shuffles by seed and takes the
// first ceil(fraction*n) as validation. Exposed for tests and eval.
void split_train_val(std::size_t n, double fraction, std::uint64_t seed,
                     std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx);

}  // namespace psat
