#include "psat/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>
#include <unordered_map>

#include "psat/metrics.hpp"
#include "psat/rng.hpp"

namespace psat {

namespace {

Tensor2 labels_to_targets(const std::vector<int>& labels) {
    Tensor2 t(1, labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) t.data[i] = static_cast<double>(labels[i]);
    return t;
}

void validate_labels_for_task(const std::vector<int>& labels, TaskKind kind,
                              std::size_t label_dim) {
    if (kind == TaskKind::multi_class) {
        if (labels.size() != 1 || labels[0] < 0 ||
            static_cast<std::size_t>(labels[0]) >= label_dim) {
            throw DataError("loss: multi_class label must be one index below " +
                            std::to_string(label_dim));
        }
        return;
    }
    if (labels.size() != label_dim) {
        throw DataError("loss: expected " + std::to_string(label_dim) + " labels, got " +
                        std::to_string(labels.size()));
    }
    for (int v : labels) {
        if (v != 0 && v != 1) throw DataError("loss: label outside {0,1}");
    }
}

struct Adam {
    std::vector<Tensor2> m, v;
    std::int64_t t = 0;

    void init(const std::vector<Tensor2*>& params) {
        for (Tensor2* p : params) {
            m.emplace_back(p->rows, p->cols, 0.0);
            v.emplace_back(p->rows, p->cols, 0.0);
        }
    }
};

// One example's contribution: builds the tape, backpropagates, adds
// scaled gradients into `accum`. Returns the (weighted) loss value.
double accumulate_example(const AttentionClassifier& model,
                          const std::vector<Tensor2*>& params, const Tensor2& embeds,
                          const std::vector<int>& labels, TaskKind kind, double weight,
                          double scale, std::vector<Tensor2>& accum) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    vars.reserve(params.size());
    for (Tensor2* p : params) vars.push_back(tape.leaf(*p));
    auto tf = model.build_forward(tape, vars, embeds);
    ad::Var loss = kind == TaskKind::multi_class
                       ? tape.scale(tape.ce_with_logits(tf.logits, labels[0]), weight)
                       : tape.bce_with_logits(tf.logits, labels_to_targets(labels), weight);
    double value = tape.value(loss).at(0, 0);
    if (!std::isfinite(value)) return value;
    tape.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
        axpy(scale, tape.grad(vars[i]), accum[i]);
    }
    return value;
}

}  // namespace

void TrainHistory::save_csv(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write history CSV: " + path);
    out << "epoch,train_loss,val_loss,val_f1\n";
    char buf[128];
    for (std::size_t i = 0; i < train_loss.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", i + 1, train_loss[i],
                      val_loss[i], val_f1[i]);
        out << buf;
    }
}

std::vector<LabeledTagged> join_corpus(const std::vector<LabeledDocument>& corpus,
                                       const std::vector<TaggedDocument>& tagged) {
    std::unordered_map<std::string, const TaggedDocument*> by_id;
    for (const TaggedDocument& t : tagged) by_id.emplace(t.doc_id, &t);
    std::vector<LabeledTagged> out;
    out.reserve(corpus.size());
    for (const LabeledDocument& d : corpus) {
        auto it = by_id.find(d.doc_id);
        if (it == by_id.end()) {
            throw DataError("join_corpus: no tagged document for doc_id '" + d.doc_id + "'");
        }
        LabeledTagged lt;
        lt.doc = *it->second;
        if (lt.doc.original_text.empty()) lt.doc.original_text = d.text;
        lt.labels = d.labels;
        out.push_back(std::move(lt));
    }
    return out;
}

double loss_value(const Tensor2& logits, const std::vector<int>& labels, TaskKind kind) {
    validate_labels_for_task(labels, kind, logits.cols);
    if (kind == TaskKind::multi_class) {
        double mx = *std::max_element(logits.data.begin(), logits.data.end());
        double lse = 0.0;
        for (double v : logits.data) lse += std::exp(v - mx);
        return mx + std::log(lse) - logits.data[labels[0]];
    }
    double total = 0.0;
    for (std::size_t i = 0; i < logits.data.size(); ++i) {
        double z = logits.data[i];
        double y = static_cast<double>(labels[i]);
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    return total / static_cast<double>(logits.data.size());
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
    rng.shuffle(order);
    return order;
}

void split_train_val(std::size_t n, double fraction, std::uint64_t seed,
                     std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw DataError("validation_fraction must lie strictly between 0 and 1");
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
    n_val = std::min(n_val, n - 1);  // keep at least one training example
    val_idx.assign(order.begin(), order.begin() + n_val);
    train_idx.assign(order.begin() + n_val, order.end());
}

TrainHistory train(AttentionClassifier& model, std::span<const LabeledTagged> corpus,
                   const EmbeddingMatrix& embeddings, const TrainConfig& config) {
    if (corpus.size() < 2) throw DataError("train: need at least 2 documents");
    if (config.epochs < 1) throw DataError("train: epochs must be >= 1");
    if (config.batch_size < 1) throw DataError("train: batch_size must be >= 1");

    // The max sequence length is the longest phrase stream in the corpus.
    if (model.config().max_seq_len == 0) {
        std::size_t longest = 0;
        for (const LabeledTagged& d : corpus) longest = std::max(longest, d.doc.phrases.size());
        model.set_max_seq_len(std::max<std::size_t>(longest, 1));
    }

    // Pre-embed every document once; forward passes reuse the matrices.
    std::vector<Tensor2> embeds;
    embeds.reserve(corpus.size());
    for (const LabeledTagged& d : corpus) {
        validate_labels_for_task(d.labels, config.task_kind, model.config().label_dim);
        embeds.push_back(embed_phrases(d.doc.phrases, embeddings, model.config().max_seq_len));
    }

    std::vector<std::size_t> train_idx, val_idx;
    split_train_val(corpus.size(), config.validation_fraction, config.seed, train_idx, val_idx);

    // Inverse-frequency example weights (binary only, optional).
    std::vector<double> weights(corpus.size(), 1.0);
    if (config.task_kind == TaskKind::binary && config.class_weights) {
        std::size_t pos = 0;
        for (std::size_t i : train_idx) pos += corpus[i].labels[0] == 1 ? 1 : 0;
        std::size_t neg = train_idx.size() - pos;
        if (pos > 0 && neg > 0) {
            double w_pos = static_cast<double>(train_idx.size()) / (2.0 * static_cast<double>(pos));
            double w_neg = static_cast<double>(train_idx.size()) / (2.0 * static_cast<double>(neg));
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                weights[i] = corpus[i].labels[0] == 1 ? w_pos : w_neg;
            }
        }
    }

    std::vector<Tensor2*> params = model.parameters();
    Adam adam;
    adam.init(params);

    auto eval_split = [&](const std::vector<std::size_t>& idx, double& loss_out, double& f1_out) {
        double total = 0.0;
        std::vector<std::vector<int>> labels, decisions;
        for (std::size_t i : idx) {
            ForwardResult fr = model.forward(embeds[i]);
            total += loss_value(fr.logits, corpus[i].labels, config.task_kind);
            labels.push_back(corpus[i].labels);
            decisions.push_back(decide(logits_to_scores(fr.logits, config.task_kind),
                                       config.task_kind));
        }
        loss_out = idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
        auto counts =
            confusion_counts(labels, decisions, config.task_kind, model.config().label_dim);
        f1_out = precision_recall_f1_macro(counts).f1;
    };

    TrainHistory history;
    double best_val = std::numeric_limits<double>::infinity();
    std::unique_ptr<AttentionClassifier> best_model = model.clone();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    const std::size_t n_threads =
        std::max<std::size_t>(1, static_cast<std::size_t>(config.threads));

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::size_t> order = epoch_order(train_idx.size(), config.seed, epoch);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::size_t batch_n = stop - start;
            double scale = 1.0 / static_cast<double>(batch_n);

            std::vector<Tensor2> accum;
            for (Tensor2* p : params) accum.emplace_back(p->rows, p->cols, 0.0);
            double batch_loss = 0.0;

            if (n_threads == 1 || batch_n == 1) {
                for (std::size_t bi = start; bi < stop; ++bi) {
                    std::size_t di = train_idx[order[bi]];
                    double value =
                        accumulate_example(model, params, embeds[di], corpus[di].labels,
                                           config.task_kind, weights[di], scale, accum);
                    if (!std::isfinite(value)) {
                        double pnorm = 0.0;
                        for (Tensor2* p : params) pnorm += norm2(*p) * norm2(*p);
                        throw NumericalError(
                            "non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(start / config.batch_size + 1) +
                            ", parameter norm " + std::to_string(std::sqrt(pnorm)));
                    }
                    batch_loss += value;
                }
            } else {
                // Parallel gradients with a fixed reduction order: each
                // thread fills its own buffers; the main thread reduces
                // them in thread index order, so results are reproducible
                // for a given thread count.
                std::size_t use = std::min(n_threads, batch_n);
                std::vector<std::vector<Tensor2>> partial(use);
                std::vector<double> partial_loss(use, 0.0);
                std::vector<char> partial_bad(use, 0);
                std::vector<std::thread> workers;
                for (std::size_t t = 0; t < use; ++t) {
                    for (Tensor2* p : params) partial[t].emplace_back(p->rows, p->cols, 0.0);
                }
                for (std::size_t t = 0; t < use; ++t) {
                    workers.emplace_back([&, t]() {
                        std::size_t lo = start + batch_n * t / use;
                        std::size_t hi = start + batch_n * (t + 1) / use;
                        for (std::size_t bi = lo; bi < hi; ++bi) {
                            std::size_t di = train_idx[order[bi]];
                            double value = accumulate_example(model, params, embeds[di],
                                                              corpus[di].labels, config.task_kind,
                                                              weights[di], scale, partial[t]);
                            if (!std::isfinite(value)) {
                                partial_bad[t] = 1;
                                return;
                            }
                            partial_loss[t] += value;
                        }
                    });
                }
                for (auto& w : workers) w.join();
                for (std::size_t t = 0; t < use; ++t) {
                    if (partial_bad[t]) {
                        throw NumericalError("non-finite loss at epoch " +
                                             std::to_string(epoch + 1) + ", batch " +
                                             std::to_string(start / config.batch_size + 1));
                    }
                    batch_loss += partial_loss[t];
                    for (std::size_t i = 0; i < params.size(); ++i) {
                        axpy(1.0, partial[t][i], accum[i]);
                    }
                }
            }

            // Optimizer step.
            if (config.optimizer == OptimizerKind::adam) {
                ++adam.t;
                double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.t));
                double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.t));
                for (std::size_t i = 0; i < params.size(); ++i) {
                    Tensor2& p = *params[i];
                    for (std::size_t j = 0; j < p.size(); ++j) {
                        double g = accum[i].data[j];
                        adam.m[i].data[j] =
                            config.adam_beta1 * adam.m[i].data[j] + (1.0 - config.adam_beta1) * g;
                        adam.v[i].data[j] = config.adam_beta2 * adam.v[i].data[j] +
                                            (1.0 - config.adam_beta2) * g * g;
                        double mhat = adam.m[i].data[j] / bc1;
                        double vhat = adam.v[i].data[j] / bc2;
                        p.data[j] -=
                            config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_epsilon);
                    }
                }
            } else {
                for (std::size_t i = 0; i < params.size(); ++i) {
                    axpy(-config.learning_rate, accum[i], *params[i]);
                }
            }

            epoch_loss += batch_loss;
            seen += batch_n;
        }

        double val_loss = 0.0, val_f1 = 0.0;
        eval_split(val_idx, val_loss, val_f1);
        history.train_loss.push_back(seen ? epoch_loss / static_cast<double>(seen) : 0.0);
        history.val_loss.push_back(val_loss);
        history.val_f1.push_back(val_f1);

        if (val_loss < best_val) {
            best_val = val_loss;
            best_model = model.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (config.early_stop_patience > 0 && since_best > config.early_stop_patience) break;
        }
    }

    // Restore the best-validation checkpoint into the caller's model.
    std::vector<Tensor2*> dst = model.parameters();
    std::vector<const Tensor2*> src =
        static_cast<const AttentionClassifier&>(*best_model).parameters();
    for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] = *src[i];
    history.best_epoch = best_epoch;
    return history;
}

}  // namespace psat
