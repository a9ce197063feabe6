#include "psat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace psat {

MacroPrf precision_recall_f1_macro(std::span<const ConfusionCounts> per_class) {
    if (per_class.empty()) throw DataError("precision_recall_f1_macro: no classes");
    MacroPrf out;
    for (const ConfusionCounts& c : per_class) {
        double p = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                                     : 0.0;
        double r = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                                     : 0.0;
        double f1 = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        out.precision += p;
        out.recall += r;
        out.f1 += f1;
        out.per_class_f1.push_back(f1);
    }
    double n = static_cast<double>(per_class.size());
    out.precision /= n;
    out.recall /= n;
    out.f1 /= n;
    return out;
}

double mcc(const ConfusionCounts& c) {
    double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    double f1 = tp + fp, f2 = tp + fn, f3 = tn + fp, f4 = tn + fn;
    if (f1 == 0.0 || f2 == 0.0 || f3 == 0.0 || f4 == 0.0) return 0.0;
    return (tp * tn - fp * fn) / std::sqrt(f1 * f2 * f3 * f4);
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DataError("auc_roc: scores/labels length mismatch");
    std::int64_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) {
        throw DataError("auc_roc: both classes must be present");
    }
    double wins = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

AkcResult akc(const AkcInput& input) {
    if (input.concepts.empty()) throw DataError("akc: no concept vectors");
    bool any = false;
    for (const auto& doc : input.highlighted) {
        if (!doc.empty()) any = true;
    }
    if (!any) throw DataError("akc: highlighted set is empty for every document");

    constexpr double kEps = 1e-6;
    double sum = 0.0;
    for (const auto& doc : input.highlighted) {
        for (const auto& w : doc) {
            for (const auto& c : input.concepts) {
                double cs = cosine(w, c);
                cs = std::clamp(cs, kEps, 1.0);
                sum += cs * std::log(cs);
            }
        }
    }
    AkcResult out;
    double denom =
        static_cast<double>(input.highlighted.size()) * static_cast<double>(input.concepts.size());
    out.raw = sum / denom;
    out.rescaled = 100.0 * (1.0 + out.raw * std::exp(1.0));
    return out;
}

double binomial_test(std::int64_t n_correct, std::int64_t n_total, double p0) {
    if (n_total < 1) throw DataError("binomial_test: n_total must be >= 1");
    if (n_correct > n_total) throw DataError("binomial_test: n_correct exceeds n_total");
    if (p0 <= 0.0 || p0 >= 1.0) throw DataError("binomial_test: p0 must lie in (0, 1)");
    if (n_correct <= 0) return 1.0;

    double lp = std::log(p0);
    double lq = std::log1p(-p0);
    double lgn = std::lgamma(static_cast<double>(n_total) + 1.0);
    double sum = 0.0;
    for (std::int64_t i = n_correct; i <= n_total; ++i) {
        double lc = lgn - std::lgamma(static_cast<double>(i) + 1.0) -
                    std::lgamma(static_cast<double>(n_total - i) + 1.0);
        sum += std::exp(lc + static_cast<double>(i) * lp + static_cast<double>(n_total - i) * lq);
    }
    return std::min(sum, 1.0);
}

double normalized_entropy(std::span<const double> masses) {
    if (masses.size() <= 1) return 0.0;
    double total = 0.0;
    for (double m : masses) {
        if (m < 0.0) throw DataError("normalized_entropy: negative mass");
        total += m;
    }
    if (total <= 0.0) return 1.0;  // no mass anywhere reads as maximally flat
    double h = 0.0;
    for (double m : masses) {
        if (m <= 0.0) continue;
        double p = m / total;
        h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(masses.size()));
}

CumulativeResult cumulative_attention(std::span<const DocAttention> docs, const Ontology& ontology,
                                      const EmbeddingMatrix& embeddings, CumulativeMode mode) {
    std::size_t k = ontology.class_count();
    CumulativeResult out;
    out.per_class.assign(k, 0.0);

    // Concept vectors per class, restricted to the embedding vocabulary.
    std::vector<std::vector<std::size_t>> class_rows(k);
    for (std::size_t c = 0; c < k; ++c) {
        for (const Concept& con : ontology.classes[c].concepts) {
            if (auto idx = embeddings.index_of(con.phrase)) class_rows[c].push_back(*idx);
        }
        if (class_rows[c].empty()) {
            throw DataError("cumulative_attention: class '" + ontology.classes[c].id +
                            "' has no concept in the embedding vocabulary");
        }
    }

    // max-cosine(phrase, class) cache, clamped to [0, 1].
    std::unordered_map<std::string, std::vector<double>> sim_cache;
    auto class_sims = [&](const std::string& phrase) -> const std::vector<double>* {
        auto it = sim_cache.find(phrase);
        if (it != sim_cache.end()) return &it->second;
        auto row = embeddings.index_of(phrase);
        if (!row) return nullptr;
        std::vector<double> sims(k, 0.0);
        for (std::size_t c = 0; c < k; ++c) {
            double best = 0.0;
            for (std::size_t cr : class_rows[c]) {
                best = std::max(best, cosine(embeddings.row(*row), embeddings.row(cr)));
            }
            sims[c] = std::clamp(best, 0.0, 1.0);
        }
        return &sim_cache.emplace(phrase, std::move(sims)).first->second;
    };

    for (const DocAttention& doc : docs) {
        if (doc.phrases.empty()) {
            ++out.skipped_empty;
            continue;
        }
        if (mode == CumulativeMode::csa) {
            if (doc.rows.size() != 1 || doc.rows[0].size() != doc.phrases.size()) {
                throw DataError("cumulative_attention: CSA expects one flat attention row");
            }
            for (std::size_t p = 0; p < doc.phrases.size(); ++p) {
                const std::vector<double>* sims = class_sims(doc.phrases[p]);
                if (!sims) continue;
                for (std::size_t c = 0; c < k; ++c) {
                    out.per_class[c] += doc.rows[0][p] * (*sims)[c];
                }
            }
        } else {
            if (doc.rows.size() != k) {
                throw DataError("cumulative_attention: CCA expects one attention row per class");
            }
            for (std::size_t c = 0; c < k; ++c) {
                if (doc.rows[c].size() != doc.phrases.size()) {
                    throw DataError("cumulative_attention: attention length mismatch");
                }
                for (std::size_t p = 0; p < doc.phrases.size(); ++p) {
                    const std::vector<double>* sims = class_sims(doc.phrases[p]);
                    if (!sims) continue;
                    out.per_class[c] += doc.rows[c][p] * (*sims)[c];
                }
            }
        }
    }
    out.normalized_entropy = normalized_entropy(out.per_class);
    return out;
}

std::vector<int> decide(const std::vector<double>& scores, TaskKind kind) {
    if (kind == TaskKind::multi_class) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < scores.size(); ++i) {
            if (scores[i] > scores[best]) best = i;
        }
        return {static_cast<int>(best)};
    }
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= 0.5 ? 1 : 0;
    return out;
}

std::vector<ConfusionCounts> confusion_counts(const std::vector<std::vector<int>>& labels,
                                              const std::vector<std::vector<int>>& decisions,
                                              TaskKind kind, std::size_t num_classes) {
    if (labels.size() != decisions.size()) {
        throw DataError("confusion_counts: labels/decisions length mismatch");
    }
    std::size_t k = kind == TaskKind::binary ? 2 : num_classes;
    std::vector<ConfusionCounts> out(k);
    for (std::size_t d = 0; d < labels.size(); ++d) {
        switch (kind) {
            case TaskKind::binary: {
                int y = labels[d].at(0), p = decisions[d].at(0);
                ConfusionCounts& pos = out[0];
                ConfusionCounts& neg = out[1];
                if (y == 1 && p == 1) { pos.tp++; neg.tn++; }
                if (y == 0 && p == 1) { pos.fp++; neg.fn++; }
                if (y == 1 && p == 0) { pos.fn++; neg.fp++; }
                if (y == 0 && p == 0) { pos.tn++; neg.tp++; }
                break;
            }
            case TaskKind::multi_label: {
                if (labels[d].size() != k || decisions[d].size() != k) {
                    throw DataError("confusion_counts: label arity mismatch");
                }
                for (std::size_t c = 0; c < k; ++c) {
                    int y = labels[d][c], p = decisions[d][c];
                    if (y && p) out[c].tp++;
                    else if (!y && p) out[c].fp++;
                    else if (y && !p) out[c].fn++;
                    else out[c].tn++;
                }
                break;
            }
            case TaskKind::multi_class: {
                int y = labels[d].at(0), p = decisions[d].at(0);
                for (std::size_t c = 0; c < k; ++c) {
                    bool yv = static_cast<std::size_t>(y) == c;
                    bool pv = static_cast<std::size_t>(p) == c;
                    if (yv && pv) out[c].tp++;
                    else if (!yv && pv) out[c].fp++;
                    else if (yv && !pv) out[c].fn++;
                    else out[c].tn++;
                }
                break;
            }
        }
    }
    return out;
}

ConfusionCounts pooled_confusion(const std::vector<std::vector<int>>& labels,
                                 const std::vector<std::vector<int>>& decisions, TaskKind kind,
                                 std::size_t num_classes) {
    std::vector<ConfusionCounts> per_class = confusion_counts(labels, decisions, kind, num_classes);
    if (kind == TaskKind::binary) return per_class[0];
    ConfusionCounts pooled;
    for (const ConfusionCounts& c : per_class) {
        pooled.tp += c.tp;
        pooled.fp += c.fp;
        pooled.tn += c.tn;
        pooled.fn += c.fn;
    }
    return pooled;
}

double auc_roc_macro(const std::vector<std::vector<double>>& scores,
                     const std::vector<std::vector<int>>& labels, TaskKind kind,
                     std::size_t num_classes) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw DataError("auc_roc_macro: empty or mismatched inputs");
    }
    std::size_t k = kind == TaskKind::binary ? 1 : num_classes;
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> s;
        std::vector<int> y;
        for (std::size_t d = 0; d < scores.size(); ++d) {
            switch (kind) {
                case TaskKind::binary:
                    s.push_back(scores[d].at(0));
                    y.push_back(labels[d].at(0));
                    break;
                case TaskKind::multi_label:
                    s.push_back(scores[d].at(c));
                    y.push_back(labels[d].at(c));
                    break;
                case TaskKind::multi_class:
                    s.push_back(scores[d].at(c));
                    y.push_back(static_cast<std::size_t>(labels[d].at(0)) == c ? 1 : 0);
                    break;
            }
        }
        bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
        bool has_neg = std::find(y.begin(), y.end(), 0) != y.end();
        if (!has_pos || !has_neg) continue;  // class degenerate in this sample
        total += auc_roc(s, y);
        ++counted;
    }
    if (counted == 0) throw DataError("auc_roc_macro: no class has both outcomes present");
    return total / static_cast<double>(counted);
}

}  // namespace psat
