#include "psat/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "psat/keyphrase.hpp"
#include "psat/ontology.hpp"
#include "psat/rng.hpp"
#include "psat/tagger.hpp"

namespace psat {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// Cumulative unigram^0.75 table; sampled by binary search over a uniform
// draw. Phrases with zero corpus count never come up.
struct NoiseTable {
    std::vector<double> cumulative;

    explicit NoiseTable(const std::vector<std::uint64_t>& counts) {
        cumulative.resize(counts.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) {
            acc += std::pow(static_cast<double>(counts[i]), 0.75);
            cumulative[i] = acc;
        }
    }

    std::size_t sample(Rng& rng) const {
        double u = rng.uniform() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        return static_cast<std::size_t>(it - cumulative.begin());
    }
};

struct TrainShared {
    Tensor2* input;
    Tensor2* output;
    const NoiseTable* noise;
    const std::vector<std::vector<std::size_t>>* docs;
    std::size_t dim;
    std::size_t window;
    std::size_t negatives;
    double initial_lr;
    std::uint64_t total_positions;  // across all epochs, for lr decay
};

// One pass over a range of documents. Returns (loss sum, pair count).
std::pair<double, std::uint64_t> run_epoch_range(const TrainShared& s, std::size_t doc_begin,
                                                 std::size_t doc_end, Rng& rng,
                                                 std::uint64_t& positions_done) {
    double loss_sum = 0.0;
    std::uint64_t pairs = 0;
    std::vector<double> center_grad(s.dim);

    for (std::size_t di = doc_begin; di < doc_end; ++di) {
        const auto& doc = (*s.docs)[di];
        for (std::size_t pos = 0; pos < doc.size(); ++pos) {
            double progress =
                static_cast<double>(positions_done) / static_cast<double>(s.total_positions);
            double lr = s.initial_lr * std::max(1.0 - progress, 1e-4);
            ++positions_done;

            // Classic dynamic window: effective size uniform in [1, window].
            std::size_t b = 1 + static_cast<std::size_t>(rng.below(s.window));
            std::size_t lo = pos >= b ? pos - b : 0;
            std::size_t hi = std::min(doc.size(), pos + b + 1);
            std::size_t center = doc[pos];
            double* v_c = s.input->row(center).data();

            for (std::size_t cpos = lo; cpos < hi; ++cpos) {
                if (cpos == pos) continue;
                std::size_t context = doc[cpos];
                std::fill(center_grad.begin(), center_grad.end(), 0.0);

                for (std::size_t k = 0; k <= s.negatives; ++k) {
                    std::size_t target;
                    double label;
                    if (k == 0) {
                        target = context;
                        label = 1.0;
                    } else {
                        target = s.noise->sample(rng);
                        if (target == context) continue;  // classic skip
                        label = 0.0;
                    }
                    double* u_t = s.output->row(target).data();
                    double z = 0.0;
                    for (std::size_t d = 0; d < s.dim; ++d) z += v_c[d] * u_t[d];
                    double f = sigmoid(z);
                    double g = (label - f) * lr;
                    loss_sum += label > 0.5 ? -std::log(std::max(f, 1e-12))
                                            : -std::log(std::max(1.0 - f, 1e-12));
                    for (std::size_t d = 0; d < s.dim; ++d) {
                        center_grad[d] += g * u_t[d];
                        u_t[d] += g * v_c[d];
                    }
                }
                for (std::size_t d = 0; d < s.dim; ++d) v_c[d] += center_grad[d];
                ++pairs;
            }
        }
    }
    return {loss_sum, pairs};
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::string> phrases, Tensor2 vectors)
    : phrases_(std::move(phrases)), vectors_(std::move(vectors)) {
    if (phrases_.size() != vectors_.rows) {
        throw MathError("EmbeddingMatrix: phrase count does not match vector rows");
    }
    for (std::size_t i = 0; i < phrases_.size(); ++i) {
        if (!index_.emplace(phrases_[i], i).second) {
            throw DataError("EmbeddingMatrix: duplicate phrase '" + phrases_[i] + "'");
        }
    }
}

std::optional<std::size_t> EmbeddingMatrix::index_of(const std::string& phrase) const {
    auto it = index_.find(phrase);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void EmbeddingMatrix::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write embedding file: " + path);
    out << size() << ' ' << dim() << '\n';
    char buf[64];
    for (std::size_t i = 0; i < size(); ++i) {
        out << phrases_[i];
        for (double v : row(i)) {
            std::snprintf(buf, sizeof(buf), " %.17g", v);
            out << buf;
        }
        out << '\n';
    }
}

EmbeddingMatrix EmbeddingMatrix::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding file: " + path);
    std::size_t v = 0, d = 0;
    if (!(in >> v >> d)) throw DataError("embedding file missing 'V d' header: " + path);
    std::vector<std::string> phrases;
    phrases.reserve(v);
    Tensor2 vectors(v, d);
    for (std::size_t i = 0; i < v; ++i) {
        std::string phrase;
        if (!(in >> phrase)) throw DataError("embedding file truncated at row " +
                                             std::to_string(i) + ": " + path);
        for (std::size_t j = 0; j < d; ++j) {
            if (!(in >> vectors.at(i, j))) {
                throw DataError("embedding file truncated in vector of '" + phrase + "': " + path);
            }
        }
        phrases.push_back(std::move(phrase));
    }
    return EmbeddingMatrix(std::move(phrases), std::move(vectors));
}

EmbeddingMatrix train_skipgram(std::span<const TaggedDocument> corpus,
                               const PhraseVocabulary& vocabulary, const SkipgramConfig& config,
                               SkipgramStats* stats) {
    if (corpus.empty()) throw DataError("train_skipgram: empty corpus");
    if (config.dim < 2) throw DataError("train_skipgram: dim must be >= 2");

    std::vector<std::string> phrases;
    phrases.reserve(vocabulary.entries.size());
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& e : vocabulary.entries) {
        index.emplace(e.phrase, phrases.size());
        phrases.push_back(e.phrase);
    }
    if (phrases.size() < config.negatives + 1) {
        throw DataError("train_skipgram: vocabulary of " + std::to_string(phrases.size()) +
                        " is smaller than negatives+1 = " + std::to_string(config.negatives + 1));
    }

    // Index the corpus and count unigrams.
    std::vector<std::vector<std::size_t>> docs;
    docs.reserve(corpus.size());
    std::vector<std::uint64_t> counts(phrases.size(), 0);
    std::uint64_t positions = 0;
    for (const TaggedDocument& doc : corpus) {
        std::vector<std::size_t> ids;
        ids.reserve(doc.phrases.size());
        for (const std::string& p : doc.phrases) {
            auto it = index.find(p);
            if (it == index.end()) {
                throw DataError("train_skipgram: corpus token '" + p +
                                "' is not in the phrase vocabulary");
            }
            ids.push_back(it->second);
            ++counts[it->second];
        }
        positions += ids.size();
        docs.push_back(std::move(ids));
    }

    // Seeded init: input vectors uniform in [-0.5/d, 0.5/d], context zero.
    Rng init_rng(config.seed);
    double bound = 0.5 / static_cast<double>(config.dim);
    Tensor2 input(phrases.size(), config.dim);
    for (double& v : input.data) v = init_rng.uniform(-bound, bound);
    Tensor2 output(phrases.size(), config.dim, 0.0);

    if (config.epochs == 0 || positions == 0) {
        return EmbeddingMatrix(std::move(phrases), std::move(input));
    }

    NoiseTable noise(counts);
    TrainShared shared{&input,        &output,          &noise,
                       &docs,         config.dim,       config.window,
                       config.negatives, config.learning_rate,
                       positions * config.epochs};

    if (stats) stats->epoch_loss.clear();

    if (config.threads <= 1) {
        Rng rng(config.seed + 1);
        std::uint64_t done = 0;
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            auto [loss, pairs] = run_epoch_range(shared, 0, docs.size(), rng, done);
            if (stats) stats->epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
        }
    } else {
        // Hogwild-style: shards race on the shared matrices; results vary
        // across runs. Loss reporting is per-shard summed, approximate.
        std::size_t n_threads = std::min<std::size_t>(config.threads, docs.size());
        for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
            std::vector<std::thread> workers;
            std::vector<double> losses(n_threads, 0.0);
            std::vector<std::uint64_t> pair_counts(n_threads, 0);
            for (std::size_t t = 0; t < n_threads; ++t) {
                workers.emplace_back([&, t]() {
                    std::size_t lo = docs.size() * t / n_threads;
                    std::size_t hi = docs.size() * (t + 1) / n_threads;
                    Rng rng(config.seed + 1 + epoch * n_threads + t);
                    std::uint64_t done = epoch * positions;
                    auto [loss, pairs] = run_epoch_range(shared, lo, hi, rng, done);
                    losses[t] = loss;
                    pair_counts[t] = pairs;
                });
            }
            for (auto& w : workers) w.join();
            if (stats) {
                double loss = 0.0;
                std::uint64_t pairs = 0;
                for (std::size_t t = 0; t < n_threads; ++t) {
                    loss += losses[t];
                    pairs += pair_counts[t];
                }
                stats->epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
            }
        }
    }

    if (!input.all_finite()) throw MathError("train_skipgram: non-finite embedding values");
    return EmbeddingMatrix(std::move(phrases), std::move(input));
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw MathError("cosine: length mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw MathError("cosine: zero vector");
    return ab / (std::sqrt(aa) * std::sqrt(bb));
}

}  // namespace psat
