#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "psat/tensor.hpp"

namespace psat {

struct PhraseVocabulary;
struct TaggedDocument;

// Phrase -> dense vector table. Row order follows the vocabulary that
// trained it and is part of the serialized format.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::vector<std::string> phrases, Tensor2 vectors);

    std::size_t size() const { return phrases_.size(); }
    std::size_t dim() const { return vectors_.cols; }
    const std::vector<std::string>& phrases() const { return phrases_; }
    const Tensor2& vectors() const { return vectors_; }

    std::optional<std::size_t> index_of(const std::string& phrase) const;
    std::span<const double> row(std::size_t i) const { return vectors_.row(i); }

    // Text format: header "V d", then one line per phrase:
    // "phrase v1 ... vd" with 17 significant digits (bit-exact round trip).
    void save(const std::string& path) const;
    static EmbeddingMatrix load(const std::string& path);

private:
    std::vector<std::string> phrases_;
    std::unordered_map<std::string, std::size_t> index_;
    Tensor2 vectors_;
};

struct SkipgramConfig {
    std::size_t dim = 50;
    std::size_t window = 5;
    std::size_t negatives = 5;
    std::size_t epochs = 5;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;
    int threads = 1;  // >1 opts into hogwild-style updates (not deterministic)
};

struct SkipgramStats {
    std::vector<double> epoch_loss;  // mean negative log-likelihood per pair
};

// Skip-gram with negative sampling (unigram^0.75 noise), SGD with linearly
// decaying learning rate. Deterministic for threads == 1 and a fixed seed.
// Every corpus token must be a vocabulary phrase. The published vectors are
// the input (center) vectors; epochs == 0 returns the seeded random
// initialization in [-0.5/d, 0.5/d].
EmbeddingMatrix train_skipgram(std::span<const TaggedDocument> corpus,
                               const PhraseVocabulary& vocabulary, const SkipgramConfig& config,
                               SkipgramStats* stats = nullptr);

// cos(a, b) = dot / (|a||b|). Throws MathError on length mismatch or a
// zero vector (callers filter those).
double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace psat
