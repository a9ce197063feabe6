#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "psat/autodiff.hpp"
#include "psat/corpus.hpp"
#include "psat/embedding.hpp"
#include "psat/ontology.hpp"
#include "psat/tagger.hpp"
#include "psat/tensor.hpp"

namespace psat {

struct ModelConfig {
    std::size_t d_k = 32;
    std::size_t d_v = 32;
    std::size_t hidden = 64;
    std::size_t label_dim = 1;
    std::size_t max_seq_len = 0;  // 0 = not yet pinned; train fills it from the corpus
    TaskKind task_kind = TaskKind::binary;
    std::uint64_t seed = 1;
};

struct ForwardResult {
    Tensor2 logits;  // 1 x label_dim
    // Per attention unit: one weight per document phrase, summing to 1.
    // PSAT: one row per ontology class; baseline: a single flat row.
    // Empty for an empty phrase stream.
    std::vector<std::vector<double>> attention;
};

// Common surface of the PSAT network and the self-attention baseline: a
// parameter list in fixed declaration order plus a tape-level forward.
class AttentionClassifier {
public:
    virtual ~AttentionClassifier() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t block_count() const = 0;
    virtual std::vector<Tensor2*> parameters() = 0;
    std::vector<const Tensor2*> parameters() const;

    const ModelConfig& config() const { return config_; }
    void set_max_seq_len(std::size_t n) { config_.max_seq_len = n; }

    struct TapeForward {
        ad::Var logits;
        std::vector<ad::Var> attention;  // may be empty (n = 0)
    };
    // `param_vars` must mirror parameters() order. `embeds` holds one row
    // per (already truncated) document phrase; 0 rows is the defined
    // degenerate case and yields the head bias path.
    virtual TapeForward build_forward(ad::Tape& tape, std::span<const ad::Var> param_vars,
                                      const Tensor2& embeds) const = 0;

    // Convenience value-level inference on a private tape.
    ForwardResult forward(const Tensor2& embeds) const;

    virtual std::unique_ptr<AttentionClassifier> clone() const = 0;

protected:
    explicit AttentionClassifier(ModelConfig config) : config_(std::move(config)) {}
    AttentionClassifier(const AttentionClassifier&) = default;
    AttentionClassifier& operator=(const AttentionClassifier&) = default;

    ModelConfig config_;
};

// One cross-attention block per ontology class: the class's mean concept
// embedding supplies the query, document phrases supply keys and values,
// so each block's weights are a distribution over the document's phrases
// for that one question.
class PsatModel final : public AttentionClassifier {
public:
    struct Block {
        std::string class_id;
        Tensor2 query_source;  // concepts x d, constant (from the ontology)
        Tensor2 query_mean;    // 1 x d, mean-pooled query_source
        Tensor2 w_q, w_k, w_v;       // d x d_k, d x d_k, d x d_v
        Tensor2 ln_gain, ln_bias;    // 1 x d_v
    };

    static PsatModel init(const Ontology& ontology, const EmbeddingMatrix& embeddings,
                          const ModelConfig& config);

    std::string kind() const override { return "psat"; }
    std::size_t block_count() const override { return blocks_.size(); }
    std::vector<Tensor2*> parameters() override;
    TapeForward build_forward(ad::Tape& tape, std::span<const ad::Var> param_vars,
                              const Tensor2& embeds) const override;
    std::unique_ptr<AttentionClassifier> clone() const override;

    const std::vector<Block>& blocks() const { return blocks_; }
    std::size_t embedding_dim() const { return dim_; }

private:
    friend std::unique_ptr<AttentionClassifier> load_checkpoint(const std::string&,
                                                                const Ontology*,
                                                                const EmbeddingMatrix&,
                                                                const std::string&,
                                                                const std::string&);
    PsatModel(ModelConfig config, std::size_t dim) : AttentionClassifier(config), dim_(dim) {}

    std::size_t dim_ = 0;
    std::vector<Block> blocks_;
    Tensor2 head_w1_, head_b1_, head_w2_, head_b2_;
};

// Dimension-matched single-block self-attention baseline: queries, keys
// and values all come from the document phrases; the n x n attention is
// mean-pooled over query positions into one flat distribution.
class BaselineModel final : public AttentionClassifier {
public:
    static BaselineModel init(std::size_t embedding_dim, const ModelConfig& config);

    std::string kind() const override { return "baseline"; }
    std::size_t block_count() const override { return 1; }
    std::vector<Tensor2*> parameters() override;
    TapeForward build_forward(ad::Tape& tape, std::span<const ad::Var> param_vars,
                              const Tensor2& embeds) const override;
    std::unique_ptr<AttentionClassifier> clone() const override;

    std::size_t embedding_dim() const { return dim_; }

private:
    friend std::unique_ptr<AttentionClassifier> load_checkpoint(const std::string&,
                                                                const Ontology*,
                                                                const EmbeddingMatrix&,
                                                                const std::string&,
                                                                const std::string&);
    BaselineModel(ModelConfig config, std::size_t dim) : AttentionClassifier(config), dim_(dim) {}

    std::size_t dim_ = 0;
    Tensor2 w_q_, w_k_, w_v_, ln_gain_, ln_bias_;
    Tensor2 head_w1_, head_b1_, head_w2_, head_b2_;
};

// Embeds a phrase stream, truncating at max_seq_len (0 = no limit).
Tensor2 embed_phrases(std::span<const std::string> phrases, const EmbeddingMatrix& embeddings,
                      std::size_t max_seq_len);

// Logits -> scores: sigmoid per output (binary / multi_label), softmax
// over outputs (multi_class).
std::vector<double> logits_to_scores(const Tensor2& logits, TaskKind kind);

// Checkpoint: magic + versioned header + parameter tensors in declaration
// order, little-endian 64-bit reals; sidecar "<path>.manifest.json" names
// the ontology/embedding files by FNV-1a content hash.
void save_checkpoint(const AttentionClassifier& model, const std::string& path,
                     const std::string& ontology_path, const std::string& embeddings_path);

// Rebuilds the model. PSAT checkpoints need the ontology (for query
// sources); pass nullptr for baseline-only flows. When the optional paths
// are given, their content hashes are verified against the manifest.
std::unique_ptr<AttentionClassifier> load_checkpoint(const std::string& path,
                                                     const Ontology* ontology,
                                                     const EmbeddingMatrix& embeddings,
                                                     const std::string& ontology_path = "",
                                                     const std::string& embeddings_path = "");

std::string file_fnv64_hex(const std::string& path);

}  // namespace psat
