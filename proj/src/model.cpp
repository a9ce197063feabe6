#include "psat/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "psat/rng.hpp"

namespace psat {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'A', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint64_t kFormatVersion = 1;

Tensor2 xavier_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor2 t(rows, cols);
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    return t;
}

Tensor2 mean_rows_value(const Tensor2& m) {
    Tensor2 out(1, m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out.at(0, j) += m.at(i, j);
    for (double& v : out.data) v /= static_cast<double>(m.rows);
    return out;
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& out, double d) { write_u64(out, std::bit_cast<std::uint64_t>(d)); }
double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

void write_tensor(std::ostream& out, const Tensor2& t) {
    write_u64(out, t.rows);
    write_u64(out, t.cols);
    for (double v : t.data) write_f64(out, v);
}

Tensor2 read_tensor(std::istream& in) {
    std::uint64_t r = read_u64(in), c = read_u64(in);
    Tensor2 t(r, c);
    for (double& v : t.data) v = read_f64(in);
    return t;
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    std::uint64_t n = read_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

std::vector<const Tensor2*> AttentionClassifier::parameters() const {
    auto mut = const_cast<AttentionClassifier*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

ForwardResult AttentionClassifier::forward(const Tensor2& embeds) const {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const Tensor2* p : parameters()) vars.push_back(tape.leaf(*p));
    TapeForward tf = build_forward(tape, vars, embeds);
    ForwardResult out;
    out.logits = tape.value(tf.logits);
    for (ad::Var a : tf.attention) {
        const Tensor2& w = tape.value(a);
        out.attention.emplace_back(w.data.begin(), w.data.end());
    }
    return out;
}

PsatModel PsatModel::init(const Ontology& ontology, const EmbeddingMatrix& embeddings,
                          const ModelConfig& config) {
    if (ontology.classes.empty()) throw DataError("init: ontology has no classes");
    PsatModel model(config, embeddings.dim());
    Rng rng(config.seed);
    std::size_t d = embeddings.dim();
    for (const OntologyClass& cls : ontology.classes) {
        Block b;
        b.class_id = cls.id;
        ConceptMatrix cm = concept_matrix(ontology, cls.id, embeddings);
        b.query_source = std::move(cm.vectors);
        b.query_mean = mean_rows_value(b.query_source);
        b.w_q = xavier_uniform(d, config.d_k, rng);
        b.w_k = xavier_uniform(d, config.d_k, rng);
        b.w_v = xavier_uniform(d, config.d_v, rng);
        b.ln_gain = Tensor2(1, config.d_v, 1.0);
        b.ln_bias = Tensor2(1, config.d_v, 0.0);
        model.blocks_.push_back(std::move(b));
    }
    std::size_t concat = model.blocks_.size() * config.d_v;
    model.head_w1_ = xavier_uniform(concat, config.hidden, rng);
    model.head_b1_ = Tensor2(1, config.hidden, 0.0);
    model.head_w2_ = xavier_uniform(config.hidden, config.label_dim, rng);
    model.head_b2_ = Tensor2(1, config.label_dim, 0.0);
    return model;
}

std::vector<Tensor2*> PsatModel::parameters() {
    std::vector<Tensor2*> out;
    out.reserve(blocks_.size() * 5 + 4);
    for (Block& b : blocks_) {
        out.push_back(&b.w_q);
        out.push_back(&b.w_k);
        out.push_back(&b.w_v);
        out.push_back(&b.ln_gain);
        out.push_back(&b.ln_bias);
    }
    out.push_back(&head_w1_);
    out.push_back(&head_b1_);
    out.push_back(&head_w2_);
    out.push_back(&head_b2_);
    return out;
}

AttentionClassifier::TapeForward PsatModel::build_forward(ad::Tape& tape,
                                                          std::span<const ad::Var> p,
                                                          const Tensor2& embeds) const {
    const std::size_t k = blocks_.size();
    if (p.size() != k * 5 + 4) throw MathError("psat forward: parameter count mismatch");
    const std::size_t n = embeds.rows;
    const double scale = 1.0 / std::sqrt(static_cast<double>(config_.d_k));

    TapeForward out;
    ad::Var cat;
    if (n == 0) {
        cat = tape.leaf(Tensor2(1, k * config_.d_v, 0.0));
    } else {
        ad::Var phrase_mat = tape.leaf(embeds);
        std::vector<ad::Var> reps;
        reps.reserve(k);
        for (std::size_t bi = 0; bi < k; ++bi) {
            const Block& blk = blocks_[bi];
            ad::Var w_q = p[bi * 5 + 0], w_k = p[bi * 5 + 1], w_v = p[bi * 5 + 2];
            ad::Var gain = p[bi * 5 + 3], bias = p[bi * 5 + 4];
            ad::Var query = tape.matmul(tape.leaf(blk.query_mean), w_q);  // 1 x d_k
            ad::Var keys = tape.matmul(phrase_mat, w_k);                  // n x d_k
            ad::Var values = tape.matmul(phrase_mat, w_v);                // n x d_v
            ad::Var scores = tape.scale(tape.matmul_nt(query, keys), scale);  // 1 x n
            ad::Var weights = tape.softmax_rows(scores);
            ad::Var rep = tape.matmul(weights, values);  // 1 x d_v
            rep = tape.layer_norm(rep, gain, bias, 1e-5);
            reps.push_back(rep);
            out.attention.push_back(weights);
        }
        cat = tape.concat_cols(reps);
    }

    ad::Var w1 = p[k * 5 + 0], b1 = p[k * 5 + 1], w2 = p[k * 5 + 2], b2 = p[k * 5 + 3];
    ad::Var hid = tape.tanh(tape.add_row(tape.matmul(cat, w1), b1));
    out.logits = tape.add_row(tape.matmul(hid, w2), b2);
    return out;
}

std::unique_ptr<AttentionClassifier> PsatModel::clone() const {
    return std::unique_ptr<AttentionClassifier>(new PsatModel(*this));
}

BaselineModel BaselineModel::init(std::size_t embedding_dim, const ModelConfig& config) {
    BaselineModel model(config, embedding_dim);
    Rng rng(config.seed);
    model.w_q_ = xavier_uniform(embedding_dim, config.d_k, rng);
    model.w_k_ = xavier_uniform(embedding_dim, config.d_k, rng);
    model.w_v_ = xavier_uniform(embedding_dim, config.d_v, rng);
    model.ln_gain_ = Tensor2(1, config.d_v, 1.0);
    model.ln_bias_ = Tensor2(1, config.d_v, 0.0);
    model.head_w1_ = xavier_uniform(config.d_v, config.hidden, rng);
    model.head_b1_ = Tensor2(1, config.hidden, 0.0);
    model.head_w2_ = xavier_uniform(config.hidden, config.label_dim, rng);
    model.head_b2_ = Tensor2(1, config.label_dim, 0.0);
    return model;
}

std::vector<Tensor2*> BaselineModel::parameters() {
    return {&w_q_, &w_k_, &w_v_, &ln_gain_, &ln_bias_,
            &head_w1_, &head_b1_, &head_w2_, &head_b2_};
}

AttentionClassifier::TapeForward BaselineModel::build_forward(ad::Tape& tape,
                                                              std::span<const ad::Var> p,
                                                              const Tensor2& embeds) const {
    if (p.size() != 9) throw MathError("baseline forward: parameter count mismatch");
    const std::size_t n = embeds.rows;
    const double scale = 1.0 / std::sqrt(static_cast<double>(config_.d_k));

    TapeForward out;
    ad::Var pooled;
    if (n == 0) {
        pooled = tape.leaf(Tensor2(1, config_.d_v, 0.0));
    } else {
        ad::Var phrase_mat = tape.leaf(embeds);
        ad::Var queries = tape.matmul(phrase_mat, p[0]);  // n x d_k
        ad::Var keys = tape.matmul(phrase_mat, p[1]);     // n x d_k
        ad::Var values = tape.matmul(phrase_mat, p[2]);   // n x d_v
        ad::Var scores = tape.scale(tape.matmul_nt(queries, keys), scale);  // n x n
        ad::Var weights = tape.softmax_rows(scores);
        ad::Var attended = tape.matmul(weights, values);       // n x d_v
        pooled = tape.mean_rows(attended);                     // 1 x d_v
        pooled = tape.layer_norm(pooled, p[3], p[4], 1e-5);
        // Flat attention: mean over query positions of the n x n matrix.
        out.attention.push_back(tape.mean_rows(weights));      // 1 x n
    }
    ad::Var hid = tape.tanh(tape.add_row(tape.matmul(pooled, p[5]), p[6]));
    out.logits = tape.add_row(tape.matmul(hid, p[7]), p[8]);
    return out;
}

std::unique_ptr<AttentionClassifier> BaselineModel::clone() const {
    return std::unique_ptr<AttentionClassifier>(new BaselineModel(*this));
}

Tensor2 embed_phrases(std::span<const std::string> phrases, const EmbeddingMatrix& embeddings,
                      std::size_t max_seq_len) {
    std::size_t n = phrases.size();
    if (max_seq_len > 0) n = std::min(n, max_seq_len);
    Tensor2 out(n, embeddings.dim());
    for (std::size_t i = 0; i < n; ++i) {
        auto idx = embeddings.index_of(phrases[i]);
        if (!idx) throw DataError("embed_phrases: phrase '" + phrases[i] + "' not in vocabulary");
        auto row = embeddings.row(*idx);
        std::copy(row.begin(), row.end(), out.row(i).begin());
    }
    return out;
}

std::vector<double> logits_to_scores(const Tensor2& logits, TaskKind kind) {
    std::vector<double> out(logits.data.size());
    if (kind == TaskKind::multi_class) {
        Tensor2 p = softmax_rows(logits);
        out.assign(p.data.begin(), p.data.end());
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            double z = logits.data[i];
            out[i] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        }
    }
    return out;
}

std::string file_fnv64_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(ss.str())));
    return buf;
}

void save_checkpoint(const AttentionClassifier& model, const std::string& path,
                     const std::string& ontology_path, const std::string& embeddings_path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, kFormatVersion);
    const ModelConfig& c = model.config();
    write_string(out, model.kind());
    write_u64(out, model.block_count());
    std::size_t dim = 0;
    std::vector<std::string> class_ids;
    if (const auto* psat = dynamic_cast<const PsatModel*>(&model)) {
        dim = psat->embedding_dim();
        for (const auto& b : psat->blocks()) class_ids.push_back(b.class_id);
    } else if (const auto* base = dynamic_cast<const BaselineModel*>(&model)) {
        dim = base->embedding_dim();
    }
    write_u64(out, dim);
    write_u64(out, c.d_k);
    write_u64(out, c.d_v);
    write_u64(out, c.hidden);
    write_u64(out, c.label_dim);
    write_u64(out, c.max_seq_len);
    write_string(out, task_kind_name(c.task_kind));
    write_u64(out, class_ids.size());
    for (const std::string& id : class_ids) write_string(out, id);

    auto params = model.parameters();
    write_u64(out, params.size());
    for (const Tensor2* p : params) write_tensor(out, *p);
    if (!out) throw DataError("write failure on checkpoint: " + path);
    out.close();

    nlohmann::ordered_json manifest;
    manifest["format_version"] = kFormatVersion;
    manifest["model_kind"] = model.kind();
    manifest["task_kind"] = task_kind_name(c.task_kind);
    manifest["max_seq_len"] = c.max_seq_len;
    manifest["ontology"] = {{"path", ontology_path},
                            {"fnv64", ontology_path.empty() ? "" : file_fnv64_hex(ontology_path)}};
    manifest["embeddings"] = {
        {"path", embeddings_path},
        {"fnv64", embeddings_path.empty() ? "" : file_fnv64_hex(embeddings_path)}};
    std::ofstream mout(path + ".manifest.json", std::ios::binary);
    if (!mout) throw DataError("cannot write checkpoint manifest for: " + path);
    mout << manifest.dump(2) << '\n';
}

std::unique_ptr<AttentionClassifier> load_checkpoint(const std::string& path,
                                                     const Ontology* ontology,
                                                     const EmbeddingMatrix& embeddings,
                                                     const std::string& ontology_path,
                                                     const std::string& embeddings_path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("not a PSAT checkpoint: " + path);
    }
    std::uint64_t version = read_u64(in);
    if (version != kFormatVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    std::string model_kind = read_string(in);
    std::uint64_t blocks = read_u64(in);
    std::uint64_t dim = read_u64(in);
    ModelConfig c;
    c.d_k = read_u64(in);
    c.d_v = read_u64(in);
    c.hidden = read_u64(in);
    c.label_dim = read_u64(in);
    c.max_seq_len = read_u64(in);
    c.task_kind = parse_task_kind(read_string(in));
    std::uint64_t n_ids = read_u64(in);
    std::vector<std::string> class_ids;
    for (std::uint64_t i = 0; i < n_ids; ++i) class_ids.push_back(read_string(in));

    std::uint64_t n_params = read_u64(in);
    std::vector<Tensor2> params;
    params.reserve(n_params);
    for (std::uint64_t i = 0; i < n_params; ++i) params.push_back(read_tensor(in));
    if (!in) throw DataError("truncated checkpoint: " + path);

    // Optional provenance verification against the sidecar manifest.
    if (!ontology_path.empty() || !embeddings_path.empty()) {
        std::ifstream min(path + ".manifest.json", std::ios::binary);
        if (min) {
            nlohmann::json manifest = nlohmann::json::parse(min);
            if (!ontology_path.empty() && !manifest["ontology"]["fnv64"].get<std::string>().empty() &&
                manifest["ontology"]["fnv64"] != file_fnv64_hex(ontology_path)) {
                throw DataError("ontology file does not match checkpoint manifest hash: " +
                                ontology_path);
            }
            if (!embeddings_path.empty() &&
                !manifest["embeddings"]["fnv64"].get<std::string>().empty() &&
                manifest["embeddings"]["fnv64"] != file_fnv64_hex(embeddings_path)) {
                throw DataError("embedding file does not match checkpoint manifest hash: " +
                                embeddings_path);
            }
        }
    }

    if (dim != embeddings.dim()) {
        throw DataError("checkpoint embedding dim " + std::to_string(dim) +
                        " does not match loaded embeddings (" + std::to_string(embeddings.dim()) +
                        ")");
    }

    if (model_kind == "psat") {
        if (!ontology) throw DataError("loading a PSAT checkpoint requires the ontology");
        if (ontology->class_count() != blocks) {
            throw DataError("checkpoint has " + std::to_string(blocks) +
                            " blocks but ontology has " +
                            std::to_string(ontology->class_count()) + " classes");
        }
        PsatModel model(c, dim);
        if (params.size() != blocks * 5 + 4) throw DataError("checkpoint parameter count mismatch");
        for (std::size_t i = 0; i < blocks; ++i) {
            if (ontology->classes[i].id != class_ids[i]) {
                throw DataError("checkpoint block " + std::to_string(i) + " was trained for '" +
                                class_ids[i] + "' but ontology class is '" +
                                ontology->classes[i].id + "'");
            }
            PsatModel::Block b;
            b.class_id = class_ids[i];
            ConceptMatrix cm = concept_matrix(*ontology, b.class_id, embeddings);
            b.query_source = std::move(cm.vectors);
            b.query_mean = mean_rows_value(b.query_source);
            b.w_q = std::move(params[i * 5 + 0]);
            b.w_k = std::move(params[i * 5 + 1]);
            b.w_v = std::move(params[i * 5 + 2]);
            b.ln_gain = std::move(params[i * 5 + 3]);
            b.ln_bias = std::move(params[i * 5 + 4]);
            model.blocks_.push_back(std::move(b));
        }
        model.head_w1_ = std::move(params[blocks * 5 + 0]);
        model.head_b1_ = std::move(params[blocks * 5 + 1]);
        model.head_w2_ = std::move(params[blocks * 5 + 2]);
        model.head_b2_ = std::move(params[blocks * 5 + 3]);
        return std::unique_ptr<AttentionClassifier>(new PsatModel(std::move(model)));
    }
    if (model_kind == "baseline") {
        if (params.size() != 9) throw DataError("checkpoint parameter count mismatch");
        BaselineModel model(c, dim);
        model.w_q_ = std::move(params[0]);
        model.w_k_ = std::move(params[1]);
        model.w_v_ = std::move(params[2]);
        model.ln_gain_ = std::move(params[3]);
        model.ln_bias_ = std::move(params[4]);
        model.head_w1_ = std::move(params[5]);
        model.head_b1_ = std::move(params[6]);
        model.head_w2_ = std::move(params[7]);
        model.head_b2_ = std::move(params[8]);
        return std::unique_ptr<AttentionClassifier>(new BaselineModel(std::move(model)));
    }
    throw DataError("unknown model kind in checkpoint: " + model_kind);
}

}  // namespace psat
