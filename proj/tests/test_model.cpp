#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "psat/grad_check.hpp"
#include "psat/model.hpp"
#include "psat/rng.hpp"

using namespace psat;

namespace {

const std::string kDataDir = PSAT_DATA_DIR;

// Embeddings with seeded random unit-scale rows for every ontology concept
// plus extra document phrases.
EmbeddingMatrix test_embeddings(const Ontology& onto, std::size_t dim, std::uint64_t seed,
                                std::size_t extra_phrases = 6) {
    std::vector<std::string> phrases;
    std::set<std::string> seen;
    for (const std::string& c : onto.all_concept_phrases()) {
        if (seen.insert(c).second) phrases.push_back(c);
    }
    for (std::size_t i = 0; i < extra_phrases; ++i) {
        phrases.push_back("extra_phrase_" + std::to_string(i));
    }
    Rng rng(seed);
    Tensor2 vecs(phrases.size(), dim);
    for (double& v : vecs.data) v = rng.uniform(-1.0, 1.0);
    return EmbeddingMatrix(std::move(phrases), std::move(vecs));
}

Ontology toy_ontology(std::size_t k, std::size_t concepts_per_class = 3) {
    Ontology onto;
    onto.name = "toy";
    for (std::size_t c = 0; c < k; ++c) {
        OntologyClass cls;
        cls.id = "T" + std::to_string(c);
        cls.question_text = "toy question " + std::to_string(c);
        for (std::size_t j = 0; j < concepts_per_class; ++j) {
            cls.concepts.push_back({"toy_" + std::to_string(c) + "_" + std::to_string(j),
                                    std::nullopt});
        }
        onto.classes.push_back(std::move(cls));
    }
    return onto;
}

Tensor2 random_embeds(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Tensor2 t(n, d);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("block count follows the ontology") {
    auto phq9 = load_ontology(kDataDir + "/phq9.onto.json").ontology;
    auto cssrs = load_ontology(kDataDir + "/cssrs.onto.json").ontology;
    ModelConfig cfg;
    cfg.label_dim = 9;
    cfg.task_kind = TaskKind::multi_label;

    EmbeddingMatrix e12 = test_embeddings(phq9, 20, 1);
    PsatModel m12 = PsatModel::init(phq9, e12, cfg);
    CHECK(m12.block_count() == 12);

    EmbeddingMatrix e5 = test_embeddings(cssrs, 20, 1);
    cfg.label_dim = 5;
    PsatModel m5 = PsatModel::init(cssrs, e5, cfg);
    CHECK(m5.block_count() == 5);

    // label_dim 9 with 12 blocks: logits stay 9-dimensional.
    Tensor2 embeds = random_embeds(4, 20, 3);
    ForwardResult fr = m12.forward(embeds);
    CHECK(fr.logits.cols == 9);
    CHECK(fr.attention.size() == 12);
}

TEST_CASE("fixed seed makes two inits parameter-identical") {
    Ontology onto = toy_ontology(3);
    EmbeddingMatrix emb = test_embeddings(onto, 10, 2);
    ModelConfig cfg;
    cfg.seed = 99;
    cfg.label_dim = 3;
    PsatModel a = PsatModel::init(onto, emb, cfg);
    PsatModel b = PsatModel::init(onto, emb, cfg);
    auto pa = static_cast<const AttentionClassifier&>(a).parameters();
    auto pb = static_cast<const AttentionClassifier&>(b).parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->data == pb[i]->data);
    }
}

TEST_CASE("single-phrase document gets attention [1.0] in every block") {
    Ontology onto = toy_ontology(2);
    EmbeddingMatrix emb = test_embeddings(onto, 8, 3);
    ModelConfig cfg;
    cfg.label_dim = 2;
    PsatModel model = PsatModel::init(onto, emb, cfg);
    ForwardResult fr = model.forward(random_embeds(1, 8, 4));
    REQUIRE(fr.attention.size() == 2);
    for (const auto& row : fr.attention) {
        REQUIRE(row.size() == 1);
        CHECK(row[0] == doctest::Approx(1.0));
    }
}

TEST_CASE("zero query projection gives uniform attention") {
    Ontology onto = toy_ontology(2);
    EmbeddingMatrix emb = test_embeddings(onto, 8, 5);
    ModelConfig cfg;
    cfg.label_dim = 2;
    PsatModel model = PsatModel::init(onto, emb, cfg);
    model.parameters()[0]->fill(0.0);  // block 0's W_q
    ForwardResult fr = model.forward(random_embeds(5, 8, 6));
    for (double w : fr.attention[0]) CHECK(w == doctest::Approx(0.2));
}

TEST_CASE("hand-computed 2-phrase attention matches the closed form") {
    // d = 2, d_k = 1. Query source mean [1, 0], W_q = [[1],[0]] -> Q = [1].
    // Phrases are the basis vectors; W_k = [[ln 2],[0]] -> keys [ln2, 0],
    // so the weights must be softmax([ln2, 0]) = [2/3, 1/3].
    Ontology onto = toy_ontology(1, 1);
    std::vector<std::string> phrases = {"toy_0_0", "p_a", "p_b"};
    Tensor2 vecs = Tensor2::from_rows({{1, 0}, {1, 0}, {0, 1}});
    EmbeddingMatrix emb(phrases, vecs);
    ModelConfig cfg;
    cfg.d_k = 1;
    cfg.d_v = 2;
    cfg.label_dim = 1;
    PsatModel model = PsatModel::init(onto, emb, cfg);
    auto params = model.parameters();
    *params[0] = Tensor2::from_rows({{1}, {0}});                 // W_q
    *params[1] = Tensor2::from_rows({{std::log(2.0)}, {0}});     // W_k
    Tensor2 doc = Tensor2::from_rows({{1, 0}, {0, 1}});
    ForwardResult fr = model.forward(doc);
    REQUIRE(fr.attention.size() == 1);
    REQUIRE(fr.attention[0].size() == 2);
    CHECK(fr.attention[0][0] == doctest::Approx(2.0 / 3.0));
    CHECK(fr.attention[0][1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("attention rows sum to one over 100 random documents") {
    Ontology onto = toy_ontology(4);
    EmbeddingMatrix emb = test_embeddings(onto, 12, 7);
    ModelConfig cfg;
    cfg.label_dim = 4;
    PsatModel model = PsatModel::init(onto, emb, cfg);
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 1 + rng.below(12);
        ForwardResult fr = model.forward(random_embeds(n, 12, rng.raw()));
        for (const auto& row : fr.attention) {
            double sum = 0.0;
            for (double w : row) {
                CHECK(w >= 0.0);
                sum += w;
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("permuting phrases permutes attention and preserves logits") {
    Ontology onto = toy_ontology(3);
    EmbeddingMatrix emb = test_embeddings(onto, 10, 9);
    ModelConfig cfg;
    cfg.label_dim = 3;
    PsatModel model = PsatModel::init(onto, emb, cfg);

    Tensor2 doc = random_embeds(6, 10, 10);
    std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
    Tensor2 permuted(6, 10);
    for (std::size_t i = 0; i < 6; ++i) {
        for (std::size_t j = 0; j < 10; ++j) permuted.at(i, j) = doc.at(perm[i], j);
    }
    ForwardResult a = model.forward(doc);
    ForwardResult b = model.forward(permuted);
    for (std::size_t blk = 0; blk < a.attention.size(); ++blk) {
        for (std::size_t i = 0; i < perm.size(); ++i) {
            CHECK(b.attention[blk][i] == doctest::Approx(a.attention[blk][perm[i]]));
        }
    }
    for (std::size_t i = 0; i < a.logits.size(); ++i) {
        CHECK(std::abs(a.logits.data[i] - b.logits.data[i]) < 1e-9);
    }
}

TEST_CASE("query independence: editing another class leaves a block's attention unchanged") {
    Ontology onto_a = toy_ontology(3);
    Ontology onto_b = onto_a;
    onto_b.classes[2].concepts = {{"toy_2_0", std::nullopt}};  // shrink class 2 only

    ModelConfig cfg;
    cfg.label_dim = 3;
    cfg.seed = 5;
    // Shared embedding table covering both variants.
    EmbeddingMatrix emb = test_embeddings(onto_a, 10, 11);
    PsatModel ma = PsatModel::init(onto_a, emb, cfg);
    PsatModel mb = PsatModel::init(onto_b, emb, cfg);

    Tensor2 doc = random_embeds(5, 10, 12);
    ForwardResult fa = ma.forward(doc);
    ForwardResult fb = mb.forward(doc);
    CHECK(fa.attention[0] == fb.attention[0]);  // blocks share no parameters
    CHECK(fa.attention[1] == fb.attention[1]);
}

TEST_CASE("empty document takes the head bias path") {
    Ontology onto = toy_ontology(2);
    EmbeddingMatrix emb = test_embeddings(onto, 8, 13);
    ModelConfig cfg;
    cfg.label_dim = 2;
    cfg.hidden = 4;
    PsatModel model = PsatModel::init(onto, emb, cfg);
    auto params = model.parameters();
    // Give the head biases recognizable values: logits must equal
    // tanh(b1) W2 + b2 with a zero concatenation vector.
    Tensor2& b1 = *params[params.size() - 3];
    Tensor2& w2 = *params[params.size() - 2];
    Tensor2& b2 = *params[params.size() - 1];
    for (std::size_t i = 0; i < b1.size(); ++i) b1.data[i] = 0.1 * (static_cast<double>(i) + 1);
    for (std::size_t i = 0; i < b2.size(); ++i) b2.data[i] = -0.3 * (static_cast<double>(i) + 1);

    ForwardResult fr = model.forward(Tensor2(0, 8));
    CHECK(fr.attention.empty());
    Tensor2 h(1, b1.cols);
    for (std::size_t i = 0; i < b1.size(); ++i) h.data[i] = std::tanh(b1.data[i]);
    Tensor2 expect = matmul(h, w2);
    for (std::size_t i = 0; i < expect.size(); ++i) expect.data[i] += b2.data[i];
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(fr.logits.data[i] == doctest::Approx(expect.data[i]));
    }
}

TEST_CASE("full model gradient check at spec tolerance") {
    Ontology onto = toy_ontology(2);
    EmbeddingMatrix emb = test_embeddings(onto, 8, 14);
    ModelConfig cfg;
    cfg.d_k = 4;
    cfg.d_v = 4;
    cfg.hidden = 8;
    cfg.label_dim = 2;
    cfg.task_kind = TaskKind::multi_label;
    PsatModel model = PsatModel::init(onto, emb, cfg);
    Tensor2 doc = random_embeds(3, 8, 15);
    Tensor2 targets = Tensor2::from_rows({{1, 0}});

    std::vector<Tensor2> params;
    for (const Tensor2* p : static_cast<const AttentionClassifier&>(model).parameters()) {
        params.push_back(*p);
    }
    auto f = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
        auto tf = model.build_forward(tape, vars, doc);
        return tape.bce_with_logits(tf.logits, targets, 1.0);
    };
    GradCheckReport report = grad_check(f, params, 1e-5, 1e-4);
    CAPTURE(report.max_rel_error);
    CHECK(report.passed);
}

TEST_CASE("baseline model behavior") {
    ModelConfig cfg;
    cfg.label_dim = 2;
    cfg.d_k = 4;
    cfg.d_v = 4;
    cfg.hidden = 8;
    BaselineModel model = BaselineModel::init(8, cfg);

    SUBCASE("single phrase gets attention [1.0]") {
        ForwardResult fr = model.forward(random_embeds(1, 8, 16));
        REQUIRE(fr.attention.size() == 1);
        REQUIRE(fr.attention[0].size() == 1);
        CHECK(fr.attention[0][0] == doctest::Approx(1.0));
    }
    SUBCASE("identical phrase embeddings give uniform flat attention") {
        Tensor2 doc(4, 8);
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 8; ++j) doc.at(i, j) = 0.25 * (static_cast<double>(j) - 3);
        }
        ForwardResult fr = model.forward(doc);
        for (double w : fr.attention[0]) CHECK(w == doctest::Approx(0.25));
    }
    SUBCASE("flat attention sums to one on random input") {
        ForwardResult fr = model.forward(random_embeds(7, 8, 17));
        double sum = 0.0;
        for (double w : fr.attention[0]) sum += w;
        CHECK(std::abs(sum - 1.0) < 1e-6);
    }
    SUBCASE("parameter count within 2x of one PSAT block") {
        Ontology onto = toy_ontology(1);
        EmbeddingMatrix emb = test_embeddings(onto, 8, 18);
        PsatModel psat = PsatModel::init(onto, emb, cfg);
        auto count_of = [](const std::vector<const Tensor2*>& ps, std::size_t from,
                           std::size_t to) {
            std::size_t total = 0;
            for (std::size_t i = from; i < to; ++i) total += ps[i]->size();
            return total;
        };
        auto bp = static_cast<const AttentionClassifier&>(model).parameters();
        auto pp = static_cast<const AttentionClassifier&>(psat).parameters();
        std::size_t baseline_block = count_of(bp, 0, 5);  // attention part only
        std::size_t psat_block = count_of(pp, 0, 5);
        CHECK(baseline_block <= 2 * psat_block);
        CHECK(psat_block <= 2 * baseline_block);
    }
    SUBCASE("baseline gradient check") {
        Tensor2 doc = random_embeds(3, 8, 19);
        Tensor2 targets = Tensor2::from_rows({{0, 1}});
        std::vector<Tensor2> params;
        for (const Tensor2* p : static_cast<const AttentionClassifier&>(model).parameters()) {
            params.push_back(*p);
        }
        auto f = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
            auto tf = model.build_forward(tape, vars, doc);
            return tape.bce_with_logits(tf.logits, targets, 1.0);
        };
        CHECK(grad_check(f, params, 1e-5, 1e-4).passed);
    }
}

TEST_CASE("checkpoint round trip preserves the forward pass bit-exactly") {
    Ontology onto = toy_ontology(3);
    EmbeddingMatrix emb = test_embeddings(onto, 10, 20);
    ModelConfig cfg;
    cfg.label_dim = 3;
    cfg.task_kind = TaskKind::multi_label;
    cfg.max_seq_len = 32;
    PsatModel model = PsatModel::init(onto, emb, cfg);

    auto dir = std::filesystem::temp_directory_path();
    std::string ckpt = (dir / "psat_model_rt.ckpt").string();
    save_checkpoint(model, ckpt, "", "");
    auto back = load_checkpoint(ckpt, &onto, emb);
    CHECK(back->kind() == "psat");
    CHECK(back->config().max_seq_len == 32);
    CHECK(back->config().task_kind == TaskKind::multi_label);

    Tensor2 doc = random_embeds(5, 10, 21);
    ForwardResult a = model.forward(doc);
    ForwardResult b = back->forward(doc);
    CHECK(a.logits.data == b.logits.data);
    CHECK(a.attention == b.attention);

    SUBCASE("baseline checkpoints round trip too") {
        BaselineModel base = BaselineModel::init(10, cfg);
        std::string bckpt = (dir / "psat_baseline_rt.ckpt").string();
        save_checkpoint(base, bckpt, "", "");
        auto bb = load_checkpoint(bckpt, nullptr, emb);
        CHECK(bb->kind() == "baseline");
        ForwardResult x = base.forward(doc);
        ForwardResult y = bb->forward(doc);
        CHECK(x.logits.data == y.logits.data);
    }
    SUBCASE("ontology mismatch is rejected") {
        Ontology other = toy_ontology(4);
        EmbeddingMatrix emb4 = test_embeddings(other, 10, 22);
        CHECK_THROWS_AS(load_checkpoint(ckpt, &other, emb4), DataError);
    }
}
