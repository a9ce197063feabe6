// psat: phrase-stream attention text classification pipeline.
//
// Subcommands cover the whole workflow: extract-phrases, embed, tag,
// train, eval, explain, synth, gradcheck, validate-ontology.
// Exit codes: 0 success, 1 usage error, 2 data/validation error,
// 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "psat/corpus.hpp"
#include "psat/embedding.hpp"
#include "psat/explain.hpp"
#include "psat/grad_check.hpp"
#include "psat/keyphrase.hpp"
#include "psat/metrics.hpp"
#include "psat/model.hpp"
#include "psat/ontology.hpp"
#include "psat/rng.hpp"
#include "psat/tagger.hpp"
#include "psat/text.hpp"
#include "psat/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Lenient corpus reader for stages that only need text (labels optional),
// with the same user_id merging as the labeled loader.
std::vector<psat::LabeledDocument> load_texts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw psat::DataError("cannot open corpus file: " + path);
    std::vector<psat::LabeledDocument> docs;
    std::map<std::string, std::size_t> user_slot;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw psat::DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!j.contains("doc_id") || !j.contains("text")) {
            throw psat::DataError(path + ":" + std::to_string(lineno) +
                                  ": record needs doc_id and text");
        }
        std::string text = j["text"].get<std::string>();
        std::vector<int> labels;
        if (j.contains("labels")) labels = j["labels"].get<std::vector<int>>();
        if (j.contains("user_id") && !j["user_id"].is_null()) {
            std::string user = j["user_id"].get<std::string>();
            auto it = user_slot.find(user);
            if (it != user_slot.end()) {
                docs[it->second].text += "\n";
                docs[it->second].text += text;
                continue;
            }
            user_slot.emplace(user, docs.size());
            docs.push_back({user, std::move(text), std::move(labels)});
        } else {
            docs.push_back({j["doc_id"].get<std::string>(), std::move(text), std::move(labels)});
        }
    }
    return docs;
}

void log_config(const CLI::App* sub) {
    std::string dump = const_cast<CLI::App*>(sub)->config_to_str(true, false);
    std::cerr << "[psat] resolved config for '" << sub->get_name() << "':\n" << dump;
}

struct EvalBundle {
    std::vector<psat::LabeledTagged> joined;
    std::vector<std::vector<double>> scores;
    std::vector<std::vector<int>> labels;
    std::vector<std::vector<int>> decisions;
    std::vector<psat::DocAttention> attention;    // truncated phrase streams
    std::vector<std::vector<std::string>> highlighted;  // top-m phrases per doc
};

EvalBundle run_model_over(const psat::AttentionClassifier& model,
                          const std::vector<psat::LabeledTagged>& joined,
                          const psat::EmbeddingMatrix& embeddings, std::size_t top_m) {
    EvalBundle out;
    out.joined = joined;
    const psat::ModelConfig& cfg = model.config();
    for (const psat::LabeledTagged& lt : joined) {
        psat::Tensor2 embeds =
            psat::embed_phrases(lt.doc.phrases, embeddings, cfg.max_seq_len);
        psat::ForwardResult fr = model.forward(embeds);
        std::vector<double> scores = psat::logits_to_scores(fr.logits, cfg.task_kind);
        out.decisions.push_back(psat::decide(scores, cfg.task_kind));
        out.scores.push_back(std::move(scores));
        out.labels.push_back(lt.labels);

        psat::DocAttention da;
        da.phrases.assign(lt.doc.phrases.begin(),
                          lt.doc.phrases.begin() +
                              static_cast<std::ptrdiff_t>(embeds.rows));
        da.rows = fr.attention;
        out.highlighted.push_back(psat::highlighted_phrases(lt.doc, fr.attention, top_m));
        out.attention.push_back(std::move(da));
    }
    return out;
}

double majority_prior(const std::vector<std::vector<int>>& labels, psat::TaskKind kind,
                      std::size_t label_dim) {
    std::size_t total = 0, ones = 0;
    if (kind == psat::TaskKind::multi_class) {
        std::map<int, std::size_t> freq;
        for (const auto& l : labels) freq[l.at(0)]++;
        std::size_t best = 0;
        for (const auto& [cls, n] : freq) best = std::max(best, n);
        return static_cast<double>(best) / static_cast<double>(labels.size());
    }
    for (const auto& l : labels) {
        for (int v : l) {
            ++total;
            ones += v == 1 ? 1 : 0;
        }
    }
    (void)label_dim;
    double p = static_cast<double>(ones) / static_cast<double>(total);
    return std::max(p, 1.0 - p);
}

nlohmann::ordered_json build_report(const psat::AttentionClassifier& model,
                                    const EvalBundle& bundle, const psat::Ontology& ontology,
                                    const psat::EmbeddingMatrix& embeddings, double p0_flag) {
    const psat::TaskKind kind = model.config().task_kind;
    const std::size_t label_dim = model.config().label_dim;

    auto per_class = psat::confusion_counts(bundle.labels, bundle.decisions, kind, label_dim);
    psat::MacroPrf prf = psat::precision_recall_f1_macro(per_class);
    double mcc_value = psat::mcc(psat::pooled_confusion(bundle.labels, bundle.decisions, kind,
                                                        label_dim));
    double auc = psat::auc_roc_macro(bundle.scores, bundle.labels, kind, label_dim);

    // Exact binomial tail of correct decisions against the majority prior
    // (or an explicit --p0).
    std::int64_t n_correct = 0, n_total = 0;
    if (kind == psat::TaskKind::multi_label) {
        for (std::size_t d = 0; d < bundle.labels.size(); ++d) {
            for (std::size_t c = 0; c < bundle.labels[d].size(); ++c) {
                ++n_total;
                n_correct += bundle.labels[d][c] == bundle.decisions[d][c] ? 1 : 0;
            }
        }
    } else {
        for (std::size_t d = 0; d < bundle.labels.size(); ++d) {
            ++n_total;
            n_correct += bundle.labels[d] == bundle.decisions[d] ? 1 : 0;
        }
    }
    double p0 = p0_flag > 0.0 ? p0_flag : majority_prior(bundle.labels, kind, label_dim);
    double binom = psat::binomial_test(n_correct, n_total, p0);

    // AKC over the highlighted phrase vectors vs all embeddable concepts.
    psat::AkcInput akc_in;
    for (std::size_t d = 0; d < bundle.highlighted.size(); ++d) {
        std::vector<std::vector<double>> vecs;
        for (const std::string& p : bundle.highlighted[d]) {
            if (auto idx = embeddings.index_of(p)) {
                auto row = embeddings.row(*idx);
                vecs.emplace_back(row.begin(), row.end());
            }
        }
        akc_in.highlighted.push_back(std::move(vecs));
    }
    std::set<std::string> seen;
    for (const std::string& c : ontology.all_concept_phrases()) {
        if (!seen.insert(c).second) continue;
        if (auto idx = embeddings.index_of(c)) {
            auto row = embeddings.row(*idx);
            akc_in.concepts.emplace_back(row.begin(), row.end());
        }
    }
    psat::AkcResult akc_res = psat::akc(akc_in);

    psat::CumulativeMode mode =
        model.kind() == "psat" ? psat::CumulativeMode::cca : psat::CumulativeMode::csa;
    psat::CumulativeResult cum =
        psat::cumulative_attention(bundle.attention, ontology, embeddings, mode);

    nlohmann::ordered_json report;
    report["task"] = psat::task_kind_name(kind);
    report["n_docs"] = bundle.labels.size();
    report["precision"] = prf.precision;
    report["recall"] = prf.recall;
    report["f1_macro"] = prf.f1;
    report["mcc"] = mcc_value;
    report["auc_roc"] = auc;
    report["akc_raw"] = akc_res.raw;
    report["akc_rescaled"] = akc_res.rescaled;
    report["binomial_p"] = binom;
    report["binomial_n_correct"] = n_correct;
    report["binomial_n_total"] = n_total;
    report["binomial_p0"] = p0;

    nlohmann::ordered_json jper;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        std::string key;
        if (kind == psat::TaskKind::binary) {
            key = c == 0 ? "positive" : "negative";
        } else if (label_dim == ontology.class_count()) {
            key = ontology.classes[c].id;
        } else {
            key = "label_" + std::to_string(c);
        }
        jper[key] = {{"tp", per_class[c].tp},
                     {"fp", per_class[c].fp},
                     {"tn", per_class[c].tn},
                     {"fn", per_class[c].fn},
                     {"f1", prf.per_class_f1[c]}};
    }
    report["per_class"] = std::move(jper);

    nlohmann::ordered_json jcum;
    jcum["mode"] = mode == psat::CumulativeMode::cca ? "CCA" : "CSA";
    nlohmann::ordered_json jmass;
    for (std::size_t c = 0; c < cum.per_class.size(); ++c) {
        jmass[ontology.classes[c].id] = cum.per_class[c];
    }
    jcum["per_class"] = std::move(jmass);
    jcum["normalized_entropy"] = cum.normalized_entropy;
    jcum["skipped_empty_docs"] = cum.skipped_empty;
    report["cumulative_attention"] = std::move(jcum);
    return report;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"psat: phrase-stream cross-attention text classification pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file mirroring flag names")
        ->envname("PSAT_CONFIG");
    app.allow_config_extras(false);

    // ---- extract-phrases ----
    auto* cmd_extract = app.add_subcommand(
        "extract-phrases", "Build a ranked keyphrase vocabulary from a raw JSONL corpus");
    struct {
        std::string input, output;
        std::size_t max_ngram = 5, top_n = 4700;
        double threshold = 0.65, lambda = 0.7;
    } ex;
    cmd_extract->add_option("--input", ex.input, "Corpus JSONL")->required();
    cmd_extract->add_option("--output", ex.output, "Vocabulary TSV out")->required();
    cmd_extract->add_option("--max-ngram", ex.max_ngram, "Maximum phrase length in tokens");
    cmd_extract->add_option("--threshold", ex.threshold, "Normalized TF-IDF cutoff");
    cmd_extract->add_option("--top-n", ex.top_n, "Vocabulary size cap");
    cmd_extract->add_option("--lambda", ex.lambda, "MMR relevance/diversity tradeoff in [0,1]");
    cmd_extract->callback([&]() {
        log_config(cmd_extract);
        auto docs = load_texts(ex.input);
        std::vector<std::string> texts;
        texts.reserve(docs.size());
        for (auto& d : docs) texts.push_back(d.text);
        psat::KeyphraseConfig cfg = psat::KeyphraseConfig::defaults();
        cfg.max_ngram = ex.max_ngram;
        cfg.threshold = ex.threshold;
        cfg.top_n = ex.top_n;
        cfg.mmr_lambda = ex.lambda;
        psat::PhraseVocabulary vocab = psat::build_vocabulary(texts, cfg);
        vocab.save(ex.output);
        std::cerr << "[psat] kept " << vocab.entries.size() << " phrases\n";
    });

    // ---- tag ----
    auto* cmd_tag = app.add_subcommand("tag", "Rewrite documents as vocabulary phrase streams");
    struct {
        std::string input, vocab, output;
    } tg;
    cmd_tag->add_option("--input", tg.input, "Corpus JSONL")->required();
    cmd_tag->add_option("--vocab", tg.vocab, "Vocabulary TSV")->required();
    cmd_tag->add_option("--output", tg.output, "Tagged corpus JSONL out")->required();
    cmd_tag->callback([&]() {
        log_config(cmd_tag);
        auto docs = load_texts(tg.input);
        psat::PhraseVocabulary vocab = psat::PhraseVocabulary::load(tg.vocab);
        std::vector<psat::TaggedDocument> tagged;
        tagged.reserve(docs.size());
        for (const auto& d : docs) tagged.push_back(psat::tag_document(d.doc_id, d.text, vocab));
        psat::save_tagged_corpus(tagged, tg.output);
        std::size_t nonempty = 0;
        for (const auto& t : tagged) nonempty += t.phrases.empty() ? 0 : 1;
        std::cerr << "[psat] tagged " << tagged.size() << " documents (" << nonempty
                  << " with phrases)\n";
    });

    // ---- embed ----
    auto* cmd_embed =
        app.add_subcommand("embed", "Train skip-gram phrase embeddings over a tagged corpus");
    struct {
        std::string tagged, vocab, output;
        psat::SkipgramConfig cfg;
    } em;
    cmd_embed->add_option("--tagged", em.tagged, "Tagged corpus JSONL")->required();
    cmd_embed->add_option("--vocab", em.vocab, "Vocabulary TSV")->required();
    cmd_embed->add_option("--output", em.output, "Embedding file out")->required();
    cmd_embed->add_option("--dim", em.cfg.dim, "Embedding dimension");
    cmd_embed->add_option("--window", em.cfg.window, "Context window");
    cmd_embed->add_option("--negatives", em.cfg.negatives, "Negative samples per pair");
    cmd_embed->add_option("--epochs", em.cfg.epochs, "Training epochs");
    cmd_embed->add_option("--lr", em.cfg.learning_rate, "Initial learning rate");
    cmd_embed->add_option("--seed", em.cfg.seed, "RNG seed");
    cmd_embed->add_option("--threads", em.cfg.threads,
                          "Worker threads (>1 is hogwild, not deterministic)");
    cmd_embed->callback([&]() {
        log_config(cmd_embed);
        auto tagged = psat::load_tagged_corpus(em.tagged);
        psat::PhraseVocabulary vocab = psat::PhraseVocabulary::load(em.vocab);
        psat::SkipgramStats stats;
        psat::EmbeddingMatrix m = psat::train_skipgram(tagged, vocab, em.cfg, &stats);
        m.save(em.output);
        std::cerr << "[psat] trained " << m.size() << "x" << m.dim() << " embedding matrix\n";
        for (std::size_t e = 0; e < stats.epoch_loss.size(); ++e) {
            std::cerr << "[psat] epoch " << e + 1 << " skipgram loss " << stats.epoch_loss[e]
                      << "\n";
        }
    });

    // ---- synth ----
    auto* cmd_synth =
        app.add_subcommand("synth", "Generate a planted-phrase synthetic corpus from an ontology");
    struct {
        std::string ontology, output, plant_map, vocab_out;
        psat::SynthSpec spec;
        std::string task = "multi_label";
    } sy;
    cmd_synth->add_option("--ontology", sy.ontology, "Ontology JSON")->required();
    cmd_synth->add_option("--output", sy.output, "Corpus JSONL out")->required();
    cmd_synth->add_option("--plant-map", sy.plant_map, "Ground-truth plant map JSON out");
    cmd_synth->add_option("--vocab-out", sy.vocab_out, "Vocabulary TSV out (concepts + fillers)");
    cmd_synth->add_option("--n-docs", sy.spec.n_docs, "Number of documents");
    cmd_synth->add_option("--phrases-per-doc", sy.spec.phrases_per_doc, "Phrases per document");
    cmd_synth->add_option("--planted-classes", sy.spec.planted_classes_per_doc,
                          "Planted classes per document");
    cmd_synth->add_option("--noise", sy.spec.noise_phrase_ratio, "Noise phrase ratio in [0,1)");
    cmd_synth->add_option("--seed", sy.spec.seed, "RNG seed");
    cmd_synth->add_option("--task", sy.task, "multi_label or multi_class");
    cmd_synth->callback([&]() {
        log_config(cmd_synth);
        auto loaded = psat::load_ontology(sy.ontology);
        sy.spec.ontology = &loaded.ontology;
        sy.spec.task_kind = psat::parse_task_kind(sy.task);
        psat::SynthCorpus corpus = psat::synth_generate(sy.spec);
        psat::save_corpus(corpus.docs, sy.output);
        if (!sy.plant_map.empty()) psat::save_plant_map(corpus, sy.plant_map);
        if (!sy.vocab_out.empty()) corpus.vocabulary.save(sy.vocab_out);
        std::cerr << "[psat] generated " << corpus.docs.size() << " documents\n";
    });

    // ---- train ----
    auto* cmd_train = app.add_subcommand("train", "Train the cross-attention model or baseline");
    struct {
        std::string corpus, tagged, ontology, embeddings, output, history;
        std::string model = "psat", task = "multi_label", optimizer = "adam";
        psat::TrainConfig cfg;
        std::size_t label_dim = 0;  // 0 = infer
        std::size_t d_k = 32, d_v = 32, hidden = 64;
    } tr;
    cmd_train->add_option("--corpus", tr.corpus, "Labeled corpus JSONL")->required();
    cmd_train->add_option("--tagged", tr.tagged, "Tagged corpus JSONL")->required();
    cmd_train->add_option("--ontology", tr.ontology, "Ontology JSON")->required();
    cmd_train->add_option("--embeddings", tr.embeddings, "Embedding file")->required();
    cmd_train->add_option("--output", tr.output, "Checkpoint out")->required();
    cmd_train->add_option("--history", tr.history, "Training history CSV out");
    cmd_train->add_option("--model", tr.model, "psat or baseline");
    cmd_train->add_option("--task", tr.task, "binary, multi_label or multi_class");
    cmd_train->add_option("--label-dim", tr.label_dim, "Output count (default inferred)");
    cmd_train->add_option("--epochs", tr.cfg.epochs, "Training epochs");
    cmd_train->add_option("--batch-size", tr.cfg.batch_size, "Mini-batch size");
    cmd_train->add_option("--lr", tr.cfg.learning_rate, "Learning rate");
    cmd_train->add_option("--optimizer", tr.optimizer, "adam or sgd");
    cmd_train->add_option("--seed", tr.cfg.seed, "RNG seed");
    cmd_train->add_option("--patience", tr.cfg.early_stop_patience,
                          "Early stopping patience (0 disables)");
    cmd_train->add_option("--val-fraction", tr.cfg.validation_fraction, "Validation fraction");
    cmd_train->add_flag("--no-class-weights",
                        [&](std::int64_t) { tr.cfg.class_weights = false; },
                        "Disable inverse-frequency weighting for binary tasks");
    cmd_train->add_option("--threads", tr.cfg.threads, "Batch gradient worker threads");
    cmd_train->add_option("--d-k", tr.d_k, "Key/query projection width");
    cmd_train->add_option("--d-v", tr.d_v, "Value projection width");
    cmd_train->add_option("--hidden", tr.hidden, "Feed-forward hidden width");
    cmd_train->callback([&]() {
        log_config(cmd_train);
        tr.cfg.task_kind = psat::parse_task_kind(tr.task);
        tr.cfg.optimizer = tr.optimizer == "sgd" ? psat::OptimizerKind::sgd
                                                 : psat::OptimizerKind::adam;
        auto loaded = psat::load_ontology(tr.ontology);
        for (const std::string& w : loaded.warnings) std::cerr << "[psat] warning: " << w << "\n";
        psat::EmbeddingMatrix embeddings = psat::EmbeddingMatrix::load(tr.embeddings);
        auto corpus = psat::load_corpus(tr.corpus, tr.cfg.task_kind);
        auto tagged = psat::load_tagged_corpus(tr.tagged);
        auto joined = psat::join_corpus(corpus, tagged);
        if (joined.empty()) throw psat::DataError("train: empty corpus");

        psat::ModelConfig mc;
        mc.d_k = tr.d_k;
        mc.d_v = tr.d_v;
        mc.hidden = tr.hidden;
        mc.task_kind = tr.cfg.task_kind;
        mc.seed = tr.cfg.seed;
        if (tr.label_dim > 0) {
            mc.label_dim = tr.label_dim;
        } else if (tr.cfg.task_kind == psat::TaskKind::binary) {
            mc.label_dim = 1;
        } else if (tr.cfg.task_kind == psat::TaskKind::multi_label) {
            mc.label_dim = joined.front().labels.size();
        } else {
            mc.label_dim = loaded.ontology.class_count();
        }

        std::unique_ptr<psat::AttentionClassifier> model;
        if (tr.model == "psat") {
            model = std::make_unique<psat::PsatModel>(
                psat::PsatModel::init(loaded.ontology, embeddings, mc));
        } else if (tr.model == "baseline") {
            model = std::make_unique<psat::BaselineModel>(
                psat::BaselineModel::init(embeddings.dim(), mc));
        } else {
            throw psat::DataError("unknown --model '" + tr.model + "' (psat|baseline)");
        }

        psat::TrainHistory history = psat::train(*model, joined, embeddings, tr.cfg);
        psat::save_checkpoint(*model, tr.output, tr.ontology, tr.embeddings);
        if (!tr.history.empty()) history.save_csv(tr.history);
        std::cerr << "[psat] best epoch " << history.best_epoch + 1 << ", val loss "
                  << history.val_loss[history.best_epoch] << ", val macro-F1 "
                  << history.val_f1[history.best_epoch] << "\n";
    });

    // ---- eval ----
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint and write a report JSON");
    struct {
        std::string corpus, tagged, ontology, embeddings, checkpoint, output;
        std::size_t top_m = 10;
        double p0 = 0.0;  // 0 = majority prior
    } ev;
    cmd_eval->add_option("--corpus", ev.corpus, "Labeled corpus JSONL")->required();
    cmd_eval->add_option("--tagged", ev.tagged, "Tagged corpus JSONL")->required();
    cmd_eval->add_option("--ontology", ev.ontology, "Ontology JSON")->required();
    cmd_eval->add_option("--embeddings", ev.embeddings, "Embedding file")->required();
    cmd_eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
    cmd_eval->add_option("--output", ev.output, "Report JSON out")->required();
    cmd_eval->add_option("--top-m", ev.top_m, "Highlighted phrases per document");
    cmd_eval->add_option("--p0", ev.p0, "Binomial null success probability (default: majority)");
    cmd_eval->callback([&]() {
        log_config(cmd_eval);
        auto loaded = psat::load_ontology(ev.ontology);
        psat::EmbeddingMatrix embeddings = psat::EmbeddingMatrix::load(ev.embeddings);
        auto model = psat::load_checkpoint(ev.checkpoint, &loaded.ontology, embeddings,
                                           ev.ontology, ev.embeddings);
        auto corpus = psat::load_corpus(ev.corpus, model->config().task_kind);
        auto tagged = psat::load_tagged_corpus(ev.tagged);
        auto joined = psat::join_corpus(corpus, tagged);
        EvalBundle bundle = run_model_over(*model, joined, embeddings, ev.top_m);
        nlohmann::ordered_json report =
            build_report(*model, bundle, loaded.ontology, embeddings, ev.p0);
        std::ofstream out(ev.output, std::ios::binary);
        if (!out) throw psat::DataError("cannot write report: " + ev.output);
        out << report.dump(2) << "\n";
        std::cerr << "[psat] f1_macro " << report["f1_macro"] << ", mcc " << report["mcc"]
                  << ", auc " << report["auc_roc"] << "\n";
    });

    // ---- explain ----
    auto* cmd_explain =
        app.add_subcommand("explain", "Export per-question attention explanations (JSON + HTML)");
    struct {
        std::string corpus, tagged, ontology, embeddings, checkpoint, json_out, html_out;
        std::size_t top_m = 10;
    } xp;
    cmd_explain->add_option("--corpus", xp.corpus, "Labeled corpus JSONL")->required();
    cmd_explain->add_option("--tagged", xp.tagged, "Tagged corpus JSONL")->required();
    cmd_explain->add_option("--ontology", xp.ontology, "Ontology JSON")->required();
    cmd_explain->add_option("--embeddings", xp.embeddings, "Embedding file")->required();
    cmd_explain->add_option("--checkpoint", xp.checkpoint, "Model checkpoint (psat)")->required();
    cmd_explain->add_option("--json", xp.json_out, "Explanation JSON out")->required();
    cmd_explain->add_option("--html", xp.html_out, "Self-contained HTML out")->required();
    cmd_explain->add_option("--top-m", xp.top_m, "Highlighted pairs per document");
    cmd_explain->callback([&]() {
        log_config(cmd_explain);
        auto loaded = psat::load_ontology(xp.ontology);
        psat::EmbeddingMatrix embeddings = psat::EmbeddingMatrix::load(xp.embeddings);
        auto model = psat::load_checkpoint(xp.checkpoint, &loaded.ontology, embeddings,
                                           xp.ontology, xp.embeddings);
        if (model->kind() != "psat") {
            throw psat::DataError("explain requires a psat checkpoint (per-question blocks)");
        }
        auto corpus = load_texts(xp.corpus);
        auto tagged = psat::load_tagged_corpus(xp.tagged);
        std::unordered_map<std::string, std::string> texts;
        for (const auto& d : corpus) texts[d.doc_id] = d.text;

        std::vector<psat::Explanation> explanations;
        for (auto& t : tagged) {
            auto it = texts.find(t.doc_id);
            if (it == texts.end()) {
                throw psat::DataError("explain: no corpus text for doc_id '" + t.doc_id + "'");
            }
            t.original_text = it->second;
            psat::Tensor2 embeds =
                psat::embed_phrases(t.phrases, embeddings, model->config().max_seq_len);
            psat::ForwardResult fr = model->forward(embeds);
            std::vector<double> scores =
                psat::logits_to_scores(fr.logits, model->config().task_kind);
            explanations.push_back(
                psat::build_explanation(t, fr.attention, scores, loaded.ontology, xp.top_m));
        }
        psat::export_json(explanations, xp.json_out);
        std::string html = psat::render_html(explanations, loaded.ontology, texts);
        std::ofstream out(xp.html_out, std::ios::binary);
        if (!out) throw psat::DataError("cannot write HTML: " + xp.html_out);
        out << html;
        std::cerr << "[psat] wrote " << explanations.size() << " explanations\n";
    });

    // ---- gradcheck ----
    auto* cmd_gradcheck = app.add_subcommand(
        "gradcheck", "Check the full model gradient against central finite differences");
    struct {
        std::uint64_t seed = 7;
        std::size_t d = 8, classes = 2, phrases = 3;
        double step = 1e-5, tolerance = 1e-4;
    } gc;
    cmd_gradcheck->add_option("--seed", gc.seed, "RNG seed");
    cmd_gradcheck->add_option("--d", gc.d, "Embedding dimension of the toy model");
    cmd_gradcheck->add_option("--classes", gc.classes, "Toy ontology class count");
    cmd_gradcheck->add_option("--phrases", gc.phrases, "Document phrase count");
    cmd_gradcheck->add_option("--step", gc.step, "Finite-difference step");
    cmd_gradcheck->add_option("--tolerance", gc.tolerance, "Maximum relative error");
    cmd_gradcheck->callback([&]() {
        log_config(cmd_gradcheck);
        // Toy ontology and random embeddings, built in memory.
        psat::Ontology onto;
        onto.name = "gradcheck-toy";
        psat::PhraseVocabulary vocab;
        for (std::size_t c = 0; c < gc.classes; ++c) {
            psat::OntologyClass cls;
            cls.id = "C" + std::to_string(c);
            cls.question_text = "toy class " + std::to_string(c);
            for (int j = 0; j < 3; ++j) {
                std::string phrase = "concept_" + std::to_string(c) + "_" + std::to_string(j);
                cls.concepts.push_back({phrase, std::nullopt});
                vocab.entries.push_back({phrase, 1.0});
            }
            onto.classes.push_back(std::move(cls));
        }
        for (std::size_t p = 0; p < gc.phrases; ++p) {
            vocab.entries.push_back({"doc_phrase_" + std::to_string(p), 1.0});
        }
        psat::TaggedDocument doc;
        doc.doc_id = "toy";
        for (std::size_t p = 0; p < gc.phrases; ++p) {
            doc.phrases.push_back("doc_phrase_" + std::to_string(p));
            doc.spans.emplace_back(p * 12, p * 12 + 11);
        }
        psat::SkipgramConfig sg;
        sg.dim = gc.d;
        sg.epochs = 0;  // seeded random init is all the toy needs
        sg.seed = gc.seed;
        std::vector<psat::TaggedDocument> tiny{doc};
        psat::EmbeddingMatrix embeddings = psat::train_skipgram(tiny, vocab, sg);

        psat::ModelConfig mc;
        mc.d_k = 4;
        mc.d_v = 4;
        mc.hidden = 8;
        mc.label_dim = gc.classes;
        mc.task_kind = psat::TaskKind::multi_label;
        mc.seed = gc.seed;
        psat::PsatModel model = psat::PsatModel::init(onto, embeddings, mc);
        psat::Tensor2 embeds = psat::embed_phrases(doc.phrases, embeddings, 0);
        psat::Tensor2 targets(1, gc.classes, 0.0);
        targets.at(0, 0) = 1.0;

        std::vector<psat::Tensor2> params;
        for (const psat::Tensor2* p :
             static_cast<const psat::AttentionClassifier&>(model).parameters()) {
            params.push_back(*p);
        }
        auto f = [&](psat::ad::Tape& tape, std::span<const psat::ad::Var> vars) {
            auto tf = model.build_forward(tape, vars, embeds);
            return tape.bce_with_logits(tf.logits, targets, 1.0);
        };
        psat::GradCheckReport report = psat::grad_check(f, params, gc.step, gc.tolerance);
        std::printf("gradcheck: max relative error %.3e over %zu entries (tolerance %.1e): %s\n",
                    report.max_rel_error, report.entries_checked, gc.tolerance,
                    report.passed ? "PASS" : "FAIL");
        if (!report.passed) {
            std::printf("  worst: param %zu [%zu,%zu] analytic %.12g numeric %.12g\n",
                        report.worst_param, report.worst_row, report.worst_col,
                        report.worst_analytic, report.worst_numeric);
            throw psat::NumericalError("gradient check failed");
        }
    });

    // ---- validate-ontology ----
    auto* cmd_validate = app.add_subcommand("validate-ontology", "Validate an ontology JSON file");
    struct {
        std::string ontology;
    } vo;
    cmd_validate->add_option("--ontology", vo.ontology, "Ontology JSON")->required();
    cmd_validate->callback([&]() {
        log_config(cmd_validate);
        auto loaded = psat::load_ontology(vo.ontology);
        for (const std::string& w : loaded.warnings) std::cerr << "[psat] warning: " << w << "\n";
        std::size_t concepts = loaded.ontology.all_concept_phrases().size();
        std::printf("ontology '%s': %zu classes, %zu concepts: OK\n",
                    loaded.ontology.name.c_str(), loaded.ontology.class_count(), concepts);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const psat::NumericalError& e) {
        std::cerr << "[psat] numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const psat::MathError& e) {
        std::cerr << "[psat] numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const psat::DataError& e) {
        std::cerr << "[psat] error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "[psat] error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}
