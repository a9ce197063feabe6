#include "psat/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "json.hpp"
#include "psat/rng.hpp"
#include "psat/text.hpp"

namespace psat {

const char* task_kind_name(TaskKind k) {
    switch (k) {
        case TaskKind::binary: return "binary";
        case TaskKind::multi_label: return "multi_label";
        case TaskKind::multi_class: return "multi_class";
    }
    return "binary";
}

TaskKind parse_task_kind(const std::string& name) {
    if (name == "binary") return TaskKind::binary;
    if (name == "multi_label") return TaskKind::multi_label;
    if (name == "multi_class") return TaskKind::multi_class;
    throw DataError("unknown task kind '" + name + "' (binary|multi_label|multi_class)");
}

namespace {

void validate_labels(const std::vector<int>& labels, TaskKind kind, std::size_t expected,
                     std::size_t num_classes, const std::string& where) {
    switch (kind) {
        case TaskKind::binary:
            if (labels.size() != 1) {
                throw DataError(where + ": binary task expects 1 label, got " +
                                std::to_string(labels.size()));
            }
            if (labels[0] != 0 && labels[0] != 1) {
                throw DataError(where + ": binary label must be 0 or 1");
            }
            break;
        case TaskKind::multi_label:
            if (expected != 0 && labels.size() != expected) {
                throw DataError(where + ": multi_label task expects " + std::to_string(expected) +
                                " labels, got " + std::to_string(labels.size()));
            }
            for (int v : labels) {
                if (v != 0 && v != 1) throw DataError(where + ": multi_label bits must be 0 or 1");
            }
            break;
        case TaskKind::multi_class:
            if (labels.size() != 1) {
                throw DataError(where + ": multi_class task expects 1 label, got " +
                                std::to_string(labels.size()));
            }
            if (labels[0] < 0 ||
                (num_classes > 0 && labels[0] >= static_cast<int>(num_classes))) {
                throw DataError(where + ": class index " + std::to_string(labels[0]) +
                                " out of range");
            }
            break;
    }
}

}  // namespace

std::vector<LabeledDocument> load_corpus(const std::string& path, TaskKind kind,
                                         std::size_t expected_labels, std::size_t num_classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open corpus file: " + path);

    std::vector<LabeledDocument> docs;
    std::unordered_map<std::string, std::size_t> user_slot;  // user_id -> docs index
    std::string line;
    std::size_t lineno = 0;

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw DataError(where + ": " + e.what());
        }
        if (!j.contains("doc_id") || !j.contains("text") || !j.contains("labels")) {
            throw DataError(where + ": record needs doc_id, text and labels");
        }
        std::vector<int> labels;
        try {
            labels = j["labels"].get<std::vector<int>>();
        } catch (const std::exception&) {
            throw DataError(where + ": labels must be an integer array");
        }
        if (expected_labels == 0 && kind == TaskKind::multi_label) {
            expected_labels = labels.size();  // first record pins the arity
        }
        validate_labels(labels, kind, expected_labels, num_classes, where);

        std::string text = j["text"].get<std::string>();
        if (j.contains("user_id") && !j["user_id"].is_null()) {
            std::string user = j["user_id"].get<std::string>();
            auto it = user_slot.find(user);
            if (it != user_slot.end()) {
                LabeledDocument& doc = docs[it->second];
                if (doc.labels != labels) {
                    throw DataError(where + ": user '" + user +
                                    "' has conflicting labels across lines");
                }
                doc.text += "\n";
                doc.text += text;
                continue;
            }
            user_slot.emplace(user, docs.size());
            docs.push_back(LabeledDocument{user, std::move(text), std::move(labels)});
        } else {
            docs.push_back(LabeledDocument{j["doc_id"].get<std::string>(), std::move(text),
                                           std::move(labels)});
        }
    }
    return docs;
}

void save_corpus(const std::vector<LabeledDocument>& docs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write corpus file: " + path);
    for (const LabeledDocument& d : docs) {
        nlohmann::ordered_json j;
        j["doc_id"] = d.doc_id;
        j["text"] = d.text;
        j["labels"] = d.labels;
        out << j.dump() << '\n';
    }
}

SynthCorpus synth_generate(const SynthSpec& spec) {
    if (!spec.ontology) throw DataError("synth_generate: no ontology");
    const Ontology& onto = *spec.ontology;
    std::size_t k = onto.class_count();
    if (spec.planted_classes_per_doc < 1 || spec.planted_classes_per_doc > k) {
        throw DataError("synth_generate: planted_classes_per_doc must lie in [1, " +
                        std::to_string(k) + "]");
    }
    if (spec.noise_phrase_ratio < 0.0 || spec.noise_phrase_ratio >= 1.0) {
        throw DataError("synth_generate: noise_phrase_ratio must lie in [0, 1)");
    }
    if (spec.task_kind == TaskKind::multi_class && spec.planted_classes_per_doc != 1) {
        throw DataError("synth_generate: multi_class requires planted_classes_per_doc == 1");
    }
    if (spec.task_kind == TaskKind::binary) {
        throw DataError("synth_generate: binary synthesis is not defined; use multi_label");
    }

    std::size_t n_plant = static_cast<std::size_t>(
        std::llround((1.0 - spec.noise_phrase_ratio) * static_cast<double>(spec.phrases_per_doc)));
    n_plant = std::max(n_plant, spec.planted_classes_per_doc);
    if (n_plant > spec.phrases_per_doc) {
        throw DataError("synth_generate: phrases_per_doc too small for the requested plants");
    }
    std::size_t n_noise = spec.phrases_per_doc - n_plant;

    SynthCorpus out;
    out.filler_vocabulary.reserve(spec.filler_vocab_size);
    for (std::size_t i = 0; i < spec.filler_vocab_size; ++i) {
        // Deterministic pseudo-words, disjoint from any ontology concept.
        std::string w = "nx";
        w.push_back(static_cast<char>('a' + (i / 26) % 26));
        w.push_back(static_cast<char>('a' + i % 26));
        out.filler_vocabulary.push_back(std::move(w));
    }

    Rng rng(spec.seed);
    std::vector<std::size_t> class_order(k);
    for (std::size_t i = 0; i < k; ++i) class_order[i] = i;

    for (std::size_t di = 0; di < spec.n_docs; ++di) {
        rng.shuffle(class_order);
        std::vector<std::size_t> planted(class_order.begin(),
                                         class_order.begin() + spec.planted_classes_per_doc);
        std::sort(planted.begin(), planted.end());

        // Slot assignment: one guaranteed concept per planted class, the
        // rest drawn uniformly over planted classes, then noise, shuffled.
        struct Slot {
            bool noise;
            std::size_t class_index;  // valid when !noise
        };
        std::vector<Slot> slots;
        slots.reserve(spec.phrases_per_doc);
        for (std::size_t c : planted) slots.push_back({false, c});
        for (std::size_t i = planted.size(); i < n_plant; ++i) {
            slots.push_back({false, planted[rng.below(planted.size())]});
        }
        for (std::size_t i = 0; i < n_noise; ++i) slots.push_back({true, 0});
        rng.shuffle(slots);

        LabeledDocument doc;
        doc.doc_id = "synth" + std::to_string(di);
        std::vector<PlantRecord> plants;
        for (const Slot& slot : slots) {
            std::string surface;
            if (slot.noise) {
                surface = out.filler_vocabulary[rng.below(out.filler_vocabulary.size())];
            } else {
                const auto& concepts = onto.classes[slot.class_index].concepts;
                surface = concepts[rng.below(concepts.size())].phrase;
            }
            std::string words = underscores_to_spaces(surface);
            if (!doc.text.empty()) doc.text.push_back(' ');
            std::size_t begin = doc.text.size();
            doc.text += words;
            if (!slot.noise) {
                plants.push_back(PlantRecord{onto.classes[slot.class_index].id, surface, begin,
                                             doc.text.size()});
            }
        }

        if (spec.task_kind == TaskKind::multi_label) {
            doc.labels.assign(k, 0);
            for (std::size_t c : planted) doc.labels[c] = 1;
        } else {
            doc.labels = {static_cast<int>(planted[0])};
        }
        out.docs.push_back(std::move(doc));
        out.plants.push_back(std::move(plants));
    }

    // Tagging/embedding vocabulary: unique concepts plus fillers, score 1.
    std::set<std::string> phrases;
    for (const std::string& p : onto.all_concept_phrases()) phrases.insert(p);
    phrases.insert(out.filler_vocabulary.begin(), out.filler_vocabulary.end());
    for (const std::string& p : phrases) out.vocabulary.entries.push_back({p, 1.0});
    return out;
}

void save_plant_map(const SynthCorpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write plant map: " + path);
    nlohmann::ordered_json root;
    root["docs"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < corpus.docs.size(); ++i) {
        nlohmann::ordered_json jd;
        jd["doc_id"] = corpus.docs[i].doc_id;
        std::set<std::string> classes;
        auto jplants = nlohmann::ordered_json::array();
        for (const PlantRecord& p : corpus.plants[i]) {
            classes.insert(p.class_id);
            jplants.push_back({{"class_id", p.class_id},
                               {"phrase", p.phrase},
                               {"span", {p.span_begin, p.span_end}}});
        }
        jd["planted_classes"] = std::vector<std::string>(classes.begin(), classes.end());
        jd["plants"] = std::move(jplants);
        root["docs"].push_back(std::move(jd));
    }
    out << root.dump(2) << '\n';
}

}  // namespace psat
