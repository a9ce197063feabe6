#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psat/keyphrase.hpp"
#include "psat/ontology.hpp"

namespace psat {

enum class TaskKind { binary, multi_label, multi_class };

const char* task_kind_name(TaskKind k);
TaskKind parse_task_kind(const std::string& name);  // throws DataError

// labels are task-kind dependent: binary -> [0|1]; multi_label -> one bit
// per label; multi_class -> [class index].
struct LabeledDocument {
    std::string doc_id;
    std::string text;
    std::vector<int> labels;
};

// JSONL: {"doc_id": str, "user_id": str?, "text": str, "labels": [int,...]}.
// Lines sharing a user_id are merged (texts concatenated in input order)
// into one document per user. expected_labels == 0 infers the arity from
// the first record and enforces it afterwards; errors carry line numbers.
// num_classes bounds multi_class indices when > 0.
std::vector<LabeledDocument> load_corpus(const std::string& path, TaskKind kind,
                                         std::size_t expected_labels = 0,
                                         std::size_t num_classes = 0);

void save_corpus(const std::vector<LabeledDocument>& docs, const std::string& path);

struct SynthSpec {
    const Ontology* ontology = nullptr;
    std::size_t n_docs = 200;
    std::size_t phrases_per_doc = 20;
    std::size_t planted_classes_per_doc = 2;
    double noise_phrase_ratio = 0.3;  // in [0, 1)
    TaskKind task_kind = TaskKind::multi_label;  // or multi_class with 1 plant per doc
    std::uint64_t seed = 7;
    std::size_t filler_vocab_size = 100;
};

struct PlantRecord {
    std::string class_id;
    std::string phrase;
    std::size_t span_begin = 0;
    std::size_t span_end = 0;
};

struct SynthCorpus {
    std::vector<LabeledDocument> docs;
    std::vector<std::vector<PlantRecord>> plants;  // parallel to docs
    std::vector<std::string> filler_vocabulary;
    PhraseVocabulary vocabulary;  // concepts + fillers, for tagging/embedding
};

// Planted-phrase corpus: each document mixes concepts sampled from its
// planted classes with noise phrases from a disjoint filler vocabulary.
// Label rule: bit k = 1 iff at least one class-k concept was planted
// (multi_class: the single planted class index). The plant map records
// every causal span, so labels are perfectly recoverable from it.
SynthCorpus synth_generate(const SynthSpec& spec);

// {"docs":[{"doc_id","planted_classes":[...],"plants":[{"class_id","phrase","span":[s,e]}]}]}
void save_plant_map(const SynthCorpus& corpus, const std::string& path);

}  // namespace psat
