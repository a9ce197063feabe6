#pragma once

#include <optional>
#include <string>
#include <vector>

#include "psat/tensor.hpp"

namespace psat {

class EmbeddingMatrix;

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One questionnaire item plus the phrases that evidence it. Concepts are
// lowercase underscore-joined surface phrases; `code` is reserved for a
// future terminology mapping and round-trips if present.
struct Concept {
    std::string phrase;
    std::optional<std::string> code;
};

struct OntologyClass {
    std::string id;             // "Q1".."Q9", "AQ1".."AQ3", ...
    std::string question_text;
    std::vector<Concept> concepts;

    std::vector<std::string> concept_phrases() const;
};

// Immutable after load. Class order is significant: it fixes the model's
// cross-attention block order and every explanation ordering.
struct Ontology {
    std::string name;
    std::vector<OntologyClass> classes;

    std::size_t class_count() const { return classes.size(); }
    const OntologyClass* find_class(const std::string& id) const;
    std::size_t class_index(const std::string& id) const;  // throws DataError if absent
    // All concept phrases across classes, in class order, duplicates kept.
    std::vector<std::string> all_concept_phrases() const;
};

struct OntologyLoadResult {
    Ontology ontology;
    std::vector<std::string> warnings;  // e.g. concept shared between classes
};

// Schema: {"name": str, "classes": [{"id": str, "question_text": str,
// "concepts": [str | {"phrase": str, "code": str}, ...]}]}
OntologyLoadResult load_ontology(const std::string& path);
OntologyLoadResult parse_ontology(const std::string& json_text, const std::string& origin);
std::string serialize_ontology(const Ontology& onto);
void save_ontology(const Ontology& onto, const std::string& path);

struct ConceptMatrix {
    Tensor2 vectors;                      // found_concepts x d, class concept order
    std::vector<std::string> phrases;     // row labels
    double coverage = 0.0;                // found / total concepts of the class
};

// Embedding rows for the class's concepts that exist in the vocabulary.
// Missing concepts are skipped and reflected in coverage. Throws DataError
// when no concept at all is embeddable (the block would be vacuous).
ConceptMatrix concept_matrix(const Ontology& onto, const std::string& class_id,
                             const EmbeddingMatrix& embeddings);

}  // namespace psat
