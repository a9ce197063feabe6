#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "psat/ontology.hpp"
#include "psat/tagger.hpp"

namespace psat {

struct PhraseWeight {
    std::string phrase;
    std::size_t span_begin = 0;
    std::size_t span_end = 0;
    double weight = 0.0;
};

struct BlockExplanation {
    std::string class_id;
    std::string question_text;
    bool active = false;          // max weight exceeded twice the uniform 1/n
    std::vector<PhraseWeight> phrases;  // ranked by weight descending
    double cumulative = 0.0;      // peak attention relative to uniform: n * max weight
};

struct HighlightEntry {
    std::string phrase;
    std::string class_id;
    double weight = 0.0;
};

struct Explanation {
    std::string doc_id;
    std::vector<double> prediction;
    std::vector<BlockExplanation> blocks;    // ontology order; empty for empty streams
    std::vector<HighlightEntry> highlighted; // global top-m (phrase, block) pairs
};

// `attention` must hold one row per ontology class (the PSAT AttentionSet),
// each row one weight per (possibly truncated) document phrase. top_m
// bounds the highlighted pair list and clamps to everything available.
Explanation build_explanation(const TaggedDocument& doc,
                              const std::vector<std::vector<double>>& attention,
                              const std::vector<double>& prediction, const Ontology& ontology,
                              std::size_t top_m);

// Distinct top-m phrases of a document by maximum attention across rows;
// works for both the PSAT rows and the baseline's single flat row. This is
// the highlighted set that AKC consumes.
std::vector<std::string> highlighted_phrases(const TaggedDocument& doc,
                                             const std::vector<std::vector<double>>& attention,
                                             std::size_t top_m);

// Self-contained HTML (inline styles, no external fetches): the original
// text with per-phrase background intensity proportional to weight, one
// color family per ontology class, a per-question bar chart and a legend
// in ontology order. doc_texts maps doc_id to the original text the spans
// index into. Byte-identical output for identical inputs.
std::string render_html(std::span<const Explanation> explanations, const Ontology& ontology,
                        const std::unordered_map<std::string, std::string>& doc_texts);

// {"explanations":[{"doc_id","prediction":[...],"blocks":[...],"highlighted":[...]}]}
// with deterministic key order; numbers round-trip losslessly.
void export_json(std::span<const Explanation> explanations, const std::string& path);
std::string explanations_to_json(std::span<const Explanation> explanations);
std::vector<Explanation> import_json(const std::string& path);

}  // namespace psat
