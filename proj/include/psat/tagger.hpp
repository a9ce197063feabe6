#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "psat/keyphrase.hpp"

namespace psat {

// A document rewritten as an ordered stream of vocabulary phrases. Spans
// point into original_text; they are non-overlapping and ascending.
struct TaggedDocument {
    std::string doc_id;
    std::vector<std::string> phrases;
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // [begin, end) char offsets
    std::string original_text;
};

// Greedy longest-match left-to-right over lowercase tokens: the longest
// token run starting at the cursor whose underscore join is a vocabulary
// phrase is emitted and the cursor jumps past it; tokens that begin no
// match are dropped from the stream (but stay in original_text).
TaggedDocument tag_document(const std::string& doc_id, const std::string& text,
                            const PhraseVocabulary& vocabulary);

// One JSON object per line: {"doc_id", "phrases": [...], "spans": [[s,e],...]}.
void save_tagged_corpus(const std::vector<TaggedDocument>& docs, const std::string& path);
// original_text is not part of the file format; callers rejoin it from the
// source corpus by doc_id when needed.
std::vector<TaggedDocument> load_tagged_corpus(const std::string& path);

}  // namespace psat
