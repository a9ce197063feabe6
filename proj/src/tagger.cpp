#include "psat/tagger.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

#include "json.hpp"
#include "psat/text.hpp"

namespace psat {

TaggedDocument tag_document(const std::string& doc_id, const std::string& text,
                            const PhraseVocabulary& vocabulary) {
    if (vocabulary.entries.empty()) throw DataError("tag_document: empty vocabulary");

    std::unordered_set<std::string> phrase_set;
    std::size_t max_tokens = 1;
    for (const auto& e : vocabulary.entries) {
        phrase_set.insert(e.phrase);
        max_tokens = std::max(max_tokens,
                              static_cast<std::size_t>(std::count(e.phrase.begin(),
                                                                  e.phrase.end(), '_')) + 1);
    }

    TaggedDocument doc;
    doc.doc_id = doc_id;
    doc.original_text = text;

    std::vector<Token> tokens = tokenize(text);
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t longest = 0;
        std::string matched;
        std::size_t limit = std::min(max_tokens, tokens.size() - i);
        std::string joined;
        for (std::size_t len = 1; len <= limit; ++len) {
            if (len == 1) {
                joined = tokens[i].text;
            } else {
                joined += '_';
                joined += tokens[i + len - 1].text;
            }
            if (phrase_set.count(joined)) {
                longest = len;
                matched = joined;
            }
        }
        if (longest == 0) {
            ++i;
            continue;
        }
        doc.phrases.push_back(std::move(matched));
        doc.spans.emplace_back(tokens[i].begin, tokens[i + longest - 1].end);
        i += longest;
    }
    return doc;
}

void save_tagged_corpus(const std::vector<TaggedDocument>& docs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write tagged corpus: " + path);
    for (const TaggedDocument& d : docs) {
        nlohmann::ordered_json j;
        j["doc_id"] = d.doc_id;
        j["phrases"] = d.phrases;
        auto spans = nlohmann::ordered_json::array();
        for (const auto& [s, e] : d.spans) spans.push_back({s, e});
        j["spans"] = std::move(spans);
        out << j.dump() << '\n';
    }
}

std::vector<TaggedDocument> load_tagged_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open tagged corpus: " + path);
    std::vector<TaggedDocument> docs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        TaggedDocument d;
        d.doc_id = j.at("doc_id").get<std::string>();
        d.phrases = j.at("phrases").get<std::vector<std::string>>();
        for (const auto& span : j.at("spans")) {
            if (!span.is_array() || span.size() != 2) {
                throw DataError(path + ":" + std::to_string(lineno) + ": bad span");
            }
            d.spans.emplace_back(span[0].get<std::size_t>(), span[1].get<std::size_t>());
        }
        if (d.phrases.size() != d.spans.size()) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": phrases and spans length mismatch");
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

}  // namespace psat
