#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "psat/ontology.hpp"  // DataError

namespace psat {

// Coarse tag set for pattern filtering. Accuracy is not a contract; the
// tagger exists to keep n-gram candidates grammatical-ish.
enum class PosTag { noun, verb, adj, adv, pron, det, adp, conj, num, part, other };

const char* pos_tag_name(PosTag t);
PosTag parse_pos_tag(const std::string& name);  // throws DataError on unknown

// Lexicon of closed-class words plus suffix heuristics.
PosTag tag_word(const std::string& lowercase_word);

struct KeyphraseConfig {
    std::size_t max_ngram = 5;
    // Each pattern is a space-separated tag sequence; elements may carry a
    // trailing '*' (zero or more), '+' (one or more) or '?' (optional),
    // e.g. "ADJ* NOUN+". A candidate must match one pattern exactly.
    std::vector<std::string> pos_patterns;
    std::vector<std::string> stopwords;
    double threshold = 0.65;
    std::size_t top_n = 4700;
    double mmr_lambda = 0.7;

    static KeyphraseConfig defaults();
};

std::vector<std::string> default_pos_patterns();
std::vector<std::string> default_stopwords();

struct Candidate {
    std::vector<std::string> tokens;              // lowercase surface tokens
    std::int64_t doc_frequency = 0;
    std::map<std::size_t, std::int64_t> term_frequencies;  // doc index -> count
};

struct CandidateSet {
    std::vector<Candidate> items;
    std::vector<std::size_t> doc_token_counts;  // document lengths for tf normalization
};

struct ScoredCandidate {
    std::vector<std::string> tokens;
    double score = 0.0;  // min-max normalized tf-idf in [0, 1]
};

struct PhraseVocabulary {
    struct Entry {
        std::string phrase;  // underscore-joined
        double score = 0.0;
    };
    std::vector<Entry> entries;  // scores non-increasing, no duplicates

    bool contains(const std::string& phrase) const;
    // Tab-separated "phrase<TAB>score" per line, descending score.
    void save(const std::string& path) const;
    static PhraseVocabulary load(const std::string& path);
};

// All contiguous n-grams (n <= max_ngram) whose tag sequence matches an
// allowed pattern and whose edge tokens are not stopwords.
CandidateSet extract_candidates(const std::vector<std::string>& corpus,
                                const KeyphraseConfig& config);

// score = max over docs of (tf_d / len_d) * ln(corpus_size / df), min-max
// normalized to [0, 1]; ordering ties broken lexicographically. A
// degenerate spread (all raw scores equal, including a single candidate)
// normalizes to 1.0.
std::vector<ScoredCandidate> tfidf_rank(const CandidateSet& candidates);

using PhraseSimilarity =
    std::function<double(const std::vector<std::string>&, const std::vector<std::string>&)>;

double token_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b);

// Greedy maximal marginal relevance: repeatedly pick
// argmax lambda*score - (1-lambda)*max_similarity_to_selected.
std::vector<ScoredCandidate> mmr_select(const std::vector<ScoredCandidate>& scored, std::size_t k,
                                        double lambda, const PhraseSimilarity& similarity);

// Full pipeline: extract -> rank -> threshold -> MMR -> underscore-join,
// final list sorted by score descending. Deterministic in corpus + config.
PhraseVocabulary build_vocabulary(const std::vector<std::string>& corpus,
                                  const KeyphraseConfig& config);

}  // namespace psat
