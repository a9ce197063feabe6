#include "psat/keyphrase.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "psat/text.hpp"

namespace psat {

namespace {

const std::unordered_map<std::string, PosTag>& closed_class_lexicon() {
    static const std::unordered_map<std::string, PosTag> lex = {
        // determiners
        {"the", PosTag::det}, {"a", PosTag::det}, {"an", PosTag::det}, {"this", PosTag::det},
        {"that", PosTag::det}, {"these", PosTag::det}, {"those", PosTag::det},
        {"my", PosTag::det}, {"your", PosTag::det}, {"his", PosTag::det}, {"her", PosTag::det},
        {"its", PosTag::det}, {"our", PosTag::det}, {"their", PosTag::det},
        {"some", PosTag::det}, {"any", PosTag::det}, {"no", PosTag::det}, {"every", PosTag::det},
        {"each", PosTag::det},
        // pronouns
        {"i", PosTag::pron}, {"me", PosTag::pron}, {"you", PosTag::pron}, {"he", PosTag::pron},
        {"him", PosTag::pron}, {"she", PosTag::pron}, {"it", PosTag::pron}, {"we", PosTag::pron},
        {"us", PosTag::pron}, {"they", PosTag::pron}, {"them", PosTag::pron},
        {"myself", PosTag::pron}, {"yourself", PosTag::pron}, {"himself", PosTag::pron},
        {"herself", PosTag::pron}, {"itself", PosTag::pron}, {"anyone", PosTag::pron},
        {"everyone", PosTag::pron}, {"someone", PosTag::pron}, {"nothing", PosTag::pron},
        {"anything", PosTag::pron}, {"everything", PosTag::pron}, {"something", PosTag::pron},
        {"who", PosTag::pron}, {"what", PosTag::pron},
        // adpositions
        {"of", PosTag::adp}, {"in", PosTag::adp}, {"on", PosTag::adp}, {"at", PosTag::adp},
        {"by", PosTag::adp}, {"for", PosTag::adp}, {"with", PosTag::adp}, {"about", PosTag::adp},
        {"against", PosTag::adp}, {"between", PosTag::adp}, {"into", PosTag::adp},
        {"through", PosTag::adp}, {"during", PosTag::adp}, {"before", PosTag::adp},
        {"after", PosTag::adp}, {"above", PosTag::adp}, {"below", PosTag::adp},
        {"from", PosTag::adp}, {"up", PosTag::adp}, {"down", PosTag::adp}, {"out", PosTag::adp},
        {"off", PosTag::adp}, {"over", PosTag::adp}, {"under", PosTag::adp},
        // conjunctions
        {"and", PosTag::conj}, {"or", PosTag::conj}, {"but", PosTag::conj}, {"nor", PosTag::conj},
        {"so", PosTag::conj}, {"yet", PosTag::conj}, {"because", PosTag::conj},
        {"if", PosTag::conj}, {"while", PosTag::conj}, {"when", PosTag::conj},
        {"although", PosTag::conj}, {"though", PosTag::conj},
        // particles / auxiliaries / modals
        {"to", PosTag::part}, {"not", PosTag::part}, {"n't", PosTag::part},
        {"is", PosTag::verb}, {"am", PosTag::verb}, {"are", PosTag::verb}, {"was", PosTag::verb},
        {"were", PosTag::verb}, {"be", PosTag::verb}, {"been", PosTag::verb},
        {"being", PosTag::verb}, {"have", PosTag::verb}, {"has", PosTag::verb},
        {"had", PosTag::verb}, {"do", PosTag::verb}, {"does", PosTag::verb}, {"did", PosTag::verb},
        {"will", PosTag::verb}, {"would", PosTag::verb}, {"can", PosTag::verb},
        {"can't", PosTag::verb}, {"cannot", PosTag::verb}, {"could", PosTag::verb},
        {"should", PosTag::verb}, {"may", PosTag::verb}, {"might", PosTag::verb},
        {"must", PosTag::verb}, {"shall", PosTag::verb}, {"won't", PosTag::verb},
        {"don't", PosTag::verb}, {"doesn't", PosTag::verb}, {"didn't", PosTag::verb},
        {"isn't", PosTag::verb}, {"wasn't", PosTag::verb}, {"couldn't", PosTag::verb},
        {"wouldn't", PosTag::verb}, {"shouldn't", PosTag::verb},
        // frequent open-class words whose suffixes mislead
        {"very", PosTag::adv}, {"really", PosTag::adv}, {"too", PosTag::adv},
        {"also", PosTag::adv}, {"just", PosTag::adv}, {"only", PosTag::adv},
        {"always", PosTag::adv}, {"never", PosTag::adv}, {"often", PosTag::adv},
        {"sometimes", PosTag::adv}, {"again", PosTag::adv}, {"still", PosTag::adv},
        {"even", PosTag::adv}, {"now", PosTag::adv}, {"here", PosTag::adv},
        {"there", PosTag::adv}, {"almost", PosTag::adv}, {"anymore", PosTag::adv},
        {"away", PosTag::adv},
        {"low", PosTag::adj}, {"bad", PosTag::adj}, {"sad", PosTag::adj}, {"good", PosTag::adj},
        {"tired", PosTag::adj}, {"happy", PosTag::adj}, {"blue", PosTag::adj},
        {"down", PosTag::adp},  // kept as adposition; "feeling down" matches VERB ADP pattern
        {"poor", PosTag::adj}, {"little", PosTag::adj}, {"serious", PosTag::adj},
        {"empty", PosTag::adj}, {"alone", PosTag::adj}, {"worthless", PosTag::adj},
        {"hopeless", PosTag::adj}, {"restless", PosTag::adj}, {"guilty", PosTag::adj},
        {"numb", PosTag::adj}, {"dead", PosTag::adj}, {"asleep", PosTag::adj},
        {"awake", PosTag::adj}, {"better", PosTag::adj}, {"worse", PosTag::adj},
        {"hard", PosTag::adj}, {"able", PosTag::adj},
        {"get", PosTag::verb}, {"got", PosTag::verb}, {"make", PosTag::verb},
        {"made", PosTag::verb}, {"go", PosTag::verb}, {"went", PosTag::verb},
        {"feel", PosTag::verb}, {"felt", PosTag::verb}, {"need", PosTag::verb},
        {"want", PosTag::verb}, {"keep", PosTag::verb}, {"kept", PosTag::verb},
        {"lost", PosTag::verb}, {"lose", PosTag::verb}, {"cry", PosTag::verb},
        {"slept", PosTag::verb}, {"sleep", PosTag::verb}, {"eat", PosTag::verb},
        {"ate", PosTag::verb}, {"stay", PosTag::verb}, {"stayed", PosTag::verb},
        {"think", PosTag::verb}, {"thought", PosTag::noun},
    };
    return lex;
}

bool ends_with(const std::string& s, const char* suffix) {
    std::size_t n = std::char_traits<char>::length(suffix);
    return s.size() >= n && s.compare(s.size() - n, n, suffix) == 0;
}

struct PatternElement {
    PosTag tag;
    char repeat = ' ';  // ' ' exactly once, '?', '*', '+'
};

std::vector<PatternElement> compile_pattern(const std::string& pattern) {
    std::vector<PatternElement> out;
    for (const std::string& raw : split(pattern, ' ')) {
        if (raw.empty()) continue;
        PatternElement el;
        std::string name = raw;
        char last = raw.back();
        if (last == '*' || last == '+' || last == '?') {
            el.repeat = last;
            name = raw.substr(0, raw.size() - 1);
        }
        el.tag = parse_pos_tag(name);
        out.push_back(el);
    }
    if (out.empty()) throw DataError("empty POS pattern: '" + pattern + "'");
    return out;
}

// Backtracking match of the full tag sequence against the pattern. N-grams
// are at most max_ngram long, so this is cheap.
bool match_from(const std::vector<PatternElement>& pat, std::size_t pi,
                const std::vector<PosTag>& tags, std::size_t ti) {
    if (pi == pat.size()) return ti == tags.size();
    const PatternElement& el = pat[pi];
    switch (el.repeat) {
        case ' ':
            return ti < tags.size() && tags[ti] == el.tag && match_from(pat, pi + 1, tags, ti + 1);
        case '?':
            if (ti < tags.size() && tags[ti] == el.tag && match_from(pat, pi + 1, tags, ti + 1))
                return true;
            return match_from(pat, pi + 1, tags, ti);
        case '+':
            if (ti >= tags.size() || tags[ti] != el.tag) return false;
            ++ti;
            [[fallthrough]];
        case '*': {
            std::size_t extent = ti;
            while (extent < tags.size() && tags[extent] == el.tag) ++extent;
            for (std::size_t stop = extent + 1; stop-- > ti;) {
                if (match_from(pat, pi + 1, tags, stop)) return true;
            }
            return false;
        }
    }
    return false;
}

std::string candidate_key(const std::vector<std::string>& tokens) {
    return join_underscore(tokens);
}

}  // namespace

const char* pos_tag_name(PosTag t) {
    switch (t) {
        case PosTag::noun: return "NOUN";
        case PosTag::verb: return "VERB";
        case PosTag::adj: return "ADJ";
        case PosTag::adv: return "ADV";
        case PosTag::pron: return "PRON";
        case PosTag::det: return "DET";
        case PosTag::adp: return "ADP";
        case PosTag::conj: return "CONJ";
        case PosTag::num: return "NUM";
        case PosTag::part: return "PART";
        case PosTag::other: return "OTHER";
    }
    return "OTHER";
}

PosTag parse_pos_tag(const std::string& name) {
    static const std::unordered_map<std::string, PosTag> names = {
        {"NOUN", PosTag::noun}, {"VERB", PosTag::verb}, {"ADJ", PosTag::adj},
        {"ADV", PosTag::adv},   {"PRON", PosTag::pron}, {"DET", PosTag::det},
        {"ADP", PosTag::adp},   {"CONJ", PosTag::conj}, {"NUM", PosTag::num},
        {"PART", PosTag::part}, {"OTHER", PosTag::other}};
    auto it = names.find(name);
    if (it == names.end()) throw DataError("unknown POS tag '" + name + "'");
    return it->second;
}

PosTag tag_word(const std::string& w) {
    const auto& lex = closed_class_lexicon();
    auto it = lex.find(w);
    if (it != lex.end()) return it->second;
    if (!w.empty() && (std::isdigit(static_cast<unsigned char>(w[0])) != 0)) return PosTag::num;
    if (ends_with(w, "ly")) return PosTag::adv;
    if (ends_with(w, "ing") || ends_with(w, "ed") || ends_with(w, "ize") || ends_with(w, "ise"))
        return PosTag::verb;
    if (ends_with(w, "ous") || ends_with(w, "ful") || ends_with(w, "ive") ||
        ends_with(w, "less") || ends_with(w, "able") || ends_with(w, "ible") ||
        ends_with(w, "al") || ends_with(w, "ic"))
        return PosTag::adj;
    return PosTag::noun;  // default open class
}

std::vector<std::string> default_pos_patterns() {
    return {
        "NOUN+",             // "depression", "panic attacks"
        "ADJ+ NOUN+",        // "poor appetite", "serious issues"
        "VERB NOUN+",        // "need help"
        "VERB DET? ADJ* NOUN+",  // "leave the bed"
        "VERB ADV* ADJ",     // "feeling really low"
        "VERB ADP",          // "feeling down", "crying out"
        "VERB ADP DET? NOUN+",   // "crying out of(...) blue" style chains
        "ADV* ADJ",          // "utterly hopeless"
        "ADJ",               // bare adjectives
        "VERB",              // bare gerunds such as "overeating"
        "VERB ADJ* NOUN+",   // "need psychological help"
        "NOUN VERB",         // "trouble sleeping"
        "NOUN ADP NOUN+",    // "loss of interest"
        "VERB PRON",         // "hurting myself"
        "VERB DET? NOUN VERB",  // "trouble falling asleep" variants
    };
}

std::vector<std::string> default_stopwords() {
    return {"the", "a",  "an",  "and", "or",   "but",  "of",   "in",  "on",  "at",  "by",
            "for", "to", "is",  "am",  "are",  "was",  "were", "be",  "been", "it", "its",
            "i",   "me", "my",  "you", "your", "he",   "she",  "we",  "they", "them", "this",
            "that", "these", "those", "as", "with", "from", "will", "would", "do", "does",
            "did", "so", "if", "then", "than", "there", "here", "have", "has", "had"};
}

KeyphraseConfig KeyphraseConfig::defaults() {
    KeyphraseConfig c;
    c.pos_patterns = default_pos_patterns();
    c.stopwords = default_stopwords();
    return c;
}

bool PhraseVocabulary::contains(const std::string& phrase) const {
    for (const Entry& e : entries) {
        if (e.phrase == phrase) return true;
    }
    return false;
}

void PhraseVocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write vocabulary file: " + path);
    char buf[64];
    for (const Entry& e : entries) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.score);
        out << e.phrase << '\t' << buf << '\n';
    }
}

PhraseVocabulary PhraseVocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vocabulary file: " + path);
    PhraseVocabulary vocab;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected phrase<TAB>score");
        }
        Entry e;
        e.phrase = line.substr(0, tab);
        try {
            e.score = std::stod(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(lineno) + ": bad score");
        }
        vocab.entries.push_back(std::move(e));
    }
    return vocab;
}

CandidateSet extract_candidates(const std::vector<std::string>& corpus,
                                const KeyphraseConfig& config) {
    if (corpus.empty()) throw DataError("extract_candidates: empty document set");
    if (config.max_ngram == 0) throw DataError("extract_candidates: max_ngram must be >= 1");

    std::vector<std::vector<PatternElement>> patterns;
    patterns.reserve(config.pos_patterns.size());
    for (const std::string& p : config.pos_patterns) patterns.push_back(compile_pattern(p));

    std::unordered_set<std::string> stop(config.stopwords.begin(), config.stopwords.end());

    CandidateSet out;
    out.doc_token_counts.reserve(corpus.size());
    std::unordered_map<std::string, std::size_t> by_key;

    for (std::size_t di = 0; di < corpus.size(); ++di) {
        std::vector<Token> tokens = tokenize(corpus[di]);
        out.doc_token_counts.push_back(tokens.size());
        std::vector<PosTag> tags(tokens.size());
        for (std::size_t i = 0; i < tokens.size(); ++i) tags[i] = tag_word(tokens[i].text);

        std::set<std::string> seen_in_doc;  // for doc_frequency
        for (std::size_t start = 0; start < tokens.size(); ++start) {
            if (stop.count(tokens[start].text)) continue;  // no leading stopword
            std::size_t max_len = std::min(config.max_ngram, tokens.size() - start);
            for (std::size_t len = 1; len <= max_len; ++len) {
                if (stop.count(tokens[start + len - 1].text)) continue;  // no trailing stopword
                std::vector<PosTag> window(tags.begin() + start, tags.begin() + start + len);
                bool ok = false;
                for (const auto& pat : patterns) {
                    if (match_from(pat, 0, window, 0)) {
                        ok = true;
                        break;
                    }
                }
                if (!ok) continue;

                std::vector<std::string> words;
                words.reserve(len);
                for (std::size_t i = 0; i < len; ++i) words.push_back(tokens[start + i].text);
                std::string key = candidate_key(words);
                auto [it, inserted] = by_key.try_emplace(key, out.items.size());
                if (inserted) {
                    Candidate c;
                    c.tokens = std::move(words);
                    out.items.push_back(std::move(c));
                }
                Candidate& c = out.items[it->second];
                c.term_frequencies[di] += 1;
                if (seen_in_doc.insert(key).second) c.doc_frequency += 1;
            }
        }
    }
    return out;
}

std::vector<ScoredCandidate> tfidf_rank(const CandidateSet& candidates) {
    std::size_t corpus_size = candidates.doc_token_counts.size();
    if (corpus_size < 1) throw DataError("tfidf_rank: corpus_size must be >= 1");

    std::vector<ScoredCandidate> out;
    out.reserve(candidates.items.size());
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const Candidate& c : candidates.items) {
        double idf = std::log(static_cast<double>(corpus_size) /
                              static_cast<double>(std::max<std::int64_t>(c.doc_frequency, 1)));
        double best = 0.0;
        for (const auto& [doc, tf] : c.term_frequencies) {
            std::size_t len = candidates.doc_token_counts[doc];
            if (len == 0) continue;
            best = std::max(best, static_cast<double>(tf) / static_cast<double>(len) * idf);
        }
        lo = std::min(lo, best);
        hi = std::max(hi, best);
        out.push_back(ScoredCandidate{c.tokens, best});
    }
    if (!out.empty()) {
        double spread = hi - lo;
        for (ScoredCandidate& s : out) {
            s.score = spread > 0.0 ? (s.score - lo) / spread : 1.0;
        }
    }
    std::sort(out.begin(), out.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return candidate_key(a.tokens) < candidate_key(b.tokens);
    });
    return out;
}

double token_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::set<std::string> sa(a.begin(), a.end());
    std::set<std::string> sb(b.begin(), b.end());
    std::size_t inter = 0;
    for (const std::string& t : sa) inter += sb.count(t);
    std::size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<ScoredCandidate> mmr_select(const std::vector<ScoredCandidate>& scored, std::size_t k,
                                        double lambda, const PhraseSimilarity& similarity) {
    if (k < 1) throw DataError("mmr_select: k must be >= 1");
    if (lambda < 0.0 || lambda > 1.0) throw DataError("mmr_select: lambda must lie in [0, 1]");

    std::size_t take = std::min(k, scored.size());
    std::vector<ScoredCandidate> selected;
    selected.reserve(take);
    std::vector<char> used(scored.size(), 0);
    std::vector<double> max_sim(scored.size(), 0.0);

    for (std::size_t round = 0; round < take; ++round) {
        std::size_t best = scored.size();
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < scored.size(); ++i) {
            if (used[i]) continue;
            double value = lambda * scored[i].score -
                           (selected.empty() ? 0.0 : (1.0 - lambda) * max_sim[i]);
            // Ties resolved by input order, which tfidf_rank made
            // deterministic (score desc, phrase asc).
            if (value > best_value) {
                best_value = value;
                best = i;
            }
        }
        used[best] = 1;
        selected.push_back(scored[best]);
        for (std::size_t i = 0; i < scored.size(); ++i) {
            if (!used[i]) {
                max_sim[i] = std::max(max_sim[i], similarity(scored[i].tokens, scored[best].tokens));
            }
        }
    }
    return selected;
}

PhraseVocabulary build_vocabulary(const std::vector<std::string>& corpus,
                                  const KeyphraseConfig& config) {
    if (corpus.empty()) throw DataError("build_vocabulary: empty corpus");
    CandidateSet candidates = extract_candidates(corpus, config);
    std::vector<ScoredCandidate> ranked = tfidf_rank(candidates);

    std::vector<ScoredCandidate> surviving;
    for (const ScoredCandidate& s : ranked) {
        if (s.score >= config.threshold) surviving.push_back(s);
    }
    if (surviving.empty()) {
        throw DataError("build_vocabulary: no candidate reaches the TF-IDF threshold " +
                        std::to_string(config.threshold) + "; lower --threshold");
    }

    std::vector<ScoredCandidate> picked =
        mmr_select(surviving, config.top_n, config.mmr_lambda, token_jaccard);

    std::sort(picked.begin(), picked.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return candidate_key(a.tokens) < candidate_key(b.tokens);
    });

    PhraseVocabulary vocab;
    vocab.entries.reserve(picked.size());
    for (const ScoredCandidate& s : picked) {
        vocab.entries.push_back({join_underscore(s.tokens), s.score});
    }
    return vocab;
}

}  // namespace psat
