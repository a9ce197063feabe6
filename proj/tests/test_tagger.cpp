#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "psat/rng.hpp"
#include "psat/tagger.hpp"
#include "psat/text.hpp"

using namespace psat;

namespace {

PhraseVocabulary vocab_of(const std::vector<std::string>& phrases) {
    PhraseVocabulary v;
    for (const auto& p : phrases) v.entries.push_back({p, 1.0});
    return v;
}

}  // namespace

TEST_CASE("tokenize keeps interior apostrophes and records spans") {
    auto tokens = tokenize("I can't sleep, REALLY!");
    REQUIRE(tokens.size() == 4);
    CHECK(tokens[0].text == "i");
    CHECK(tokens[1].text == "can't");
    CHECK(tokens[2].text == "sleep");
    CHECK(tokens[3].text == "really");
    CHECK(tokens[1].begin == 2);
    CHECK(tokens[1].end == 7);
}

TEST_CASE("tag_document paper join convention with span") {
    auto doc = tag_document("d1", "feeling really low today", vocab_of({"feeling_really_low"}));
    REQUIRE(doc.phrases.size() == 1);
    CHECK(doc.phrases[0] == "feeling_really_low");
    CHECK(doc.spans[0].first == 0);
    CHECK(doc.spans[0].second == 18);
}

TEST_CASE("zero vocabulary hits give a valid empty stream") {
    auto doc = tag_document("d2", "totally unrelated words", vocab_of({"feeling_really_low"}));
    CHECK(doc.phrases.empty());
    CHECK(doc.spans.empty());
    CHECK(doc.original_text == "totally unrelated words");
}

TEST_CASE("greedy longest match wins") {
    auto doc = tag_document("d3", "a b c", vocab_of({"a_b_c", "a_b"}));
    REQUIRE(doc.phrases.size() == 1);
    CHECK(doc.phrases[0] == "a_b_c");
}

TEST_CASE("unigram fallback keeps single vocabulary tokens") {
    auto doc = tag_document("d4", "therapy and sleep", vocab_of({"therapy", "sleep_hygiene",
                                                                 "sleep"}));
    REQUIRE(doc.phrases.size() == 2);
    CHECK(doc.phrases[0] == "therapy");
    CHECK(doc.phrases[1] == "sleep");
}

TEST_CASE("empty text and empty vocabulary edge cases") {
    auto doc = tag_document("d5", "", vocab_of({"x"}));
    CHECK(doc.phrases.empty());
    CHECK_THROWS_AS(tag_document("d6", "text", PhraseVocabulary{}), DataError);
}

TEST_CASE("span reconstruction reproduces original substrings") {
    std::string text = "Feeling really low today; can't sleep, no energy at ALL.";
    auto vocab = vocab_of({"feeling_really_low", "can't_sleep", "no_energy", "energy"});
    auto doc = tag_document("d7", text, vocab);
    REQUIRE(doc.phrases.size() == 3);
    for (std::size_t i = 0; i < doc.phrases.size(); ++i) {
        auto [s, e] = doc.spans[i];
        std::string sub = text.substr(s, e - s);
        auto sub_tokens = tokenize(sub);
        std::vector<std::string> words;
        for (const auto& t : sub_tokens) words.push_back(t.text);
        CHECK(join_underscore(words) == doc.phrases[i]);
    }
}

TEST_CASE("properties: spans ascend, never overlap, greedy is maximal") {
    std::vector<std::string> vocab_phrases = {"aa", "aa_bb", "aa_bb_cc", "bb_cc", "cc",
                                              "dd", "dd_ee", "ee_ff", "ff"};
    auto vocab = vocab_of(vocab_phrases);
    std::set<std::string> phrase_set(vocab_phrases.begin(), vocab_phrases.end());
    std::vector<std::string> words = {"aa", "bb", "cc", "dd", "ee", "ff", "zz"};

    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        std::string text;
        std::vector<std::string> seq;
        for (int i = 0; i < 12; ++i) {
            const std::string& w = words[rng.below(words.size())];
            seq.push_back(w);
            if (!text.empty()) text += ' ';
            text += w;
        }
        auto doc = tag_document("t", text, vocab);

        std::size_t prev_end = 0;
        for (std::size_t i = 0; i < doc.spans.size(); ++i) {
            auto [s, e] = doc.spans[i];
            CHECK(s >= prev_end);  // non-overlapping, ascending
            CHECK(e > s);
            prev_end = e;
        }

        // Greedy maximality: no emitted phrase extends to a longer
        // vocabulary phrase at the same start offset.
        auto tokens = tokenize(text);
        for (std::size_t i = 0; i < doc.phrases.size(); ++i) {
            std::size_t start_tok = 0;
            while (tokens[start_tok].begin != doc.spans[i].first) ++start_tok;
            std::size_t len = static_cast<std::size_t>(
                std::count(doc.phrases[i].begin(), doc.phrases[i].end(), '_')) + 1;
            std::string extended = doc.phrases[i];
            for (std::size_t ext = start_tok + len; ext < tokens.size(); ++ext) {
                extended += '_' + tokens[ext].text;
                CAPTURE(text);
                CHECK(phrase_set.count(extended) == 0);
            }
        }
    }
}

TEST_CASE("tagged corpus save/load round trip") {
    auto vocab = vocab_of({"feeling_really_low", "no_energy"});
    std::vector<TaggedDocument> docs = {
        tag_document("a", "feeling really low", vocab),
        tag_document("b", "no energy today", vocab),
        tag_document("c", "nothing matches here", vocab),
    };
    auto tmp = std::filesystem::temp_directory_path() / "psat_tagged_rt.jsonl";
    save_tagged_corpus(docs, tmp.string());
    auto back = load_tagged_corpus(tmp.string());
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        CHECK(back[i].doc_id == docs[i].doc_id);
        CHECK(back[i].phrases == docs[i].phrases);
        CHECK(back[i].spans == docs[i].spans);
    }
}
