#include "doctest.h"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "psat/embedding.hpp"
#include "psat/ontology.hpp"
#include "psat/tensor.hpp"

using namespace psat;

namespace {

const std::string kDataDir = PSAT_DATA_DIR;

EmbeddingMatrix tiny_embeddings(const std::vector<std::string>& phrases, std::size_t dim) {
    Tensor2 vecs(phrases.size(), dim);
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        vecs.data[i] = 0.1 * static_cast<double>(i + 1);
    }
    return EmbeddingMatrix(phrases, vecs);
}

}  // namespace

TEST_CASE("bundled PHQ-9 ontology loads with 12 classes in order") {
    auto loaded = load_ontology(kDataDir + "/phq9.onto.json");
    const Ontology& onto = loaded.ontology;
    REQUIRE(onto.class_count() == 12);
    const char* expected[] = {"Q1", "Q2", "Q3", "Q4",  "Q5",  "Q6",
                              "Q7", "Q8", "Q9", "AQ1", "AQ2", "AQ3"};
    for (std::size_t i = 0; i < 12; ++i) CHECK(onto.classes[i].id == expected[i]);
    for (const auto& cls : onto.classes) CHECK(!cls.concepts.empty());
    CHECK(loaded.warnings.empty());  // bundled concept lists are disjoint
}

TEST_CASE("bundled C-SSRS ontology loads with 5 classes") {
    auto loaded = load_ontology(kDataDir + "/cssrs.onto.json");
    REQUIRE(loaded.ontology.class_count() == 5);
    CHECK(loaded.ontology.classes[0].id == "supportive");
    CHECK(loaded.ontology.classes[4].id == "attempt");
}

TEST_CASE("ontology validation errors") {
    SUBCASE("empty concept list names the class") {
        std::string bad = R"({"name":"x","classes":[{"id":"Q1","question_text":"t","concepts":[]}]})";
        CHECK_THROWS_WITH_AS(parse_ontology(bad, "test"), doctest::Contains("Q1"), DataError);
    }
    SUBCASE("duplicate class id") {
        std::string bad = R"({"name":"x","classes":[
            {"id":"A","question_text":"t","concepts":["p"]},
            {"id":"A","question_text":"t","concepts":["q"]}]})";
        CHECK_THROWS_WITH_AS(parse_ontology(bad, "test"), doctest::Contains("duplicate"),
                             DataError);
    }
    SUBCASE("whitespace or uppercase in concept") {
        std::string ws = R"({"name":"x","classes":[{"id":"A","question_text":"t","concepts":["two words"]}]})";
        CHECK_THROWS_AS(parse_ontology(ws, "test"), DataError);
        std::string uc = R"({"name":"x","classes":[{"id":"A","question_text":"t","concepts":["Word"]}]})";
        CHECK_THROWS_AS(parse_ontology(uc, "test"), DataError);
    }
    SUBCASE("parse failure") {
        CHECK_THROWS_AS(parse_ontology("{not json", "test"), DataError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_ontology("/nonexistent/path.json"), DataError);
    }
}

TEST_CASE("concept shared between classes warns but loads") {
    std::string shared = R"({"name":"x","classes":[
        {"id":"A","question_text":"t","concepts":["fatigue"]},
        {"id":"B","question_text":"t","concepts":["fatigue","other"]}]})";
    auto loaded = parse_ontology(shared, "test");
    CHECK(loaded.ontology.class_count() == 2);
    REQUIRE(loaded.warnings.size() == 1);
    CHECK(loaded.warnings[0].find("fatigue") != std::string::npos);
}

TEST_CASE("optional concept code round-trips") {
    std::string with_code = R"({"name":"x","classes":[
        {"id":"A","question_text":"t","concepts":[{"phrase":"low_mood","code":"366979004"},"plain"]}]})";
    auto loaded = parse_ontology(with_code, "test");
    REQUIRE(loaded.ontology.classes[0].concepts.size() == 2);
    CHECK(loaded.ontology.classes[0].concepts[0].code == "366979004");
    CHECK(!loaded.ontology.classes[0].concepts[1].code.has_value());

    std::string serialized = serialize_ontology(loaded.ontology);
    auto reloaded = parse_ontology(serialized, "round");
    CHECK(reloaded.ontology.classes[0].concepts[0].code == "366979004");
}

TEST_CASE("load then serialize round-trips modulo whitespace") {
    for (const std::string file : {"/phq9.onto.json", "/cssrs.onto.json"}) {
        std::ifstream in(kDataDir + file);
        REQUIRE(in.good());
        nlohmann::json original = nlohmann::json::parse(in);
        auto loaded = load_ontology(kDataDir + file);
        nlohmann::json reserialized = nlohmann::json::parse(serialize_ontology(loaded.ontology));
        CHECK(original == reserialized);

        // A second serialize pass is byte-identical.
        auto reparsed = parse_ontology(serialize_ontology(loaded.ontology), "x");
        CHECK(serialize_ontology(reparsed.ontology) == serialize_ontology(loaded.ontology));
    }
}

TEST_CASE("concept_matrix coverage and errors") {
    std::string onto_json = R"({"name":"x","classes":[
        {"id":"A","question_text":"t","concepts":["p1","p2","p3"]},
        {"id":"B","question_text":"t","concepts":["p1","p4","p5","p6"]},
        {"id":"C","question_text":"t","concepts":["p9"]}]})";
    auto loaded = parse_ontology(onto_json, "test");
    EmbeddingMatrix emb = tiny_embeddings({"p1", "p2", "p3", "p4", "p5"}, 50);

    SUBCASE("full coverage") {
        ConceptMatrix cm = concept_matrix(loaded.ontology, "A", emb);
        CHECK(cm.vectors.rows == 3);
        CHECK(cm.vectors.cols == 50);
        CHECK(cm.coverage == doctest::Approx(1.0));
    }
    SUBCASE("partial coverage counts the skips") {
        ConceptMatrix cm = concept_matrix(loaded.ontology, "B", emb);
        CHECK(cm.vectors.rows == 3);  // p6 missing
        CHECK(cm.coverage == doctest::Approx(0.75));
    }
    SUBCASE("vacuous class errors") {
        CHECK_THROWS_AS(concept_matrix(loaded.ontology, "C", emb), DataError);
    }
    SUBCASE("unknown class errors") {
        CHECK_THROWS_AS(concept_matrix(loaded.ontology, "Z", emb), DataError);
    }
}
