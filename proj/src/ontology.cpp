#include "psat/ontology.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "psat/embedding.hpp"

namespace psat {

namespace {

using nlohmann::ordered_json;

bool valid_concept_phrase(const std::string& p) {
    if (p.empty()) return false;
    for (unsigned char c : p) {
        if (c >= 0x80) continue;                       // UTF-8 passthrough
        if (c >= 'a' && c <= 'z') continue;
        if (c >= '0' && c <= '9') continue;
        if (c == '_' || c == '\'') continue;
        return false;  // uppercase, whitespace and punctuation all rejected
    }
    return true;
}

}  // namespace

std::vector<std::string> OntologyClass::concept_phrases() const {
    std::vector<std::string> out;
    out.reserve(concepts.size());
    for (const Concept& c : concepts) out.push_back(c.phrase);
    return out;
}

const OntologyClass* Ontology::find_class(const std::string& id) const {
    for (const OntologyClass& c : classes) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

std::size_t Ontology::class_index(const std::string& id) const {
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].id == id) return i;
    }
    throw DataError("ontology '" + name + "' has no class '" + id + "'");
}

std::vector<std::string> Ontology::all_concept_phrases() const {
    std::vector<std::string> out;
    for (const OntologyClass& c : classes) {
        for (const Concept& con : c.concepts) out.push_back(con.phrase);
    }
    return out;
}

OntologyLoadResult parse_ontology(const std::string& json_text, const std::string& origin) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw DataError(origin + ": JSON parse failure: " + e.what());
    }
    if (!j.is_object() || !j.contains("name") || !j.contains("classes")) {
        throw DataError(origin + ": expected object with 'name' and 'classes'");
    }
    if (!j["classes"].is_array() || j["classes"].empty()) {
        throw DataError(origin + ": 'classes' must be a nonempty array");
    }

    OntologyLoadResult result;
    result.ontology.name = j["name"].get<std::string>();

    std::set<std::string> seen_ids;
    std::map<std::string, std::string> concept_owner;  // phrase -> first class id

    for (const auto& jc : j["classes"]) {
        OntologyClass cls;
        if (!jc.contains("id") || !jc.contains("question_text") || !jc.contains("concepts")) {
            throw DataError(origin + ": class missing id/question_text/concepts");
        }
        cls.id = jc["id"].get<std::string>();
        cls.question_text = jc["question_text"].get<std::string>();
        if (!seen_ids.insert(cls.id).second) {
            throw DataError(origin + ": duplicate class id '" + cls.id + "'");
        }
        if (!jc["concepts"].is_array() || jc["concepts"].empty()) {
            throw DataError(origin + ": class '" + cls.id + "' has an empty concept list");
        }
        for (const auto& jcon : jc["concepts"]) {
            Concept con;
            if (jcon.is_string()) {
                con.phrase = jcon.get<std::string>();
            } else if (jcon.is_object() && jcon.contains("phrase")) {
                con.phrase = jcon["phrase"].get<std::string>();
                if (jcon.contains("code")) con.code = jcon["code"].get<std::string>();
            } else {
                throw DataError(origin + ": class '" + cls.id +
                                "' concept must be a string or {phrase, code}");
            }
            if (!valid_concept_phrase(con.phrase)) {
                throw DataError(origin + ": class '" + cls.id + "' concept '" + con.phrase +
                                "' must be lowercase with underscores, no whitespace");
            }
            auto [it, inserted] = concept_owner.try_emplace(con.phrase, cls.id);
            if (!inserted && it->second != cls.id) {
                result.warnings.push_back("concept '" + con.phrase + "' appears in classes '" +
                                          it->second + "' and '" + cls.id + "'");
            }
            cls.concepts.push_back(std::move(con));
        }
        result.ontology.classes.push_back(std::move(cls));
    }
    return result;
}

OntologyLoadResult load_ontology(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open ontology file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_ontology(ss.str(), path);
}

std::string serialize_ontology(const Ontology& onto) {
    ordered_json j;
    j["name"] = onto.name;
    j["classes"] = ordered_json::array();
    for (const OntologyClass& c : onto.classes) {
        ordered_json jc;
        jc["id"] = c.id;
        jc["question_text"] = c.question_text;
        jc["concepts"] = ordered_json::array();
        for (const Concept& con : c.concepts) {
            if (con.code) {
                jc["concepts"].push_back(ordered_json{{"phrase", con.phrase}, {"code", *con.code}});
            } else {
                jc["concepts"].push_back(con.phrase);
            }
        }
        j["classes"].push_back(std::move(jc));
    }
    return j.dump(2) + "\n";
}

void save_ontology(const Ontology& onto, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write ontology file: " + path);
    out << serialize_ontology(onto);
}

ConceptMatrix concept_matrix(const Ontology& onto, const std::string& class_id,
                             const EmbeddingMatrix& embeddings) {
    const OntologyClass* cls = onto.find_class(class_id);
    if (!cls) throw DataError("ontology '" + onto.name + "' has no class '" + class_id + "'");

    ConceptMatrix out;
    std::vector<std::span<const double>> rows;
    for (const Concept& con : cls->concepts) {
        auto idx = embeddings.index_of(con.phrase);
        if (!idx) continue;
        rows.push_back(embeddings.row(*idx));
        out.phrases.push_back(con.phrase);
    }
    if (rows.empty()) {
        throw DataError("class '" + class_id +
                        "' has no concept present in the embedding vocabulary");
    }
    out.vectors = Tensor2(rows.size(), embeddings.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), out.vectors.row(i).begin());
    }
    out.coverage = static_cast<double>(rows.size()) / static_cast<double>(cls->concepts.size());
    return out;
}

}  // namespace psat
