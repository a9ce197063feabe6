#include "psat/explain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace psat {

namespace {

// Fixed palette indexed by ontology class order, wrapping if needed, so
// reports are comparable across runs.
struct Color {
    int r, g, b;
};
constexpr Color kPalette[] = {
    {31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
    {148, 103, 189}, {140, 86, 75},  {227, 119, 194}, {127, 127, 127},
    {188, 189, 34}, {23, 190, 207}, {174, 199, 232}, {255, 187, 120},
};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string html_escape(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

}  // namespace

Explanation build_explanation(const TaggedDocument& doc,
                              const std::vector<std::vector<double>>& attention,
                              const std::vector<double>& prediction, const Ontology& ontology,
                              std::size_t top_m) {
    Explanation out;
    out.doc_id = doc.doc_id;
    out.prediction = prediction;
    if (attention.empty()) return out;  // empty phrase stream: prediction only

    if (attention.size() != ontology.class_count()) {
        throw DataError("build_explanation: attention has " + std::to_string(attention.size()) +
                        " blocks but ontology has " + std::to_string(ontology.class_count()) +
                        " classes");
    }
    const std::size_t n = attention[0].size();
    if (n == 0) return out;
    if (n > doc.phrases.size()) {
        throw DataError("build_explanation: more attention weights than document phrases");
    }
    const double activation_threshold = 2.0 / static_cast<double>(n);

    struct Pair {
        std::size_t block, pos;
        double weight;
    };
    std::vector<Pair> pairs;
    pairs.reserve(attention.size() * n);

    for (std::size_t b = 0; b < attention.size(); ++b) {
        if (attention[b].size() != n) {
            throw DataError("build_explanation: ragged attention rows");
        }
        BlockExplanation blk;
        blk.class_id = ontology.classes[b].id;
        blk.question_text = ontology.classes[b].question_text;
        double max_w = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            blk.phrases.push_back(PhraseWeight{doc.phrases[p], doc.spans[p].first,
                                               doc.spans[p].second, attention[b][p]});
            max_w = std::max(max_w, attention[b][p]);
            pairs.push_back(Pair{b, p, attention[b][p]});
        }
        std::stable_sort(blk.phrases.begin(), blk.phrases.end(),
                         [](const PhraseWeight& a, const PhraseWeight& c) {
                             return a.weight > c.weight;
                         });
        blk.cumulative = max_w * static_cast<double>(n);
        blk.active = max_w > activation_threshold;
        out.blocks.push_back(std::move(blk));
    }

    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return a.weight > b.weight;  // stable: ties keep block order then position
    });
    std::size_t take = std::min(top_m, pairs.size());
    for (std::size_t i = 0; i < take; ++i) {
        out.highlighted.push_back(HighlightEntry{doc.phrases[pairs[i].pos],
                                                 ontology.classes[pairs[i].block].id,
                                                 pairs[i].weight});
    }
    return out;
}

std::vector<std::string> highlighted_phrases(const TaggedDocument& doc,
                                             const std::vector<std::vector<double>>& attention,
                                             std::size_t top_m) {
    if (attention.empty() || attention[0].empty()) return {};
    const std::size_t n = attention[0].size();
    std::vector<double> best(n, 0.0);
    for (const auto& row : attention) {
        for (std::size_t p = 0; p < n && p < row.size(); ++p) {
            best[p] = std::max(best[p], row[p]);
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return best[a] > best[b]; });
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::size_t i : order) {
        if (out.size() >= top_m) break;
        if (seen.insert(doc.phrases[i]).second) out.push_back(doc.phrases[i]);
    }
    return out;
}

std::string render_html(std::span<const Explanation> explanations, const Ontology& ontology,
                        const std::unordered_map<std::string, std::string>& doc_texts) {
    std::ostringstream html;
    html << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
         << "<title>Attention report: " << html_escape(ontology.name) << "</title>\n"
         << "<style>\n"
         << "body{font-family:sans-serif;margin:2em;max-width:70em}\n"
         << "article{border-top:1px solid #ccc;padding:1em 0}\n"
         << ".doc-text{line-height:1.8;background:#fafafa;padding:0.8em;border-radius:4px}\n"
         << ".legend span{display:inline-block;margin:0 0.6em 0.3em 0}\n"
         << ".swatch{display:inline-block;width:0.8em;height:0.8em;margin-right:0.25em;"
         << "border-radius:2px;vertical-align:baseline}\n"
         << ".bars{margin:0.5em 0}\n"
         << ".barrow{display:flex;align-items:center;margin:2px 0;font-size:0.85em}\n"
         << ".barlabel{width:4em;flex-shrink:0}\n"
         << ".bar{height:0.8em;border-radius:2px}\n"
         << ".prediction{color:#555;font-size:0.9em}\n"
         << "</style>\n</head>\n<body>\n"
         << "<h1>Per-question attention report</h1>\n";

    html << "<section class=\"legend\">\n";
    for (std::size_t c = 0; c < ontology.class_count(); ++c) {
        const Color& col = kPalette[c % kPaletteSize];
        html << "<span><span class=\"swatch\" style=\"background:rgb(" << col.r << ',' << col.g
             << ',' << col.b << ")\"></span><strong>"
             << html_escape(ontology.classes[c].id) << "</strong> "
             << html_escape(ontology.classes[c].question_text) << "</span>\n";
    }
    html << "</section>\n";

    if (explanations.empty()) {
        html << "<p><em>No documents.</em></p>\n</body>\n</html>\n";
        return html.str();
    }

    for (const Explanation& ex : explanations) {
        html << "<article>\n<h2>" << html_escape(ex.doc_id) << "</h2>\n<p class=\"prediction\">"
             << "prediction: [";
        for (std::size_t i = 0; i < ex.prediction.size(); ++i) {
            if (i) html << ", ";
            html << fmt("%.3f", ex.prediction[i]);
        }
        html << "]</p>\n";

        auto text_it = doc_texts.find(ex.doc_id);
        if (ex.blocks.empty() || text_it == doc_texts.end()) {
            html << "<p class=\"doc-text\"><em>No vocabulary phrases in this document.</em></p>\n"
                 << "</article>\n";
            continue;
        }
        const std::string& text = text_it->second;

        // Winning block and weight per span; spans never overlap.
        struct Mark {
            std::size_t end;
            std::size_t block;
            double weight;
        };
        std::map<std::size_t, Mark> marks;
        double doc_max = 0.0;
        for (std::size_t b = 0; b < ex.blocks.size(); ++b) {
            for (const PhraseWeight& pw : ex.blocks[b].phrases) {
                if (pw.span_end > text.size()) {
                    throw DataError("render_html: span beyond original text in doc '" +
                                    ex.doc_id + "'");
                }
                auto it = marks.find(pw.span_begin);
                if (it == marks.end() || pw.weight > it->second.weight) {
                    marks[pw.span_begin] = Mark{pw.span_end, b, pw.weight};
                }
                doc_max = std::max(doc_max, pw.weight);
            }
        }

        html << "<p class=\"doc-text\">";
        std::size_t cursor = 0;
        for (const auto& [begin, mark] : marks) {
            if (begin < cursor) continue;
            html << html_escape(std::string_view(text).substr(cursor, begin - cursor));
            if (mark.weight > 0.0) {
                double alpha = doc_max > 0.0 ? 0.85 * mark.weight / doc_max : 0.0;
                const Color& col = kPalette[mark.block % kPaletteSize];
                html << "<span style=\"background:rgba(" << col.r << ',' << col.g << ',' << col.b
                     << ',' << fmt("%.3f", alpha) << ")\">"
                     << html_escape(std::string_view(text).substr(begin, mark.end - begin))
                     << "</span>";
            } else {
                html << html_escape(std::string_view(text).substr(begin, mark.end - begin));
            }
            cursor = mark.end;
        }
        html << html_escape(std::string_view(text).substr(cursor));
        html << "</p>\n";

        // Per-question bar chart of peak-over-uniform attention.
        double max_cum = 0.0;
        for (const BlockExplanation& blk : ex.blocks) max_cum = std::max(max_cum, blk.cumulative);
        html << "<div class=\"bars\">\n";
        for (std::size_t b = 0; b < ex.blocks.size(); ++b) {
            const BlockExplanation& blk = ex.blocks[b];
            const Color& col = kPalette[b % kPaletteSize];
            double width = max_cum > 0.0 ? 100.0 * blk.cumulative / max_cum : 0.0;
            html << "<div class=\"barrow\"><span class=\"barlabel\">" << html_escape(blk.class_id)
                 << "</span><div class=\"bar\" style=\"width:" << fmt("%.1f", width)
                 << "%;background:rgb(" << col.r << ',' << col.g << ',' << col.b << ")\"></div>"
                 << "<span>&nbsp;" << fmt("%.2f", blk.cumulative)
                 << (blk.active ? " (active)" : "") << "</span></div>\n";
        }
        html << "</div>\n</article>\n";
    }
    html << "</body>\n</html>\n";
    return html.str();
}

std::string explanations_to_json(std::span<const Explanation> explanations) {
    nlohmann::ordered_json root;
    root["explanations"] = nlohmann::ordered_json::array();
    for (const Explanation& ex : explanations) {
        nlohmann::ordered_json je;
        je["doc_id"] = ex.doc_id;
        je["prediction"] = ex.prediction;
        je["blocks"] = nlohmann::ordered_json::array();
        for (const BlockExplanation& blk : ex.blocks) {
            nlohmann::ordered_json jb;
            jb["class_id"] = blk.class_id;
            jb["question_text"] = blk.question_text;
            jb["active"] = blk.active;
            jb["phrases"] = nlohmann::ordered_json::array();
            for (const PhraseWeight& pw : blk.phrases) {
                jb["phrases"].push_back({{"phrase", pw.phrase},
                                         {"span", {pw.span_begin, pw.span_end}},
                                         {"weight", pw.weight}});
            }
            jb["cumulative"] = blk.cumulative;
            je["blocks"].push_back(std::move(jb));
        }
        je["highlighted"] = nlohmann::ordered_json::array();
        for (const HighlightEntry& h : ex.highlighted) {
            je["highlighted"].push_back(
                {{"phrase", h.phrase}, {"class_id", h.class_id}, {"weight", h.weight}});
        }
        root["explanations"].push_back(std::move(je));
    }
    return root.dump(2) + "\n";
}

void export_json(std::span<const Explanation> explanations, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write explanation JSON: " + path);
    out << explanations_to_json(explanations);
    if (!out) throw DataError("write failure on explanation JSON: " + path);
}

std::vector<Explanation> import_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open explanation JSON: " + path);
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    std::vector<Explanation> out;
    for (const auto& je : root.at("explanations")) {
        Explanation ex;
        ex.doc_id = je.at("doc_id").get<std::string>();
        ex.prediction = je.at("prediction").get<std::vector<double>>();
        for (const auto& jb : je.at("blocks")) {
            BlockExplanation blk;
            blk.class_id = jb.at("class_id").get<std::string>();
            blk.question_text = jb.at("question_text").get<std::string>();
            blk.active = jb.at("active").get<bool>();
            for (const auto& jp : jb.at("phrases")) {
                PhraseWeight pw;
                pw.phrase = jp.at("phrase").get<std::string>();
                pw.span_begin = jp.at("span").at(0).get<std::size_t>();
                pw.span_end = jp.at("span").at(1).get<std::size_t>();
                pw.weight = jp.at("weight").get<double>();
                blk.phrases.push_back(std::move(pw));
            }
            blk.cumulative = jb.at("cumulative").get<double>();
            ex.blocks.push_back(std::move(blk));
        }
        for (const auto& jh : je.at("highlighted")) {
            ex.highlighted.push_back(HighlightEntry{jh.at("phrase").get<std::string>(),
                                                    jh.at("class_id").get<std::string>(),
                                                    jh.at("weight").get<double>()});
        }
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace psat
