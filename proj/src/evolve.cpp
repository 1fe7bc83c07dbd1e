#include "themescope/evolve.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

#include "themescope/error.hpp"

namespace themescope::evolve {

namespace {

std::map<std::string, const corpus::Document*> index_docs(std::span<const corpus::Document> docs) {
    std::map<std::string, const corpus::Document*> out;
    for (const auto& d : docs) out[d.doc_id] = &d;
    return out;
}

}  // namespace

std::vector<EvolutionSeries> theme_by_year(std::span<const themes::ThemeAssignment> assignments,
                                           std::span<const corpus::Document> docs) {
    const auto by_id = index_docs(docs);
    struct Acc {
        std::string display;
        std::map<int, int> years;
        int pre = 0;
        int post = 0;
    };
    std::map<std::string, Acc> acc;
    for (const auto& a : assignments) {
        const auto it = by_id.find(a.doc_id);
        if (it == by_id.end()) throw ReferentialError("assignment refers to unknown document " + a.doc_id);
        const auto& doc = *it->second;
        for (const auto& t : a.themes) {
            const auto key = themes::theme_key(t);
            auto [slot, inserted] = acc.try_emplace(key);
            auto& e = slot->second;
            if (inserted || t < e.display) e.display = t;
            ++e.years[doc.year];
            ++(doc.era == corpus::Era::pre_ai_act ? e.pre : e.post);
        }
    }
    std::vector<EvolutionSeries> out;
    for (auto& [key, e] : acc) {
        EvolutionSeries s{e.display, key, {}, e.pre, e.post};
        for (const auto& [year, count] : e.years) s.points.push_back({year, count});
        out.push_back(std::move(s));
    }
    return out;
}

std::pair<themes::ThemeCatalog, themes::ThemeCatalog> split_by_era(
    std::span<const themes::ThemeAssignment> assignments, std::span<const corpus::Document> docs) {
    const auto by_id = index_docs(docs);
    std::vector<themes::ThemeAssignment> pre, post;
    for (const auto& a : assignments) {
        const auto it = by_id.find(a.doc_id);
        if (it == by_id.end()) continue;
        (it->second->era == corpus::Era::pre_ai_act ? pre : post).push_back(a);
    }
    return {themes::catalog(pre), themes::catalog(post)};
}

Direction parse_direction(std::string_view token) {
    if (token == "top") return Direction::top;
    if (token == "bottom") return Direction::bottom;
    throw ParamError("direction must be top or bottom, got '" + std::string(token) + "'");
}

std::vector<EvolutionSeries> select_series(std::span<const EvolutionSeries> series, int k, Direction direction) {
    if (k < 1) throw ParamError("k must be at least 1");
    std::vector<EvolutionSeries> ranked(series.begin(), series.end());
    std::sort(ranked.begin(), ranked.end(), [direction](const EvolutionSeries& a, const EvolutionSeries& b) {
        if (a.total() != b.total()) return direction == Direction::top ? a.total() > b.total() : a.total() < b.total();
        return a.key < b.key;
    });
    if (ranked.size() > static_cast<std::size_t>(k)) ranked.resize(static_cast<std::size_t>(k));
    return ranked;
}

StreamLayout stream_layout(std::span<const EvolutionSeries> selected) {
    if (selected.empty()) throw EmptyInputError("stream_layout needs at least one series");
    std::set<int> year_set;
    for (const auto& s : selected) {
        for (const auto& p : s.points) year_set.insert(p.year);
    }
    StreamLayout layout;
    layout.years.assign(year_set.begin(), year_set.end());

    std::vector<std::map<int, int>> counts;
    for (const auto& s : selected) {
        auto& m = counts.emplace_back();
        for (const auto& p : s.points) m[p.year] += p.count;
        layout.bands.push_back({s.theme, {}});
    }
    for (const int year : layout.years) {
        long long total = 0;
        for (const auto& m : counts) {
            const auto it = m.find(year);
            if (it != m.end()) total += it->second;
        }
        // Integer counts keep every boundary exact in double arithmetic.
        double y = -static_cast<double>(total) / 2.0;
        for (std::size_t b = 0; b < counts.size(); ++b) {
            const auto it = counts[b].find(year);
            const double h = it != counts[b].end() ? it->second : 0;
            layout.bands[b].points.push_back({year, y, y + h});
            y += h;
        }
    }
    return layout;
}

std::string evolution_json(std::span<const EvolutionSeries> series) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& s : series) {
        auto points = nlohmann::ordered_json::array();
        for (const auto& p : s.points) points.push_back({{"year", p.year}, {"count", p.count}});
        arr.push_back({{"theme", s.theme}, {"points", points}, {"era", {{"pre", s.pre}, {"post", s.post}}}});
    }
    return arr.dump(2) + "\n";
}

}  // namespace themescope::evolve
