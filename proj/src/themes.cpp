#include "themescope/themes.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"

namespace themescope::themes {

namespace {

const csv::Row kAssignmentsHeader{"doc_id", "topic_id", "coherent", "theme1", "theme2", "theme3", "annotator"};

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

bool parse_bool(std::string_view s, std::size_t row) {
    const auto key = theme_key(s);
    if (key == "true" || key == "1" || key == "yes") return true;
    if (key == "false" || key == "0" || key == "no") return false;
    throw FormatError("assignments row " + std::to_string(row) + ": coherent must be true or false");
}

std::vector<std::string> sorted_keys(const std::vector<std::string>& themes) {
    std::vector<std::string> keys;
    for (const auto& t : themes) keys.push_back(theme_key(t));
    std::sort(keys.begin(), keys.end());
    return keys;
}

}  // namespace

std::string theme_key(std::string_view name) {
    std::string out(trim(name));
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

ThemeAssignment make_assignment(std::string doc_id, int topic_id, std::span<const std::string> themes, bool coherent,
                                std::string annotator) {
    std::vector<std::string> cleaned;
    for (const auto& t : themes) {
        auto trimmed = trim(t);
        if (!trimmed.empty()) cleaned.emplace_back(trimmed);
    }
    if (cleaned.size() > kMaxThemes) {
        throw TooManyThemes("topic " + doc_id + "/" + std::to_string(topic_id) + " has " +
                            std::to_string(cleaned.size()) + " themes; at most 3 are allowed");
    }
    if (!coherent && !cleaned.empty()) {
        throw InconsistentAssignment("topic " + doc_id + "/" + std::to_string(topic_id) +
                                     " is marked incoherent but carries themes");
    }
    ThemeAssignment out{std::move(doc_id), topic_id, coherent, {}, std::string(trim(annotator))};
    std::set<std::string> seen;
    for (auto& t : cleaned) {
        if (seen.insert(theme_key(t)).second) out.themes.push_back(std::move(t));
    }
    return out;
}

std::vector<ThemeAssignment> parse_assignments(std::string_view text) {
    auto rows = csv::parse(text);
    if (rows.empty() || rows.front() != kAssignmentsHeader) {
        throw FormatError("assignments header must be '" + csv::format_row(kAssignmentsHeader) + "'");
    }
    std::vector<ThemeAssignment> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != kAssignmentsHeader.size()) {
            throw FormatError("assignments row " + std::to_string(r) + ": expected 7 fields");
        }
        if (trim(row[2]).empty()) continue;
        const std::vector<std::string> names{row[3], row[4], row[5]};
        try {
            out.push_back(make_assignment(row[0], io::parse_int(trim(row[1]), "topic_id"), names,
                                          parse_bool(row[2], r), row[6]));
        } catch (const Error& e) {
            throw FormatError("assignments row " + std::to_string(r) + ": " + e.what());
        }
    }
    return out;
}

std::string format_assignments(std::span<const ThemeAssignment> assignments) {
    std::vector<csv::Row> rows;
    for (const auto& a : assignments) {
        csv::Row row{a.doc_id, std::to_string(a.topic_id), a.coherent ? "true" : "false", "", "", "", a.annotator};
        for (std::size_t i = 0; i < a.themes.size() && i < kMaxThemes; ++i) row[3 + i] = a.themes[i];
        rows.push_back(std::move(row));
    }
    return csv::format_table(kAssignmentsHeader, rows);
}

AssignmentStore::AssignmentStore(std::filesystem::path assignments_csv, std::filesystem::path stale_csv)
    : path_(std::move(assignments_csv)), stale_path_(std::move(stale_csv)) {
    auto load = [](const std::filesystem::path& p, auto& into) {
        if (p.empty() || !std::filesystem::exists(p)) return;
        for (auto& a : parse_assignments(io::read_text(p))) {
            Key key{a.doc_id, a.topic_id, a.annotator};
            into[key] = std::move(a);
        }
    };
    load(path_, active_);
    load(stale_path_, stale_);
}

void AssignmentStore::persist_locked() const {
    std::vector<ThemeAssignment> rows;
    for (const auto& [k, a] : active_) rows.push_back(a);
    io::atomic_write(path_, format_assignments(rows));
    if (!stale_path_.empty()) {
        rows.clear();
        for (const auto& [k, a] : stale_) rows.push_back(a);
        io::atomic_write(stale_path_, format_assignments(rows));
    }
}

ThemeAssignment AssignmentStore::assign(const std::string& doc_id, int topic_id, std::span<const std::string> themes,
                                        bool coherent, const std::string& annotator, const TopicExists& exists) {
    if (exists && !exists(doc_id, topic_id)) {
        throw NotFound("no topic " + std::to_string(topic_id) + " in document " + doc_id);
    }
    auto a = make_assignment(doc_id, topic_id, themes, coherent, annotator);
    std::lock_guard lock(mutex_);
    Key key{a.doc_id, a.topic_id, a.annotator};
    active_[key] = a;
    stale_.erase(key);
    persist_locked();
    return a;
}

void AssignmentStore::put_all(std::span<const ThemeAssignment> assignments) {
    std::lock_guard lock(mutex_);
    for (const auto& a : assignments) {
        Key key{a.doc_id, a.topic_id, a.annotator};
        active_[key] = a;
        stale_.erase(key);
    }
    persist_locked();
}

void AssignmentStore::mark_stale(const std::string& doc_id) {
    std::lock_guard lock(mutex_);
    for (auto it = active_.begin(); it != active_.end();) {
        if (std::get<0>(it->first) == doc_id) {
            stale_[it->first] = std::move(it->second);
            it = active_.erase(it);
        } else {
            ++it;
        }
    }
    persist_locked();
}

std::vector<ThemeAssignment> AssignmentStore::active() const {
    std::lock_guard lock(mutex_);
    std::vector<ThemeAssignment> out;
    for (const auto& [k, a] : active_) out.push_back(a);
    return out;
}

std::vector<ThemeAssignment> AssignmentStore::stale() const {
    std::lock_guard lock(mutex_);
    std::vector<ThemeAssignment> out;
    for (const auto& [k, a] : stale_) out.push_back(a);
    return out;
}

std::vector<ThemeAssignment> consolidated_view(std::span<const ThemeAssignment> assignments) {
    std::map<std::pair<std::string, int>, const ThemeAssignment*> pick;
    for (const auto& a : assignments) {
        auto& slot = pick[{a.doc_id, a.topic_id}];
        if (!slot) {
            slot = &a;
            continue;
        }
        const bool a_joint = a.annotator == kJointAnnotator;
        const bool slot_joint = slot->annotator == kJointAnnotator;
        if (a_joint != slot_joint ? a_joint : a.annotator < slot->annotator) slot = &a;
    }
    std::vector<ThemeAssignment> out;
    for (const auto& [k, a] : pick) out.push_back(*a);
    return out;
}

MergeResult merge_annotators(std::span<const ThemeAssignment> a, std::span<const ThemeAssignment> b) {
    using TopicKey = std::pair<std::string, int>;
    std::map<TopicKey, const ThemeAssignment*> ma, mb;
    for (const auto& x : a) ma[{x.doc_id, x.topic_id}] = &x;
    for (const auto& x : b) mb[{x.doc_id, x.topic_id}] = &x;
    std::set<TopicKey> keys;
    for (const auto& [k, v] : ma) keys.insert(k);
    for (const auto& [k, v] : mb) keys.insert(k);

    MergeResult result;
    for (const auto& key : keys) {
        const auto ia = ma.find(key);
        const auto ib = mb.find(key);
        if (ia == ma.end() || ib == mb.end()) {
            result.consolidated.push_back({ia != ma.end() ? *ia->second : *ib->second, true});
            continue;
        }
        const auto& x = *ia->second;
        const auto& y = *ib->second;
        if (x.coherent == y.coherent && sorted_keys(x.themes) == sorted_keys(y.themes)) {
            // Same set; pick a display form per key independent of argument order.
            std::map<std::string, std::string> display;
            for (const auto* side : {&x.themes, &y.themes}) {
                for (const auto& t : *side) {
                    auto [it, inserted] = display.emplace(theme_key(t), t);
                    if (!inserted && t < it->second) it->second = t;
                }
            }
            ThemeAssignment merged{key.first, key.second, x.coherent, {}, std::string(kJointAnnotator)};
            for (const auto& [k, d] : display) merged.themes.push_back(d);
            result.consolidated.push_back({std::move(merged), false});
        } else {
            result.conflicts.push_back({key.first, key.second, x.themes, y.themes, x.coherent, y.coherent});
        }
    }
    return result;
}

int ThemeCatalog::total() const {
    int t = 0;
    for (const auto& e : entries) t += e.count;
    return t;
}

ThemeCatalog catalog(std::span<const ThemeAssignment> assignments) {
    std::map<std::string, CatalogEntry> by_key;
    for (const auto& a : assignments) {
        for (const auto& t : a.themes) {
            const auto key = theme_key(t);
            auto [it, inserted] = by_key.try_emplace(key);
            auto& e = it->second;
            if (inserted) {
                e.key = key;
                e.display = std::string(trim(t));
            } else if (std::string(trim(t)) < e.display) {
                e.display = std::string(trim(t));
            }
            ++e.count;
            ++e.per_doc[a.doc_id];
        }
    }
    ThemeCatalog out;
    for (auto& [k, e] : by_key) out.entries.push_back(std::move(e));
    std::stable_sort(out.entries.begin(), out.entries.end(), [](const CatalogEntry& x, const CatalogEntry& y) {
        if (x.count != y.count) return x.count > y.count;
        return x.key < y.key;
    });
    return out;
}

std::string format_themes_csv(const ThemeCatalog& catalog) {
    std::vector<csv::Row> rows;
    for (const auto& e : catalog.entries) rows.push_back({e.display, std::to_string(e.count)});
    return csv::format_table({"theme", "count"}, rows);
}

double incoherence_rate(std::span<const ThemeAssignment> assignments) {
    if (assignments.empty()) throw EmptyInputError("incoherence_rate of no assignments");
    const auto incoherent = std::count_if(assignments.begin(), assignments.end(), [](const auto& a) { return !a.coherent; });
    return static_cast<double>(incoherent) / static_cast<double>(assignments.size());
}

std::vector<DocumentSummary> document_summary(std::span<const ThemeAssignment> assignments,
                                              const std::map<std::string, int>& cluster_counts) {
    std::map<std::string, std::vector<ThemeAssignment>> by_doc;
    for (const auto& [doc, count] : cluster_counts) by_doc[doc];
    for (const auto& a : assignments) by_doc[a.doc_id].push_back(a);

    std::vector<DocumentSummary> out;
    for (const auto& [doc, list] : by_doc) {
        DocumentSummary s;
        s.doc_id = doc;
        const auto it = cluster_counts.find(doc);
        s.clusters = it != cluster_counts.end() ? it->second : 0;
        const auto cat = catalog(list);
        s.distinct_themes = static_cast<int>(cat.distinct());
        for (const auto& e : cat.entries) s.key_themes.push_back(e.display);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace themescope::themes
