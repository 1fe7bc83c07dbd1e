#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace themescope::themes {

inline constexpr std::size_t kMaxThemes = 3;
inline constexpr std::string_view kJointAnnotator = "joint";

/// Identity of a theme: trimmed, ASCII case-folded.
std::string theme_key(std::string_view name);

struct ThemeAssignment {
    std::string doc_id;
    int topic_id = 0;
    bool coherent = true;
    std::vector<std::string> themes;  // display forms, trimmed, unique by key
    std::string annotator;

    friend bool operator==(const ThemeAssignment&, const ThemeAssignment&) = default;
};

/// Validates and normalises one assignment. Blank theme names are dropped;
/// more than three non-blank names throws TooManyThemes; themes on an
/// incoherent cluster throw InconsistentAssignment. Names repeated under the
/// same key collapse to the first occurrence.
ThemeAssignment make_assignment(std::string doc_id, int topic_id, std::span<const std::string> themes, bool coherent,
                                std::string annotator);

/// assignments.csv: doc_id,topic_id,coherent,theme1,theme2,theme3,annotator.
/// Rows with an empty coherent cell are unannotated templates and skipped.
std::vector<ThemeAssignment> parse_assignments(std::string_view text);
std::string format_assignments(std::span<const ThemeAssignment> assignments);

using TopicExists = std::function<bool(const std::string& doc_id, int topic_id)>;

/// Assignments persisted in assignments.csv, keyed by (doc_id, topic_id,
/// annotator). Stale entries (their topics were re-modelled) live in a
/// sibling file with the same schema and are excluded from active().
class AssignmentStore {
public:
    AssignmentStore(std::filesystem::path assignments_csv, std::filesystem::path stale_csv);

    /// Validates, replaces any previous entry of the same annotator and
    /// persists. Throws NotFound when `exists` rejects the topic.
    ThemeAssignment assign(const std::string& doc_id, int topic_id, std::span<const std::string> themes,
                           bool coherent, const std::string& annotator, const TopicExists& exists);

    /// Inserts already-validated assignments (overwriting by key) and persists.
    void put_all(std::span<const ThemeAssignment> assignments);

    /// Moves every active assignment of `doc_id` to the stale file.
    void mark_stale(const std::string& doc_id);

    std::vector<ThemeAssignment> active() const;
    std::vector<ThemeAssignment> stale() const;

private:
    using Key = std::tuple<std::string, int, std::string>;
    void persist_locked() const;

    std::filesystem::path path_;
    std::filesystem::path stale_path_;
    mutable std::mutex mutex_;
    std::map<Key, ThemeAssignment> active_;
    std::map<Key, ThemeAssignment> stale_;
};

/// One assignment per (doc_id, topic_id): the "joint" entry when present,
/// otherwise the lexicographically first annotator's.
std::vector<ThemeAssignment> consolidated_view(std::span<const ThemeAssignment> assignments);

struct Conflict {
    std::string doc_id;
    int topic_id = 0;
    std::vector<std::string> themes_a;
    std::vector<std::string> themes_b;
    bool coherent_a = true;
    bool coherent_b = true;

    friend bool operator==(const Conflict&, const Conflict&) = default;
};

struct MergedEntry {
    ThemeAssignment assignment;
    bool single_annotator = false;

    friend bool operator==(const MergedEntry&, const MergedEntry&) = default;
};

struct MergeResult {
    std::vector<MergedEntry> consolidated;  // sorted by (doc_id, topic_id)
    std::vector<Conflict> conflicts;        // sorted by (doc_id, topic_id)
};

/// Equal normalised theme sets (and equal coherence) merge under the "joint"
/// annotator; anything else becomes a conflict for a human to resolve.
MergeResult merge_annotators(std::span<const ThemeAssignment> a, std::span<const ThemeAssignment> b);

struct CatalogEntry {
    std::string key;
    std::string display;
    int count = 0;
    std::map<std::string, int> per_doc;

    friend bool operator==(const CatalogEntry&, const CatalogEntry&) = default;
};

struct ThemeCatalog {
    std::vector<CatalogEntry> entries;  // count desc, key asc

    std::size_t distinct() const { return entries.size(); }
    int total() const;
};

ThemeCatalog catalog(std::span<const ThemeAssignment> assignments);
std::string format_themes_csv(const ThemeCatalog& catalog);

/// Fraction of assignments flagged incoherent. Throws EmptyInputError.
double incoherence_rate(std::span<const ThemeAssignment> assignments);

struct DocumentSummary {
    std::string doc_id;
    int clusters = 0;
    int distinct_themes = 0;
    std::vector<std::string> key_themes;  // within-doc frequency desc, then key

    friend bool operator==(const DocumentSummary&, const DocumentSummary&) = default;
};

/// One row per doc_id found in either input, sorted by doc_id.
std::vector<DocumentSummary> document_summary(std::span<const ThemeAssignment> assignments,
                                              const std::map<std::string, int>& cluster_counts);

}  // namespace themescope::themes
