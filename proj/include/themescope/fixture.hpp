#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "themescope/themes.hpp"

namespace themescope::fixture {

/// One row of the per-document overview table shipped in
/// fixtures/paper_table2.csv (key themes separated by ';').
struct OverviewRow {
    std::string doc_id;
    std::string document;
    int clusters = 0;
    int themes = 0;
    std::vector<std::string> key_themes;
};

std::vector<OverviewRow> parse_overview(std::string_view text);
std::vector<OverviewRow> load_overview(const std::filesystem::path& path);

/// Path of the shipped fixtures directory.
std::filesystem::path fixtures_dir();

enum class Expansion {
    key_themes_only,  // only the listed key themes are used
    with_unlisted,    // placeholders fill each document up to its theme count
};

inline constexpr double kIncoherentShare = 0.14;
inline constexpr std::string_view kFixtureAnnotator = "fixture";

struct FixtureProject {
    std::vector<themes::ThemeAssignment> assignments;
    std::map<std::string, int> cluster_counts;
};

/// Synthesises one assignment per cluster. round(0.14 * clusters) of each
/// document's clusters (the highest topic ids) are incoherent; the remaining
/// M clusters receive the theme list in passes: slot p*M + c maps to theme
/// (p*M + c) mod T for p = 0..2 while the slot is below max(T, M), so every
/// theme is used at least once and no cluster exceeds three themes.
/// Throws FormatError when a document lists more themes than 3*M can hold.
FixtureProject expand(const std::vector<OverviewRow>& rows, Expansion mode);

}  // namespace themescope::fixture
