#include "themescope/fixture.hpp"

#include <algorithm>
#include <cmath>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"

#ifndef THEMESCOPE_SOURCE_DIR
#define THEMESCOPE_SOURCE_DIR "."
#endif

namespace themescope::fixture {

namespace {

const csv::Row kHeader{"doc_id", "document", "clusters", "themes", "key_themes"};

std::vector<std::string> split_themes(std::string_view cell) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= cell.size()) {
        const auto end = std::min(cell.find(';', start), cell.size());
        const auto key = themes::theme_key(cell.substr(start, end - start));
        if (!key.empty()) out.emplace_back(cell.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

}  // namespace

std::vector<OverviewRow> parse_overview(std::string_view text) {
    const auto rows = csv::parse(text);
    if (rows.empty() || rows.front() != kHeader) {
        throw FormatError("overview header must be '" + csv::format_row(kHeader) + "'");
    }
    std::vector<OverviewRow> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != kHeader.size()) throw FormatError("overview row " + std::to_string(r) + ": expected 5 fields");
        out.push_back({row[0], row[1], io::parse_int(row[2], "clusters"), io::parse_int(row[3], "themes"),
                       split_themes(row[4])});
    }
    return out;
}

std::vector<OverviewRow> load_overview(const std::filesystem::path& path) {
    return parse_overview(io::read_text(path));
}

std::filesystem::path fixtures_dir() {
    return std::filesystem::path(THEMESCOPE_SOURCE_DIR) / "fixtures";
}

FixtureProject expand(const std::vector<OverviewRow>& rows, Expansion mode) {
    FixtureProject out;
    for (const auto& row : rows) {
        const int incoherent = static_cast<int>(std::lround(kIncoherentShare * row.clusters));
        const int coherent = row.clusters - incoherent;

        std::vector<std::string> names = row.key_themes;
        if (mode == Expansion::with_unlisted) {
            for (int k = static_cast<int>(names.size()) + 1; k <= row.themes; ++k) {
                names.push_back("Unlisted theme " + row.doc_id + "-" + std::to_string(k));
            }
        }
        const int total = static_cast<int>(names.size());
        if (total > 3 * coherent) {
            throw FormatError("document " + row.doc_id + " lists " + std::to_string(total) +
                              " themes but has room for " + std::to_string(3 * coherent));
        }

        std::vector<std::vector<std::string>> per_cluster(static_cast<std::size_t>(coherent));
        if (total > 0) {
            const int limit = std::max(total, coherent);
            for (int pass = 0; pass < 3; ++pass) {
                for (int c = 0; c < coherent; ++c) {
                    const int slot = pass * coherent + c;
                    if (slot >= limit) break;
                    per_cluster[static_cast<std::size_t>(c)].push_back(names[static_cast<std::size_t>(slot % total)]);
                }
            }
        }
        for (int c = 0; c < row.clusters; ++c) {
            const bool is_coherent = c < coherent;
            std::vector<std::string> assigned;
            if (is_coherent) assigned = per_cluster[static_cast<std::size_t>(c)];
            out.assignments.push_back(themes::make_assignment(row.doc_id, c, assigned, is_coherent,
                                                              std::string(kFixtureAnnotator)));
        }
        out.cluster_counts[row.doc_id] = row.clusters;
    }
    return out;
}

}  // namespace themescope::fixture
