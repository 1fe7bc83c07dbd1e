#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "themescope/corpus.hpp"
#include "themescope/themes.hpp"

namespace themescope::evolve {

struct YearCount {
    int year = 0;
    int count = 0;

    friend bool operator==(const YearCount&, const YearCount&) = default;
};

struct EvolutionSeries {
    std::string theme;  // display form
    std::string key;
    std::vector<YearCount> points;  // ascending year, zero counts omitted
    int pre = 0;
    int post = 0;

    int total() const { return pre + post; }
    friend bool operator==(const EvolutionSeries&, const EvolutionSeries&) = default;
};

/// Counts cluster-theme pairs per document year. Series are ordered by key.
/// Throws ReferentialError for an assignment whose doc_id is not in `docs`.
std::vector<EvolutionSeries> theme_by_year(std::span<const themes::ThemeAssignment> assignments,
                                           std::span<const corpus::Document> docs);

/// Catalogs restricted to each era. Assignments of unknown documents belong
/// to neither.
std::pair<themes::ThemeCatalog, themes::ThemeCatalog> split_by_era(
    std::span<const themes::ThemeAssignment> assignments, std::span<const corpus::Document> docs);

enum class Direction { top, bottom };
Direction parse_direction(std::string_view token);  // throws ParamError

/// Ranked by total (desc for top, asc for bottom), ties by theme key.
/// Throws ParamError when k < 1.
std::vector<EvolutionSeries> select_series(std::span<const EvolutionSeries> series, int k, Direction direction);

struct BandPoint {
    int year = 0;
    double y0 = 0;
    double y1 = 0;

    friend bool operator==(const BandPoint&, const BandPoint&) = default;
};

struct Band {
    std::string theme;
    std::vector<BandPoint> points;  // one per layout year
};

struct StreamLayout {
    std::vector<int> years;
    std::vector<Band> bands;  // selection order
};

/// Silhouette stacking: at each year the bands stack in order from a
/// baseline of -total/2. Years are the union over the series. Throws
/// EmptyInputError when `selected` is empty.
StreamLayout stream_layout(std::span<const EvolutionSeries> selected);

/// evolution.json: [{theme, points:[{year,count}], era:{pre,post}}].
std::string evolution_json(std::span<const EvolutionSeries> series);

}  // namespace themescope::evolve
