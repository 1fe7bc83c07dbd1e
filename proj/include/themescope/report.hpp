#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "themescope/evolve.hpp"
#include "themescope/themes.hpp"
#include "themescope/topics.hpp"

namespace themescope::report {

struct RenderSpec {
    int width = 800;
    int height = 500;
    double font_min = 10;
    double font_max = 48;
    std::vector<std::string> palette{"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                     "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
    std::uint64_t seed = 42;
};

/// Throws ParamError unless width, height > 0, 0 < font_min < font_max and
/// the palette is non-empty.
void validate(const RenderSpec& spec);

/// Average glyph advance used for every text box.
inline constexpr double kCharWidth = 0.6;

struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    /// Positive-area overlap; shared edges do not count.
    bool intersects(const Box& o) const { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
};

/// Box of a text-anchor="middle" label whose baseline passes through (x, y):
/// width 0.6*font*code points, from 0.8*font above to 0.2*font below.
Box text_box(std::string_view text, double font_size, double x, double y);

struct WeightedTheme {
    std::string theme;
    int count = 0;
    double font_size = 0;
};

/// Linear map of counts onto [font_min, font_max]; equal counts all get
/// font_max. Catalog order is kept. Throws EmptyInputError.
std::vector<WeightedTheme> wordcloud_weights(const themes::ThemeCatalog& catalog, const RenderSpec& spec);

struct PlacedWord {
    std::string theme;
    int count = 0;
    double font_size = 0;
    double x = 0;
    double y = 0;
    std::string color;
};

/// Seeded Archimedean spiral search, largest words first. When a word finds
/// no free spot inside the canvas every font shrinks by 10% and placement
/// restarts, at most 5 times; then PlacementError.
std::vector<PlacedWord> wordcloud_layout(std::span<const WeightedTheme> weights, const RenderSpec& spec);

std::string wordcloud_svg(std::span<const WeightedTheme> weights, const RenderSpec& spec);
std::string wordcloud_json(std::span<const PlacedWord> placed);

/// Horizontal bars for the `top_k_topics` largest topics, each labelled with
/// its first five terms. Throws EmptyInputError without topics.
std::string barchart_svg(std::span<const topics::TopicCluster> topics, int top_k_topics, const RenderSpec& spec);
std::string barchart_json(std::span<const topics::TopicCluster> topics, int top_k_topics);

/// One closed path per band plus a legend in band order. Throws
/// EmptyInputError without bands.
std::string streamgraph_svg(const evolve::StreamLayout& layout, const RenderSpec& spec);
std::string streamgraph_json(const evolve::StreamLayout& layout);

std::string xml_escape(std::string_view text);

}  // namespace themescope::report
