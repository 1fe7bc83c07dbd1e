#include "themescope/report.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"

namespace themescope::report {

namespace {

constexpr int kShrinkRounds = 5;
constexpr double kShrinkFactor = 0.9;
constexpr double kSpiralStep = 0.1;  // radians
constexpr double kSpiralPitch = 1.5;  // pixels per radian
constexpr double kPad = 1.0;

std::size_t code_points(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

std::string num(double v) { return io::format_fixed(v, 2); }

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string svg_open(int width, int height) {
    const auto w = std::to_string(width);
    const auto h = std::to_string(height);
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + w +
           "\" height=\"" + h + "\" viewBox=\"0 0 " + w + " " + h + "\" font-family=\"sans-serif\">\n" +
           "<rect x=\"0\" y=\"0\" width=\"" + w + "\" height=\"" + h + "\" fill=\"#ffffff\"/>\n";
}

const std::string& color_at(const RenderSpec& spec, std::size_t i) { return spec.palette[i % spec.palette.size()]; }

struct Attempt {
    std::vector<PlacedWord> words;
    bool ok = true;
};

Attempt try_layout(std::span<const WeightedTheme> order, const RenderSpec& spec, double scale) {
    Attempt out;
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double cx = spec.width / 2.0;
    const double cy = spec.height / 2.0;
    const double aspect = static_cast<double>(spec.height) / spec.width;
    const double max_radius = std::hypot(spec.width, spec.height) / 2.0;
    std::vector<Box> boxes;

    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& w = order[i];
        const double font = round2(w.font_size * scale);
        const double start = angle(rng);
        bool placed = false;
        for (double t = 0;; t += kSpiralStep) {
            const double r = kSpiralPitch * t;
            if (r > max_radius) break;
            const double x = round2(cx + r * std::cos(start + t));
            const double y = round2(cy + font * 0.3 + r * aspect * std::sin(start + t));
            const Box b = text_box(w.theme, font, x, y);
            if (b.x0 < 0 || b.y0 < 0 || b.x1 > spec.width || b.y1 > spec.height) continue;
            const Box padded{b.x0 - kPad, b.y0 - kPad, b.x1 + kPad, b.y1 + kPad};
            if (std::any_of(boxes.begin(), boxes.end(), [&](const Box& o) { return o.intersects(padded); })) continue;
            boxes.push_back(b);
            out.words.push_back({w.theme, w.count, font, x, y, color_at(spec, i)});
            placed = true;
            break;
        }
        if (!placed) {
            out.ok = false;
            return out;
        }
    }
    return out;
}

}  // namespace

void validate(const RenderSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw ParamError("canvas width and height must be positive");
    if (!(spec.font_min > 0 && spec.font_min < spec.font_max)) throw ParamError("need 0 < font_min < font_max");
    if (spec.palette.empty()) throw ParamError("palette is empty");
}

Box text_box(std::string_view text, double font_size, double x, double y) {
    const double half = kCharWidth * font_size * static_cast<double>(code_points(text)) / 2.0;
    return {x - half, y - 0.8 * font_size, x + half, y + 0.2 * font_size};
}

std::vector<WeightedTheme> wordcloud_weights(const themes::ThemeCatalog& catalog, const RenderSpec& spec) {
    validate(spec);
    if (catalog.entries.empty()) throw EmptyInputError("word cloud of an empty catalog");
    int lo = catalog.entries.front().count;
    int hi = lo;
    for (const auto& e : catalog.entries) {
        lo = std::min(lo, e.count);
        hi = std::max(hi, e.count);
    }
    std::vector<WeightedTheme> out;
    for (const auto& e : catalog.entries) {
        const double size = hi == lo ? spec.font_max
                                     : spec.font_min + (e.count - lo) * (spec.font_max - spec.font_min) / (hi - lo);
        out.push_back({e.display, e.count, size});
    }
    return out;
}

std::vector<PlacedWord> wordcloud_layout(std::span<const WeightedTheme> weights, const RenderSpec& spec) {
    validate(spec);
    if (weights.empty()) throw EmptyInputError("word cloud without themes");
    std::vector<WeightedTheme> order(weights.begin(), weights.end());
    std::stable_sort(order.begin(), order.end(), [](const WeightedTheme& a, const WeightedTheme& b) {
        if (a.font_size != b.font_size) return a.font_size > b.font_size;
        return themes::theme_key(a.theme) < themes::theme_key(b.theme);
    });
    double scale = 1.0;
    for (int round = 0; round <= kShrinkRounds; ++round) {
        auto attempt = try_layout(order, spec, scale);
        if (attempt.ok) return std::move(attempt.words);
        scale *= kShrinkFactor;
    }
    throw PlacementError("could not place " + std::to_string(order.size()) + " words after " +
                         std::to_string(kShrinkRounds) + " shrink rounds");
}

std::string wordcloud_svg(std::span<const WeightedTheme> weights, const RenderSpec& spec) {
    const auto placed = wordcloud_layout(weights, spec);
    std::string svg = svg_open(spec.width, spec.height);
    for (const auto& w : placed) {
        svg += "<text x=\"" + num(w.x) + "\" y=\"" + num(w.y) + "\" font-size=\"" + num(w.font_size) +
               "\" text-anchor=\"middle\" fill=\"" + xml_escape(w.color) + "\" data-count=\"" +
               std::to_string(w.count) + "\">" + xml_escape(w.theme) + "</text>\n";
    }
    return svg + "</svg>\n";
}

std::string wordcloud_json(std::span<const PlacedWord> placed) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& w : placed) {
        arr.push_back({{"theme", w.theme},
                       {"count", w.count},
                       {"font_size", round2(w.font_size)},
                       {"x", w.x},
                       {"y", w.y},
                       {"color", w.color}});
    }
    return arr.dump(2) + "\n";
}

namespace {

std::vector<const topics::TopicCluster*> largest(std::span<const topics::TopicCluster> topics, int k) {
    std::vector<const topics::TopicCluster*> out;
    for (const auto& t : topics) out.push_back(&t);
    std::stable_sort(out.begin(), out.end(), [](const auto* a, const auto* b) {
        if (a->size != b->size) return a->size > b->size;
        return a->topic_id < b->topic_id;
    });
    if (k >= 0 && out.size() > static_cast<std::size_t>(k)) out.resize(static_cast<std::size_t>(k));
    return out;
}

std::string first_terms(const topics::TopicCluster& t, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < t.top_terms.size() && i < n; ++i) {
        if (i) s += ", ";
        s += t.top_terms[i].term;
    }
    return s;
}

}  // namespace

std::string barchart_svg(std::span<const topics::TopicCluster> topics, int top_k_topics, const RenderSpec& spec) {
    validate(spec);
    if (topics.empty()) throw EmptyInputError("bar chart without topics");
    if (top_k_topics < 1) throw ParamError("top_k_topics must be at least 1");
    const auto bars = largest(topics, top_k_topics);

    const double left = 70;
    const double top = 30;
    const double label_room = 0.45 * spec.width;
    const double max_len = std::max(1.0, spec.width - left - label_room);
    const double row = std::min(40.0, (spec.height - top - 10) / static_cast<double>(bars.size()));
    const double max_size = std::max(1, bars.front()->size);

    std::string svg = svg_open(spec.width, spec.height);
    svg += "<text x=\"" + num(left) + "\" y=\"18.00\" font-size=\"13.00\">" + xml_escape(bars.front()->doc_id) +
           " topics by size</text>\n";
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const auto& t = *bars[i];
        const double y = top + row * static_cast<double>(i);
        const double len = max_len * t.size / max_size;
        const double h = row * 0.7;
        const double mid = y + h / 2 + 4;
        svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(mid) + "\" font-size=\"11.00\" text-anchor=\"end\">T" +
               std::to_string(t.topic_id) + " (" + std::to_string(t.size) + ")</text>\n";
        svg += "<rect x=\"" + num(left) + "\" y=\"" + num(y) + "\" width=\"" + num(len) + "\" height=\"" + num(h) +
               "\" fill=\"" + xml_escape(color_at(spec, i)) + "\" data-size=\"" + std::to_string(t.size) + "\"/>\n";
        svg += "<text x=\"" + num(left + len + 6) + "\" y=\"" + num(mid) + "\" font-size=\"11.00\">" +
               xml_escape(first_terms(t, 5)) + "</text>\n";
    }
    return svg + "</svg>\n";
}

std::string barchart_json(std::span<const topics::TopicCluster> topics, int top_k_topics) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto* t : largest(topics, top_k_topics)) {
        auto terms = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < t->top_terms.size() && i < 5; ++i) {
            terms.push_back({{"term", t->top_terms[i].term}, {"weight", t->top_terms[i].weight}});
        }
        arr.push_back({{"doc_id", t->doc_id}, {"topic_id", t->topic_id}, {"size", t->size}, {"terms", terms}});
    }
    return arr.dump(2) + "\n";
}

std::string streamgraph_svg(const evolve::StreamLayout& layout, const RenderSpec& spec) {
    validate(spec);
    if (layout.bands.empty() || layout.years.empty()) throw EmptyInputError("stream graph without bands");

    const double legend_w = 190;
    const double left = 40, right = std::max(left + 1, spec.width - legend_w - 20);
    const double top = 20, bottom = spec.height - 40.0;
    double extent = 0;
    for (std::size_t y = 0; y < layout.years.size(); ++y) {
        for (const auto& b : layout.bands) extent = std::max({extent, std::abs(b.points[y].y0), std::abs(b.points[y].y1)});
    }
    if (extent == 0) extent = 1;
    const double mid = (top + bottom) / 2;
    const double half = (bottom - top) / 2;
    auto sy = [&](double v) { return mid - v / extent * half; };

    // A single year is drawn as a full-width column.
    std::vector<double> xs;
    std::vector<std::size_t> idx;
    if (layout.years.size() == 1) {
        xs = {left, right};
        idx = {0, 0};
    } else {
        const double y0 = layout.years.front();
        const double span = layout.years.back() - y0;
        for (std::size_t i = 0; i < layout.years.size(); ++i) {
            xs.push_back(left + (layout.years[i] - y0) / span * (right - left));
            idx.push_back(i);
        }
    }

    std::string svg = svg_open(spec.width, spec.height);
    for (std::size_t b = 0; b < layout.bands.size(); ++b) {
        const auto& band = layout.bands[b];
        std::string d;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            d += (i ? " L" : "M") + num(xs[i]) + " " + num(sy(band.points[idx[i]].y1));
        }
        for (std::size_t i = xs.size(); i-- > 0;) d += " L" + num(xs[i]) + " " + num(sy(band.points[idx[i]].y0));
        svg += "<path d=\"" + d + " Z\" fill=\"" + xml_escape(color_at(spec, b)) + "\" fill-opacity=\"0.85\" data-theme=\"" +
               xml_escape(band.theme) + "\"/>\n";
    }
    for (std::size_t i = 0; i < layout.years.size(); ++i) {
        const double x = layout.years.size() == 1 ? (left + right) / 2 : xs[i];
        svg += "<text x=\"" + num(x) + "\" y=\"" + num(bottom + 18) + "\" font-size=\"11.00\" text-anchor=\"middle\">" +
               std::to_string(layout.years[i]) + "</text>\n";
    }
    const double lx = spec.width - legend_w;
    for (std::size_t b = 0; b < layout.bands.size(); ++b) {
        const double ly = top + 18.0 * static_cast<double>(b);
        svg += "<rect x=\"" + num(lx) + "\" y=\"" + num(ly) + "\" width=\"12.00\" height=\"12.00\" fill=\"" +
               xml_escape(color_at(spec, b)) + "\"/>\n";
        svg += "<text x=\"" + num(lx + 18) + "\" y=\"" + num(ly + 10) + "\" font-size=\"11.00\" class=\"legend\">" +
               xml_escape(layout.bands[b].theme) + "</text>\n";
    }
    return svg + "</svg>\n";
}

std::string streamgraph_json(const evolve::StreamLayout& layout) {
    auto bands = nlohmann::ordered_json::array();
    for (const auto& b : layout.bands) {
        auto pts = nlohmann::ordered_json::array();
        for (const auto& p : b.points) pts.push_back({{"year", p.year}, {"y0", p.y0}, {"y1", p.y1}});
        bands.push_back({{"theme", b.theme}, {"points", pts}});
    }
    nlohmann::ordered_json out{{"years", layout.years}, {"bands", bands}};
    return out.dump(2) + "\n";
}

std::string xml_escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (const char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace themescope::report
