// One line per acceptance criterion: "PASS <name> (<detail>)" or
// "FAIL <name> (<detail>)". Exit status is the number of failures, capped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "svg_check.hpp"
#include "synthetic.hpp"
#include "themescope/cli.hpp"
#include "themescope/cluster.hpp"
#include "themescope/corpus.hpp"
#include "themescope/csv.hpp"
#include "themescope/error.hpp"
#include "themescope/evolve.hpp"
#include "themescope/fixture.hpp"
#include "themescope/preprocess.hpp"
#include "themescope/reduce.hpp"
#include "themescope/report.hpp"
#include "themescope/themes.hpp"
#include "themescope/topics.hpp"

using namespace themescope;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

int failures = 0;

void criterion(const std::string& name, double time_limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (time_limit_s > 0) out.expect(secs < time_limit_s, "runtime over limit");
    std::ostringstream line;
    line << (out.ok ? "PASS " : "FAIL ") << name << " (" << (out.detail.empty() ? "ok" : out.detail) << ", "
         << std::fixed << std::setprecision(2) << secs << " s)";
    std::cout << line.str() << std::endl;
    if (!out.ok) ++failures;
}

template <typename E, typename F>
bool throws(F&& f) {
    try {
        f();
    } catch (const E&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

std::vector<char32_t> decode(const std::string& s) {
    std::vector<char32_t> cps;
    for (std::size_t i = 0; i < s.size();) {
        const auto c = static_cast<unsigned char>(s[i]);
        int len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
        char32_t cp = len == 1 ? c : c & (0xFF >> (len + 1));
        for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        cps.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return cps;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_letter(char32_t c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
    if (c >= 0xC0 && c <= 0xFF) return c != 0xD7 && c != 0xF7;
    return c >= 0x100 && c <= 0x24F;
}

bool is_upper(char32_t c) {
    if (c >= 'A' && c <= 'Z') return true;
    return c >= 0xC0 && c <= 0xDE && c != 0xD7;
}

Outcome preprocessing() {
    Outcome o;
    using preprocess::Tokens;
    const std::vector<std::pair<std::string, Tokens>> rules{
        {"The EU AI Act (2024) applies.", {"the", "eu", "ai", "act", "applies"}},
        {"Risk-based approach", {"risk", "based", "approach"}},
        {"A 7 %", {}},
        {"GPT4 x 3d 2024a", {"gpt4", "3d", "2024a"}},
    };
    for (const auto& [in, want] : rules) o.expect(preprocess::normalize_sentence(in) == want, "rule example: " + in);

    const std::u32string alphabet = U"abcdefXYZQ0123456789 .,;:!?()-_/'\"%\t\nÄÖÜßéÉçÑ×÷ĀăŒſǅ€\u2014中😀";
    std::mt19937_64 rng(42);
    std::size_t tokens = 0;
    for (int s = 0; s < 10000 && o.ok; ++s) {
        std::string text;
        const auto len = rng() % 60;
        for (std::size_t i = 0; i < len; ++i) append_utf8(text, alphabet[rng() % alphabet.size()]);
        for (const auto& t : preprocess::normalize_sentence(text)) {
            ++tokens;
            const auto cps = decode(t);
            o.expect(cps.size() >= 2, "token shorter than 2: " + t);
            o.expect(std::any_of(cps.begin(), cps.end(), is_letter), "token without a letter: " + t);
            o.expect(std::none_of(cps.begin(), cps.end(), is_upper), "token not lowercase: " + t);
        }
    }
    if (o.ok) o.detail = "10000 strings, " + std::to_string(tokens) + " tokens";
    return o;
}

Outcome ctfidf() {
    Outcome o;
    using preprocess::Tokens;
    const auto none = preprocess::StopWords::from_text("");
    {
        const std::vector<Tokens> classes{{"risk", "risk", "ai"}, {"data", "ai"}};
        const auto v = preprocess::build_vocabulary(classes, 1, none);
        const auto w = topics::class_tf_idf(classes, v);
        const double hand = 2.0 * std::log(2.25);
        o.expect(std::abs(w(0, static_cast<std::size_t>(v.index_of("risk"))) - hand) <= 1e-9, "W(risk, c1)");
    }
    std::mt19937_64 rng(7);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n_classes = 1 + rng() % 10;
        const int n_terms = 1 + static_cast<int>(rng() % 50);
        std::vector<Tokens> classes(n_classes);
        for (auto& c : classes) {
            const auto len = 1 + rng() % 40;
            for (std::size_t i = 0; i < len; ++i) c.push_back(testing::pseudo_word(static_cast<int>(rng() % n_terms)));
        }
        const auto v = preprocess::build_vocabulary(classes, 1, none);
        const auto w = topics::class_tf_idf(classes, v);

        std::map<std::string, std::vector<double>> tf;
        double tokens = 0;
        for (std::size_t c = 0; c < n_classes; ++c) {
            for (const auto& t : classes[c]) {
                auto& row = tf[t];
                row.resize(n_classes, 0.0);
                row[c] += 1;
                tokens += 1;
            }
        }
        const double avg = tokens / static_cast<double>(n_classes);
        o.expect(v.terms.size() == tf.size(), "vocabulary size");
        for (const auto& [term, counts] : tf) {
            double f = 0;
            for (double x : counts) f += x;
            const auto col = static_cast<std::size_t>(v.index_of(term));
            for (std::size_t c = 0; c < n_classes; ++c) {
                const double expected = counts[c] * std::log(1.0 + avg / f);
                worst = std::max(worst, std::abs(w(c, col) - expected));
            }
        }
    }
    o.expect(worst <= 1e-9, "max deviation " + std::to_string(worst));
    if (o.ok) {
        std::ostringstream d;
        d << "100 corpora, max deviation " << std::scientific << std::setprecision(1) << worst;
        o.detail = d.str();
    }
    return o;
}

Outcome mst_oracle() {
    Outcome o;
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 63;
        // Dyadic weights keep every partial sum exact; the small range forces ties.
        const std::uint64_t range = trial % 2 ? 16 : 4096;
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) m(i, j) = m(j, i) = static_cast<double>(rng() % range) / 64.0;
        }
        const auto edges = cluster::mst(m);
        double total = 0;
        for (const auto& e : edges) total += e.weight;
        o.expect(edges.size() == n - 1, "edge count");
        o.expect(total == testing::kruskal_total(m), "total differs at trial " + std::to_string(trial));
    }
    if (o.ok) o.detail = "200 matrices, totals identical";
    return o;
}

Outcome clustering() {
    Outcome o;
    const Matrix centers(3, 2, std::vector<double>{0, 0, 25, 0, 12, 25});
    const auto blobs = testing::gaussian_blobs(centers, 100, 1.0, 42);
    const auto res = cluster::cluster(blobs.points, {10, {}});
    const double ari = testing::adjusted_rand_index(res.labels, blobs.labels);
    o.expect(res.cluster_count() == 3, "cluster count " + std::to_string(res.cluster_count()));
    o.expect(ari >= 0.95, "ARI " + std::to_string(ari));
    const auto few = cluster::cluster(Matrix(9, 2, std::vector<double>(18, 0.5)), {10, {}});
    o.expect(few.labels == std::vector<int>(9, -1), "n < min_cluster_size not all noise");
    if (o.ok) o.detail = "3 clusters, ARI " + std::to_string(ari).substr(0, 6);
    return o;
}

Outcome reduction() {
    Outcome o;
    using namespace reduce;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> coord(-3, 3), a_dist(0.3, 3), b_dist(0.5, 1.5);
    const double h = 1e-5;
    double worst = 0;
    int configs = 0;
    while (configs < 1000) {
        const std::size_t dim = 2 + rng() % 4;
        const Kernel k{a_dist(rng), b_dist(rng)};
        std::vector<double> yi(dim), yj(dim), g(dim);
        for (auto& v : yi) v = coord(rng);
        for (auto& v : yj) v = coord(rng);
        double d2 = 0;
        for (std::size_t c = 0; c < dim; ++c) d2 += (yi[c] - yj[c]) * (yi[c] - yj[c]);
        if (d2 < 0.01) continue;  // the objectives are not smooth at coincident points
        ++configs;
        for (int kind = 0; kind < 2; ++kind) {
            auto f = [&](const std::vector<double>& y) {
                return kind == 0 ? attractive_objective(y, yj, k) : repulsive_objective(y, yj, k);
            };
            if (kind == 0) attractive_gradient(yi, yj, k, g);
            else repulsive_gradient(yi, yj, k, g);
            double diff = 0, norm = 0;
            for (std::size_t c = 0; c < dim; ++c) {
                auto p = yi, m = yi;
                p[c] += h;
                m[c] -= h;
                const double fd = (f(p) - f(m)) / (2 * h);
                diff += (fd - g[c]) * (fd - g[c]);
                norm += fd * fd;
            }
            worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
        }
    }
    o.expect(worst <= 1e-4, "gradient relative error " + std::to_string(worst));

    const auto points = testing::gaussian_blobs(Matrix(2, 4, std::vector<double>{0, 0, 0, 0, 5, 5, 5, 5}), 100, 1.0, 9);
    double worst_sum = 0;
    for (std::size_t kk : {5u, 10u, 15u, 30u}) {
        const auto r = knn(points.points, kk, Metric::euclidean);
        std::vector<Membership> cal;
        for (std::size_t i = 0; i < r.n; ++i) {
            cal.push_back(smooth_knn(r.dists(i), kk));
            double s = 0;
            for (double d : r.dists(i)) s += std::exp(-std::max(0.0, d - cal.back().rho) / cal.back().sigma);
            worst_sum = std::max(worst_sum, std::abs(s - std::log2(static_cast<double>(kk))));
        }
        for (const auto& e : fuzzy_graph(r, cal).edges) o.expect(e.weight > 0.0 && e.weight <= 1.0, "edge weight out of (0,1]");
    }
    o.expect(worst_sum <= 1e-3, "calibration deviation " + std::to_string(worst_sum));
    if (o.ok) {
        std::ostringstream d;
        d << std::scientific << std::setprecision(1) << "max gradient rel error " << worst << ", max calibration deviation "
          << worst_sum;
        o.detail = d.str();
    }
    return o;
}

int run_cli(std::vector<std::string> args, std::string* err = nullptr) {
    std::ostringstream out, e;
    const int code = cli::run(args, out, e);
    if (err) *err = e.str();
    return code;
}

Outcome min_topics() {
    Outcome o;
    testing::TempDir dir("accept-model");
    const std::string root = dir.path().string();
    testing::write_project(dir.path(), testing::demo_corpus(42));
    o.expect(run_cli({"--project", root, "ingest"}) == 0, "ingest");
    o.expect(run_cli({"--project", root, "embed"}) == 0, "embed");
    o.expect(run_cli({"--project", root, "model", "--min-topics", "3", "--seed", "42"}) == 0, "first model run");
    const auto first = io::read_text(dir / "topics.csv");
    o.expect(run_cli({"--project", root, "model", "--min-topics", "3", "--seed", "42"}) == 0, "second model run");
    o.expect(io::read_text(dir / "topics.csv") == first, "topics.csv differs between runs");

    std::map<std::string, int> per_doc;
    for (const auto& t : topics::load_topics(dir / "topics.csv", dir / "representatives.csv")) ++per_doc[t.doc_id];
    o.expect(per_doc.size() == 8, "documents modelled: " + std::to_string(per_doc.size()));
    int least = 1 << 30;
    for (const auto& [doc, n] : per_doc) least = std::min(least, n);
    o.expect(least >= 3, "a document has fewer than 3 topics");

    testing::TempDir shortdir("accept-short");
    testing::write_project(shortdir.path(), {testing::tiny_document("09")});
    const std::string sroot = shortdir.path().string();
    std::string err;
    run_cli({"--project", sroot, "ingest"});
    run_cli({"--project", sroot, "embed"});
    const int code = run_cli({"--project", sroot, "model", "--min-topics", "3", "--seed", "42"}, &err);
    o.expect(code == 1 && err.find("TooFewTopics") != std::string::npos, "5-sentence document did not raise TooFewTopics");
    if (o.ok) o.detail = "8 documents, min " + std::to_string(least) + " topics, byte-identical reruns";
    return o;
}

fixture::FixtureProject fixture_project() {
    return fixture::expand(fixture::load_overview(fixture::fixtures_dir() / "paper_table2.csv"),
                           fixture::Expansion::with_unlisted);
}

Outcome bookkeeping() {
    Outcome o;
    const auto fx = fixture_project();
    const auto summary = themes::document_summary(fx.assignments, fx.cluster_counts);
    std::vector<int> clusters;
    int sum = 0;
    for (const auto& s : summary) {
        clusters.push_back(s.clusters);
        sum += s.clusters;
        if (s.doc_id == "05") o.expect(s.distinct_themes == 47, "doc 05 distinct themes " + std::to_string(s.distinct_themes));
    }
    o.expect(clusters == std::vector<int>{26, 28, 14, 8, 70, 62, 7, 12}, "per-document cluster counts");
    o.expect(sum == 227, "cluster total " + std::to_string(sum));

    std::vector<themes::ThemeAssignment> hundred;
    for (int i = 0; i < 100; ++i) {
        const std::vector<std::string> t{"Risk"};
        hundred.push_back(i < 14 ? themes::make_assignment("01", i, {}, false, "x")
                                 : themes::make_assignment("01", i, t, true, "x"));
    }
    o.expect(themes::incoherence_rate(hundred) == 0.14, "incoherence rate");
    if (o.ok) o.detail = "sum 227, doc 05 has 47 themes, rate 0.14";
    return o;
}

Outcome annotation() {
    Outcome o;
    const std::vector<std::string> four{"a", "b", "c", "d"}, one{"a"};
    o.expect(throws<TooManyThemes>([&] { themes::make_assignment("01", 0, four, true, "x"); }), "4 themes accepted");
    o.expect(throws<InconsistentAssignment>([&] { themes::make_assignment("01", 0, one, false, "x"); }),
             "incoherent cluster with themes accepted");

    const std::vector<std::string> pool{"Risk", "Data, privacy", "\"Quoted\" theme", "Über-Aufsicht", "line\nbreak",
                                        "  padded ", "Transparency"};
    std::mt19937_64 rng(5);
    std::vector<themes::ThemeAssignment> list;
    for (int i = 0; i < 300; ++i) {
        const bool coherent = rng() % 5 != 0;
        std::vector<std::string> t;
        if (coherent) {
            const auto n = rng() % 4;
            for (std::size_t k = 0; k < n; ++k) t.push_back(pool[rng() % pool.size()]);
        }
        list.push_back(themes::make_assignment(i < 150 ? "01" : "07", i, t, coherent, rng() % 2 ? "alice" : "bob,2"));
    }
    const auto text = themes::format_assignments(list);
    const auto back = themes::parse_assignments(text);
    o.expect(back == list, "round trip changed assignments");
    o.expect(themes::format_assignments(back) == text, "re-export not byte-identical");
    if (o.ok) o.detail = "rejections raised, 300-row round trip lossless";
    return o;
}

Outcome evolution() {
    Outcome o;
    const auto docs = corpus::load_manifest(fixture::fixtures_dir() / "manifest.csv");
    for (const auto& d : docs) {
        const bool pre = d.doc_id <= "04";
        o.expect(d.era == (pre ? corpus::Era::pre_ai_act : corpus::Era::post_ai_act), "manifest era of " + d.doc_id);
    }
    const auto fx = fixture_project();
    const auto [pre, post] = evolve::split_by_era(fx.assignments, docs);
    for (const auto& e : pre.entries) {
        for (const auto& [doc, n] : e.per_doc) o.expect(doc >= "01" && doc <= "04", "pre catalog holds " + doc);
    }
    for (const auto& e : post.entries) {
        for (const auto& [doc, n] : e.per_doc) o.expect(doc >= "05" && doc <= "08", "post catalog holds " + doc);
    }

    std::vector<evolve::EvolutionSeries> tied;
    for (const char* key : {"delta", "alpha", "echo", "charlie", "bravo"}) tied.push_back({key, key, {{2020, 1}}, 1, 0});
    tied.push_back({"zulu", "zulu", {{2020, 2}}, 2, 0});
    const auto reference = evolve::select_series(tied, 3, evolve::Direction::top);
    o.expect(reference.size() == 3 && reference[0].key == "zulu" && reference[1].key == "alpha" &&
                 reference[2].key == "bravo",
             "tie order");
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        std::shuffle(tied.begin(), tied.end(), rng);
        o.expect(evolve::select_series(tied, 3, evolve::Direction::top) == reference, "selection depends on input order");
    }

    std::map<std::string, int> doc_year;
    for (const auto& d : docs) doc_year[d.doc_id] = d.year;
    const auto series = evolve::theme_by_year(fx.assignments, docs);
    std::size_t layouts = 0;
    for (int k : {1, 5, 10, 1000}) {
        for (auto dir : {evolve::Direction::top, evolve::Direction::bottom}) {
            const auto chosen = evolve::select_series(series, k, dir);
            std::set<std::string> keys;
            for (const auto& s : chosen) keys.insert(s.key);
            std::map<int, double> expected;
            for (const auto& a : fx.assignments) {
                for (const auto& t : a.themes) {
                    if (keys.contains(themes::theme_key(t))) expected[doc_year.at(a.doc_id)] += 1;
                }
            }
            const auto layout = evolve::stream_layout(chosen);
            for (std::size_t y = 0; y < layout.years.size(); ++y) {
                double total = 0;
                for (const auto& b : layout.bands) total += b.points[y].y1 - b.points[y].y0;
                const auto it = expected.find(layout.years[y]);
                o.expect(total == (it == expected.end() ? 0.0 : it->second),
                         "total not conserved in " + std::to_string(layout.years[y]));
            }
            for (const auto& [year, n] : expected) {
                o.expect(std::find(layout.years.begin(), layout.years.end(), year) != layout.years.end(), "year missing");
            }
            ++layouts;
        }
    }
    if (o.ok) o.detail = "eras split 4/4, ties stable, " + std::to_string(layouts) + " layouts conserve totals";
    return o;
}

std::map<std::string, std::string> svgs_under(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".svg") out[e.path().filename().string()] = io::read_text(e.path());
    }
    return out;
}

Outcome rendering() {
    Outcome o;
    testing::TempDir a("accept-render-a"), b("accept-render-b");
    o.expect(run_cli({"--project", a.path().string(), "render", "--fixture"}) == 0, "first render");
    o.expect(run_cli({"--project", b.path().string(), "render", "--fixture"}) == 0, "second render");
    const auto first = svgs_under(a / "out_fixture");
    const auto second = svgs_under(b / "out_fixture");
    o.expect(!first.empty() && first == second, "renders differ between runs");

    auto svgs = first;
    const auto fx = fixture_project();
    std::vector<topics::TopicCluster> bars;
    for (int t = 0; t < 4; ++t) {
        bars.push_back({"01", t, 10 - t, {{"risk & <oversight>", 1.5}, {"\"ai\"", 0.5}}, {}, {}});
    }
    svgs["barchart"] = report::barchart_svg(bars, 4, {});
    std::size_t parsed = 0;
    for (const auto& [name, svg] : svgs) {
        try {
            const auto tree = testing::parse_xml(svg);
            o.expect(tree.count("svg") == 1, name + " has no svg root");
            ++parsed;
        } catch (const std::exception& e) {
            o.expect(false, name + " is not well-formed: " + e.what());
        }
    }

    const auto weights = report::wordcloud_weights(themes::catalog(fx.assignments), {});
    for (const auto& x : weights) {
        for (const auto& y : weights) {
            if (x.count > y.count) o.expect(x.font_size > y.font_size, "font not monotone in count");
            if (x.count == y.count) o.expect(x.font_size == y.font_size, "equal counts, unequal fonts");
        }
    }
    if (o.ok) o.detail = std::to_string(parsed) + " SVG documents well-formed, reruns byte-identical";
    return o;
}

}  // namespace

int main() {
    criterion("preprocessing rules and token properties", 5.0, preprocessing);
    criterion("class-based tf-idf oracle", 0, ctfidf);
    criterion("minimum spanning tree oracle", 0, mst_oracle);
    criterion("clustering of separated blobs", 10.0, clustering);
    criterion("reduction gradients and calibration", 0, reduction);
    criterion("minimum topic guarantee and determinism", 60.0, min_topics);
    criterion("fixture bookkeeping", 0, bookkeeping);
    criterion("annotation constraints and csv round trip", 0, annotation);
    criterion("evolution eras, selection and conservation", 0, evolution);
    criterion("rendering", 0, rendering);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return std::min(failures, 100);
}
