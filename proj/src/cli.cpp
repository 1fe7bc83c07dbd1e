#include "themescope/cli.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"
#include "themescope/evolve.hpp"
#include "themescope/fixture.hpp"
#include "themescope/project.hpp"
#include "themescope/report.hpp"
#include "themescope/service.hpp"
#include "themescope/themes.hpp"

namespace themescope::cli {

namespace fs = std::filesystem;

namespace {

struct Flags {
    std::string project = ".";
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    std::optional<std::string> embeddings;
    std::optional<int> min_cluster_size;
    std::optional<int> n_neighbors;
    std::optional<int> min_topics;
    std::optional<std::string> stopwords;
    std::optional<int> top_n;
};

project::Settings resolve(const project::Project& p, const Flags& f) {
    auto s = p.load_settings();
    if (f.seed) s.seed = *f.seed;
    if (f.backend) s.backend = project::parse_backend(*f.backend);
    if (f.embeddings) s.embeddings = *f.embeddings;
    if (f.min_cluster_size) s.min_cluster_size = *f.min_cluster_size;
    if (f.n_neighbors) s.n_neighbors = *f.n_neighbors;
    if (f.min_topics) s.min_topics = *f.min_topics;
    if (f.stopwords) s.stopwords = *f.stopwords;
    if (f.top_n) s.top_n = *f.top_n;
    if (s.min_topics < 1) throw ParamError("--min-topics must be at least 1");
    if (s.top_n < 1) throw ParamError("--top-n must be at least 1");
    if (s.min_cluster_size && *s.min_cluster_size < 2) throw ParamError("--min-cluster-size must be at least 2");
    if (s.n_neighbors && *s.n_neighbors < 2) throw ParamError("--n-neighbors must be at least 2");
    if (s.stopwords) preprocess::StopWords::load(*s.stopwords);
    return s;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

/// Assignments and documents for the aggregate commands: the shipped
/// fixture or the project's active, consolidated annotations.
struct AnnotationSource {
    std::vector<themes::ThemeAssignment> assignments;
    std::map<std::string, int> cluster_counts;
    std::vector<corpus::Document> documents;
};

AnnotationSource load_source(const project::Project& p, bool use_fixture) {
    AnnotationSource src;
    if (use_fixture) {
        const auto dir = fixture::fixtures_dir();
        auto fx = fixture::expand(fixture::load_overview(dir / "paper_table2.csv"), fixture::Expansion::with_unlisted);
        src.assignments = std::move(fx.assignments);
        src.cluster_counts = std::move(fx.cluster_counts);
        src.documents = corpus::load_manifest(dir / "manifest.csv");
        return src;
    }
    src.documents = p.documents();
    p.require(p.topics_path(), "model");
    for (const auto& t : p.topics()) ++src.cluster_counts[t.doc_id];
    if (fs::exists(p.assignments_path())) {
        src.assignments = themes::consolidated_view(themes::parse_assignments(io::read_text(p.assignments_path())));
    }
    return src;
}

void check_topics_exist(const std::vector<themes::ThemeAssignment>& list, const std::vector<topics::TopicCluster>& all) {
    std::set<std::pair<std::string, int>> known;
    for (const auto& t : all) known.insert({t.doc_id, t.topic_id});
    for (const auto& a : list) {
        if (!known.contains({a.doc_id, a.topic_id})) {
            throw NotFound("no topic " + std::to_string(a.topic_id) + " in document " + a.doc_id);
        }
    }
}

std::vector<themes::ThemeAssignment> read_annotations(const fs::path& file) {
    if (!fs::exists(file)) throw IoError("missing " + file.string());
    return themes::parse_assignments(io::read_text(file));
}

int cmd_ingest(const project::Project& p, std::ostream& out) {
    const auto docs = p.documents();
    p.invalidate_after(project::Stage::ingest);
    const auto n = project::run_ingest(p);
    out << "ingested " << n << " sentences from " << docs.size() << " documents\n";
    return kExitOk;
}

int cmd_embed(const project::Project& p, const project::Settings& s, std::ostream& out) {
    p.require(p.sentences_path(), "ingest");
    p.invalidate_after(project::Stage::embed);
    project::run_embed(p, s);
    out << "embedded " << p.documents().size() << " documents with the " << project::to_string(s.backend)
        << " backend\n";
    return kExitOk;
}

int cmd_model(const project::Project& p, const project::Settings& s, std::ostream& out, std::ostream& err) {
    const auto docs = p.documents();
    p.require(p.sentences_path(), "ingest");
    for (const auto& d : docs) p.require(p.embedding_path(d.doc_id), "embed");
    p.invalidate_after(project::Stage::model);
    const auto report = project::run_model(p, s);
    for (const auto& [doc, r] : report.results) {
        out << doc << "\t" << r.topics.size() << " topics (min_cluster_size " << r.params.cluster.min_cluster_size
            << ", n_neighbors " << r.params.reduce.n_neighbors << ")\n";
    }
    for (const auto& f : report.failures) err << "error: document " << f.doc_id << ": " << f.message << "\n";
    return report.failures.empty() ? kExitOk : kExitDomain;
}

int cmd_export(const project::Project& p, const std::string& annotator, const std::string& out_path, std::ostream& out) {
    p.require(p.topics_path(), "model");
    const auto all = p.topics();
    themes::AssignmentStore store(p.assignments_path(), p.stale_assignments_path());
    std::map<std::pair<std::string, int>, themes::ThemeAssignment> existing;
    for (const auto& a : store.active()) {
        if (a.annotator == annotator) existing[{a.doc_id, a.topic_id}] = a;
    }
    std::vector<csv::Row> rows;
    for (const auto& t : all) {
        const auto it = existing.find({t.doc_id, t.topic_id});
        csv::Row row{t.doc_id, std::to_string(t.topic_id), "", "", "", "", annotator};
        if (it != existing.end()) {
            row[2] = it->second.coherent ? "true" : "false";
            for (std::size_t i = 0; i < it->second.themes.size(); ++i) row[3 + i] = it->second.themes[i];
        }
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const csv::Row& a, const csv::Row& b) {
        return std::pair(a[0], std::stoi(a[1])) < std::pair(b[0], std::stoi(b[1]));
    });
    const fs::path target = out_path.empty() ? p.root() / ("annotations_" + annotator + ".csv") : fs::path(out_path);
    io::atomic_write(target, csv::format_table(
                                 {"doc_id", "topic_id", "coherent", "theme1", "theme2", "theme3", "annotator"}, rows));
    out << "wrote " << rows.size() << " rows to " << target.string() << "\n";
    return kExitOk;
}

int cmd_import(const project::Project& p, const std::string& first, const std::string& second, std::ostream& out) {
    p.require(p.topics_path(), "model");
    const auto all = p.topics();
    const auto a = read_annotations(first);
    check_topics_exist(a, all);
    std::vector<themes::ThemeAssignment> accepted = a;
    std::vector<themes::Conflict> conflicts;
    if (!second.empty()) {
        const auto b = read_annotations(second);
        check_topics_exist(b, all);
        auto merged = themes::merge_annotators(a, b);
        accepted.clear();
        std::size_t single = 0;
        for (auto& m : merged.consolidated) {
            single += m.single_annotator;
            accepted.push_back(std::move(m.assignment));
        }
        conflicts = std::move(merged.conflicts);
        std::vector<csv::Row> rows;
        for (const auto& c : conflicts) {
            rows.push_back({c.doc_id, std::to_string(c.topic_id), c.coherent_a ? "true" : "false", join(c.themes_a, ";"),
                            c.coherent_b ? "true" : "false", join(c.themes_b, ";")});
        }
        io::atomic_write(p.conflicts_path(),
                         csv::format_table({"doc_id", "topic_id", "coherent_a", "themes_a", "coherent_b", "themes_b"}, rows));
        out << "merged " << accepted.size() << " assignments (" << single << " single-annotator), " << conflicts.size()
            << " conflicts written to " << p.conflicts_path().string() << "\n";
    }
    p.invalidate_after(project::Stage::annotate);
    themes::AssignmentStore store(p.assignments_path(), p.stale_assignments_path());
    store.put_all(accepted);
    out << "imported " << accepted.size() << " assignments\n";
    return kExitOk;
}

int cmd_themes(const project::Project& p, bool use_fixture, std::ostream& out) {
    const auto src = load_source(p, use_fixture);
    const auto summary = themes::document_summary(src.assignments, src.cluster_counts);
    const auto cat = themes::catalog(src.assignments);
    out << "doc_id\tclusters\tthemes\tkey_themes\n";
    int clusters = 0;
    for (const auto& s : summary) {
        clusters += s.clusters;
        std::vector<std::string> head(s.key_themes.begin(),
                                      s.key_themes.begin() + static_cast<long>(std::min<std::size_t>(5, s.key_themes.size())));
        out << s.doc_id << "\t" << s.clusters << "\t" << s.distinct_themes << "\t" << join(head, "; ") << "\n";
    }
    out << "total\t" << clusters << "\t" << cat.distinct() << "\t\n";
    if (!src.assignments.empty()) {
        out << "incoherent clusters: " << io::format_fixed(100.0 * themes::incoherence_rate(src.assignments), 1)
            << "%\n";
    }
    if (!use_fixture) io::atomic_write(p.themes_path(), themes::format_themes_csv(cat));
    return kExitOk;
}

int cmd_evolve(const project::Project& p, bool use_fixture, int k, const std::string& direction, std::ostream& out) {
    const auto dir = evolve::parse_direction(direction);
    const auto src = load_source(p, use_fixture);
    const auto series = evolve::theme_by_year(src.assignments, src.documents);
    const fs::path target = use_fixture ? p.root() / "evolution_fixture.json" : p.evolution_path();
    io::atomic_write(target, evolve::evolution_json(series));
    out << "theme\ttotal\tpre\tpost\n";
    for (const auto& s : evolve::select_series(series, k, dir)) {
        out << s.theme << "\t" << s.total() << "\t" << s.pre << "\t" << s.post << "\n";
    }
    return kExitOk;
}

int cmd_render(const project::Project& p, bool use_fixture, int k, std::ostream& out) {
    const auto src = load_source(p, use_fixture);
    const fs::path dir = use_fixture ? p.root() / "out_fixture" : p.out_dir();
    fs::create_directories(dir);
    const report::RenderSpec spec;
    int written = 0;
    auto emit = [&](const std::string& name, const std::string& svg, const std::string& data) {
        io::atomic_write(dir / (name + ".svg"), svg);
        io::atomic_write(dir / (name + ".json"), data);
        written += 2;
    };
    if (!use_fixture) {
        std::map<std::string, std::vector<topics::TopicCluster>> by_doc;
        for (auto& t : p.topics()) by_doc[t.doc_id].push_back(std::move(t));
        for (const auto& [doc, list] : by_doc) {
            emit(doc + "_topics", report::barchart_svg(list, 8, spec), report::barchart_json(list, 8));
        }
    }
    const auto [pre, post] = evolve::split_by_era(src.assignments, src.documents);
    const std::pair<std::string, themes::ThemeCatalog> clouds[] = {
        {"all", themes::catalog(src.assignments)}, {"pre", pre}, {"post", post}};
    for (const auto& [name, cat] : clouds) {
        if (cat.entries.empty()) continue;
        const auto weights = report::wordcloud_weights(cat, spec);
        const auto placed = report::wordcloud_layout(weights, spec);
        emit("themes_wordcloud_" + name, report::wordcloud_svg(weights, spec), report::wordcloud_json(placed));
    }
    const auto series = evolve::theme_by_year(src.assignments, src.documents);
    if (!series.empty()) {
        for (const auto dir_token : {"top", "bottom"}) {
            const auto layout = evolve::stream_layout(evolve::select_series(series, k, evolve::parse_direction(dir_token)));
            emit("themes_stream_" + std::string(dir_token) + std::to_string(k), report::streamgraph_svg(layout, spec),
                 report::streamgraph_json(layout));
        }
    }
    out << "wrote " << written << " files to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_serve(const project::Project& p, const project::Settings& s, const std::string& addr, const std::string& ui,
              std::ostream& out) {
    const auto [host, port] = service::parse_addr(addr);
    service::Options options;
    if (!ui.empty()) options.static_dir = ui;
    service::Service svc(p, s, options);
    const int bound = svc.bind(host, port);
    out << "serving " << p.root().string() << " on http://" << host << ":" << bound << "\n" << std::flush;
    svc.listen();
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"themescope: topic modelling and theme analysis for policy document corpora", "themescope"};
    app.require_subcommand(1);
    app.fallthrough();

    Flags f;
    app.add_option("--project", f.project, "Project directory")->capture_default_str();
    app.add_option("--seed", f.seed, "Random seed for embedding, reduction and layout (default 42)");
    app.add_option("--backend", f.backend, "Embedding backend: hashed or external")
        ->check(CLI::IsMember({"hashed", "external"}));
    app.add_option("--embeddings", f.embeddings, "Directory of <doc_id>.emb1 files for the external backend");
    app.add_option("--min-cluster-size", f.min_cluster_size, "Smallest topic cluster (default 10)");
    app.add_option("--n-neighbors", f.n_neighbors, "Neighbourhood size of the reduction graph (default 15)");
    app.add_option("--min-topics", f.min_topics, "Topics required per document (default 3)");
    app.add_option("--stopwords", f.stopwords, "Stop-word list, one word per line");
    app.add_option("--top-n", f.top_n, "Terms kept per topic (default 10)");

    auto* ingest = app.add_subcommand("ingest", "Split texts/<doc_id>.txt into sentences.csv");
    auto* embed = app.add_subcommand("embed", "Embed sentences into embeddings/<doc_id>.emb1");
    auto* model = app.add_subcommand("model", "Reduce, cluster and describe topics per document");

    std::string annotator, export_out;
    auto* exp = app.add_subcommand("export-annotations", "Write an annotation sheet for the modelled topics");
    exp->add_option("--annotator", annotator, "Annotator id")->required();
    exp->add_option("--out", export_out, "Output CSV (default annotations_<annotator>.csv in the project)");

    std::string import_file, second_file;
    auto* imp = app.add_subcommand("import-annotations", "Load an annotation sheet, optionally merging a second pass");
    imp->add_option("file", import_file, "Annotation CSV")->required();
    imp->add_option("--second", second_file, "Second annotator's CSV; differences go to conflicts.csv");

    bool fixture_flag = false;
    auto* th = app.add_subcommand("themes", "Summarise themes per document and write themes.csv");
    th->add_flag("--fixture", fixture_flag, "Use the shipped overview fixture instead of project annotations");

    int k = 10;
    std::string direction = "top";
    auto* ev = app.add_subcommand("evolve", "Theme counts per year and era; writes evolution.json");
    ev->add_flag("--fixture", fixture_flag, "Use the shipped overview fixture");
    ev->add_option("--k", k, "Series to list")->check(CLI::PositiveNumber)->capture_default_str();
    ev->add_option("--direction", direction, "top or bottom")->check(CLI::IsMember({"top", "bottom"}))->capture_default_str();

    auto* rd = app.add_subcommand("render", "Write SVG figures and their JSON data");
    rd->add_flag("--fixture", fixture_flag, "Use the shipped overview fixture");
    rd->add_option("--k", k, "Series per stream graph")->check(CLI::PositiveNumber)->capture_default_str();

    std::string addr = "127.0.0.1:8787", ui;
    auto* sv = app.add_subcommand("serve", "Serve the HTTP API");
    sv->add_option("--addr", addr, "Listen address host:port")->capture_default_str();
    sv->add_option("--ui", ui, "Directory of built UI assets served at /");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        const project::Project p{fs::path(f.project)};
        const bool has_project = fs::exists(p.manifest_path());
        const bool project_free = fixture_flag && (*th || *ev || *rd);
        if (!has_project && !project_free) {
            throw MissingStageError("missing " + p.manifest_path().string());
        }
        const auto settings = resolve(p, f);
        if (has_project) p.save_settings(settings);

        if (*ingest) return cmd_ingest(p, out);
        if (*embed) return cmd_embed(p, settings, out);
        if (*model) return cmd_model(p, settings, out, err);
        if (*exp) return cmd_export(p, annotator, export_out, out);
        if (*imp) return cmd_import(p, import_file, second_file, out);
        if (*th) return cmd_themes(p, fixture_flag, out);
        if (*ev) return cmd_evolve(p, fixture_flag, k, direction, out);
        if (*rd) return cmd_render(p, fixture_flag, k, out);
        if (*sv) return cmd_serve(p, settings, addr, ui, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}

}  // namespace themescope::cli
