#include "themescope/project.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"

namespace themescope::project {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view to_string(embed::Backend backend) {
    return backend == embed::Backend::hashed ? "hashed" : "external";
}

embed::Backend parse_backend(std::string_view token) {
    if (token == "hashed") return embed::Backend::hashed;
    if (token == "external") return embed::Backend::external;
    throw ParamError("backend must be hashed or external, got '" + std::string(token) + "'");
}

Project::Project(fs::path root) : root_(std::move(root)) {}

void Project::require(const fs::path& file, std::string_view producer) const {
    if (!fs::exists(file)) {
        throw MissingStageError("missing " + file.string() + "; run '" + std::string(producer) + "' first");
    }
}

std::vector<corpus::Document> Project::documents() const {
    if (!fs::exists(manifest_path())) throw MissingStageError("missing " + manifest_path().string());
    return corpus::load_manifest(manifest_path());
}

std::vector<corpus::Sentence> Project::sentences(const std::string& doc_id) const {
    require(sentences_path(), "ingest");
    return corpus::read_sentences(sentences_path(), doc_id);
}

std::vector<topics::TopicCluster> Project::topics() const {
    if (!fs::exists(topics_path())) return {};
    return topics::load_topics(topics_path(), representatives_path());
}

bool Project::modelled(const std::string& doc_id) const {
    const auto all = topics();
    return std::any_of(all.begin(), all.end(), [&](const auto& t) { return t.doc_id == doc_id; });
}

namespace {

json read_json(const fs::path& path) {
    if (!fs::exists(path)) return json::object();
    try {
        auto j = json::parse(io::read_text(path));
        if (!j.is_object()) throw FormatError(path.string() + " must hold a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

template <class T>
std::optional<T> opt(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<T>();
}

}  // namespace

Settings Project::load_settings() const {
    const auto doc = read_json(project_json_path());
    Settings s;
    if (!doc.contains("settings")) return s;
    const auto& j = doc["settings"];
    try {
        if (auto v = opt<std::uint64_t>(j, "seed")) s.seed = *v;
        if (auto v = opt<std::string>(j, "backend")) s.backend = parse_backend(*v);
        if (auto v = opt<std::string>(j, "embeddings")) s.embeddings = *v;
        s.min_cluster_size = opt<int>(j, "min_cluster_size");
        s.n_neighbors = opt<int>(j, "n_neighbors");
        if (auto v = opt<int>(j, "min_topics")) s.min_topics = *v;
        if (auto v = opt<std::string>(j, "stopwords")) s.stopwords = *v;
        if (auto v = opt<int>(j, "top_n")) s.top_n = *v;
    } catch (const json::exception& e) {
        throw FormatError("project.json settings: " + std::string(e.what()));
    }
    return s;
}

void Project::save_settings(const Settings& s) const {
    auto doc = read_json(project_json_path());
    json j;
    j["seed"] = s.seed;
    j["backend"] = to_string(s.backend);
    j["embeddings"] = s.embeddings ? json(s.embeddings->string()) : json(nullptr);
    j["min_cluster_size"] = s.min_cluster_size ? json(*s.min_cluster_size) : json(nullptr);
    j["n_neighbors"] = s.n_neighbors ? json(*s.n_neighbors) : json(nullptr);
    j["min_topics"] = s.min_topics;
    j["stopwords"] = s.stopwords ? json(s.stopwords->string()) : json(nullptr);
    j["top_n"] = s.top_n;
    doc["settings"] = j;
    io::atomic_write(project_json_path(), doc.dump(2) + "\n");
}

void Project::record(const std::string& stage, const std::string& json_object) const {
    static std::mutex mutex;
    std::lock_guard lock(mutex);
    auto doc = read_json(project_json_path());
    doc["provenance"][stage] = json::parse(json_object);
    io::atomic_write(project_json_path(), doc.dump(2) + "\n");
}

std::vector<fs::path> Project::invalidate_after(Stage stage) const {
    std::vector<fs::path> downstream;
    if (stage == Stage::ingest) downstream.push_back(embeddings_dir());
    if (stage <= Stage::embed) {
        downstream.push_back(topics_path());
        downstream.push_back(representatives_path());
    }
    if (stage <= Stage::model) {
        downstream.push_back(assignments_path());
        downstream.push_back(stale_assignments_path());
        downstream.push_back(conflicts_path());
    }
    downstream.push_back(themes_path());
    downstream.push_back(evolution_path());
    downstream.push_back(out_dir());

    std::vector<fs::path> renamed;
    for (const auto& p : downstream) {
        if (!fs::exists(p)) continue;
        for (int n = 1;; ++n) {
            fs::path target = p;
            target += ".stale" + std::to_string(n);
            if (fs::exists(target)) continue;
            fs::rename(p, target);
            renamed.push_back(target);
            break;
        }
    }
    return renamed;
}

topics::PipelineParams pipeline_params(const Settings& s) {
    topics::PipelineParams p;
    p.reduce.seed = s.seed;
    p.term_embedding.seed = s.seed;
    if (s.n_neighbors) p.reduce.n_neighbors = *s.n_neighbors;
    if (s.min_cluster_size) p.cluster.min_cluster_size = *s.min_cluster_size;
    p.min_topics = s.min_topics;
    p.top_n = s.top_n;
    return p;
}

preprocess::StopWords stopwords_for(const Settings& s) {
    return s.stopwords ? preprocess::StopWords::load(*s.stopwords) : preprocess::StopWords::builtin();
}

std::size_t run_ingest(const Project& project) {
    const auto docs = project.documents();
    for (const auto& d : docs) project.require(project.text_path(d.doc_id), "a text file for " + d.doc_id);
    io::atomic_write(project.sentences_path(), csv::format_table({"doc_id", "sentence_index", "text"}, {}));
    std::size_t total = 0;
    for (const auto& d : docs) {
        total += corpus::ingest_document(d, io::read_text(project.text_path(d.doc_id)), project.sentences_path()).size();
    }
    json rec{{"documents", docs.size()}, {"sentences", total}, {"abbreviation_list", corpus::kAbbreviationListId}};
    project.record("ingest", rec.dump());
    return total;
}

DocumentInput load_input(const Project& project, const std::string& doc_id) {
    const auto sentences = project.sentences(doc_id);
    if (sentences.empty()) throw NotFound("document " + doc_id + " has no ingested sentences");
    project.require(project.embedding_path(doc_id), "embed");
    DocumentInput in;
    for (const auto& s : sentences) in.tokens.push_back(preprocess::normalize_sentence(s.text));
    in.embeddings = embed::load_external_embeddings(project.embedding_path(doc_id), sentences.size());
    return in;
}

void run_embed(const Project& project, const Settings& settings) {
    const auto docs = project.documents();
    project.require(project.sentences_path(), "ingest");
    if (settings.backend == embed::Backend::external && !settings.embeddings) {
        throw ParamError("the external backend needs --embeddings DIR");
    }
    fs::create_directories(project.embeddings_dir());
    for (const auto& d : docs) {
        const auto sentences = project.sentences(d.doc_id);
        if (sentences.empty()) throw MissingStageError("document " + d.doc_id + " has no sentences; run 'ingest'");
        if (settings.backend == embed::Backend::hashed) {
            std::vector<preprocess::Tokens> tokens;
            for (const auto& s : sentences) tokens.push_back(preprocess::normalize_sentence(s.text));
            embed::HashedParams hp;
            hp.seed = settings.seed;
            embed::save_embeddings(project.embedding_path(d.doc_id), embed::embed_hashed(tokens, hp).values);
        } else {
            const auto source = *settings.embeddings / (d.doc_id + ".emb1");
            project.require(source, "an external encoder for " + d.doc_id);
            embed::load_external_embeddings(source, sentences.size());
            fs::copy_file(source, project.embedding_path(d.doc_id), fs::copy_options::overwrite_existing);
        }
    }
    json rec{{"backend", to_string(settings.backend)}, {"seed", settings.seed}, {"documents", docs.size()}};
    if (settings.backend == embed::Backend::hashed) {
        const embed::HashedParams hp;
        rec["dim"] = hp.dim;
        rec["buckets"] = hp.buckets;
    }
    project.record("embed", rec.dump());
}

namespace {

json describe(const topics::ModelResult& r) {
    return {{"min_cluster_size", r.params.cluster.min_cluster_size},
            {"n_neighbors", r.params.reduce.n_neighbors},
            {"topics", r.topics.size()}};
}

std::vector<topics::TopicCluster> replace_doc(std::vector<topics::TopicCluster> all, const std::string& doc_id,
                                              const std::vector<topics::TopicCluster>& fresh) {
    std::erase_if(all, [&](const auto& t) { return t.doc_id == doc_id; });
    all.insert(all.end(), fresh.begin(), fresh.end());
    return all;
}

}  // namespace

ModelReport run_model(const Project& project, const Settings& settings) {
    const auto docs = project.documents();
    project.require(project.sentences_path(), "ingest");
    for (const auto& d : docs) project.require(project.embedding_path(d.doc_id), "embed");
    const auto params = pipeline_params(settings);
    const auto stop = stopwords_for(settings);

    std::vector<std::optional<topics::ModelResult>> results(docs.size());
    std::vector<std::string> errors(docs.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < docs.size();) {
            try {
                const auto in = load_input(project, docs[i].doc_id);
                results[i] = topics::ensure_min_topics(docs[i].doc_id, in.tokens, in.embeddings, params, stop);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, docs.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
        work();
    }

    ModelReport report;
    std::vector<topics::TopicCluster> all;
    json rec{{"seed", settings.seed}, {"min_topics", settings.min_topics}, {"stopword_list", stop.id()}};
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (!results[i]) {
            report.failures.push_back({docs[i].doc_id, errors[i]});
            continue;
        }
        all.insert(all.end(), results[i]->topics.begin(), results[i]->topics.end());
        rec["documents"][docs[i].doc_id] = describe(*results[i]);
        report.results.emplace(docs[i].doc_id, std::move(*results[i]));
    }
    topics::save_topics(project.topics_path(), project.representatives_path(), all);
    project.record("model", rec.dump());
    return report;
}

topics::ModelResult model_one(const Project& project, const Settings& settings, const std::string& doc_id,
                              std::optional<int> min_cluster_size, std::optional<int> n_neighbors) {
    auto params = pipeline_params(settings);
    if (min_cluster_size) params.cluster.min_cluster_size = *min_cluster_size;
    if (n_neighbors) params.reduce.n_neighbors = *n_neighbors;
    const auto in = load_input(project, doc_id);
    return topics::ensure_min_topics(doc_id, in.tokens, in.embeddings, params, stopwords_for(settings));
}

void replace_topics(const Project& project, const std::string& doc_id, const topics::ModelResult& result) {
    topics::save_topics(project.topics_path(), project.representatives_path(),
                        replace_doc(project.topics(), doc_id, result.topics));
    project.record("rerun_" + doc_id, describe(result).dump());
}

topics::ModelResult remodel_document(const Project& project, const Settings& settings, const std::string& doc_id,
                                     std::optional<int> min_cluster_size, std::optional<int> n_neighbors) {
    auto result = model_one(project, settings, doc_id, min_cluster_size, n_neighbors);
    replace_topics(project, doc_id, result);
    return result;
}

}  // namespace themescope::project
