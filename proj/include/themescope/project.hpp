#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "themescope/corpus.hpp"
#include "themescope/embed.hpp"
#include "themescope/topics.hpp"

namespace themescope::project {

/// The tuning surface. Stored under "settings" in project.json and used as
/// defaults by later commands.
struct Settings {
    std::uint64_t seed = 42;
    embed::Backend backend = embed::Backend::hashed;
    std::optional<std::filesystem::path> embeddings;  // directory of <doc_id>.emb1
    std::optional<int> min_cluster_size;
    std::optional<int> n_neighbors;
    int min_topics = 3;
    std::optional<std::filesystem::path> stopwords;
    int top_n = 10;

    friend bool operator==(const Settings&, const Settings&) = default;
};

std::string_view to_string(embed::Backend backend);
embed::Backend parse_backend(std::string_view token);  // throws ParamError

enum class Stage { ingest, embed, model, annotate };

/// A project directory:
///   manifest.csv, texts/<doc_id>.txt       inputs
///   sentences.csv                          ingest
///   embeddings/<doc_id>.emb1               embed
///   topics.csv, representatives.csv        model
///   assignments.csv, assignments_stale.csv annotations
///   themes.csv, evolution.json, out/       aggregates and figures
///   project.json                           settings and provenance
class Project {
public:
    explicit Project(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }
    std::filesystem::path manifest_path() const { return root_ / "manifest.csv"; }
    std::filesystem::path text_path(const std::string& doc_id) const { return root_ / "texts" / (doc_id + ".txt"); }
    std::filesystem::path sentences_path() const { return root_ / "sentences.csv"; }
    std::filesystem::path embeddings_dir() const { return root_ / "embeddings"; }
    std::filesystem::path embedding_path(const std::string& doc_id) const {
        return embeddings_dir() / (doc_id + ".emb1");
    }
    std::filesystem::path topics_path() const { return root_ / "topics.csv"; }
    std::filesystem::path representatives_path() const { return root_ / "representatives.csv"; }
    std::filesystem::path assignments_path() const { return root_ / "assignments.csv"; }
    std::filesystem::path stale_assignments_path() const { return root_ / "assignments_stale.csv"; }
    std::filesystem::path conflicts_path() const { return root_ / "conflicts.csv"; }
    std::filesystem::path themes_path() const { return root_ / "themes.csv"; }
    std::filesystem::path evolution_path() const { return root_ / "evolution.json"; }
    std::filesystem::path out_dir() const { return root_ / "out"; }
    std::filesystem::path project_json_path() const { return root_ / "project.json"; }

    /// Throws MissingStageError naming `file` and the command producing it.
    void require(const std::filesystem::path& file, std::string_view producer) const;

    std::vector<corpus::Document> documents() const;
    std::vector<corpus::Sentence> sentences(const std::string& doc_id) const;
    std::vector<topics::TopicCluster> topics() const;  // empty when not modelled yet
    bool modelled(const std::string& doc_id) const;

    Settings load_settings() const;  // defaults when project.json is absent
    void save_settings(const Settings& settings) const;
    /// Merges `record` under provenance.<stage> in project.json.
    void record(const std::string& stage, const std::string& json_object) const;

    /// Renames every output downstream of `stage` to <name>.staleN.
    std::vector<std::filesystem::path> invalidate_after(Stage stage) const;

private:
    std::filesystem::path root_;
};

topics::PipelineParams pipeline_params(const Settings& settings);
preprocess::StopWords stopwords_for(const Settings& settings);

/// Splits every manifest document's text into sentences.csv.
std::size_t run_ingest(const Project& project);

/// Writes embeddings/<doc_id>.emb1 for every document. The hashed backend
/// embeds each document's sentences as its own corpus; the external backend
/// validates and copies <embeddings>/<doc_id>.emb1.
void run_embed(const Project& project, const Settings& settings);

/// Loads one document's stored embeddings and token lists.
struct DocumentInput {
    std::vector<preprocess::Tokens> tokens;
    embed::EmbeddingMatrix embeddings;
};
DocumentInput load_input(const Project& project, const std::string& doc_id);

struct ModelFailure {
    std::string doc_id;
    std::string message;
};

struct ModelReport {
    std::map<std::string, topics::ModelResult> results;
    std::vector<ModelFailure> failures;
};

/// ensure_min_topics on every document, in parallel. Successful documents
/// are written to topics.csv/representatives.csv, failures are reported.
ModelReport run_model(const Project& project, const Settings& settings);

/// ensure_min_topics for one document with overrides; writes nothing.
topics::ModelResult model_one(const Project& project, const Settings& settings, const std::string& doc_id,
                              std::optional<int> min_cluster_size, std::optional<int> n_neighbors);

/// Replaces one document's rows in topics.csv/representatives.csv.
void replace_topics(const Project& project, const std::string& doc_id, const topics::ModelResult& result);

/// model_one followed by replace_topics. Throws on failure (nothing written).
topics::ModelResult remodel_document(const Project& project, const Settings& settings, const std::string& doc_id,
                                     std::optional<int> min_cluster_size, std::optional<int> n_neighbors);

}  // namespace themescope::project
