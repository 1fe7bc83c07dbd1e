#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "themescope/cluster.hpp"
#include "themescope/embed.hpp"
#include "themescope/error.hpp"
#include "themescope/matrix.hpp"
#include "themescope/preprocess.hpp"
#include "themescope/reduce.hpp"

namespace themescope::topics {

struct TermWeight {
    std::string term;
    double weight = 0;

    friend bool operator==(const TermWeight&, const TermWeight&) = default;
};

struct Representative {
    int sentence_index = 0;
    double similarity = 0;

    friend bool operator==(const Representative&, const Representative&) = default;
};

struct TopicCluster {
    std::string doc_id;
    int topic_id = 0;
    int size = 0;
    std::vector<TermWeight> top_terms;
    std::vector<Representative> representatives;
    std::vector<int> members;  // sentence indices; in memory only

    friend bool operator==(const TopicCluster&, const TopicCluster&) = default;
};

struct PipelineParams {
    reduce::ReduceParams reduce;
    cluster::ClusterParams cluster;
    int top_n = 10;
    int min_topics = 3;
    std::optional<double> mmr_lambda;  // off when empty
    int representatives = 3;
    int min_df = 1;
    embed::HashedParams term_embedding;  // used for MMR term vectors
};

/// Class-based TF-IDF: W(t, c) = tf(t, c) * ln(1 + A / f(t)), where f(t) is
/// the count of t over all classes and A the mean per-class token count.
/// Tokens outside the vocabulary are ignored. Rows are classes, columns are
/// vocab.terms. Throws EmptyVocabularyError for an empty vocabulary and
/// ParamError when there are no classes.
Matrix class_tf_idf(std::span<const preprocess::Tokens> classes, const preprocess::Vocabulary& vocab);

/// Descending weight, ties by term; zero weights dropped.
std::vector<TermWeight> top_terms(std::span<const double> weights, std::span<const std::string> terms, int top_n);

/// Greedy maximal marginal relevance over `candidates` (already ranked).
/// Relevance is the candidate weight divided by the largest candidate
/// weight; similarity is cosine between rows of `term_vectors` (aligned with
/// candidates). Ties keep candidate order. Returns terms in selection order.
std::vector<TermWeight> mmr_rerank(std::span<const TermWeight> candidates, const Matrix& term_vectors, double lambda,
                                   int top_n);

/// The `r` members closest (cosine) to the centroid of their embeddings,
/// ties by sentence index. `members` are row indices into `embeddings`.
std::vector<Representative> representatives(const Matrix& embeddings, std::span<const int> members, int r);

/// Reduce, cluster and describe one document. Outlier sentences and
/// sentences with a zero embedding belong to no topic. Topic ids follow
/// descending size, then smallest member index. Throws ParamError when the
/// document has fewer sentences than min_cluster_size and NoTopicsFound when
/// every sentence is noise.
std::vector<TopicCluster> model_document(const std::string& doc_id, std::span<const preprocess::Tokens> sentences,
                                         const embed::EmbeddingMatrix& embeddings, const PipelineParams& params,
                                         const preprocess::StopWords& stopwords = preprocess::StopWords::builtin());

struct TooFewTopics : Error {
    TooFewTopics(int best, std::vector<PipelineParams> tried);
    int best_count;
    std::vector<PipelineParams> attempts;
};

struct ModelResult {
    PipelineParams params;
    std::vector<TopicCluster> topics;
};

/// Runs model_document on a fixed schedule until at least min_topics topics
/// appear: the base parameters, then min_cluster_size lowered by 2 per step
/// down to 2, then n_neighbors halved once (floor 2). Throws TooFewTopics.
ModelResult ensure_min_topics(const std::string& doc_id, std::span<const preprocess::Tokens> sentences,
                              const embed::EmbeddingMatrix& embeddings, const PipelineParams& base,
                              const preprocess::StopWords& stopwords = preprocess::StopWords::builtin());

/// topics.csv (doc_id,topic_id,size,rank,term,weight) and
/// representatives.csv (doc_id,topic_id,sentence_index,similarity).
/// A topic without terms is stored as one row with an empty term.
std::string format_topics_csv(std::span<const TopicCluster> topics);
std::string format_representatives_csv(std::span<const TopicCluster> topics);
std::vector<TopicCluster> parse_topics(std::string_view topics_csv, std::string_view representatives_csv);
void save_topics(const std::filesystem::path& topics_csv, const std::filesystem::path& representatives_csv,
                 std::span<const TopicCluster> topics);
std::vector<TopicCluster> load_topics(const std::filesystem::path& topics_csv,
                                      const std::filesystem::path& representatives_csv);

}  // namespace themescope::topics
