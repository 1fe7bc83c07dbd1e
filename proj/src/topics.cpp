#include "themescope/topics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "themescope/csv.hpp"

namespace themescope::topics {

namespace {

const csv::Row kTopicsHeader{"doc_id", "topic_id", "size", "rank", "term", "weight"};
const csv::Row kRepresentativesHeader{"doc_id", "topic_id", "sentence_index", "similarity"};

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

std::string describe(const PipelineParams& p) {
    return "min_cluster_size=" + std::to_string(p.cluster.min_cluster_size) +
           " n_neighbors=" + std::to_string(p.reduce.n_neighbors);
}

}  // namespace

Matrix class_tf_idf(std::span<const preprocess::Tokens> classes, const preprocess::Vocabulary& vocab) {
    if (vocab.terms.empty()) throw EmptyVocabularyError("class_tf_idf needs a non-empty vocabulary");
    if (classes.empty()) throw ParamError("class_tf_idf needs at least one class");

    Matrix tf(classes.size(), vocab.terms.size());
    double total_tokens = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (const auto& token : classes[c]) {
            const long t = vocab.index_of(token);
            if (t < 0) continue;
            tf(c, static_cast<std::size_t>(t)) += 1.0;
            total_tokens += 1.0;
        }
    }
    const double avg = total_tokens / static_cast<double>(classes.size());

    std::vector<double> frequency(vocab.terms.size(), 0.0);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (std::size_t t = 0; t < frequency.size(); ++t) frequency[t] += tf(c, t);
    }
    Matrix weights(classes.size(), vocab.terms.size());
    for (std::size_t c = 0; c < classes.size(); ++c) {
        for (std::size_t t = 0; t < frequency.size(); ++t) {
            if (tf(c, t) > 0) weights(c, t) = tf(c, t) * std::log(1.0 + avg / frequency[t]);
        }
    }
    return weights;
}

std::vector<TermWeight> top_terms(std::span<const double> weights, std::span<const std::string> terms, int top_n) {
    if (top_n < 1) throw ParamError("top_n must be >= 1");
    std::vector<std::size_t> order;
    for (std::size_t t = 0; t < weights.size(); ++t) {
        if (weights[t] > 0) order.push_back(t);
    }
    const auto keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(top_n));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (weights[a] != weights[b]) return weights[a] > weights[b];
                          return terms[a] < terms[b];
                      });
    std::vector<TermWeight> out;
    for (std::size_t i = 0; i < keep; ++i) out.push_back({terms[order[i]], weights[order[i]]});
    return out;
}

std::vector<TermWeight> mmr_rerank(std::span<const TermWeight> candidates, const Matrix& term_vectors, double lambda,
                                   int top_n) {
    if (lambda < 0.0 || lambda > 1.0) throw ParamError("mmr lambda must lie in [0, 1]");
    if (term_vectors.rows() != candidates.size()) throw ParamError("one term vector per candidate required");
    double max_weight = 0;
    for (const auto& c : candidates) max_weight = std::max(max_weight, c.weight);

    std::vector<std::size_t> chosen;
    std::vector<bool> used(candidates.size(), false);
    while (chosen.size() < static_cast<std::size_t>(std::max(top_n, 0)) && chosen.size() < candidates.size()) {
        std::size_t best = candidates.size();
        double best_score = 0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (used[i]) continue;
            double redundancy = 0;
            for (std::size_t s : chosen) {
                redundancy = std::max(redundancy, cosine_similarity(term_vectors.row(i), term_vectors.row(s)));
            }
            const double relevance = max_weight > 0 ? candidates[i].weight / max_weight : 0.0;
            const double score = lambda * relevance - (1.0 - lambda) * redundancy;
            if (best == candidates.size() || score > best_score) {
                best = i;
                best_score = score;
            }
        }
        used[best] = true;
        chosen.push_back(best);
    }
    std::vector<TermWeight> out;
    for (std::size_t i : chosen) out.push_back(candidates[i]);
    return out;
}

std::vector<Representative> representatives(const Matrix& embeddings, std::span<const int> members, int r) {
    if (members.empty()) throw ParamError("representatives of an empty cluster");
    std::vector<double> centroid(embeddings.cols(), 0.0);
    for (int m : members) {
        const auto row = embeddings.row(static_cast<std::size_t>(m));
        for (std::size_t c = 0; c < centroid.size(); ++c) centroid[c] += row[c];
    }
    for (double& v : centroid) v /= static_cast<double>(members.size());

    std::vector<Representative> scored;
    for (int m : members) scored.push_back({m, cosine_similarity(embeddings.row(static_cast<std::size_t>(m)), centroid)});
    std::sort(scored.begin(), scored.end(), [](const Representative& a, const Representative& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.sentence_index < b.sentence_index;
    });
    if (scored.size() > static_cast<std::size_t>(std::max(r, 0))) scored.resize(static_cast<std::size_t>(std::max(r, 0)));
    return scored;
}

std::vector<TopicCluster> model_document(const std::string& doc_id, std::span<const preprocess::Tokens> sentences,
                                         const embed::EmbeddingMatrix& embeddings, const PipelineParams& params,
                                         const preprocess::StopWords& stopwords) {
    const std::size_t n = sentences.size();
    if (embeddings.n() != n) {
        throw RowCountMismatch("document " + doc_id + " has " + std::to_string(n) + " sentences but " +
                               std::to_string(embeddings.n()) + " embedding rows");
    }
    if (params.top_n < 1) throw ParamError("top_n must be >= 1");
    if (params.cluster.min_cluster_size < 2) throw ParamError("min_cluster_size must be >= 2");
    if (n < static_cast<std::size_t>(params.cluster.min_cluster_size)) {
        throw ParamError("document " + doc_id + " has " + std::to_string(n) + " sentences, fewer than min_cluster_size " +
                         std::to_string(params.cluster.min_cluster_size));
    }

    std::vector<int> active;
    for (std::size_t i = 0; i < n; ++i) {
        if (embeddings.zero_rows.empty() || !embeddings.zero_rows[i]) active.push_back(static_cast<int>(i));
    }
    if (active.size() < static_cast<std::size_t>(params.cluster.min_cluster_size)) {
        throw NoTopicsFound("document " + doc_id + ": too few sentences with a non-zero embedding");
    }

    Matrix points(active.size(), embeddings.dim());
    for (std::size_t r = 0; r < active.size(); ++r) {
        const auto src = embeddings.values.row(static_cast<std::size_t>(active[r]));
        std::copy(src.begin(), src.end(), points.row(r).begin());
    }

    // Small documents cannot supply the default neighbourhood size.
    reduce::ReduceParams rp = params.reduce;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(rp.n_neighbors, 1)), active.size() - 1);
    const auto neighbours = reduce::knn(points, k, rp.metric);
    std::vector<reduce::Membership> calibration(neighbours.n);
    for (std::size_t i = 0; i < neighbours.n; ++i) calibration[i] = reduce::smooth_knn(neighbours.dists(i), k);
    const auto coords = reduce::optimize_layout(reduce::fuzzy_graph(neighbours, calibration), rp);
    const auto labels = cluster::cluster(coords, params.cluster);

    std::map<int, std::vector<int>> groups;
    for (std::size_t r = 0; r < active.size(); ++r) {
        if (labels.labels[r] >= 0) groups[labels.labels[r]].push_back(active[r]);
    }
    if (groups.empty()) throw NoTopicsFound("document " + doc_id + ": every sentence is an outlier");

    std::vector<std::vector<int>> ordered;
    for (auto& [label, members] : groups) ordered.push_back(std::move(members));
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return a.front() < b.front();
    });

    const auto vocab = preprocess::build_vocabulary(sentences, params.min_df, stopwords);
    std::vector<preprocess::Tokens> classes;
    for (const auto& members : ordered) {
        preprocess::Tokens tokens;
        for (int m : members) {
            const auto& s = sentences[static_cast<std::size_t>(m)];
            tokens.insert(tokens.end(), s.begin(), s.end());
        }
        classes.push_back(std::move(tokens));
    }
    const Matrix weights = class_tf_idf(classes, vocab);

    std::vector<TopicCluster> out;
    for (std::size_t t = 0; t < ordered.size(); ++t) {
        TopicCluster topic;
        topic.doc_id = doc_id;
        topic.topic_id = static_cast<int>(t);
        topic.size = static_cast<int>(ordered[t].size());
        topic.members = ordered[t];
        if (params.mmr_lambda) {
            auto candidates = top_terms(weights.row(t), vocab.terms, params.top_n * 3);
            std::vector<preprocess::Tokens> pseudo;
            for (const auto& c : candidates) pseudo.push_back({c.term});
            if (!candidates.empty()) {
                const auto vectors = embed::embed_hashed(pseudo, params.term_embedding);
                topic.top_terms = mmr_rerank(candidates, vectors.values, *params.mmr_lambda, params.top_n);
                // MMR chooses the terms; the stored list stays ranked by weight.
                std::sort(topic.top_terms.begin(), topic.top_terms.end(), [](const auto& a, const auto& b) {
                    if (a.weight != b.weight) return a.weight > b.weight;
                    return a.term < b.term;
                });
            }
        } else {
            topic.top_terms = top_terms(weights.row(t), vocab.terms, params.top_n);
        }
        topic.representatives = representatives(embeddings.values, topic.members, params.representatives);
        out.push_back(std::move(topic));
    }
    return out;
}

TooFewTopics::TooFewTopics(int best, std::vector<PipelineParams> tried)
    : Error("TooFewTopics", [&] {
          std::string msg = "best topic count " + std::to_string(best) + " after " + std::to_string(tried.size()) +
                            " attempts (";
          for (std::size_t i = 0; i < tried.size(); ++i) msg += (i ? "; " : "") + describe(tried[i]);
          return msg + ")";
      }()),
      best_count(best),
      attempts(std::move(tried)) {}

ModelResult ensure_min_topics(const std::string& doc_id, std::span<const preprocess::Tokens> sentences,
                              const embed::EmbeddingMatrix& embeddings, const PipelineParams& base,
                              const preprocess::StopWords& stopwords) {
    if (base.min_topics < 1) throw ParamError("min_topics must be >= 1");
    std::vector<PipelineParams> tried;
    int best = 0;
    PipelineParams params = base;
    bool halved_neighbours = false;
    while (true) {
        tried.push_back(params);
        try {
            auto topics = model_document(doc_id, sentences, embeddings, params, stopwords);
            const int count = static_cast<int>(topics.size());
            if (count >= params.min_topics) return {params, std::move(topics)};
            best = std::max(best, count);
        } catch (const ParamError&) {
        } catch (const NoTopicsFound&) {
        }
        if (params.cluster.min_cluster_size > 2) {
            params.cluster.min_cluster_size = std::max(2, params.cluster.min_cluster_size - 2);
        } else if (!halved_neighbours) {
            params.reduce.n_neighbors = std::max(2, params.reduce.n_neighbors / 2);
            halved_neighbours = true;
        } else {
            break;
        }
    }
    throw TooFewTopics(best, std::move(tried));
}

std::string format_topics_csv(std::span<const TopicCluster> topics) {
    std::vector<const TopicCluster*> sorted;
    for (const auto& t : topics) sorted.push_back(&t);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
        return std::tie(a->doc_id, a->topic_id) < std::tie(b->doc_id, b->topic_id);
    });
    std::vector<csv::Row> rows;
    for (const auto* t : sorted) {
        if (t->top_terms.empty()) {
            rows.push_back({t->doc_id, std::to_string(t->topic_id), std::to_string(t->size), "0", "", "0"});
        }
        for (std::size_t r = 0; r < t->top_terms.size(); ++r) {
            rows.push_back({t->doc_id, std::to_string(t->topic_id), std::to_string(t->size), std::to_string(r + 1),
                            t->top_terms[r].term, io::format_double(t->top_terms[r].weight)});
        }
    }
    return csv::format_table(kTopicsHeader, rows);
}

std::string format_representatives_csv(std::span<const TopicCluster> topics) {
    std::vector<const TopicCluster*> sorted;
    for (const auto& t : topics) sorted.push_back(&t);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) {
        return std::tie(a->doc_id, a->topic_id) < std::tie(b->doc_id, b->topic_id);
    });
    std::vector<csv::Row> rows;
    for (const auto* t : sorted) {
        for (const auto& r : t->representatives) {
            rows.push_back({t->doc_id, std::to_string(t->topic_id), std::to_string(r.sentence_index),
                            io::format_double(r.similarity)});
        }
    }
    return csv::format_table(kRepresentativesHeader, rows);
}

std::vector<TopicCluster> parse_topics(std::string_view topics_csv, std::string_view representatives_csv) {
    auto topic_rows = csv::parse(topics_csv);
    if (topic_rows.empty() || topic_rows.front() != kTopicsHeader) throw FormatError("topics.csv: bad header");
    std::vector<TopicCluster> out;
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t r = 1; r < topic_rows.size(); ++r) {
        const auto& row = topic_rows[r];
        if (row.size() != kTopicsHeader.size()) throw FormatError("topics.csv: malformed row " + std::to_string(r));
        const int topic_id = io::parse_int(row[1], "topic_id");
        auto key = std::make_pair(row[0], topic_id);
        auto it = index.find(key);
        if (it == index.end()) {
            TopicCluster t;
            t.doc_id = row[0];
            t.topic_id = topic_id;
            t.size = io::parse_int(row[2], "size");
            it = index.emplace(key, out.size()).first;
            out.push_back(std::move(t));
        }
        if (io::parse_int(row[3], "rank") == 0 && row[4].empty()) continue;
        out[it->second].top_terms.push_back({row[4], io::parse_double(row[5], "weight")});
    }

    auto rep_rows = csv::parse(representatives_csv);
    if (rep_rows.empty() || rep_rows.front() != kRepresentativesHeader) {
        throw FormatError("representatives.csv: bad header");
    }
    for (std::size_t r = 1; r < rep_rows.size(); ++r) {
        const auto& row = rep_rows[r];
        if (row.size() != kRepresentativesHeader.size()) {
            throw FormatError("representatives.csv: malformed row " + std::to_string(r));
        }
        auto it = index.find({row[0], io::parse_int(row[1], "topic_id")});
        if (it == index.end()) throw FormatError("representatives.csv: row " + std::to_string(r) + " has no topic");
        out[it->second].representatives.push_back(
            {io::parse_int(row[2], "sentence_index"), io::parse_double(row[3], "similarity")});
    }
    return out;
}

void save_topics(const std::filesystem::path& topics_csv, const std::filesystem::path& representatives_csv,
                 std::span<const TopicCluster> topics) {
    io::atomic_write(topics_csv, format_topics_csv(topics));
    io::atomic_write(representatives_csv, format_representatives_csv(topics));
}

std::vector<TopicCluster> load_topics(const std::filesystem::path& topics_csv,
                                      const std::filesystem::path& representatives_csv) {
    return parse_topics(io::read_text(topics_csv), io::read_text(representatives_csv));
}

}  // namespace themescope::topics
