#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "synthetic.hpp"
#include "themescope/corpus.hpp"
#include "themescope/error.hpp"
#include "themescope/topics.hpp"

using namespace themescope;
using namespace themescope::topics;
using preprocess::Tokens;

namespace {

preprocess::Vocabulary vocab_of(const std::vector<Tokens>& classes) {
    return preprocess::build_vocabulary(classes, 1, preprocess::StopWords::from_text(""));
}

struct Doc {
    std::vector<Tokens> tokens;
    embed::EmbeddingMatrix embeddings;
};

Doc synthetic(int clusters, int per_cluster, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Doc d;
    for (int c = 0; c < clusters; ++c) {
        for (int s = 0; s < per_cluster; ++s) {
            Tokens t;
            for (int w = 0; w < 7; ++w) t.push_back(testing::pseudo_word(c * 50 + static_cast<int>(rng() % 12)));
            d.tokens.push_back(std::move(t));
        }
    }
    std::shuffle(d.tokens.begin(), d.tokens.end(), rng);
    d.embeddings = embed::embed_hashed(d.tokens, {});
    return d;
}

}  // namespace

TEST_CASE("class tf-idf hand examples") {
    const std::vector<Tokens> classes{{"risk", "risk", "ai"}, {"data", "ai"}};
    const auto v = vocab_of(classes);
    const auto w = class_tf_idf(classes, v);
    const auto col = [&](const char* t) { return static_cast<std::size_t>(v.index_of(t)); };
    CHECK(std::abs(w(0, col("risk")) - 1.6218604324326575) <= 1e-9);
    CHECK(std::abs(w(1, col("data")) - 1.252762968495368) <= 1e-9);
    CHECK(std::abs(w(0, col("ai")) - 0.8109302162163288) <= 1e-9);
    CHECK(w(1, col("risk")) == 0.0);

    const std::vector<Tokens> single{{"risk"}};
    CHECK(std::abs(class_tf_idf(single, vocab_of(single))(0, 0) - 0.6931471805599453) <= 1e-9);
    CHECK_THROWS_AS(class_tf_idf(std::vector<Tokens>{}, v), ParamError);
}

TEST_CASE("top terms ordering") {
    const std::vector<std::string> terms{"a", "b", "c"};
    CHECK(top_terms(std::vector<double>{2, 1, 0}, terms, 1) == std::vector<TermWeight>{{"a", 2}});
    CHECK(top_terms(std::vector<double>{1, 1, 0}, std::vector<std::string>{"b", "a", "c"}, 2) ==
          std::vector<TermWeight>{{"a", 1}, {"b", 1}});
    CHECK(top_terms(std::vector<double>{0, 0, 0}, terms, 3).empty());
}

TEST_CASE("mmr limits and a greedy hand trace") {
    const std::vector<TermWeight> cands{{"a", 5}, {"b", 4}, {"c", 3.5}, {"d", 2}, {"e", 1}};
    Matrix vecs(5, 2, std::vector<double>{1, 0, 1, 0, 0.6, 0.8, 0, 1, 0.8, 0.6});
    CHECK(mmr_rerank(cands, vecs, 1.0, 5) == cands);

    // lambda = 0: after "a", the duplicate "b" (similarity 1) must wait.
    const auto diverse = mmr_rerank(cands, vecs, 0.0, 5);
    CHECK(diverse.front().term == "a");
    CHECK(diverse.back().term == "b");

    // lambda = 0.5, relevance w/5, hand-traced greedy:
    // pick a; then b:.4-.5=-.1 c:.35-.3=.05 d:.2-0=.2 e:.1-.4=-.3 -> d;
    // then b:.4-.5=-.1 c:.35-.4=-.05 e:.1-.4 -> c; then b:-.1 e:.1-.48 -> b; then e.
    const auto traced = mmr_rerank(cands, vecs, 0.5, 5);
    std::vector<std::string> order;
    for (const auto& t : traced) order.push_back(t.term);
    CHECK(order == std::vector<std::string>{"a", "d", "c", "b", "e"});
}

TEST_CASE("representatives") {
    Matrix one(1, 2, std::vector<double>{0.6, 0.8});
    const auto r1 = representatives(one, std::vector<int>{0}, 3);
    REQUIRE(r1.size() == 1);
    CHECK(r1[0].sentence_index == 0);
    CHECK(r1[0].similarity == doctest::Approx(1.0));

    Matrix same(4, 2, std::vector<double>{1, 0, 1, 0, 1, 0, 1, 0});
    const auto r2 = representatives(same, std::vector<int>{3, 1, 2, 0}, 2);
    CHECK(r2[0].sentence_index == 0);
    CHECK(r2[1].sentence_index == 1);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    Matrix pts(20, 3);
    for (auto& v : pts.values()) v = g(rng);
    embed::normalize_rows(pts);
    std::vector<int> members{1, 4, 5, 8, 9, 13, 17};
    std::vector<double> centroid(3, 0);
    for (int m : members) {
        for (std::size_t d = 0; d < 3; ++d) centroid[d] += pts(static_cast<std::size_t>(m), d);
    }
    std::vector<std::pair<double, int>> scored;
    for (int m : members) scored.emplace_back(-(1 - embed::cosine_distance(pts.row(static_cast<std::size_t>(m)), centroid)), m);
    std::sort(scored.begin(), scored.end());
    const auto r3 = representatives(pts, members, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(r3[i].sentence_index == scored[i].second);
        CHECK(r3[i].similarity == doctest::Approx(-scored[i].first).epsilon(1e-12));
    }
}

TEST_CASE("model_document recovers planted vocabularies deterministically") {
    const auto d = synthetic(3, 40, 1);
    PipelineParams p;
    const auto topics = model_document("01", d.tokens, d.embeddings, p);
    REQUIRE(topics.size() == 3);
    std::set<std::string> seen;
    for (const auto& t : topics) {
        CHECK(t.size >= 10);
        CHECK(t.top_terms.size() <= 10u);
        for (std::size_t i = 1; i < t.top_terms.size(); ++i) CHECK(t.top_terms[i - 1].weight >= t.top_terms[i].weight);
        for (const auto& term : t.top_terms) CHECK(seen.insert(term.term).second);
        CHECK(t.representatives.size() == 3u);
    }
    for (std::size_t i = 1; i < topics.size(); ++i) CHECK(topics[i - 1].size >= topics[i].size);
    CHECK(model_document("01", d.tokens, d.embeddings, p) == topics);

    p.mmr_lambda = 0.5;
    for (const auto& t : model_document("01", d.tokens, d.embeddings, p)) {
        for (std::size_t i = 1; i < t.top_terms.size(); ++i) CHECK(t.top_terms[i - 1].weight >= t.top_terms[i].weight);
    }
}

TEST_CASE("model_document preconditions") {
    const auto d = synthetic(1, 6, 2);
    PipelineParams p;
    CHECK_THROWS_AS(model_document("01", d.tokens, d.embeddings, p), ParamError);
    std::vector<Tokens> fewer(d.tokens.begin(), d.tokens.end() - 1);
    CHECK_THROWS_AS(model_document("01", fewer, d.embeddings, p), RowCountMismatch);
}

TEST_CASE("ensure_min_topics keeps defaults when they suffice") {
    const auto d = synthetic(4, 30, 3);
    PipelineParams p;
    const auto r = ensure_min_topics("01", d.tokens, d.embeddings, p);
    CHECK(r.topics.size() >= 3u);
    CHECK(r.params.cluster.min_cluster_size == 10);
    CHECK(r.params.reduce.n_neighbors == 15);
}

TEST_CASE("ensure_min_topics stops at the first qualifying schedule step") {
    const auto d = synthetic(3, 9, 6);
    PipelineParams base;
    const auto r = ensure_min_topics("01", d.tokens, d.embeddings, base);
    // Replay the schedule independently.
    int expected_mcs = -1, expected_k = 15;
    for (int mcs = 10; mcs >= 2 && expected_mcs < 0; mcs = mcs > 2 ? std::max(2, mcs - 2) : 1) {
        auto p = base;
        p.cluster.min_cluster_size = mcs;
        try {
            if (model_document("01", d.tokens, d.embeddings, p).size() >= 3) expected_mcs = mcs;
        } catch (const Error&) {
        }
        if (mcs == 2) break;
    }
    if (expected_mcs < 0) {
        expected_mcs = 2;
        expected_k = 7;
    }
    CHECK(r.params.cluster.min_cluster_size == expected_mcs);
    CHECK(r.params.reduce.n_neighbors == expected_k);
    CHECK(expected_mcs < 10);
}

TEST_CASE("five sentences cannot hold three topics") {
    const auto d = synthetic(1, 5, 7);
    PipelineParams p;
    try {
        ensure_min_topics("09", d.tokens, d.embeddings, p);
        FAIL("expected TooFewTopics");
    } catch (const TooFewTopics& e) {
        CHECK(e.best_count < 3);
        CHECK(e.attempts.size() == 6u);
        CHECK(e.attempts.back().reduce.n_neighbors == 7);
        CHECK(e.kind() == "TooFewTopics");
    }
}

TEST_CASE("topics csv round trip") {
    std::vector<TopicCluster> topics{
        {"01", 0, 12, {{"risk", 1.5}, {"data, \"x\"", 0.25}}, {{3, 0.9}, {7, 0.8}}, {}},
        {"01", 1, 5, {}, {{1, 1.0}}, {}},
        {"02", 0, 7, {{"ai", 1.0 / 3.0}}, {}, {}},
    };
    const auto back = parse_topics(format_topics_csv(topics), format_representatives_csv(topics));
    CHECK(back == topics);
    testing::TempDir dir("topics");
    save_topics(dir / "t.csv", dir / "r.csv", topics);
    CHECK(load_topics(dir / "t.csv", dir / "r.csv") == topics);
}
