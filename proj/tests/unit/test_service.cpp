#include <doctest.h>

#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "synthetic.hpp"
#include "themescope/cli.hpp"
#include "themescope/csv.hpp"
#include "themescope/fixture.hpp"
#include "themescope/service.hpp"
#include "themescope/themes.hpp"

using namespace themescope;
using json = nlohmann::json;

namespace {

class Running {
public:
    Running(const std::filesystem::path& root, service::Options options = {})
        : svc_(project::Project(root), project::Project(root).load_settings(), std::move(options)) {
        port_ = svc_.bind("127.0.0.1", 0);
        thread_ = std::thread([this] { svc_.listen(); });
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    }
    ~Running() {
        svc_.stop();
        thread_.join();
    }
    httplib::Client& http() { return *client_; }
    service::Service& svc() { return svc_; }

private:
    service::Service svc_;
    int port_ = 0;
    std::thread thread_;
    std::unique_ptr<httplib::Client> client_;
};

void pipeline(const std::filesystem::path& root) {
    std::ostringstream out, err;
    for (const char* cmd : {"ingest", "embed"}) {
        REQUIRE(cli::run({"--project", root.string(), cmd}, out, err) == 0);
    }
    // The short document 09 cannot reach the minimum topic count.
    REQUIRE(cli::run({"--project", root.string(), "model"}, out, err) == 1);
}

json get(httplib::Client& c, const std::string& path, int expect = 200) {
    auto res = c.Get(path);
    REQUIRE(res);
    CHECK(res->status == expect);
    return json::parse(res->body);
}

httplib::Result put(httplib::Client& c, const std::string& path, const json& body) {
    return c.Put(path, body.dump(), "application/json");
}

}  // namespace

TEST_CASE("service over a modelled project") {
    testing::TempDir dir("svc");
    auto docs = testing::demo_corpus(42);
    docs.resize(2);
    docs.push_back(testing::tiny_document("09"));
    testing::write_project(dir.path(), docs);
    pipeline(dir.path());
    // A third document that is listed but never embedded or modelled.
    auto manifest = corpus::load_manifest(dir / "manifest.csv");
    manifest.push_back({"03", "Late", "x", corpus::DocType::guideline, 2025, corpus::Era::post_ai_act});
    corpus::save_manifest(dir / "manifest.csv", manifest);

    std::promise<void> release;
    auto released = release.get_future().share();
    service::Options options;
    options.on_job_start = [released](const service::JobRecord&) { released.wait(); };
    Running server(dir.path(), options);
    auto& c = server.http();

    SUBCASE("documents and topics") {
        const auto documents = get(c, "/api/documents");
        REQUIRE(documents.size() == 4);
        CHECK(documents[0]["doc_id"] == "01");
        CHECK(documents[0]["era"] == "pre_ai_act");
        std::string csv_text = "doc_id,title,issuer,doc_type,year,era\n";
        for (const auto& d : documents) {
            csv_text += csv::format_row({d["doc_id"], d["title"], d["issuer"], d["doc_type"],
                                         std::to_string(d["year"].get<int>()), d["era"]}) + "\n";
        }
        CHECK(corpus::parse_manifest(csv_text) == manifest);

        const auto topics = get(c, "/api/documents/01/topics");
        CHECK(topics.size() >= 3);
        for (std::size_t i = 0; i < topics.size(); ++i) {
            CHECK(topics[i]["topic_id"] == static_cast<int>(i));
            CHECK(topics[i]["terms"][0]["rank"] == 1);
            CHECK_FALSE(topics[i]["representatives"][0]["text"].get<std::string>().empty());
        }
        get(c, "/api/documents/99/topics", 404);
        get(c, "/api/documents/03/topics", 409);
        get(c, "/api/documents/09/topics", 409);
    }

    SUBCASE("assignment writes enforce the domain rules") {
        auto ok = put(c, "/api/assignments/01/0", {{"themes", {"Risk", "Oversight", "Privacy"}}, {"annotator", "alice"}});
        REQUIRE(ok);
        CHECK(ok->status == 200);
        const auto stored = json::parse(ok->body);
        CHECK(stored["theme3"] == "Privacy");
        CHECK(stored["coherent"] == true);
        CHECK(stored["annotator"] == "alice");

        CHECK(put(c, "/api/assignments/01/0", {{"themes", {"a", "b", "c", "d"}}, {"annotator", "alice"}})->status == 422);
        CHECK(put(c, "/api/assignments/01/1", {{"themes", {"a"}}, {"coherent", false}, {"annotator", "alice"}})->status == 422);
        CHECK(put(c, "/api/assignments/01/99", {{"themes", {"a"}}, {"annotator", "alice"}})->status == 404);
        CHECK(put(c, "/api/assignments/99/0", {{"themes", {"a"}}, {"annotator", "alice"}})->status == 404);
        CHECK(c.Put("/api/assignments/01/0", "{not json", "application/json")->status == 400);
        CHECK(put(c, "/api/assignments/01/0", {{"themes", {"a"}}})->status == 400);

        put(c, "/api/assignments/01/1", {{"themes", {"risk"}}, {"annotator", "alice"}});
        CHECK(put(c, "/api/assignments/02/0", {{"themes", json::array()}, {"coherent", false}, {"annotator", "alice"}})->status == 200);
        const auto themes = get(c, "/api/themes");
        REQUIRE(themes.size() == 3);
        CHECK(themes[0]["theme"] == "Risk");
        CHECK(themes[0]["count"] == 2);
        const auto evo = get(c, "/api/evolution?k=2&direction=bottom");
        REQUIRE(evo.size() == 2);
        CHECK(evo[0]["points"][0]["year"] == 2019);
        get(c, "/api/evolution?direction=sideways", 400);
        CHECK(get(c, "/api/assignments")["assignments"].size() == 3);
        const auto on_disk = themes::parse_assignments(io::read_text(dir / "assignments.csv"));
        CHECK(on_disk.size() == 3);
    }

    SUBCASE("rerun jobs") {
        put(c, "/api/assignments/01/0", {{"themes", {"Risk"}}, {"annotator", "alice"}});
        auto res = c.Post("/api/rerun", json{{"doc_id", "01"}, {"min_cluster_size", 8}}.dump(), "application/json");
        REQUIRE(res);
        CHECK(res->status == 202);
        const auto job = json::parse(res->body);
        CHECK(job["params"]["min_cluster_size"] == 8);
        const std::string id = job["job_id"];

        CHECK(c.Post("/api/rerun", R"({"doc_id":"01"})", "application/json")->status == 409);
        CHECK(c.Post("/api/rerun", R"({"doc_id":"99"})", "application/json")->status == 404);
        CHECK(c.Post("/api/rerun", R"({"doc_id":"03"})", "application/json")->status == 409);
        CHECK(c.Post("/api/rerun", R"({"doc":"01"})", "application/json")->status == 400);

        release.set_value();
        server.svc().wait_idle();
        const auto done = get(c, "/api/jobs/" + id);
        CHECK(done["status"] == "done");
        CHECK(done["result"]["topics"].get<int>() >= 3);
        get(c, "/api/jobs/nope", 404);

        const auto a = get(c, "/api/assignments");
        CHECK(a["assignments"].empty());
        CHECK(a["stale"].size() == 1);
        CHECK(get(c, "/api/themes").empty());
        CHECK(get(c, "/api/evolution").empty());
    }

    SUBCASE("a failed rerun reports its error") {
        release.set_value();
        CHECK(c.Post("/api/rerun", R"({"doc_id":"02","n_neighbors":1})", "application/json")->status == 400);
        auto res = c.Post("/api/rerun", R"({"doc_id":"09"})", "application/json");
        REQUIRE(res);
        const std::string id = json::parse(res->body)["job_id"];
        server.svc().wait_idle();
        const auto job = get(c, "/api/jobs/" + id);
        CHECK(job["status"] == "failed");
        CHECK(job["error"].get<std::string>().find("TooFewTopics") != std::string::npos);
    }
}

TEST_CASE("service over the fixture and an empty project") {
    testing::TempDir dir("svcfx");
    std::filesystem::copy_file(fixture::fixtures_dir() / "manifest.csv", dir / "manifest.csv");
    const auto fx = fixture::expand(fixture::load_overview(fixture::fixtures_dir() / "paper_table2.csv"),
                                    fixture::Expansion::with_unlisted);
    std::vector<topics::TopicCluster> topics;
    for (const auto& [doc, n] : fx.cluster_counts) {
        for (int t = 0; t < n; ++t) topics.push_back({doc, t, 1, {}, {}, {}});
    }
    topics::save_topics(dir / "topics.csv", dir / "representatives.csv", topics);
    io::atomic_write(dir / "assignments.csv", themes::format_assignments(fx.assignments));

    {
        Running server(dir.path());
        auto& c = server.http();
        CHECK(get(c, "/api/documents").size() == 8);
        const auto cat = get(c, "/api/themes");
        const auto summary = themes::document_summary(fx.assignments, fx.cluster_counts);
        for (const auto& s : summary) {
            int with_doc = 0;
            for (const auto& e : cat) with_doc += e["per_doc"].contains(s.doc_id);
            CHECK(with_doc == s.distinct_themes);
        }
        const auto bottom = get(c, "/api/evolution?k=10&direction=bottom");
        REQUIRE(bottom.size() == 10);
        auto total = [](const json& s) { return s["era"]["pre"].get<int>() + s["era"]["post"].get<int>(); };
        for (std::size_t i = 1; i < bottom.size(); ++i) CHECK(total(bottom[i - 1]) <= total(bottom[i]));
        CHECK(get(c, "/api/evolution").size() == 10);
    }

    testing::TempDir empty("svcempty");
    Running server(empty.path());
    CHECK(get(server.http(), "/api/documents").empty());
    CHECK(get(server.http(), "/api/themes").empty());
    CHECK(get(server.http(), "/api/evolution?k=10&direction=bottom").empty());
}

TEST_CASE("address parsing") {
    CHECK(service::parse_addr("127.0.0.1:8787") == std::pair<std::string, int>{"127.0.0.1", 8787});
    CHECK_THROWS_AS(service::parse_addr("8787"), ParamError);
    CHECK_THROWS_AS(service::parse_addr("host:99999"), ParamError);
}
