#include "themescope/service.hpp"

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "themescope/csv.hpp"
#include "themescope/error.hpp"
#include "themescope/evolve.hpp"
#include "themescope/themes.hpp"

namespace themescope::service {

using json = nlohmann::ordered_json;

std::string_view to_string(JobStatus status) {
    switch (status) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "unknown";
}

std::pair<std::string, int> parse_addr(std::string_view addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string_view::npos || colon == 0) throw ParamError("address must be host:port");
    const int port = io::parse_int(addr.substr(colon + 1), "port");
    if (port < 0 || port > 65535) throw ParamError("port out of range");
    return {std::string(addr.substr(0, colon)), port};
}

namespace {

json assignment_json(const themes::ThemeAssignment& a) {
    json j{{"doc_id", a.doc_id}, {"topic_id", a.topic_id}, {"coherent", a.coherent}};
    for (std::size_t i = 0; i < themes::kMaxThemes; ++i) {
        j["theme" + std::to_string(i + 1)] = i < a.themes.size() ? a.themes[i] : "";
    }
    j["annotator"] = a.annotator;
    return j;
}

json job_json(const JobRecord& r) {
    json params{{"min_cluster_size", r.min_cluster_size ? json(*r.min_cluster_size) : json(nullptr)},
                {"n_neighbors", r.n_neighbors ? json(*r.n_neighbors) : json(nullptr)}};
    json j{{"job_id", r.job_id}, {"kind", r.kind}, {"doc_id", r.doc_id}, {"params", params},
           {"status", to_string(r.status)}};
    j["result"] = r.status == JobStatus::done ? json{{"topics", r.topic_count}} : json(nullptr);
    j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
    return j;
}

void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, int status, std::string_view kind, std::string_view message) {
    send(res, status, json{{"error", kind}, {"message", message}});
}

int status_for(const Error& e) {
    if (dynamic_cast<const NotFound*>(&e)) return 404;
    if (dynamic_cast<const MissingStageError*>(&e)) return 409;
    return 422;
}

}  // namespace

struct Service::Impl {
    project::Project project;
    project::Settings settings;
    Options options;
    themes::AssignmentStore store;

    mutable std::shared_mutex state;  // topics.csv and assignment staleness
    httplib::Server server;

    mutable std::mutex jobs_mutex;
    std::condition_variable jobs_cv;
    std::map<std::string, JobRecord> jobs;
    std::deque<std::string> queue;
    std::size_t next_id = 1;
    bool stopping = false;
    std::jthread worker;

    Impl(project::Project p, project::Settings s, Options o)
        : project(std::move(p)),
          settings(std::move(s)),
          options(std::move(o)),
          store(project.assignments_path(), project.stale_assignments_path()) {
        routes();
        worker = std::jthread([this] { run_jobs(); });
    }

    ~Impl() {
        {
            std::lock_guard lock(jobs_mutex);
            stopping = true;
        }
        jobs_cv.notify_all();
        server.stop();
    }

    std::optional<corpus::Document> find_doc(const std::string& doc_id) const {
        if (!std::filesystem::exists(project.manifest_path())) return std::nullopt;
        for (auto& d : project.documents()) {
            if (d.doc_id == doc_id) return d;
        }
        return std::nullopt;
    }

    std::vector<themes::ThemeAssignment> counted() const { return themes::consolidated_view(store.active()); }

    void routes() {
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const Error& e) {
                send_error(res, status_for(e), e.kind(), e.what());
            } catch (const std::exception& e) {
                send_error(res, 500, "InternalError", e.what());
            }
        });

        server.Get("/api/documents", [this](const httplib::Request&, httplib::Response& res) {
            std::shared_lock lock(state);
            json arr = json::array();
            if (std::filesystem::exists(project.manifest_path())) {
                for (const auto& d : project.documents()) {
                    arr.push_back({{"doc_id", d.doc_id},
                                   {"title", d.title},
                                   {"issuer", d.issuer},
                                   {"doc_type", corpus::to_string(d.doc_type)},
                                   {"year", d.year},
                                   {"era", corpus::to_string(d.era)}});
                }
            }
            send(res, 200, arr);
        });

        server.Get(R"(/api/documents/([^/]+)/topics)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string doc_id = req.matches[1];
            std::shared_lock lock(state);
            if (!find_doc(doc_id)) return send_error(res, 404, "NotFound", "unknown document " + doc_id);
            std::vector<topics::TopicCluster> mine;
            for (auto& t : project.topics()) {
                if (t.doc_id == doc_id) mine.push_back(std::move(t));
            }
            if (mine.empty()) return send_error(res, 409, "NotModelled", "document " + doc_id + " has no topics yet");
            std::map<int, std::string> text;
            for (auto& s : project.sentences(doc_id)) text[s.index] = std::move(s.text);
            json arr = json::array();
            for (const auto& t : mine) {
                json terms = json::array();
                for (std::size_t r = 0; r < t.top_terms.size(); ++r) {
                    terms.push_back({{"rank", r + 1}, {"term", t.top_terms[r].term}, {"weight", t.top_terms[r].weight}});
                }
                json reps = json::array();
                for (const auto& r : t.representatives) {
                    reps.push_back({{"sentence_index", r.sentence_index},
                                    {"similarity", r.similarity},
                                    {"text", text.count(r.sentence_index) ? text[r.sentence_index] : ""}});
                }
                arr.push_back({{"doc_id", t.doc_id},
                               {"topic_id", t.topic_id},
                               {"size", t.size},
                               {"terms", terms},
                               {"representatives", reps}});
            }
            send(res, 200, arr);
        });

        server.Put(R"(/api/assignments/([^/]+)/(-?\d+))", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string doc_id = req.matches[1];
            const int topic_id = io::parse_int(std::string(req.matches[2]), "topic_id");
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception& e) {
                return send_error(res, 400, "BadRequest", e.what());
            }
            std::vector<std::string> names;
            bool coherent = true;
            std::string annotator;
            if (!body.is_object()) return send_error(res, 400, "BadRequest", "body must be a JSON object");
            if (body.contains("themes")) {
                if (!body["themes"].is_array()) return send_error(res, 400, "BadRequest", "themes must be an array");
                for (const auto& t : body["themes"]) {
                    if (!t.is_string()) return send_error(res, 400, "BadRequest", "themes must be strings");
                    names.push_back(t.get<std::string>());
                }
            }
            if (body.contains("coherent")) {
                if (!body["coherent"].is_boolean()) return send_error(res, 400, "BadRequest", "coherent must be a boolean");
                coherent = body["coherent"].get<bool>();
            }
            if (!body.contains("annotator") || !body["annotator"].is_string() ||
                body["annotator"].get<std::string>().find_first_not_of(" \t") == std::string::npos) {
                return send_error(res, 400, "BadRequest", "annotator is required");
            }
            annotator = body["annotator"].get<std::string>();

            std::unique_lock lock(state);
            const auto all = project.topics();
            auto exists = [&](const std::string& d, int id) {
                return std::any_of(all.begin(), all.end(), [&](const auto& t) { return t.doc_id == d && t.topic_id == id; });
            };
            const auto stored = store.assign(doc_id, topic_id, names, coherent, annotator, exists);
            send(res, 200, assignment_json(stored));
        });

        server.Get("/api/assignments", [this](const httplib::Request&, httplib::Response& res) {
            std::shared_lock lock(state);
            json active = json::array(), stale = json::array();
            for (const auto& a : store.active()) active.push_back(assignment_json(a));
            for (const auto& a : store.stale()) stale.push_back(assignment_json(a));
            send(res, 200, json{{"assignments", active}, {"stale", stale}});
        });

        server.Post("/api/rerun", [this](const httplib::Request& req, httplib::Response& res) {
            json body;
            try {
                body = json::parse(req.body);
            } catch (const json::exception& e) {
                return send_error(res, 400, "BadRequest", e.what());
            }
            if (!body.is_object() || !body.contains("doc_id") || !body["doc_id"].is_string()) {
                return send_error(res, 400, "BadRequest", "doc_id is required");
            }
            JobRecord job;
            job.doc_id = body["doc_id"].get<std::string>();
            for (const char* key : {"min_cluster_size", "n_neighbors"}) {
                if (!body.contains(key) || body[key].is_null()) continue;
                if (!body[key].is_number_integer() || body[key].get<int>() < 2) {
                    return send_error(res, 400, "BadRequest", std::string(key) + " must be an integer >= 2");
                }
                (std::string_view(key) == "n_neighbors" ? job.n_neighbors : job.min_cluster_size) = body[key].get<int>();
            }
            {
                std::shared_lock lock(state);
                if (!find_doc(job.doc_id)) return send_error(res, 404, "NotFound", "unknown document " + job.doc_id);
                if (!std::filesystem::exists(project.embedding_path(job.doc_id))) {
                    return send_error(res, 409, "MissingStageError", "document " + job.doc_id + " is not embedded");
                }
            }
            std::lock_guard lock(jobs_mutex);
            for (const auto& [id, other] : jobs) {
                if (other.doc_id == job.doc_id && (other.status == JobStatus::queued || other.status == JobStatus::running)) {
                    return send_error(res, 409, "JobRunning", "job " + id + " is already active for " + job.doc_id);
                }
            }
            job.job_id = "job-" + std::to_string(next_id++);
            jobs[job.job_id] = job;
            queue.push_back(job.job_id);
            jobs_cv.notify_all();
            send(res, 202, job_json(job));
        });

        server.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard lock(jobs_mutex);
            const auto it = jobs.find(req.matches[1]);
            if (it == jobs.end()) return send_error(res, 404, "NotFound", "unknown job");
            send(res, 200, job_json(it->second));
        });

        server.Get("/api/themes", [this](const httplib::Request&, httplib::Response& res) {
            std::shared_lock lock(state);
            json arr = json::array();
            for (const auto& e : themes::catalog(counted()).entries) {
                arr.push_back({{"theme", e.display}, {"count", e.count}, {"per_doc", e.per_doc}});
            }
            send(res, 200, arr);
        });

        server.Get("/api/evolution", [this](const httplib::Request& req, httplib::Response& res) {
            int k = 10;
            auto direction = evolve::Direction::top;
            try {
                if (req.has_param("k")) k = io::parse_int(req.get_param_value("k"), "k");
                if (req.has_param("direction")) direction = evolve::parse_direction(req.get_param_value("direction"));
                if (k < 1) throw ParamError("k must be at least 1");
            } catch (const Error& e) {
                return send_error(res, 400, "BadRequest", e.what());
            }
            std::shared_lock lock(state);
            const auto assignments = counted();
            std::vector<corpus::Document> docs;
            if (std::filesystem::exists(project.manifest_path())) docs = project.documents();
            const auto series = evolve::theme_by_year(assignments, docs);
            const auto selected = evolve::select_series(series, k, direction);
            send(res, 200, json::parse(evolve::evolution_json(selected)));
        });

        if (options.static_dir && std::filesystem::is_directory(*options.static_dir)) {
            server.set_mount_point("/", options.static_dir->string());
        }
    }

    void run_jobs() {
        while (true) {
            JobRecord job;
            {
                std::unique_lock lock(jobs_mutex);
                jobs_cv.wait(lock, [this] { return stopping || !queue.empty(); });
                if (stopping) return;
                auto& rec = jobs[queue.front()];
                queue.pop_front();
                rec.status = JobStatus::running;
                job = rec;
            }
            if (options.on_job_start) options.on_job_start(job);
            try {
                const auto result =
                    project::model_one(project, settings, job.doc_id, job.min_cluster_size, job.n_neighbors);
                std::unique_lock lock(state);
                project::replace_topics(project, job.doc_id, result);
                store.mark_stale(job.doc_id);
                job.status = JobStatus::done;
                job.topic_count = static_cast<int>(result.topics.size());
            } catch (const std::exception& e) {
                job.status = JobStatus::failed;
                job.error = e.what();
            }
            {
                std::lock_guard lock(jobs_mutex);
                jobs[job.job_id] = job;
            }
            jobs_cv.notify_all();
        }
    }
};

Service::Service(project::Project project, project::Settings settings, Options options)
    : impl_(std::make_unique<Impl>(std::move(project), std::move(settings), std::move(options))) {}

Service::~Service() = default;

int Service::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

void Service::wait_idle() {
    std::unique_lock lock(impl_->jobs_mutex);
    impl_->jobs_cv.wait(lock, [this] {
        if (!impl_->queue.empty()) return false;
        for (const auto& [id, j] : impl_->jobs) {
            if (j.status == JobStatus::running || j.status == JobStatus::queued) return false;
        }
        return true;
    });
}

std::optional<JobRecord> Service::job(const std::string& job_id) const {
    std::lock_guard lock(impl_->jobs_mutex);
    const auto it = impl_->jobs.find(job_id);
    if (it == impl_->jobs.end()) return std::nullopt;
    return it->second;
}

}  // namespace themescope::service
