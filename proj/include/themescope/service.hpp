#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "themescope/project.hpp"

namespace themescope::service {

enum class JobStatus { queued, running, done, failed };
std::string_view to_string(JobStatus status);

struct JobRecord {
    std::string job_id;
    std::string kind = "model_document";
    std::string doc_id;
    std::optional<int> min_cluster_size;
    std::optional<int> n_neighbors;
    JobStatus status = JobStatus::queued;
    int topic_count = 0;  // set when done
    std::string error;    // set when failed
};

struct Options {
    std::optional<std::filesystem::path> static_dir;  // mounted at / when present
    /// Called on the worker thread before a job runs; tests use it to hold a
    /// job in the running state.
    std::function<void(const JobRecord&)> on_job_start;
};

/// HTTP API over one project directory. Reads take a shared lock on the
/// project state; annotation writes and job completion take it exclusively.
class Service {
public:
    Service(project::Project project, project::Settings settings, Options options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds to host:port (port 0 picks a free one) and returns the port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

    /// Blocks until no job is queued or running.
    void wait_idle();
    std::optional<JobRecord> job(const std::string& job_id) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Parses "host:port". Throws ParamError.
std::pair<std::string, int> parse_addr(std::string_view addr);

}  // namespace themescope::service
