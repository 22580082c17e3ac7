#pragma once

#include "algorec/errors.hpp"
#include "algorec/kb.hpp"
#include "algorec/recommenders/recommender.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

namespace httplib {
class Server;
}

namespace algorec::service {

struct ServiceConfig {
    kb::ConfigSpace space;
    /// Named seed knowledge bases a session can start from. The empty name
    /// selects an empty KB.
    std::map<std::string, std::shared_ptr<const kb::KnowledgeBase>> snapshots;
    /// Snapshot used when a session does not name one.
    std::string default_snapshot;
    /// When set, every session's event log is appended to
    /// `<state_dir>/<session_id>.jsonl` and replayed on start-up.
    std::optional<std::filesystem::path> state_dir;
    /// Static files served under /app.
    std::optional<std::filesystem::path> ui_dir;
};

/// One recommendation session: a recommender, its repeat filter and the
/// append-only event log that rebuilds both.
class Session {
public:
    /// `settings` is the creation request: {strategy, params, seed, kb_snapshot}.
    Session(std::string id, const nlohmann::json& settings, std::shared_ptr<const rec::Catalog> catalog,
            const std::map<std::string, std::shared_ptr<const kb::KnowledgeBase>>& snapshots,
            const std::string& default_snapshot);

    [[nodiscard]] const std::string& id() const { return id_; }
    [[nodiscard]] nlohmann::json describe() const;

    nlohmann::json register_dataset(const nlohmann::json& body);
    nlohmann::json recommend(const std::string& dataset_id, std::size_t n);
    nlohmann::json record_result(const nlohmann::json& body);
    /// Events with seq > `after`, at most `limit` of them.
    [[nodiscard]] nlohmann::json experiments(std::size_t after, std::size_t limit) const;

    /// Re-applies a logged event; throws ConflictError if the outcome differs.
    void replay(const nlohmann::json& event);

    [[nodiscard]] const nlohmann::json& settings() const { return settings_; }
    [[nodiscard]] const std::vector<nlohmann::json>& events() const { return events_; }
    [[nodiscard]] const rec::Recommender& recommender() const { return *model_; }
    [[nodiscard]] const rec::RepeatFilter& filter() const { return filter_; }

    /// Serializes all calls on the session.
    mutable std::mutex mutex;

private:
    nlohmann::json append(nlohmann::json event);
    std::vector<rec::Recommendation> run_recommend(const std::string& dataset_id, std::size_t n);
    void apply_result(const std::string& dataset_id, rec::ConfigIndex config, double train);

    std::string id_;
    nlohmann::json settings_;
    std::shared_ptr<const rec::Catalog> catalog_;
    std::unique_ptr<rec::Recommender> model_;
    rec::RepeatFilter filter_;
    Rng rng_;
    std::map<std::string, std::optional<metafeatures::MetafeatureVector>> datasets_;
    std::vector<nlohmann::json> events_;
};

/// The HTTP-independent service core; every method returns the JSON response
/// body and throws algorec::Error on failure.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();

    nlohmann::json create_session(const nlohmann::json& body);
    [[nodiscard]] nlohmann::json list_sessions() const;
    [[nodiscard]] nlohmann::json get_session(const std::string& id) const;
    nlohmann::json register_dataset(const std::string& id, const nlohmann::json& body);
    nlohmann::json recommendations(const std::string& id, const std::string& dataset_id, std::size_t n);
    nlohmann::json record_result(const std::string& id, const nlohmann::json& body);
    [[nodiscard]] nlohmann::json experiments(const std::string& id, std::size_t after, std::size_t limit) const;
    [[nodiscard]] nlohmann::json space() const { return config_.space.to_json(); }
    [[nodiscard]] nlohmann::json snapshots() const;

    [[nodiscard]] std::shared_ptr<Session> session(const std::string& id) const;

    /// Installs the routes on `server`.
    void mount(httplib::Server& server);

private:
    void persist(const Session& session, const nlohmann::json& line) const;
    void restore();

    ServiceConfig config_;
    std::shared_ptr<const rec::Catalog> catalog_;
    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::size_t next_id_ = 1;
};

/// HTTP status and JSON error code for an exception kind.
std::pair<int, std::string> http_error(ErrorKind kind);

/// Blocks serving on host:port until the process is stopped.
void serve(Service& service, const std::string& host, int port);

}  // namespace algorec::service
