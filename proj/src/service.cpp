#include "algorec/service.hpp"

#include "algorec/errors.hpp"
#include "algorec/text.hpp"

#include "httplib.h"

#include <algorithm>
#include <charconv>
#include <functional>
#include <fstream>

namespace algorec::service {

namespace {

using nlohmann::json;

const json& require(const json& body, const char* key) {
    if (!body.is_object() || !body.contains(key)) {
        throw ValidationError(std::string("missing field '") + key + "'");
    }
    return body.at(key);
}

std::string require_string(const json& body, const char* key) {
    const auto& v = require(body, key);
    if (!v.is_string() || v.get<std::string>().empty()) {
        throw ValidationError(std::string("field '") + key + "' must be a nonempty string");
    }
    return v.get<std::string>();
}

double require_score(const json& v, const char* key) {
    if (!v.is_number()) {
        throw ValidationError(std::string("field '") + key + "' must be a number");
    }
    const double x = v.get<double>();
    if (!(x >= 0.0 && x <= 1.0)) {
        throw ValidationError(std::string(key) + " " + text::format_double(x) + " outside [0,1]");
    }
    return x;
}

metafeatures::MetafeatureVector parse_metafeatures(const std::string& dataset_id, const json& j) {
    metafeatures::MetafeatureVector mf;
    mf.dataset_id = dataset_id;
    auto slot = [](const json& v) -> std::optional<double> {
        if (v.is_null()) {
            return std::nullopt;
        }
        if (!v.is_number()) {
            throw ValidationError("metafeature values must be numbers or null");
        }
        return v.get<double>();
    };
    if (j.is_array()) {
        if (j.size() != metafeatures::kCount) {
            throw ValidationError("metafeature array must have " + std::to_string(metafeatures::kCount) + " entries");
        }
        for (std::size_t i = 0; i < metafeatures::kCount; ++i) {
            mf.values[i] = slot(j[i]);
        }
    } else if (j.is_object()) {
        for (const auto& [name, v] : j.items()) {
            const auto it = std::find(metafeatures::kNames.begin(), metafeatures::kNames.end(), name);
            if (it == metafeatures::kNames.end()) {
                throw ValidationError("unknown metafeature '" + name + "'");
            }
            mf.values[static_cast<std::size_t>(it - metafeatures::kNames.begin())] = slot(v);
        }
    } else {
        throw ValidationError("metafeatures must be an object or an array");
    }
    return mf;
}

json metafeatures_json(const metafeatures::MetafeatureVector& mf) {
    json out = json::object();
    for (std::size_t i = 0; i < metafeatures::kCount; ++i) {
        out[std::string(metafeatures::kNames[i])] = mf.values[i] ? json(*mf.values[i]) : json(nullptr);
    }
    return out;
}

rec::StrategyParams parse_params(const json& j) {
    rec::StrategyParams out;
    if (j.is_null()) {
        return out;
    }
    if (!j.is_object()) {
        throw ValidationError("params must be an object");
    }
    for (const auto& [key, v] : j.items()) {
        if (v.is_string()) {
            out[key] = v.get<std::string>();
        } else if (v.is_number()) {
            out[key] = text::format_double(v.get<double>());
        } else {
            throw ValidationError("parameter '" + key + "' must be a string or a number");
        }
    }
    return out;
}

}  // namespace

Session::Session(std::string id, const json& settings, std::shared_ptr<const rec::Catalog> catalog,
                 const std::map<std::string, std::shared_ptr<const kb::KnowledgeBase>>& snapshots,
                 const std::string& default_snapshot)
    : id_(std::move(id)), catalog_(std::move(catalog)), filter_(catalog_->size()) {
    if (!settings.is_object()) {
        throw ValidationError("session request must be a JSON object");
    }
    const auto strategy = require_string(settings, "strategy");
    const auto params = parse_params(settings.value("params", json()));
    std::uint64_t seed = 0;
    if (settings.contains("seed")) {
        const auto& s = settings.at("seed");
        if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
            throw ValidationError("seed must be a nonnegative integer");
        }
        seed = s.get<std::uint64_t>();
    }
    std::string snapshot = default_snapshot;
    if (settings.contains("kb_snapshot") && !settings.at("kb_snapshot").is_null()) {
        if (!settings.at("kb_snapshot").is_string()) {
            throw ValidationError("kb_snapshot must be a string");
        }
        snapshot = settings.at("kb_snapshot").get<std::string>();
    }
    std::shared_ptr<const kb::KnowledgeBase> seed_kb;
    if (!snapshot.empty()) {
        auto it = snapshots.find(snapshot);
        if (it == snapshots.end()) {
            throw NotFoundError("unknown knowledge-base snapshot '" + snapshot + "'");
        }
        seed_kb = it->second;
    }

    model_ = rec::make_recommender(strategy, catalog_, params, derive_seed(seed, "session.model"));
    rng_ = make_rng(seed, "session.recommend");
    settings_ = {{"strategy", strategy}, {"params", params}, {"seed", seed}, {"kb_snapshot", snapshot}};

    if (seed_kb) {
        for (const auto& [ds, mf] : seed_kb->metafeatures) {
            model_->set_metafeatures(mf);
            datasets_[ds] = mf;
        }
        for (const auto& ds : seed_kb->datasets()) {
            datasets_.try_emplace(ds);
        }
        model_->update(std::span<const kb::ExperimentResult>(seed_kb->results()));
    }
}

json Session::describe() const {
    json datasets = json::array();
    for (const auto& [id, mf] : datasets_) {
        datasets.push_back({{"dataset_id", id}, {"has_metafeatures", mf.has_value()}});
    }
    return {{"session_id", id_},
            {"strategy", settings_.at("strategy")},
            {"params", settings_.at("params")},
            {"seed", settings_.at("seed")},
            {"kb_snapshot", settings_.at("kb_snapshot")},
            {"datasets", std::move(datasets)},
            {"events", events_.size()},
            {"results", model_->result_count()}};
}

json Session::append(json event) {
    event["seq"] = events_.size() + 1;
    events_.push_back(event);
    return event;
}

json Session::register_dataset(const json& body) {
    const auto dataset_id = require_string(body, "dataset_id");
    std::optional<metafeatures::MetafeatureVector> mf;
    if (body.contains("metafeatures") && !body.at("metafeatures").is_null()) {
        mf = parse_metafeatures(dataset_id, body.at("metafeatures"));
    }
    auto it = datasets_.find(dataset_id);
    if (it != datasets_.end()) {
        const auto& known = it->second;
        if (!mf || (known && *known == *mf)) {
            return {{"dataset_id", dataset_id}, {"status", "unchanged"}, {"has_metafeatures", known.has_value()}};
        }
        if (known) {
            throw ConflictError("dataset '" + dataset_id + "' is already registered with different metafeatures");
        }
    }
    datasets_[dataset_id] = mf;
    if (mf) {
        model_->set_metafeatures(*mf);
    }
    auto event = append({{"type", "register"},
                         {"dataset_id", dataset_id},
                         {"metafeatures", mf ? metafeatures_json(*mf) : json(nullptr)}});
    return {{"dataset_id", dataset_id},
            {"status", "registered"},
            {"has_metafeatures", mf.has_value()},
            {"seq", event.at("seq")}};
}

std::vector<rec::Recommendation> Session::run_recommend(const std::string& dataset_id, std::size_t n) {
    if (!datasets_.count(dataset_id)) {
        throw NotFoundError("dataset '" + dataset_id + "' is not registered");
    }
    return model_->recommend(dataset_id, n, filter_, rng_);
}

json Session::recommend(const std::string& dataset_id, std::size_t n) {
    const auto recs = run_recommend(dataset_id, n);
    json items = json::array();
    for (const auto& r : recs) {
        const auto& config = catalog_->config(r.config);
        items.push_back({{"config_id", catalog_->id(r.config)},
                         {"algorithm", config.algorithm},
                         {"params", config.params_json()},
                         {"predicted_score", r.predicted}});
    }
    auto event = append({{"type", "recommendation"}, {"dataset_id", dataset_id}, {"n", n}, {"recommendations", items}});
    for (auto& item : items) {
        item["seq"] = event.at("seq");
    }
    return items;
}

void Session::apply_result(const std::string& dataset_id, rec::ConfigIndex config, double train) {
    const rec::Rating rating{dataset_id, config, train};
    model_->update(std::span<const rec::Rating>(&rating, 1));
    filter_.insert(dataset_id, config);
}

json Session::record_result(const json& body) {
    const auto dataset_id = require_string(body, "dataset_id");
    const auto algorithm = require_string(body, "algorithm");
    if (!datasets_.count(dataset_id)) {
        throw NotFoundError("dataset '" + dataset_id + "' is not registered");
    }
    const auto config = catalog_->space().config_from_json(algorithm, body.value("params", json::object()));
    const auto index = catalog_->index_of(config);
    const double train = require_score(require(body, "train_score"), "train_score");
    bool imputed = false;
    double holdout = train;
    if (body.contains("holdout_score") && !body.at("holdout_score").is_null()) {
        holdout = require_score(body.at("holdout_score"), "holdout_score");
    } else {
        imputed = true;
    }
    if (model_->has_result(dataset_id, index)) {
        throw ConflictError("a result for dataset '" + dataset_id + "' and config '" + catalog_->id(index) +
                            "' is already recorded");
    }
    const bool recommended = filter_.contains(dataset_id, index);
    apply_result(dataset_id, index, train);
    auto event = append({{"type", "result"},
                         {"dataset_id", dataset_id},
                         {"config_id", catalog_->id(index)},
                         {"algorithm", config.algorithm},
                         {"params", config.params_json()},
                         {"train_score", train},
                         {"holdout_score", holdout},
                         {"holdout_imputed", imputed},
                         {"source", recommended ? "ai" : "user"}});
    return event;
}

json Session::experiments(std::size_t after, std::size_t limit) const {
    json page = json::array();
    for (std::size_t i = after; i < events_.size() && page.size() < limit; ++i) {
        page.push_back(events_[i]);
    }
    return {{"session_id", id_},
            {"events", std::move(page)},
            {"total", events_.size()},
            {"next_after", std::min(events_.size(), after + limit)}};
}

void Session::replay(const json& event) {
    const auto type = event.at("type").get<std::string>();
    const auto expected_seq = events_.size() + 1;
    if (event.at("seq").get<std::size_t>() != expected_seq) {
        throw ConflictError("event log of session '" + id_ + "' is out of order");
    }
    const auto dataset_id = event.at("dataset_id").get<std::string>();
    if (type == "register") {
        std::optional<metafeatures::MetafeatureVector> mf;
        if (!event.at("metafeatures").is_null()) {
            mf = parse_metafeatures(dataset_id, event.at("metafeatures"));
            model_->set_metafeatures(*mf);
        }
        datasets_[dataset_id] = mf;
    } else if (type == "recommendation") {
        const auto recs = run_recommend(dataset_id, event.at("n").get<std::size_t>());
        const auto& logged = event.at("recommendations");
        bool same = recs.size() == logged.size();
        for (std::size_t i = 0; same && i < recs.size(); ++i) {
            same = catalog_->id(recs[i].config) == logged[i].at("config_id").get<std::string>();
        }
        if (!same) {
            throw ConflictError("replayed recommendations of session '" + id_ + "' differ from the log at seq " +
                                std::to_string(expected_seq));
        }
    } else if (type == "result") {
        const auto index = catalog_->find(event.at("config_id").get<std::string>());
        if (!index) {
            throw ValidationError("logged config '" + event.at("config_id").get<std::string>() +
                                  "' is not in the space");
        }
        apply_result(dataset_id, *index, event.at("train_score").get<double>());
    } else {
        throw ValidationError("unknown event type '" + type + "'");
    }
    events_.push_back(event);
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)), catalog_(std::make_shared<const rec::Catalog>(config_.space)) {
    if (!config_.default_snapshot.empty() && !config_.snapshots.count(config_.default_snapshot)) {
        throw NotFoundError("unknown default snapshot '" + config_.default_snapshot + "'");
    }
    if (config_.state_dir) {
        std::filesystem::create_directories(*config_.state_dir);
        restore();
    }
}

Service::~Service() = default;

void Service::persist(const Session& session, const json& line) const {
    if (!config_.state_dir) {
        return;
    }
    const auto path = *config_.state_dir / (session.id() + ".jsonl");
    std::ofstream out(path, std::ios::app);
    if (!out) {
        throw NotFoundError("cannot write session log '" + path.string() + "'");
    }
    out << line.dump() << '\n';
}

void Service::restore() {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(*config_.state_dir)) {
        if (entry.path().extension() == ".jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        std::ifstream in(path);
        std::string line;
        std::shared_ptr<Session> session;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) {
                continue;
            }
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw ParseError(line_no, path.string() + ": " + e.what());
            }
            if (!session) {
                const auto id = j.at("session_id").get<std::string>();
                session = std::make_shared<Session>(id, j.at("settings"), catalog_, config_.snapshots,
                                                    config_.default_snapshot);
                std::size_t n = 0;
                if (id.size() > 1 && id[0] == 's' &&
                    std::from_chars(id.data() + 1, id.data() + id.size(), n).ec == std::errc()) {
                    next_id_ = std::max(next_id_, n + 1);
                }
            } else {
                session->replay(j);
            }
        }
        if (session) {
            sessions_[session->id()] = session;
        }
    }
}

json Service::create_session(const json& body) {
    std::unique_lock lock(sessions_mutex_);
    const std::string id = "s" + std::to_string(next_id_);
    auto session = std::make_shared<Session>(id, body, catalog_, config_.snapshots, config_.default_snapshot);
    persist(*session, {{"session_id", id}, {"settings", session->settings()}});
    ++next_id_;
    sessions_[id] = session;
    return {{"session_id", id}};
}

std::shared_ptr<Session> Service::session(const std::string& id) const {
    std::shared_lock lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw NotFoundError("unknown session '" + id + "'");
    }
    return it->second;
}

json Service::list_sessions() const {
    std::shared_lock lock(sessions_mutex_);
    json out = json::array();
    for (const auto& [id, s] : sessions_) {
        std::lock_guard session_lock(s->mutex);
        out.push_back({{"session_id", id}, {"strategy", s->settings().at("strategy")}, {"events", s->events().size()}});
    }
    return out;
}

json Service::get_session(const std::string& id) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    return s->describe();
}

namespace {

// Runs a mutating call and appends whatever events it produced to the log.
template <typename F>
json mutate(Session& s, const std::function<void(const Session&, const json&)>& persist, F&& call) {
    std::lock_guard lock(s.mutex);
    const auto before = s.events().size();
    json out = call();
    for (std::size_t i = before; i < s.events().size(); ++i) {
        persist(s, s.events()[i]);
    }
    return out;
}

}  // namespace

json Service::register_dataset(const std::string& id, const json& body) {
    auto s = session(id);
    return mutate(*s, [this](const Session& x, const json& e) { persist(x, e); },
                  [&] { return s->register_dataset(body); });
}

json Service::recommendations(const std::string& id, const std::string& dataset_id, std::size_t n) {
    auto s = session(id);
    return mutate(*s, [this](const Session& x, const json& e) { persist(x, e); },
                  [&] { return s->recommend(dataset_id, n); });
}

json Service::record_result(const std::string& id, const json& body) {
    auto s = session(id);
    return mutate(*s, [this](const Session& x, const json& e) { persist(x, e); },
                  [&] { return s->record_result(body); });
}

json Service::experiments(const std::string& id, std::size_t after, std::size_t limit) const {
    auto s = session(id);
    std::lock_guard lock(s->mutex);
    return s->experiments(after, limit);
}

json Service::snapshots() const {
    json out = json::array();
    for (const auto& [name, kb] : config_.snapshots) {
        out.push_back({{"name", name},
                       {"results", kb->size()},
                       {"datasets", kb->datasets().size()},
                       {"default", name == config_.default_snapshot}});
    }
    return out;
}

std::pair<int, std::string> http_error(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::not_found:
        case ErrorKind::missing_metafeatures:
            return {404, "not_found"};
        case ErrorKind::conflict:
        case ErrorKind::duplicate:
            return {409, "conflict"};
        case ErrorKind::exhausted:
            return {410, "exhausted"};
        case ErrorKind::divergence:
            return {500, "internal"};
        case ErrorKind::parse:
        case ErrorKind::validation:
        case ErrorKind::empty_input:
        case ErrorKind::domain:
            break;
    }
    return {400, "validation"};
}

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            const auto [status, code] = http_error(e.kind());
            reply(res, status, {{"code", code}, {"message", e.what()}});
        } catch (const json::exception& e) {
            reply(res, 400, {{"code", "validation"}, {"message", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, {{"code", "internal"}, {"message", e.what()}});
        }
    };
}

json parse_body(const httplib::Request& req) {
    try {
        return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
    }
}

std::size_t query_count(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) {
        return fallback;
    }
    const auto raw = req.get_param_value(key);
    auto v = text::parse_double(raw);
    if (!v || *v < 0.0 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
        throw ValidationError(std::string("query parameter '") + key + "' must be a nonnegative integer, got '" +
                              raw + "'");
    }
    return static_cast<std::size_t>(*v);
}

}  // namespace

void Service::mount(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
    server.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
                   std::shared_lock lock(sessions_mutex_);
                   reply(res, 200, {{"status", "ok"}, {"sessions", sessions_.size()}, {"configs", catalog_->size()}});
               }));
    server.Get("/space", guarded([this](const httplib::Request&, httplib::Response& res) { reply(res, 200, space()); }));
    server.Get("/snapshots",
               guarded([this](const httplib::Request&, httplib::Response& res) { reply(res, 200, snapshots()); }));
    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    reply(res, 201, create_session(parse_body(req)));
                }));
    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
                   reply(res, 200, list_sessions());
               }));
    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                   reply(res, 200, get_session(req.matches[1]));
               }));
    server.Post(R"(/sessions/([^/]+)/datasets)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    reply(res, 200, register_dataset(req.matches[1], parse_body(req)));
                }));
    server.Get(R"(/sessions/([^/]+)/recommendations)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                   if (!req.has_param("dataset")) {
                       throw ValidationError("query parameter 'dataset' is required");
                   }
                   reply(res, 200,
                         recommendations(req.matches[1], req.get_param_value("dataset"), query_count(req, "n", 1)));
               }));
    server.Post(R"(/sessions/([^/]+)/results)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    reply(res, 200, record_result(req.matches[1], parse_body(req)));
                }));
    server.Get(R"(/sessions/([^/]+)/experiments)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                   reply(res, 200,
                         experiments(req.matches[1], query_count(req, "after", 0), query_count(req, "limit", 1000)));
               }));
    if (config_.ui_dir) {
        if (!server.set_mount_point("/app", config_.ui_dir->string())) {
            throw NotFoundError("UI directory '" + config_.ui_dir->string() + "' does not exist");
        }
    }
}

void serve(Service& service, const std::string& host, int port) {
    httplib::Server server;
    service.mount(server);
    if (!server.listen(host, port)) {
        throw ValidationError("cannot listen on " + host + ":" + std::to_string(port));
    }
}

}  // namespace algorec::service
