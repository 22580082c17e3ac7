#include "algorec/errors.hpp"
#include "algorec/kb.hpp"
#include "algorec/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>

namespace algorec::kb {

namespace {

bool same_value(const ParamValue& a, const ParamValue& b) { return a == b; }

std::string describe(const std::string& algorithm, const nlohmann::json& params) {
    std::string id = algorithm;
    if (params.is_object()) {
        for (auto it = params.begin(); it != params.end(); ++it) {
            id += "|" + it.key() + "=";
            try {
                id += render_value(value_from_json(it.value()));
            } catch (const Error&) {
                id += it.value().dump();
            }
        }
    }
    return id;
}

}  // namespace

bool in_roster(std::string_view algorithm) {
    return std::find(kAlgorithmRoster.begin(), kAlgorithmRoster.end(), algorithm) != kAlgorithmRoster.end();
}

std::string render_value(const ParamValue& value) {
    struct Visitor {
        std::string operator()(std::monostate) const { return "none"; }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(double d) const { return text::format_double(d); }
        std::string operator()(const std::string& s) const { return s; }
    };
    return std::visit(Visitor{}, value);
}

nlohmann::json value_to_json(const ParamValue& value) {
    struct Visitor {
        nlohmann::json operator()(std::monostate) const { return nullptr; }
        nlohmann::json operator()(bool b) const { return b; }
        nlohmann::json operator()(double d) const {
            if (std::trunc(d) == d && std::fabs(d) < 9.0e15) {
                return static_cast<std::int64_t>(d);
            }
            return d;
        }
        nlohmann::json operator()(const std::string& s) const { return s; }
    };
    return std::visit(Visitor{}, value);
}

ParamValue value_from_json(const nlohmann::json& j) {
    if (j.is_null()) {
        return std::monostate{};
    }
    if (j.is_boolean()) {
        return j.get<bool>();
    }
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        return j.get<std::string>();
    }
    throw ValidationError("hyperparameter values must be null, boolean, number or string; got " + j.dump());
}

std::string AlgorithmConfig::config_id() const {
    std::string id = algorithm;
    for (const auto& [name, value] : params) {
        id += '|';
        id += name;
        id += '=';
        id += render_value(value);
    }
    return id;
}

nlohmann::json AlgorithmConfig::params_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, value] : params) {
        j[name] = value_to_json(value);
    }
    return j;
}

bool Exclusion::matches(const AlgorithmConfig& config) const {
    if (config.algorithm != algorithm) {
        return false;
    }
    for (const auto& [name, value] : when) {
        auto it = config.params.find(name);
        if (it == config.params.end() || !same_value(it->second, value)) {
            return false;
        }
    }
    return true;
}

bool operator==(const ParamGrid& a, const ParamGrid& b) { return a.name == b.name && a.values == b.values; }
bool operator==(const AlgorithmGrid& a, const AlgorithmGrid& b) {
    return a.algorithm == b.algorithm && a.params == b.params;
}
bool operator==(const Exclusion& a, const Exclusion& b) { return a.algorithm == b.algorithm && a.when == b.when; }
bool operator==(const ConfigSpace& a, const ConfigSpace& b) {
    return a.algorithms_ == b.algorithms_ && a.constraints_ == b.constraints_;
}

ConfigSpace::ConfigSpace(std::vector<AlgorithmGrid> algorithms, std::vector<Exclusion> constraints)
    : algorithms_(std::move(algorithms)), constraints_(std::move(constraints)) {
    std::set<std::string> seen_algorithms;
    for (auto& grid : algorithms_) {
        if (!in_roster(grid.algorithm)) {
            throw ValidationError("algorithm '" + grid.algorithm + "' is not in the supported roster");
        }
        if (!seen_algorithms.insert(grid.algorithm).second) {
            throw ValidationError("algorithm '" + grid.algorithm + "' declared twice");
        }
        std::sort(grid.params.begin(), grid.params.end(),
                  [](const ParamGrid& a, const ParamGrid& b) { return a.name < b.name; });
        for (std::size_t i = 0; i < grid.params.size(); ++i) {
            const auto& p = grid.params[i];
            if (p.name.empty() || p.name.find_first_of("|=") != std::string::npos) {
                throw ValidationError("invalid hyperparameter name '" + p.name + "' in " + grid.algorithm);
            }
            if (i > 0 && grid.params[i - 1].name == p.name) {
                throw ValidationError("hyperparameter '" + p.name + "' declared twice in " + grid.algorithm);
            }
            if (p.values.empty()) {
                throw ValidationError("hyperparameter '" + p.name + "' of " + grid.algorithm + " has no values");
            }
            // Rendered values must be distinct or config ids would collide.
            std::set<std::string> rendered;
            for (const auto& v : p.values) {
                const auto r = render_value(v);
                if (r.find('|') != std::string::npos) {
                    throw ValidationError("value '" + r + "' of " + p.name + " contains '|'");
                }
                if (!rendered.insert(r).second) {
                    throw ValidationError("value '" + r + "' repeated in " + grid.algorithm + "." + p.name);
                }
            }
        }
    }
    std::sort(algorithms_.begin(), algorithms_.end(),
              [](const AlgorithmGrid& a, const AlgorithmGrid& b) { return a.algorithm < b.algorithm; });
    for (const auto& ex : constraints_) {
        const auto* grid = find(ex.algorithm);
        if (grid == nullptr) {
            throw ValidationError("constraint refers to unknown algorithm '" + ex.algorithm + "'");
        }
        for (const auto& [name, value] : ex.when) {
            auto it = std::find_if(grid->params.begin(), grid->params.end(),
                                   [&](const ParamGrid& p) { return p.name == name; });
            if (it == grid->params.end()) {
                throw ValidationError("constraint refers to unknown hyperparameter '" + ex.algorithm + "." + name + "'");
            }
        }
    }
}

const AlgorithmGrid* ConfigSpace::find(std::string_view algorithm) const {
    auto it = std::lower_bound(algorithms_.begin(), algorithms_.end(), algorithm,
                               [](const AlgorithmGrid& g, std::string_view name) { return g.algorithm < name; });
    if (it == algorithms_.end() || it->algorithm != algorithm) {
        return nullptr;
    }
    return &*it;
}

ConfigSpace ConfigSpace::from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ValidationError("config space must be a JSON object");
    }
    std::vector<AlgorithmGrid> grids;
    std::vector<Exclusion> constraints;
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == "constraints") {
            if (!it.value().is_array()) {
                throw ValidationError("'constraints' must be a list");
            }
            for (const auto& c : it.value()) {
                if (!c.is_object() || !c.contains("algorithm") || !c.contains("when") || !c["when"].is_object()) {
                    throw ValidationError("constraint entries need 'algorithm' and an object 'when'");
                }
                Exclusion ex;
                ex.algorithm = c["algorithm"].get<std::string>();
                for (auto w = c["when"].begin(); w != c["when"].end(); ++w) {
                    ex.when[w.key()] = value_from_json(w.value());
                }
                constraints.push_back(std::move(ex));
            }
            continue;
        }
        if (!it.value().is_array()) {
            throw ValidationError("algorithm '" + it.key() + "' must map to a list of {param, values}");
        }
        AlgorithmGrid grid;
        grid.algorithm = it.key();
        for (const auto& p : it.value()) {
            if (!p.is_object() || !p.contains("param") || !p.contains("values") || !p["values"].is_array()) {
                throw ValidationError("entries of '" + it.key() + "' need 'param' and a list 'values'");
            }
            ParamGrid pg;
            pg.name = p["param"].get<std::string>();
            for (const auto& v : p["values"]) {
                pg.values.push_back(value_from_json(v));
            }
            grid.params.push_back(std::move(pg));
        }
        grids.push_back(std::move(grid));
    }
    return ConfigSpace(std::move(grids), std::move(constraints));
}

nlohmann::json ConfigSpace::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& grid : algorithms_) {
        nlohmann::json params = nlohmann::json::array();
        for (const auto& p : grid.params) {
            nlohmann::json values = nlohmann::json::array();
            for (const auto& v : p.values) {
                values.push_back(value_to_json(v));
            }
            params.push_back({{"param", p.name}, {"values", std::move(values)}});
        }
        j[grid.algorithm] = std::move(params);
    }
    nlohmann::json constraints = nlohmann::json::array();
    for (const auto& ex : constraints_) {
        nlohmann::json when = nlohmann::json::object();
        for (const auto& [name, value] : ex.when) {
            when[name] = value_to_json(value);
        }
        constraints.push_back({{"algorithm", ex.algorithm}, {"when", std::move(when)}});
    }
    j["constraints"] = std::move(constraints);
    return j;
}

ConfigSpace ConfigSpace::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open config space '" + path.string() + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(0, "config space '" + path.string() + "': " + e.what());
    }
    return from_json(j);
}

void ConfigSpace::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) {
        throw NotFoundError("cannot write config space '" + path.string() + "'");
    }
    out << to_json().dump(2) << '\n';
}

ConfigSpace ConfigSpace::pmlb() {
    using V = std::vector<ParamValue>;
    auto nums = [](std::initializer_list<double> xs) {
        V v;
        for (double x : xs) {
            v.emplace_back(x);
        }
        return v;
    };
    const V booleans = {true, false};
    const V fractions = nums({0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5});
    const V max_features = {0.1, 0.25, 0.5, 0.75, std::string("log2"), std::monostate{}, std::string("sqrt")};
    const V criterion = {std::string("entropy"), std::string("gini")};
    const V n_estimators = nums({10, 50, 100, 500, 1000});
    const V nb_alpha = nums({0.0, 0.1, 0.25, 0.5, 0.75, 1.0, 5.0, 10.0, 25.0, 50.0});

    V neighbors;
    for (int k = 1; k <= 25; ++k) {
        neighbors.emplace_back(static_cast<double>(k));
    }
    V lr_c;
    for (int k = 1; k <= 40; ++k) {
        lr_c.emplace_back(0.5 * k);
    }

    std::vector<AlgorithmGrid> grids = {
        {"AdaBoostClassifier",
         {{"learning_rate", nums({0.01, 0.1, 0.5, 1.0, 10.0, 50.0, 100.0})}, {"n_estimators", n_estimators}}},
        {"BernoulliNB",
         {{"alpha", nb_alpha}, {"fit_prior", booleans}, {"binarize", nums({0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0})}}},
        {"DecisionTreeClassifier",
         {{"min_weight_fraction_leaf", fractions}, {"max_features", max_features}, {"criterion", criterion}}},
        {"ExtraTreesClassifier",
         {{"n_estimators", n_estimators},
          {"min_weight_fraction_leaf", fractions},
          {"max_features", max_features},
          {"criterion", criterion}}},
        {"GradientBoostingClassifier",
         {{"loss", V{std::string("deviance")}},
          {"learning_rate", nums({0.01, 0.1, 0.5, 1.0, 10.0})},
          {"n_estimators", n_estimators},
          {"max_depth", V{1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0, 50.0, std::monostate{}}},
          {"max_features", V{std::string("log2"), std::string("sqrt"), std::monostate{}}}}},
        {"KNeighborsClassifier", {{"n_neighbors", neighbors}, {"weights", V{std::string("uniform"), std::string("distance")}}}},
        {"LogisticRegression",
         {{"C", lr_c}, {"penalty", V{std::string("l2"), std::string("l1")}}, {"fit_intercept", booleans}, {"dual", booleans}}},
        {"MultinomialNB", {{"alpha", nb_alpha}, {"fit_prior", booleans}}},
        {"PassiveAggressiveClassifier",
         {{"C", nums({0.0, 0.001, 0.01, 0.1, 0.5, 1.0, 10.0, 50.0, 100.0})},
          {"loss", V{std::string("hinge"), std::string("squared_hinge")}},
          {"fit_intercept", booleans}}},
        {"RandomForestClassifier",
         {{"n_estimators", n_estimators},
          {"min_weight_fraction_leaf", fractions},
          {"max_features", max_features},
          {"criterion", criterion}}},
        {"SGDClassifier",
         {{"loss", V{std::string("hinge"), std::string("perceptron"), std::string("log"), std::string("squared_hinge"),
                     std::string("modified_huber")}},
          {"penalty", V{std::string("elasticnet")}},
          {"alpha", nums({0.0, 0.001, 0.01})},
          {"learning_rate", V{std::string("constant"), std::string("invscaling")}},
          {"fit_intercept", booleans},
          {"l1_ratio", nums({0.0, 0.25, 0.5, 0.75, 1.0})},
          {"eta0", nums({0.01, 0.1, 1.0})},
          {"power_t", nums({0.0, 0.1, 0.5, 1.0, 10.0, 50.0, 100.0})}}},
        {"SVC",
         {{"C", nums({0.01})},
          {"gamma", nums({0.01})},
          {"kernel", V{std::string("poly")}},
          {"degree", nums({2.0, 3.0})},
          {"coef0", nums({0.0, 0.1, 0.5, 1.0, 10.0, 50.0, 100.0})}}},
    };
    return ConfigSpace(std::move(grids));
}

AlgorithmConfig ConfigSpace::config_from_json(const std::string& algorithm, const nlohmann::json& params) const {
    const auto* grid = find(algorithm);
    if (grid == nullptr) {
        throw ValidationError("config '" + describe(algorithm, params) + "' is not in the space: unknown algorithm");
    }
    if (!params.is_object()) {
        throw ValidationError("params of '" + algorithm + "' must be a JSON object");
    }
    AlgorithmConfig config;
    config.algorithm = algorithm;
    for (auto it = params.begin(); it != params.end(); ++it) {
        config.params[it.key()] = value_from_json(it.value());
    }
    if (!contains(config)) {
        throw ValidationError("config '" + config.config_id() + "' is not in the space");
    }
    return config;
}

bool ConfigSpace::contains(const AlgorithmConfig& config) const {
    const auto* grid = find(config.algorithm);
    if (grid == nullptr || grid->params.size() != config.params.size()) {
        return false;
    }
    for (const auto& p : grid->params) {
        auto it = config.params.find(p.name);
        if (it == config.params.end()) {
            return false;
        }
        if (std::none_of(p.values.begin(), p.values.end(), [&](const ParamValue& v) { return same_value(v, it->second); })) {
            return false;
        }
    }
    return std::none_of(constraints_.begin(), constraints_.end(),
                        [&](const Exclusion& ex) { return ex.matches(config); });
}

void ConfigSpace::validate(const AlgorithmConfig& config) const {
    if (!contains(config)) {
        throw ValidationError("config '" + config.config_id() + "' is not in the space");
    }
}

AlgorithmConfig ConfigSpace::parse_id(std::string_view config_id) const {
    const auto parts = text::split(config_id, '|');
    const auto* grid = find(parts.front());
    if (grid == nullptr) {
        throw ValidationError("config '" + std::string(config_id) + "' is not in the space: unknown algorithm");
    }
    AlgorithmConfig config;
    config.algorithm = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos) {
            throw ValidationError("malformed config id '" + std::string(config_id) + "'");
        }
        const auto name = parts[i].substr(0, eq);
        const auto rendered = parts[i].substr(eq + 1);
        auto p = std::find_if(grid->params.begin(), grid->params.end(), [&](const ParamGrid& g) { return g.name == name; });
        if (p == grid->params.end()) {
            throw ValidationError("config '" + std::string(config_id) + "' names unknown hyperparameter '" + name + "'");
        }
        auto v = std::find_if(p->values.begin(), p->values.end(),
                              [&](const ParamValue& value) { return render_value(value) == rendered; });
        if (v == p->values.end()) {
            throw ValidationError("config '" + std::string(config_id) + "' is not in the space");
        }
        config.params[name] = *v;
    }
    validate(config);
    return config;
}

std::vector<AlgorithmConfig> enumerate_space(const ConfigSpace& space) {
    std::vector<AlgorithmConfig> out;
    for (const auto& grid : space.algorithms()) {
        std::vector<std::size_t> odometer(grid.params.size(), 0);
        while (true) {
            AlgorithmConfig config;
            config.algorithm = grid.algorithm;
            for (std::size_t i = 0; i < grid.params.size(); ++i) {
                config.params[grid.params[i].name] = grid.params[i].values[odometer[i]];
            }
            if (std::none_of(space.constraints().begin(), space.constraints().end(),
                             [&](const Exclusion& ex) { return ex.matches(config); })) {
                out.push_back(std::move(config));
            }
            // advance, last param fastest
            std::size_t pos = grid.params.size();
            while (pos > 0) {
                --pos;
                if (++odometer[pos] < grid.params[pos].values.size()) {
                    break;
                }
                odometer[pos] = 0;
                if (pos == 0) {
                    pos = grid.params.size() + 1;  // wrapped
                    break;
                }
            }
            if (grid.params.empty() || pos > grid.params.size()) {
                break;
            }
        }
    }
    return out;
}

}  // namespace algorec::kb
