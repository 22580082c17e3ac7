#pragma once

#include "algorec/metafeatures.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace algorec::kb {

/// The twelve classifier families a configuration space may draw from.
inline constexpr std::array<std::string_view, 12> kAlgorithmRoster = {
    "AdaBoostClassifier",       "BernoulliNB",          "DecisionTreeClassifier",
    "ExtraTreesClassifier",     "GradientBoostingClassifier", "KNeighborsClassifier",
    "LogisticRegression",       "MultinomialNB",        "PassiveAggressiveClassifier",
    "RandomForestClassifier",   "SGDClassifier",        "SVC",
};

bool in_roster(std::string_view algorithm);

/// A hyperparameter value: null, boolean, number or string.
using ParamValue = std::variant<std::monostate, bool, double, std::string>;

/// Canonical text of a value: shortest decimal for numbers, true/false, none for null.
std::string render_value(const ParamValue& value);
nlohmann::json value_to_json(const ParamValue& value);
ParamValue value_from_json(const nlohmann::json& j);

struct AlgorithmConfig {
    std::string algorithm;
    std::map<std::string, ParamValue> params;

    /// `algorithm|name=value|name=value` with names in lexicographic order.
    [[nodiscard]] std::string config_id() const;
    [[nodiscard]] nlohmann::json params_json() const;

    friend bool operator==(const AlgorithmConfig&, const AlgorithmConfig&) = default;
};

struct ParamGrid {
    std::string name;
    std::vector<ParamValue> values;
};

struct AlgorithmGrid {
    std::string algorithm;
    std::vector<ParamGrid> params;  // sorted by name
};

/// Excludes every config of `algorithm` whose params match all of `when`.
struct Exclusion {
    std::string algorithm;
    std::map<std::string, ParamValue> when;

    [[nodiscard]] bool matches(const AlgorithmConfig& config) const;
};

class ConfigSpace {
public:
    ConfigSpace() = default;
    explicit ConfigSpace(std::vector<AlgorithmGrid> algorithms, std::vector<Exclusion> constraints = {});

    /// Object keyed by algorithm name, each a list of {"param", "values"};
    /// the reserved key "constraints" holds a list of {"algorithm", "when"}.
    static ConfigSpace from_json(const nlohmann::json& j);
    [[nodiscard]] nlohmann::json to_json() const;
    static ConfigSpace load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    /// Every grid of the twelve-algorithm benchmark, with no exclusions.
    static ConfigSpace pmlb();

    [[nodiscard]] const std::vector<AlgorithmGrid>& algorithms() const { return algorithms_; }
    [[nodiscard]] const std::vector<Exclusion>& constraints() const { return constraints_; }
    [[nodiscard]] bool empty() const { return algorithms_.empty(); }

    /// Throws ValidationError naming the config_id when the config is not in the space.
    void validate(const AlgorithmConfig& config) const;
    [[nodiscard]] bool contains(const AlgorithmConfig& config) const;

    /// Builds a typed config from an algorithm name and a JSON params object,
    /// matching each value against the grid; throws ValidationError.
    [[nodiscard]] AlgorithmConfig config_from_json(const std::string& algorithm, const nlohmann::json& params) const;

    /// Inverse of AlgorithmConfig::config_id for configs of this space.
    [[nodiscard]] AlgorithmConfig parse_id(std::string_view config_id) const;

    friend bool operator==(const ConfigSpace&, const ConfigSpace&);

private:
    [[nodiscard]] const AlgorithmGrid* find(std::string_view algorithm) const;

    std::vector<AlgorithmGrid> algorithms_;  // sorted by name
    std::vector<Exclusion> constraints_;
};

bool operator==(const ParamGrid& a, const ParamGrid& b);
bool operator==(const AlgorithmGrid& a, const AlgorithmGrid& b);
bool operator==(const Exclusion& a, const Exclusion& b);

/// All constraint-satisfying configs, ordered by algorithm name, then as an
/// odometer over the name-sorted params (last param fastest, values in grid order).
std::vector<AlgorithmConfig> enumerate_space(const ConfigSpace& space);

struct ExperimentResult {
    std::string dataset_id;
    AlgorithmConfig config;
    double train_score = 0.0;
    double holdout_score = 0.0;

    friend bool operator==(const ExperimentResult&, const ExperimentResult&) = default;
};

class KnowledgeBase {
public:
    KnowledgeBase() = default;
    explicit KnowledgeBase(ConfigSpace space) : space_(std::move(space)) {}

    /// Validates and appends; throws ValidationError or DuplicateError.
    void add(ExperimentResult result);

    [[nodiscard]] const std::vector<ExperimentResult>& results() const { return results_; }
    [[nodiscard]] const ConfigSpace& space() const { return space_; }
    [[nodiscard]] std::size_t size() const { return results_.size(); }
    [[nodiscard]] bool empty() const { return results_.empty(); }

    [[nodiscard]] const ExperimentResult* find(const std::string& dataset_id, const std::string& config_id) const;

    /// Dataset ids with at least one result, sorted.
    [[nodiscard]] std::vector<std::string> datasets() const;

    std::map<std::string, metafeatures::MetafeatureVector> metafeatures;
    std::vector<std::string> warnings;

    friend bool operator==(const KnowledgeBase& a, const KnowledgeBase& b) {
        return a.results_ == b.results_ && a.space_ == b.space_ && a.metafeatures == b.metafeatures;
    }

private:
    ConfigSpace space_;
    std::vector<ExperimentResult> results_;
    std::unordered_map<std::string, std::size_t> index_;  // dataset_id + '\n' + config_id
};

/// Reads the KB TSV (`dataset_id algorithm params_json train_score [holdout_score]`).
/// A missing holdout column copies train scores and records a warning.
KnowledgeBase load_kb(const std::filesystem::path& path, const ConfigSpace& space);
KnowledgeBase parse_kb(std::istream& in, const ConfigSpace& space);
void save_kb(std::ostream& out, const KnowledgeBase& kb);
void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb);

struct SynthesisOptions {
    std::size_t n_datasets = 20;
    std::size_t rank = 2;
    double noise_sd = 0.01;
    std::uint64_t seed = 0;
    /// Location of the latent scores.
    double mean_score = 0.7;
    /// Standard deviation of each latent factor entry.
    double factor_sd = 0.25;
};

struct SyntheticKb {
    KnowledgeBase kb;
    /// Noiseless latent score (clipped) per dataset, indexed like `configs`.
    std::map<std::string, std::vector<double>> latent;
    std::vector<AlgorithmConfig> configs;
    /// Argmax config_id of the noiseless latent scores (ties to the smaller id).
    std::map<std::string, std::string> planted_best;
};

/// Dense synthetic KB: score = clip(mean + u_d . v_a + noise, 0, 1) for every
/// (dataset, config) pair, with independent noise on train and holdout.
/// Metafeatures are linear images of the dataset factors so that similar
/// datasets have nearby vectors.
SyntheticKb synthesize_kb(const ConfigSpace& space, const SynthesisOptions& options);

}  // namespace algorec::kb
