#pragma once

#include "algorec/kb.hpp"
#include "algorec/recommenders/recommender.hpp"

#include "json.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace algorec::harness {

enum class Mode { replay, leave_one_out };

struct ExperimentPlan {
    std::string strategy = "svd";
    rec::StrategyParams params;
    std::size_t n_trials = 300;
    std::size_t n_iterations = 1000;
    std::size_t n_init = 100;
    std::size_t n_recs = 10;
    std::uint64_t seed = 0;
    Mode mode = Mode::replay;
    /// Success threshold used for evaluations-to-threshold in leave-one-out runs.
    double threshold = 0.05;
    /// Adds per-iteration wall time to the logs (and so makes them nondeterministic).
    bool record_timing = false;

    /// Throws ValidationError when a count is zero or the threshold is outside (0,1].
    void validate() const;
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Relative gap (ba_star - ba) / ba_star, floored at 0. Throws DomainError
/// when ba_star <= 0.
double delta_ba(double ba_star, double ba);

/// Read-only lookup over a knowledge base for replaying recommendations.
class ReplayIndex {
public:
    struct Entry {
        double train = 0.0;
        double holdout = 0.0;
    };

    /// Throws EmptyInputError for an empty KB and DomainError when a dataset's
    /// best holdout score is 0.
    explicit ReplayIndex(const kb::KnowledgeBase& kb);

    [[nodiscard]] const rec::Catalog& catalog() const { return *catalog_; }
    [[nodiscard]] std::shared_ptr<const rec::Catalog> catalog_ptr() const { return catalog_; }

    /// Dataset ids with results, sorted.
    [[nodiscard]] const std::vector<std::string>& datasets() const { return datasets_; }
    [[nodiscard]] bool has_dataset(const std::string& dataset_id) const { return by_dataset_.count(dataset_id) > 0; }

    [[nodiscard]] const Entry* lookup(const std::string& dataset_id, rec::ConfigIndex a) const;
    /// Best and worst holdout score of the dataset.
    [[nodiscard]] double best(const std::string& dataset_id) const;
    [[nodiscard]] double worst(const std::string& dataset_id) const;

    /// Every KB row as a training rating, in KB order.
    [[nodiscard]] const std::vector<rec::Rating>& ratings() const { return ratings_; }
    [[nodiscard]] const std::map<std::string, metafeatures::MetafeatureVector>& metafeatures() const {
        return metafeatures_;
    }

private:
    struct DatasetData {
        std::vector<std::int32_t> slot;  // by ConfigIndex, -1 when absent
        std::vector<Entry> entries;
        double best = 0.0;
        double worst = 1.0;
    };

    std::shared_ptr<const rec::Catalog> catalog_;
    std::vector<std::string> datasets_;
    std::map<std::string, DatasetData> by_dataset_;
    std::vector<rec::Rating> ratings_;
    std::map<std::string, metafeatures::MetafeatureVector> metafeatures_;
};

struct RecommendationRecord {
    rec::ConfigIndex config = 0;
    double predicted = 0.0;
    double train_score = 0.0;
    double holdout_score = 0.0;
    double delta_ba = 0.0;
    /// False when the config has no KB row; it then scores the dataset's worst holdout.
    bool in_kb = true;
};

struct IterationRecord {
    std::size_t iteration = 0;  // from 1
    std::string dataset_id;
    std::vector<RecommendationRecord> recommendations;
    /// Best recommendation of the batch.
    double delta_ba = 0.0;
    double mean_delta_ba = 0.0;
    /// Gap of the best holdout score recommended so far for this dataset.
    double cumulative_delta_ba = 0.0;
    double best_holdout = 0.0;
    std::optional<double> wall_ms;
};

struct TrialLog {
    std::string strategy;
    std::size_t trial_index = 0;
    std::vector<IterationRecord> iterations;
    /// Set when the configuration space ran out before the last iteration.
    bool truncated = false;
    /// Datasets the trial could draw from, with their best holdout score.
    std::map<std::string, double> ba_star;
    /// Recommendations evaluated until the cumulative gap reached the plan's
    /// threshold (leave-one-out runs only).
    std::optional<std::size_t> evaluations_to_threshold;

    [[nodiscard]] double final_delta_ba() const { return iterations.empty() ? 1.0 : iterations.back().delta_ba; }
};

/// One replay trial: trains on n_init random KB rows, then for each iteration
/// draws a dataset uniformly (with replacement), asks for n_recs configs and
/// feeds their train scores back. RNG streams derive from (seed, trial_index).
TrialLog run_trial(const ReplayIndex& index, const ExperimentPlan& plan, std::size_t trial_index);

/// Trains on every KB row of the other datasets (nothing at all when
/// `pretrain` is false) and then recommends for `held_out` only.
/// Throws NotFoundError when the dataset is not in the KB.
TrialLog run_leave_one_out(const ReplayIndex& index, const ExperimentPlan& plan, const std::string& held_out,
                           bool pretrain = true);

/// Fraction of the datasets of all logs (pooled) whose best recommended holdout
/// score is within `threshold` of the optimum by each iteration. A truncated
/// log keeps its final state for later iterations.
std::vector<double> success_rate(const std::vector<TrialLog>& logs, double threshold);

struct Interval {
    double median = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Median with a percentile-bootstrap 95% interval. The result does not
/// depend on the order of `values`.
Interval bootstrap_median(std::vector<double> values, std::size_t resamples, Rng& rng);

struct Report {
    ExperimentPlan plan;
    std::vector<TrialLog> trials;
    /// Per iteration, over the trials that reached it.
    std::vector<Interval> delta_ba;
    std::vector<double> success_01;
    std::vector<double> success_05;
    std::vector<std::string> algorithms;
    /// frequency[iteration - 1][algorithm]: recommendations across trials.
    std::vector<std::vector<std::size_t>> frequency;
};

Report aggregate(const ReplayIndex& index, const ExperimentPlan& plan, std::vector<TrialLog> trials);

/// Runs the plan's trials on up to `jobs` threads (0 = OpenMP default).
Report run_experiment(const ReplayIndex& index, const ExperimentPlan& plan, std::size_t jobs = 0);
/// Single-threaded reference for run_experiment.
Report run_experiment_serial(const ReplayIndex& index, const ExperimentPlan& plan);

/// Leave-one-out over every dataset of the KB (or `datasets` when given).
std::vector<TrialLog> run_leave_one_out_all(const ReplayIndex& index, const ExperimentPlan& plan, bool pretrain,
                                            std::size_t jobs = 0, std::vector<std::string> datasets = {});

nlohmann::json iteration_json(const rec::Catalog& catalog, const IterationRecord& record);
void write_trial_jsonl(std::ostream& out, const rec::Catalog& catalog, const TrialLog& log);

/// Writes delta_ba.tsv, success.tsv, freq.tsv, trials.tsv and trials/trial_K.jsonl.
void write_report(const std::filesystem::path& dir, const ReplayIndex& index, const Report& report);
/// Writes loo.tsv and trials/<dataset>.jsonl.
void write_loo(const std::filesystem::path& dir, const ReplayIndex& index, const std::vector<TrialLog>& logs);

}  // namespace algorec::harness
