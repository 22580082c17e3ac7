#include "algorec/harness.hpp"

#include "algorec/errors.hpp"
#include "algorec/text.hpp"

#include <omp.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>

namespace algorec::harness {

void ExperimentPlan::validate() const {
    if (std::find(std::begin(rec::kStrategyNames), std::end(rec::kStrategyNames), strategy) ==
        std::end(rec::kStrategyNames)) {
        throw ValidationError("unknown strategy '" + strategy + "'");
    }
    if (n_trials == 0 || n_iterations == 0 || n_recs == 0) {
        throw ValidationError("trials, iterations and recommendations per iteration must be at least 1");
    }
    if (mode == Mode::replay && n_init == 0) {
        throw ValidationError("n_init must be at least 1");
    }
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ValidationError("threshold must be in (0,1], got " + text::format_double(threshold));
    }
}

nlohmann::json ExperimentPlan::to_json() const {
    return {{"strategy", strategy},
            {"params", params},
            {"n_trials", n_trials},
            {"n_iterations", n_iterations},
            {"n_init", n_init},
            {"n_recs", n_recs},
            {"seed", seed},
            {"mode", mode == Mode::replay ? "replay" : "leave-one-out"},
            {"threshold", threshold},
            {"record_timing", record_timing}};
}

double delta_ba(double ba_star, double ba) {
    if (!(ba_star > 0.0)) {
        throw DomainError("best balanced accuracy must be positive, got " + text::format_double(ba_star));
    }
    const double raw = (ba_star - ba) / ba_star;
    if (!(raw > 0.0)) {
        return 0.0;
    }
    // Round to 15 significant digits so decimal inputs give their decimal
    // result, e.g. (0.9 - 0.81) / 0.9 == 0.1 rather than 0.09999999999999996.
    char buf[32];
    auto end = std::to_chars(buf, buf + sizeof buf, raw, std::chars_format::scientific, 14).ptr;
    double out = raw;
    std::from_chars(buf, end, out);
    return out;
}

ReplayIndex::ReplayIndex(const kb::KnowledgeBase& kb)
    : catalog_(std::make_shared<const rec::Catalog>(kb.space())), metafeatures_(kb.metafeatures) {
    if (kb.empty()) {
        throw EmptyInputError("knowledge base has no results");
    }
    const std::size_t n = catalog_->size();
    ratings_.reserve(kb.size());
    for (const auto& r : kb.results()) {
        const auto a = catalog_->index_of(r.config);
        auto& data = by_dataset_[r.dataset_id];
        if (data.slot.empty()) {
            data.slot.assign(n, -1);
            data.best = r.holdout_score;
            data.worst = r.holdout_score;
        }
        data.slot[a] = static_cast<std::int32_t>(data.entries.size());
        data.entries.push_back({r.train_score, r.holdout_score});
        data.best = std::max(data.best, r.holdout_score);
        data.worst = std::min(data.worst, r.holdout_score);
        ratings_.push_back({r.dataset_id, a, r.train_score});
    }
    for (const auto& [id, data] : by_dataset_) {
        if (!(data.best > 0.0)) {
            throw DomainError("dataset '" + id + "' has best holdout score 0");
        }
        datasets_.push_back(id);
    }
}

const ReplayIndex::Entry* ReplayIndex::lookup(const std::string& dataset_id, rec::ConfigIndex a) const {
    auto it = by_dataset_.find(dataset_id);
    if (it == by_dataset_.end() || a >= it->second.slot.size() || it->second.slot[a] < 0) {
        return nullptr;
    }
    return &it->second.entries[static_cast<std::size_t>(it->second.slot[a])];
}

double ReplayIndex::best(const std::string& dataset_id) const {
    auto it = by_dataset_.find(dataset_id);
    if (it == by_dataset_.end()) {
        throw NotFoundError("dataset '" + dataset_id + "' is not in the knowledge base");
    }
    return it->second.best;
}

double ReplayIndex::worst(const std::string& dataset_id) const {
    auto it = by_dataset_.find(dataset_id);
    if (it == by_dataset_.end()) {
        throw NotFoundError("dataset '" + dataset_id + "' is not in the knowledge base");
    }
    return it->second.worst;
}

namespace {

using Clock = std::chrono::steady_clock;

std::unique_ptr<rec::Recommender> build(const ReplayIndex& index, const ExperimentPlan& plan, std::uint64_t seed) {
    auto r = rec::make_recommender(plan.strategy, index.catalog_ptr(), plan.params, seed);
    for (const auto& [id, mf] : index.metafeatures()) {
        r->set_metafeatures(mf);
    }
    return r;
}

// The recommend / evaluate / update loop shared by both protocols.
void play(const ReplayIndex& index, const ExperimentPlan& plan, rec::Recommender& model, TrialLog& log,
          const std::function<const std::string&()>& next_dataset, Rng& rng, bool track_threshold) {
    rec::RepeatFilter filter(index.catalog().size());
    std::map<std::string, double> best;
    std::size_t evaluations = 0;
    for (std::size_t i = 1; i <= plan.n_iterations; ++i) {
        const auto start = Clock::now();
        const std::string& d = next_dataset();
        std::vector<rec::Recommendation> recs;
        try {
            recs = model.recommend(d, plan.n_recs, filter, rng);
        } catch (const ExhaustedError&) {
            log.truncated = true;
            break;
        }
        IterationRecord it;
        it.iteration = i;
        it.dataset_id = d;
        const double star = index.best(d);
        auto [cur, fresh] = best.emplace(d, -1.0);
        std::vector<rec::Rating> feedback;
        double min_gap = std::numeric_limits<double>::infinity();
        double sum_gap = 0.0;
        for (const auto& r : recs) {
            RecommendationRecord rr;
            rr.config = r.config;
            rr.predicted = r.predicted;
            if (const auto* e = index.lookup(d, r.config)) {
                rr.train_score = e->train;
                rr.holdout_score = e->holdout;
                if (!model.has_result(d, r.config)) {
                    feedback.push_back({d, r.config, e->train});
                }
            } else {
                rr.in_kb = false;
                rr.train_score = index.worst(d);
                rr.holdout_score = index.worst(d);
            }
            rr.delta_ba = delta_ba(star, rr.holdout_score);
            min_gap = std::min(min_gap, rr.delta_ba);
            sum_gap += rr.delta_ba;
            cur->second = std::max(cur->second, rr.holdout_score);
            ++evaluations;
            if (track_threshold && !log.evaluations_to_threshold && delta_ba(star, cur->second) <= plan.threshold) {
                log.evaluations_to_threshold = evaluations;
            }
            it.recommendations.push_back(rr);
        }
        it.delta_ba = min_gap;
        it.mean_delta_ba = sum_gap / static_cast<double>(recs.size());
        it.best_holdout = cur->second;
        it.cumulative_delta_ba = delta_ba(star, cur->second);
        model.update(std::span<const rec::Rating>(feedback));
        if (plan.record_timing) {
            it.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        }
        log.iterations.push_back(std::move(it));
    }
}

}  // namespace

TrialLog run_trial(const ReplayIndex& index, const ExperimentPlan& plan, std::size_t trial_index) {
    plan.validate();
    const auto& rows = index.ratings();
    if (plan.n_init > rows.size()) {
        throw ValidationError("n_init " + std::to_string(plan.n_init) + " exceeds the " +
                              std::to_string(rows.size()) + " results in the knowledge base");
    }
    auto model = build(index, plan, derive_seed(plan.seed, "trial.model", trial_index));

    TrialLog log;
    log.strategy = plan.strategy;
    log.trial_index = trial_index;
    for (const auto& d : index.datasets()) {
        log.ba_star[d] = index.best(d);
    }

    auto init_rng = make_rng(plan.seed, "trial.init", trial_index);
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<rec::Rating> init;
    init.reserve(plan.n_init);
    for (std::size_t i = 0; i < plan.n_init; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
        std::swap(order[i], order[pick(init_rng)]);
        init.push_back(rows[order[i]]);
    }
    model->update(std::span<const rec::Rating>(init));

    auto data_rng = make_rng(plan.seed, "trial.datasets", trial_index);
    auto rec_rng = make_rng(plan.seed, "trial.recommend", trial_index);
    const auto& datasets = index.datasets();
    std::uniform_int_distribution<std::size_t> pick_dataset(0, datasets.size() - 1);
    play(index, plan, *model, log, [&]() -> const std::string& { return datasets[pick_dataset(data_rng)]; }, rec_rng,
         false);
    return log;
}

TrialLog run_leave_one_out(const ReplayIndex& index, const ExperimentPlan& plan, const std::string& held_out,
                           bool pretrain) {
    plan.validate();
    if (!index.has_dataset(held_out)) {
        throw NotFoundError("dataset '" + held_out + "' is not in the knowledge base");
    }
    auto model = build(index, plan, derive_seed(plan.seed, "loo.model." + held_out));
    if (pretrain) {
        std::vector<rec::Rating> train;
        for (const auto& r : index.ratings()) {
            if (r.dataset_id != held_out) {
                train.push_back(r);
            }
        }
        model->update(std::span<const rec::Rating>(train));
    }
    TrialLog log;
    log.strategy = plan.strategy;
    log.ba_star[held_out] = index.best(held_out);
    auto rng = make_rng(plan.seed, "loo.recommend." + held_out);
    play(index, plan, *model, log, [&]() -> const std::string& { return held_out; }, rng, true);
    return log;
}

std::vector<double> success_rate(const std::vector<TrialLog>& logs, double threshold) {
    if (!(threshold > 0.0)) {
        throw ValidationError("threshold must be positive");
    }
    std::size_t length = 0;
    double total = 0.0;
    for (const auto& log : logs) {
        length = std::max(length, log.iterations.size());
        total += static_cast<double>(log.ba_star.size());
    }
    std::vector<double> hits(length, 0.0);
    for (const auto& log : logs) {
        std::map<std::string, double> best;
        std::size_t count = 0;
        for (std::size_t i = 0; i < length; ++i) {
            if (i < log.iterations.size()) {
                const auto& it = log.iterations[i];
                auto star = log.ba_star.find(it.dataset_id);
                if (star == log.ba_star.end()) {
                    throw ValidationError("log iteration refers to dataset '" + it.dataset_id +
                                          "' outside its universe");
                }
                auto [cur, fresh] = best.emplace(it.dataset_id, -1.0);
                const bool was = !fresh && delta_ba(star->second, cur->second) <= threshold;
                for (const auto& r : it.recommendations) {
                    cur->second = std::max(cur->second, r.holdout_score);
                }
                if (!was && delta_ba(star->second, cur->second) <= threshold) {
                    ++count;
                }
            }
            hits[i] += static_cast<double>(count);
        }
    }
    for (auto& h : hits) {
        h = total > 0.0 ? h / total : 0.0;
    }
    return hits;
}

namespace {

double median_of_sorted(const std::vector<double>& v) {
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double quantile_sorted(const std::vector<double>& v, double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

Interval bootstrap_median(std::vector<double> values, std::size_t resamples, Rng& rng) {
    if (values.empty()) {
        throw EmptyInputError("median of an empty sample");
    }
    std::sort(values.begin(), values.end());
    Interval out;
    out.median = median_of_sorted(values);
    out.lo = out.hi = out.median;
    if (values.size() == 1 || resamples == 0) {
        return out;
    }
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> meds(resamples);
    std::vector<double> sample(values.size());
    for (auto& m : meds) {
        for (auto& s : sample) {
            s = values[pick(rng)];
        }
        std::sort(sample.begin(), sample.end());
        m = median_of_sorted(sample);
    }
    std::sort(meds.begin(), meds.end());
    out.lo = quantile_sorted(meds, 0.025);
    out.hi = quantile_sorted(meds, 0.975);
    return out;
}

Report aggregate(const ReplayIndex& index, const ExperimentPlan& plan, std::vector<TrialLog> trials) {
    Report report;
    report.plan = plan;
    std::size_t length = 0;
    for (const auto& t : trials) {
        length = std::max(length, t.iterations.size());
    }
    const auto& catalog = index.catalog();
    for (std::size_t a = 0; a < catalog.algorithm_count(); ++a) {
        report.algorithms.push_back(catalog.algorithm_name(a));
    }
    report.frequency.assign(length, std::vector<std::size_t>(catalog.algorithm_count(), 0));
    for (std::size_t i = 0; i < length; ++i) {
        std::vector<double> gaps;
        for (const auto& t : trials) {
            if (i < t.iterations.size()) {
                gaps.push_back(t.iterations[i].delta_ba);
                for (const auto& r : t.iterations[i].recommendations) {
                    ++report.frequency[i][catalog.algorithm_of(r.config)];
                }
            }
        }
        auto rng = make_rng(plan.seed, "bootstrap", i);
        report.delta_ba.push_back(bootstrap_median(std::move(gaps), 1000, rng));
    }
    report.success_01 = success_rate(trials, 0.01);
    report.success_05 = success_rate(trials, 0.05);
    report.trials = std::move(trials);
    return report;
}

Report run_experiment(const ReplayIndex& index, const ExperimentPlan& plan, std::size_t jobs) {
    plan.validate();
    std::vector<TrialLog> trials(plan.n_trials);
    std::exception_ptr failure;
    const int threads = jobs > 0 ? static_cast<int>(jobs) : omp_get_max_threads();
    const auto n = static_cast<std::ptrdiff_t>(plan.n_trials);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t t = 0; t < n; ++t) {
        try {
            trials[t] = run_trial(index, plan, static_cast<std::size_t>(t));
        } catch (...) {
#pragma omp critical(algorec_trial_failure)
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return aggregate(index, plan, std::move(trials));
}

Report run_experiment_serial(const ReplayIndex& index, const ExperimentPlan& plan) {
    plan.validate();
    std::vector<TrialLog> trials;
    trials.reserve(plan.n_trials);
    for (std::size_t t = 0; t < plan.n_trials; ++t) {
        trials.push_back(run_trial(index, plan, t));
    }
    return aggregate(index, plan, std::move(trials));
}

std::vector<TrialLog> run_leave_one_out_all(const ReplayIndex& index, const ExperimentPlan& plan, bool pretrain,
                                            std::size_t jobs, std::vector<std::string> datasets) {
    if (datasets.empty()) {
        datasets = index.datasets();
    }
    for (const auto& d : datasets) {
        if (!index.has_dataset(d)) {
            throw NotFoundError("dataset '" + d + "' is not in the knowledge base");
        }
    }
    std::vector<TrialLog> logs(datasets.size());
    std::exception_ptr failure;
    const int threads = jobs > 0 ? static_cast<int>(jobs) : omp_get_max_threads();
    const auto n = static_cast<std::ptrdiff_t>(datasets.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        try {
            logs[i] = run_leave_one_out(index, plan, datasets[i], pretrain);
            logs[i].trial_index = static_cast<std::size_t>(i);
        } catch (...) {
#pragma omp critical(algorec_loo_failure)
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    return logs;
}

nlohmann::json iteration_json(const rec::Catalog& catalog, const IterationRecord& record) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : record.recommendations) {
        const auto& config = catalog.config(r.config);
        recs.push_back({{"config_id", catalog.id(r.config)},
                        {"algorithm", config.algorithm},
                        {"params", config.params_json()},
                        {"predicted", r.predicted},
                        {"train_score", r.train_score},
                        {"holdout_score", r.holdout_score},
                        {"delta_ba", r.delta_ba},
                        {"in_kb", r.in_kb}});
    }
    nlohmann::json j = {{"iteration", record.iteration},
                        {"dataset", record.dataset_id},
                        {"delta_ba", record.delta_ba},
                        {"delta_ba_mean", record.mean_delta_ba},
                        {"delta_ba_cumulative", record.cumulative_delta_ba},
                        {"best_holdout", record.best_holdout},
                        {"recommendations", std::move(recs)}};
    if (record.wall_ms) {
        j["wall_ms"] = *record.wall_ms;
    }
    return j;
}

void write_trial_jsonl(std::ostream& out, const rec::Catalog& catalog, const TrialLog& log) {
    for (const auto& it : log.iterations) {
        out << iteration_json(catalog, it).dump() << '\n';
    }
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw NotFoundError("cannot write '" + path.string() + "'");
    }
    return out;
}

std::string file_safe(const std::string& id) {
    std::string out = id;
    for (auto& c : out) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        if (!ok) {
            c = '_';
        }
    }
    return out;
}

}  // namespace

void write_report(const std::filesystem::path& dir, const ReplayIndex& index, const Report& report) {
    using text::format_double;
    std::filesystem::create_directories(dir / "trials");
    {
        auto out = open_out(dir / "delta_ba.tsv");
        out << "iteration\tmedian\tci_lo\tci_hi\n";
        for (std::size_t i = 0; i < report.delta_ba.size(); ++i) {
            const auto& c = report.delta_ba[i];
            out << i + 1 << '\t' << format_double(c.median) << '\t' << format_double(c.lo) << '\t'
                << format_double(c.hi) << '\n';
        }
    }
    {
        auto out = open_out(dir / "success.tsv");
        out << "iteration\trate@0.01\trate@0.05\n";
        for (std::size_t i = 0; i < report.success_01.size(); ++i) {
            out << i + 1 << '\t' << format_double(report.success_01[i]) << '\t'
                << format_double(report.success_05[i]) << '\n';
        }
    }
    {
        auto out = open_out(dir / "freq.tsv");
        out << "iteration\talgorithm\tcount\n";
        for (std::size_t i = 0; i < report.frequency.size(); ++i) {
            for (std::size_t a = 0; a < report.algorithms.size(); ++a) {
                out << i + 1 << '\t' << report.algorithms[a] << '\t' << report.frequency[i][a] << '\n';
            }
        }
    }
    {
        auto out = open_out(dir / "trials.tsv");
        out << "trial\titerations\ttruncated\tfinal_delta_ba\n";
        for (const auto& t : report.trials) {
            out << t.trial_index << '\t' << t.iterations.size() << '\t' << (t.truncated ? "true" : "false") << '\t'
                << format_double(t.final_delta_ba()) << '\n';
        }
    }
    for (const auto& t : report.trials) {
        auto out = open_out(dir / "trials" / ("trial_" + std::to_string(t.trial_index) + ".jsonl"));
        write_trial_jsonl(out, index.catalog(), t);
    }
}

void write_loo(const std::filesystem::path& dir, const ReplayIndex& index, const std::vector<TrialLog>& logs) {
    using text::format_double;
    std::filesystem::create_directories(dir / "trials");
    auto out = open_out(dir / "loo.tsv");
    out << "dataset_id\tevaluations_to_threshold\titerations\ttruncated\tfinal_delta_ba\tfinal_cumulative_delta_ba\n";
    for (const auto& log : logs) {
        const std::string id = log.ba_star.empty() ? std::string() : log.ba_star.begin()->first;
        out << id << '\t'
            << (log.evaluations_to_threshold ? std::to_string(*log.evaluations_to_threshold) : std::string("NA"))
            << '\t' << log.iterations.size() << '\t' << (log.truncated ? "true" : "false") << '\t'
            << format_double(log.final_delta_ba()) << '\t'
            << format_double(log.iterations.empty() ? 1.0 : log.iterations.back().cumulative_delta_ba) << '\n';
        auto trial = open_out(dir / "trials" / (file_safe(id) + ".jsonl"));
        write_trial_jsonl(trial, index.catalog(), log);
    }
}

}  // namespace algorec::harness
