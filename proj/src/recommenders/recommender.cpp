#include "algorec/recommenders/recommender.hpp"

#include "algorec/errors.hpp"
#include "algorec/recommenders/strategies.hpp"
#include "algorec/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace algorec::rec {

void Recommender::update(std::span<const kb::ExperimentResult> results) {
    std::vector<Rating> ratings;
    ratings.reserve(results.size());
    for (const auto& r : results) {
        ratings.push_back({r.dataset_id, catalog_->index_of(r.config), r.train_score});
    }
    update(std::span<const Rating>(ratings));
}

void Recommender::update(std::span<const Rating> ratings) {
    if (ratings.empty()) {
        return;
    }
    std::set<std::pair<std::string_view, ConfigIndex>> batch;
    for (const auto& r : ratings) {
        if (r.dataset_id.empty()) {
            throw ValidationError("empty dataset_id");
        }
        if (r.config >= catalog_->size()) {
            throw ValidationError("config index " + std::to_string(r.config) + " out of range");
        }
        if (!(r.score >= 0.0 && r.score <= 1.0)) {
            throw ValidationError("score " + text::format_double(r.score) + " outside [0,1] for '" + r.dataset_id +
                                  "' / '" + catalog_->id(r.config) + "'");
        }
        if (observed_.contains(r.dataset_id, r.config) || !batch.emplace(r.dataset_id, r.config).second) {
            throw DuplicateError("result for dataset '" + r.dataset_id + "' and config '" + catalog_->id(r.config) +
                                 "' already recorded");
        }
    }
    do_update(ratings);
    for (const auto& r : ratings) {
        observed_.insert(r.dataset_id, r.config);
    }
}

std::vector<Recommendation> Recommender::recommend(const std::string& dataset_id, std::size_t n, RepeatFilter& filter,
                                                   Rng& rng) {
    if (n == 0) {
        throw ValidationError("number of recommendations must be at least 1");
    }
    if (filter.config_count() != catalog_->size()) {
        throw ValidationError("repeat filter does not match the configuration space");
    }
    if (filter.exhausted(dataset_id)) {
        throw ExhaustedError(dataset_id);
    }
    auto out = do_recommend(dataset_id, n, filter, rng);
    if (out.empty()) {
        throw ExhaustedError(dataset_id);
    }
    for (auto& r : out) {
        r.predicted = std::clamp(r.predicted, 0.0, 1.0);
        filter.insert(dataset_id, r.config);
    }
    return out;
}

std::vector<Recommendation> ScoringRecommender::do_recommend(const std::string& dataset_id, std::size_t n,
                                                             const RepeatFilter& filter, Rng& rng) {
    (void)rng;
    std::vector<ConfigIndex> candidates;
    candidates.reserve(catalog_->size());
    for (ConfigIndex a = 0; a < catalog_->size(); ++a) {
        if (!filter.contains(dataset_id, a)) {
            candidates.push_back(a);
        }
    }
    const auto scores = predict_many(dataset_id, candidates);
    std::vector<Recommendation> items(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        items[i] = {candidates[i], std::clamp(scores[i], 0.0, 1.0)};
    }
    rank_candidates(items, n);
    return items;
}

void rank_candidates(std::vector<Recommendation>& items, std::size_t keep) {
    auto better = [](const Recommendation& x, const Recommendation& y) {
        if (x.predicted != y.predicted) {
            return x.predicted > y.predicted;
        }
        return x.config < y.config;
    };
    keep = std::min(keep, items.size());
    std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(keep), items.end(), better);
    items.resize(keep);
}

namespace {

class ParamReader {
public:
    ParamReader(std::string_view strategy, const StrategyParams& params) : strategy_(strategy) {
        const std::string prefix = std::string(strategy) + ".";
        for (const auto& [key, value] : params) {
            if (key.rfind(prefix, 0) != 0) {
                throw ValidationError("parameter '" + key + "' does not belong to strategy '" + std::string(strategy) +
                                      "'");
            }
            values_.emplace(key.substr(prefix.size()), value);
        }
    }

    std::size_t count(const std::string& key, std::size_t fallback, std::size_t minimum = 1) {
        auto it = take(key);
        if (!it) {
            return fallback;
        }
        auto v = text::parse_double(*it);
        if (!v || *v < static_cast<double>(minimum) || *v != std::floor(*v) || *v > 1e9) {
            throw ValidationError(qualified(key) + " must be an integer >= " + std::to_string(minimum) + ", got '" +
                                  *it + "'");
        }
        return static_cast<std::size_t>(*v);
    }

    double real(const std::string& key, double fallback, bool positive) {
        auto it = take(key);
        if (!it) {
            return fallback;
        }
        auto v = text::parse_double(*it);
        if (!v || (positive ? !(*v > 0.0) : !(*v >= 0.0))) {
            throw ValidationError(qualified(key) + (positive ? " must be > 0" : " must be >= 0") + ", got '" + *it +
                                  "'");
        }
        return *v;
    }

    void finish() const {
        if (!values_.empty()) {
            throw ValidationError("unknown parameter '" + qualified(values_.begin()->first) + "'");
        }
    }

private:
    std::optional<std::string> take(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) {
            return std::nullopt;
        }
        auto v = it->second;
        values_.erase(it);
        return v;
    }

    [[nodiscard]] std::string qualified(const std::string& key) const { return std::string(strategy_) + "." + key; }

    std::string_view strategy_;
    std::map<std::string, std::string> values_;
};

}  // namespace

std::unique_ptr<Recommender> make_recommender(std::string_view strategy, std::shared_ptr<const Catalog> catalog,
                                              const StrategyParams& params, std::uint64_t seed) {
    if (!catalog || catalog->size() == 0) {
        throw EmptyInputError("configuration space is empty");
    }
    ParamReader reader(strategy, params);
    std::unique_ptr<Recommender> out;
    if (strategy == "knn-ml") {
        out = std::make_unique<KnnMlRecommender>(catalog, reader.count("k", 40));
    } else if (strategy == "knn-data") {
        out = std::make_unique<KnnDataRecommender>(catalog, reader.count("k", 40));
    } else if (strategy == "knn-meta") {
        out = std::make_unique<KnnMetaRecommender>(catalog, reader.count("k", 10));
    } else if (strategy == "cocluster") {
        CoclusterParams p;
        p.k_datasets = reader.count("k_datasets", p.k_datasets);
        p.k_configs = reader.count("k_configs", p.k_configs);
        p.iterations = reader.count("iterations", p.iterations, 0);
        p.restarts = reader.count("restarts", p.restarts);
        out = std::make_unique<CoclusterRecommender>(catalog, p, seed);
    } else if (strategy == "svd") {
        SvdHyper h;
        h.n_factors = reader.count("n_factors", h.n_factors, 0);
        h.learning_rate = reader.real("learning_rate", h.learning_rate, true);
        h.regularization = reader.real("regularization", h.regularization, false);
        h.init_sd = reader.real("init_sd", h.init_sd, false);
        h.epochs_per_result = reader.real("epochs_per_result", h.epochs_per_result, false);
        h.min_epochs = reader.count("min_epochs", h.min_epochs, 0);
        h.max_epochs = reader.count("max_epochs", h.max_epochs, 0);
        if (h.min_epochs > h.max_epochs) {
            throw ValidationError("svd.min_epochs exceeds svd.max_epochs");
        }
        out = std::make_unique<SvdRecommender>(catalog, h, seed);
    } else if (strategy == "slopeone") {
        out = std::make_unique<SlopeOneRecommender>(catalog);
    } else if (strategy == "random") {
        out = std::make_unique<RandomRecommender>(catalog);
    } else if (strategy == "average") {
        out = std::make_unique<AverageRecommender>(catalog);
    } else {
        throw ValidationError("unknown strategy '" + std::string(strategy) +
                              "' (expected knn-ml, knn-data, cocluster, knn-meta, svd, slopeone, random or average)");
    }
    reader.finish();
    return out;
}

}  // namespace algorec::rec
