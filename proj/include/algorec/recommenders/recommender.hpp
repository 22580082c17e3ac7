#pragma once

#include "algorec/kb.hpp"
#include "algorec/metafeatures.hpp"
#include "algorec/recommenders/catalog.hpp"
#include "algorec/recommenders/ratings.hpp"
#include "algorec/rng.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace algorec::rec {

struct Recommendation {
    ConfigIndex config = 0;
    double predicted = 0.0;

    friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

/// Flat `strategy.key=value` hyperparameters, e.g. {"svd.n_factors", "20"}.
using StrategyParams = std::map<std::string, std::string>;

/// Shared recommend/update contract. Implementations learn from every result
/// they are given and rank configurations that are not yet in the filter.
class Recommender {
public:
    explicit Recommender(std::shared_ptr<const Catalog> catalog)
        : catalog_(std::move(catalog)), observed_(catalog_->size()) {}
    virtual ~Recommender() = default;
    Recommender(const Recommender&) = delete;
    Recommender& operator=(const Recommender&) = delete;

    [[nodiscard]] virtual std::string_view name() const = 0;

    /// Feeds new training results. Scores must lie in [0,1], configs must
    /// belong to the catalog and each (dataset, config) pair may be given only
    /// once (DuplicateError); an empty batch leaves the state unchanged.
    void update(std::span<const kb::ExperimentResult> results);
    void update(std::span<const Rating> ratings);

    /// Up to `n` unfiltered configs for the dataset, best first; the returned
    /// configs are added to `filter`. Throws ExhaustedError when nothing is
    /// left to recommend and ValidationError when n == 0.
    std::vector<Recommendation> recommend(const std::string& dataset_id, std::size_t n, RepeatFilter& filter, Rng& rng);

    /// Dataset characteristics; only metafeature-driven strategies use them.
    virtual void set_metafeatures(const metafeatures::MetafeatureVector& vector) { (void)vector; }

    /// Toggles the OpenMP path of the candidate-scoring kernel.
    void set_parallel(bool parallel) { parallel_ = parallel; }
    [[nodiscard]] bool parallel() const { return parallel_; }

    [[nodiscard]] bool has_result(const std::string& dataset_id, ConfigIndex a) const {
        return observed_.contains(dataset_id, a);
    }
    [[nodiscard]] std::size_t result_count() const { return observed_.total(); }

    [[nodiscard]] const Catalog& catalog() const { return *catalog_; }
    [[nodiscard]] std::shared_ptr<const Catalog> catalog_ptr() const { return catalog_; }

protected:
    virtual void do_update(std::span<const Rating> ratings) = 0;
    virtual std::vector<Recommendation> do_recommend(const std::string& dataset_id, std::size_t n,
                                                     const RepeatFilter& filter, Rng& rng) = 0;

    std::shared_ptr<const Catalog> catalog_;
    bool parallel_ = true;

private:
    RepeatFilter observed_;
};

/// Base for strategies that predict a score for every candidate and return
/// the best ones. Ties go to the smaller config_id.
class ScoringRecommender : public Recommender {
public:
    using Recommender::Recommender;

    /// Predicted scores for `candidates` on the dataset, before clipping.
    [[nodiscard]] virtual std::vector<double> predict_many(const std::string& dataset_id,
                                                           std::span<const ConfigIndex> candidates) const = 0;

    [[nodiscard]] double predict(const std::string& dataset_id, ConfigIndex config) const {
        const ConfigIndex one[1] = {config};
        return predict_many(dataset_id, one).front();
    }

protected:
    std::vector<Recommendation> do_recommend(const std::string& dataset_id, std::size_t n, const RepeatFilter& filter,
                                             Rng& rng) override;
};

/// Strategy names accepted by make_recommender.
inline constexpr std::string_view kStrategyNames[] = {"knn-ml",   "knn-data", "cocluster", "knn-meta",
                                                      "svd",      "slopeone", "random",    "average"};

/// Throws ValidationError on an unknown name or an unknown/ill-typed key.
std::unique_ptr<Recommender> make_recommender(std::string_view strategy, std::shared_ptr<const Catalog> catalog,
                                              const StrategyParams& params, std::uint64_t seed);

/// Orders (score, config) pairs best first: higher score, then smaller index.
void rank_candidates(std::vector<Recommendation>& items, std::size_t keep);

}  // namespace algorec::rec
