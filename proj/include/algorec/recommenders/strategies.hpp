#pragma once

#include "algorec/recommenders/recommender.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace algorec::rec {

// ---------------------------------------------------------------------------
// Neighborhood estimates. Each returns nullopt for a cold start (nothing to
// average over); the recommenders then fall back to the global mean.

/// Similarity-weighted mean of r_bd over the k configs b != a rated on d that
/// are most similar to a. Falls back to the dataset mean when no rated config
/// shares a dataset with a. nullopt when d has no ratings.
std::optional<double> knn_ml_estimate(const RatingMatrix& ratings, ConfigIndex a, DatasetIndex d, std::size_t k);

/// Dataset-neighborhood counterpart: weighted mean of r_ae over the k datasets
/// e != d most similar to d that rated a; falls back to the config mean.
/// `dataset_similarity[e]` must hold sim(d, e). nullopt when a has no ratings.
std::optional<double> knn_data_estimate(const RatingMatrix& ratings, ConfigIndex a, DatasetIndex d, std::size_t k,
                                        std::span<const double> dataset_similarity);

/// sim(d, e) for every known dataset e (sim(d, d) included).
std::vector<double> dataset_similarities(const RatingMatrix& ratings, DatasetIndex d);

/// Mean over common datasets of r_a - r_b; nullopt when they share none.
std::optional<double> slopeone_deviation(const RatingMatrix& ratings, ConfigIndex a, ConfigIndex b);

/// mu_d plus the mean deviation of a from the configs b != a rated on d that
/// share a dataset with a; mu_d when there are none. nullopt when d is unrated.
std::optional<double> slopeone_estimate(const RatingMatrix& ratings, ConfigIndex a, DatasetIndex d);

class KnnMlRecommender final : public ScoringRecommender {
public:
    KnnMlRecommender(std::shared_ptr<const Catalog> catalog, std::size_t k = 40);

    [[nodiscard]] std::string_view name() const override { return "knn-ml"; }
    [[nodiscard]] std::vector<double> predict_many(const std::string& dataset_id,
                                                   std::span<const ConfigIndex> candidates) const override;
    [[nodiscard]] const RatingMatrix& ratings() const { return ratings_; }

protected:
    void do_update(std::span<const Rating> ratings) override;

private:
    RatingMatrix ratings_;
    std::size_t k_;
};

class KnnDataRecommender final : public ScoringRecommender {
public:
    KnnDataRecommender(std::shared_ptr<const Catalog> catalog, std::size_t k = 40);

    [[nodiscard]] std::string_view name() const override { return "knn-data"; }
    [[nodiscard]] std::vector<double> predict_many(const std::string& dataset_id,
                                                   std::span<const ConfigIndex> candidates) const override;
    [[nodiscard]] const RatingMatrix& ratings() const { return ratings_; }

protected:
    void do_update(std::span<const Rating> ratings) override;

private:
    RatingMatrix ratings_;
    std::size_t k_;
};

class SlopeOneRecommender final : public ScoringRecommender {
public:
    explicit SlopeOneRecommender(std::shared_ptr<const Catalog> catalog);

    [[nodiscard]] std::string_view name() const override { return "slopeone"; }
    [[nodiscard]] std::vector<double> predict_many(const std::string& dataset_id,
                                                   std::span<const ConfigIndex> candidates) const override;
    [[nodiscard]] const RatingMatrix& ratings() const { return ratings_; }

protected:
    void do_update(std::span<const Rating> ratings) override;

private:
    RatingMatrix ratings_;
};

// ---------------------------------------------------------------------------
// Co-clustering

/// Joint clustering of datasets and configs. Cluster ids are -1 for rows or
/// columns without ratings.
struct CoclusterModel {
    std::size_t k_datasets = 0;
    std::size_t k_configs = 0;
    std::vector<int> dataset_cluster;  // by DatasetIndex
    std::vector<int> config_cluster;   // by ConfigIndex
    std::vector<double> dataset_cluster_mean;
    std::vector<double> config_cluster_mean;
    std::vector<double> cocluster_mean;  // k_datasets x k_configs, row-major
    /// Squared reconstruction error after initialization and after each iteration.
    std::vector<double> objective_trace;
};

/// Alternating k-means style assignment minimizing the squared error of
///   r_ad ~ C_ad + (mu_a - C_a) + (mu_d - C_d)
/// over observed ratings. An iteration whose reassignment would raise the
/// error is rolled back, so the trace never increases. Empty clusters take
/// the worst-fitting member of another cluster. With `restarts` > 1 the fit
/// is repeated from fresh random assignments and the lowest error is kept.
CoclusterModel fit_coclusters(const RatingMatrix& ratings, std::size_t k_datasets, std::size_t k_configs,
                              std::size_t iterations, Rng& rng, std::size_t restarts = 1);

/// Squared reconstruction error of `model` over every observed rating.
double cocluster_objective(const RatingMatrix& ratings, const CoclusterModel& model);

/// Co-cluster estimate with the fallback ladder: mu_a for an unknown dataset,
/// mu_d for an unknown config, the global mean when both are unknown.
double predict_cocluster(const RatingMatrix& ratings, const CoclusterModel& model, std::optional<DatasetIndex> d,
                         ConfigIndex a);

struct CoclusterParams {
    std::size_t k_datasets = 3;
    std::size_t k_configs = 3;
    std::size_t iterations = 20;
    std::size_t restarts = 5;
};

class CoclusterRecommender final : public ScoringRecommender {
public:
    CoclusterRecommender(std::shared_ptr<const Catalog> catalog, CoclusterParams params, std::uint64_t seed);

    [[nodiscard]] std::string_view name() const override { return "cocluster"; }
    [[nodiscard]] std::vector<double> predict_many(const std::string& dataset_id,
                                                   std::span<const ConfigIndex> candidates) const override;
    [[nodiscard]] const RatingMatrix& ratings() const { return ratings_; }
    [[nodiscard]] const CoclusterModel& model() const { return model_; }

protected:
    void do_update(std::span<const Rating> ratings) override;

private:
    RatingMatrix ratings_;
    CoclusterParams params_;
    std::uint64_t seed_;
    CoclusterModel model_;
};

// ---------------------------------------------------------------------------
// Matrix factorization

struct SvdHyper {
    std::size_t n_factors = 20;
    double learning_rate = 0.005;
    double regularization = 0.02;
    double init_sd = 0.1;
    double epochs_per_result = 1.0;
    std::size_t min_epochs = 10;
    std::size_t max_epochs = 1000;
};

struct IndexedRating {
    DatasetIndex dataset = 0;
    ConfigIndex config = 0;
    double score = 0.0;
};

/// Biases and factors of the biased matrix factorization model
///   r_ad ~ mu + b_d + b_a + q_a . p_d
/// Datasets and configs without training data keep zero biases and factors.
struct SvdState {
    SvdHyper hyper;
    double mu = 0.0;
    std::vector<double> dataset_bias;
    std::vector<double> config_bias;
    std::vector<double> dataset_factors;  // n_datasets x n_factors
    std::vector<double> config_factors;   // n_configs x n_factors

    SvdState() = default;
    SvdState(SvdHyper h, std::size_t n_configs);

    void ensure_dataset(DatasetIndex d);
    [[nodiscard]] std::size_t dataset_count() const { return dataset_bias.size(); }

    [[nodiscard]] std::span<double> p(DatasetIndex d) {
        return {dataset_factors.data() + d * hyper.n_factors, hyper.n_factors};
    }
    [[nodiscard]] std::span<const double> p(DatasetIndex d) const {
        return {dataset_factors.data() + d * hyper.n_factors, hyper.n_factors};
    }
    [[nodiscard]] std::span<double> q(ConfigIndex a) {
        return {config_factors.data() + a * hyper.n_factors, hyper.n_factors};
    }
    [[nodiscard]] std::span<const double> q(ConfigIndex a) const {
        return {config_factors.data() + a * hyper.n_factors, hyper.n_factors};
    }

    /// Unclipped estimate; an unknown dataset contributes zero bias and factors.
    [[nodiscard]] double predict(std::optional<DatasetIndex> d, ConfigIndex a) const;

    /// One stochastic step on a single rating, using the pre-step parameters
    /// on both sides of the factor updates.
    void sgd_step(const IndexedRating& r);
};

/// One pass over `ratings` in rng-shuffled order. Throws DivergenceError if a
/// parameter becomes non-finite.
void sgd_epoch(SvdState& state, std::span<const IndexedRating> ratings, Rng& rng);

/// Regularized squared error of a single rating.
double svd_rating_loss(const SvdState& state, const IndexedRating& r);
/// Sum of svd_rating_loss over all ratings.
double svd_loss(const SvdState& state, std::span<const IndexedRating> ratings);

class SvdRecommender final : public ScoringRecommender {
public:
    SvdRecommender(std::shared_ptr<const Catalog> catalog, SvdHyper hyper, std::uint64_t seed);

    [[nodiscard]] std::string_view name() const override { return "svd"; }
    [[nodiscard]] std::vector<double> predict_many(const std::string& dataset_id,
                                                   std::span<const ConfigIndex> candidates) const override;

    [[nodiscard]] const SvdState& state() const { return state_; }
    [[nodiscard]] const std::vector<IndexedRating>& training() const { return training_; }
    [[nodiscard]] std::optional<DatasetIndex> dataset_index(const std::string& dataset_id) const;
    /// Epochs run by the most recent non-empty update.
    [[nodiscard]] std::size_t last_epochs() const { return last_epochs_; }

    /// Runs extra epochs over everything seen so far.
    void train(std::size_t epochs);

protected:
    void do_update(std::span<const Rating> ratings) override;

private:
    void initialize_factors(std::span<double> v);

    SvdState state_;
    std::vector<IndexedRating> training_;
    std::unordered_map<std::string, DatasetIndex> datasets_;
    std::vector<bool> config_seen_;
    double score_sum_ = 0.0;
    Rng rng_;
    std::size_t last_epochs_ = 0;
};

// ---------------------------------------------------------------------------
// Metalearning

/// Per-dataset results, best first (ties to the smaller config index).
class MetaArchive {
public:
    void insert(const std::string& dataset_id, ConfigIndex a, double score);
    [[nodiscard]] const std::vector<DatasetEntry>& results(const std::string& dataset_id) const;
    [[nodiscard]] const std::map<std::string, std::vector<DatasetEntry>>& all() const { return entries_; }

private:
    std::map<std::string, std::vector<DatasetEntry>> entries_;
};

/// Up to k datasets (other than `dataset_id`) with archived results and
/// metafeatures, nearest first; ties go to the smaller dataset id.
std::vector<std::string> nearest_datasets(const MetaArchive& archive,
                                          const std::map<std::string, metafeatures::MetafeatureVector>& store,
                                          const std::string& dataset_id, std::size_t k);

/// Round-robins over the neighbors' archives (nearest neighbor's best first)
/// and fills whatever is left uniformly at random over unrecommended configs.
/// Throws MissingMetafeaturesError when the dataset has no metafeatures.
std::vector<Recommendation> recommend_meta(const MetaArchive& archive,
                                           const std::map<std::string, metafeatures::MetafeatureVector>& store,
                                           const Catalog& catalog, const std::string& dataset_id, std::size_t k,
                                           std::size_t n, const RepeatFilter& filter, double fill_score, Rng& rng);

class KnnMetaRecommender final : public Recommender {
public:
    KnnMetaRecommender(std::shared_ptr<const Catalog> catalog, std::size_t k = 10);

    [[nodiscard]] std::string_view name() const override { return "knn-meta"; }
    void set_metafeatures(const metafeatures::MetafeatureVector& vector) override;
    [[nodiscard]] const MetaArchive& archive() const { return archive_; }

protected:
    void do_update(std::span<const Rating> ratings) override;
    std::vector<Recommendation> do_recommend(const std::string& dataset_id, std::size_t n, const RepeatFilter& filter,
                                             Rng& rng) override;

private:
    MetaArchive archive_;
    std::map<std::string, metafeatures::MetafeatureVector> store_;
    std::size_t k_;
    double score_sum_ = 0.0;
    std::size_t score_count_ = 0;
};

// ---------------------------------------------------------------------------
// Baselines

/// Two-stage uniform draw: an algorithm (redrawn while it has nothing left),
/// then one of its unfiltered configs. No duplicates within the batch.
std::vector<ConfigIndex> recommend_random(const Catalog& catalog, const std::string& dataset_id,
                                          const RepeatFilter& filter, std::size_t n, Rng& rng);

class RandomRecommender final : public Recommender {
public:
    explicit RandomRecommender(std::shared_ptr<const Catalog> catalog) : Recommender(std::move(catalog)) {}

    [[nodiscard]] std::string_view name() const override { return "random"; }

protected:
    void do_update(std::span<const Rating> ratings) override;
    std::vector<Recommendation> do_recommend(const std::string& dataset_id, std::size_t n, const RepeatFilter& filter,
                                             Rng& rng) override;

private:
    double score_sum_ = 0.0;
    std::size_t score_count_ = 0;
};

/// Ranks configs by running mean score, ignoring the dataset. Configs never
/// observed come after all observed ones, in config_id order, and carry the
/// global mean as their predicted score.
class AverageRecommender final : public Recommender {
public:
    explicit AverageRecommender(std::shared_ptr<const Catalog> catalog);

    [[nodiscard]] std::string_view name() const override { return "average"; }
    [[nodiscard]] std::optional<double> mean(ConfigIndex a) const;

protected:
    void do_update(std::span<const Rating> ratings) override;
    std::vector<Recommendation> do_recommend(const std::string& dataset_id, std::size_t n, const RepeatFilter& filter,
                                             Rng& rng) override;

private:
    std::vector<double> sums_;
    std::vector<std::size_t> counts_;
    double total_ = 0.0;
    std::size_t n_ = 0;
};

}  // namespace algorec::rec
