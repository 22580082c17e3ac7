#include "algorec/recommenders/strategies.hpp"

#include <algorithm>

namespace algorec::rec {

namespace {

struct Neighbor {
    double sim;
    double rating;
    std::uint32_t key;
};

// Weighted mean over the k most similar neighbors; `before` breaks ties.
template <typename Tie>
std::optional<double> weighted_top_k(std::vector<Neighbor>& ns, std::size_t k, Tie before) {
    if (ns.empty() || k == 0) {
        return std::nullopt;
    }
    auto cmp = [&](const Neighbor& x, const Neighbor& y) {
        if (x.sim != y.sim) {
            return x.sim > y.sim;
        }
        return before(x.key, y.key);
    };
    const std::size_t keep = std::min(k, ns.size());
    std::partial_sort(ns.begin(), ns.begin() + static_cast<std::ptrdiff_t>(keep), ns.end(), cmp);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        num += ns[i].sim * ns[i].rating;
        den += ns[i].sim;
    }
    return num / den;
}

}  // namespace

std::optional<double> knn_ml_estimate(const RatingMatrix& ratings, ConfigIndex a, DatasetIndex d, std::size_t k) {
    if (d >= ratings.dataset_count() || ratings.by_dataset(d).empty()) {
        return std::nullopt;
    }
    const auto& col_a = ratings.by_config(a);
    std::vector<Neighbor> ns;
    for (const auto& [b, r] : ratings.by_dataset(d)) {
        if (b == a) {
            continue;
        }
        const double sim = msd_similarity_sorted<ConfigEntry>(col_a, ratings.by_config(b));
        if (sim > 0.0) {
            ns.push_back({sim, r, b});
        }
    }
    if (auto v = weighted_top_k(ns, k, std::less<>{})) {
        return v;
    }
    return ratings.dataset_mean(d);
}

std::vector<double> dataset_similarities(const RatingMatrix& ratings, DatasetIndex d) {
    std::vector<double> out(ratings.dataset_count(), 0.0);
    const auto& row_d = ratings.by_dataset(d);
    for (DatasetIndex e = 0; e < out.size(); ++e) {
        out[e] = msd_similarity_sorted<DatasetEntry>(row_d, ratings.by_dataset(e));
    }
    return out;
}

std::optional<double> knn_data_estimate(const RatingMatrix& ratings, ConfigIndex a, DatasetIndex d, std::size_t k,
                                        std::span<const double> dataset_similarity) {
    const auto& col = ratings.by_config(a);
    if (col.empty()) {
        return std::nullopt;
    }
    std::vector<Neighbor> ns;
    for (const auto& [e, r] : col) {
        if (e == d || e >= dataset_similarity.size()) {
            continue;
        }
        const double sim = dataset_similarity[e];
        if (sim > 0.0) {
            ns.push_back({sim, r, e});
        }
    }
    auto by_name = [&](std::uint32_t x, std::uint32_t y) { return ratings.dataset_name(x) < ratings.dataset_name(y); };
    if (auto v = weighted_top_k(ns, k, by_name)) {
        return v;
    }
    return ratings.config_mean(a);
}

std::optional<double> slopeone_deviation(const RatingMatrix& ratings, ConfigIndex a, ConfigIndex b) {
    const auto& x = ratings.by_config(a);
    const auto& y = ratings.by_config(b);
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t common = 0;
    double sum = 0.0;
    while (i < x.size() && j < y.size()) {
        if (x[i].first < y[j].first) {
            ++i;
        } else if (y[j].first < x[i].first) {
            ++j;
        } else {
            sum += x[i].second - y[j].second;
            ++common;
            ++i;
            ++j;
        }
    }
    if (common == 0) {
        return std::nullopt;
    }
    return sum / static_cast<double>(common);
}

std::optional<double> slopeone_estimate(const RatingMatrix& ratings, ConfigIndex a, DatasetIndex d) {
    if (d >= ratings.dataset_count() || ratings.by_dataset(d).empty()) {
        return std::nullopt;
    }
    const double mu_d = *ratings.dataset_mean(d);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [b, r] : ratings.by_dataset(d)) {
        if (b == a) {
            continue;
        }
        if (auto dev = slopeone_deviation(ratings, a, b)) {
            sum += *dev;
            ++n;
        }
    }
    if (n == 0) {
        return mu_d;
    }
    return mu_d + sum / static_cast<double>(n);
}

KnnMlRecommender::KnnMlRecommender(std::shared_ptr<const Catalog> catalog, std::size_t k)
    : ScoringRecommender(std::move(catalog)), ratings_(catalog_->size()), k_(k) {}

void KnnMlRecommender::do_update(std::span<const Rating> ratings) {
    for (const auto& r : ratings) {
        ratings_.add(ratings_.intern(r.dataset_id), r.config, r.score);
    }
}

std::vector<double> KnnMlRecommender::predict_many(const std::string& dataset_id,
                                                   std::span<const ConfigIndex> candidates) const {
    const double fallback = ratings_.global_mean_or_default();
    std::vector<double> out(candidates.size(), fallback);
    const auto d = ratings_.find(dataset_id);
    if (!d) {
        return out;
    }
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic, 16) if (parallel_ && n > 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = knn_ml_estimate(ratings_, candidates[i], *d, k_).value_or(fallback);
    }
    return out;
}

KnnDataRecommender::KnnDataRecommender(std::shared_ptr<const Catalog> catalog, std::size_t k)
    : ScoringRecommender(std::move(catalog)), ratings_(catalog_->size()), k_(k) {}

void KnnDataRecommender::do_update(std::span<const Rating> ratings) {
    for (const auto& r : ratings) {
        ratings_.add(ratings_.intern(r.dataset_id), r.config, r.score);
    }
}

std::vector<double> KnnDataRecommender::predict_many(const std::string& dataset_id,
                                                     std::span<const ConfigIndex> candidates) const {
    const double fallback = ratings_.global_mean_or_default();
    std::vector<double> out(candidates.size(), fallback);
    const auto d = ratings_.find(dataset_id);
    std::vector<double> sims;
    if (d) {
        sims = dataset_similarities(ratings_, *d);
    }
    // An unknown dataset has no neighbors; the sentinel index never matches.
    const DatasetIndex self = d ? *d : static_cast<DatasetIndex>(ratings_.dataset_count());
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic, 16) if (parallel_ && n > 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = knn_data_estimate(ratings_, candidates[i], self, k_, sims).value_or(fallback);
    }
    return out;
}

SlopeOneRecommender::SlopeOneRecommender(std::shared_ptr<const Catalog> catalog)
    : ScoringRecommender(std::move(catalog)), ratings_(catalog_->size()) {}

void SlopeOneRecommender::do_update(std::span<const Rating> ratings) {
    for (const auto& r : ratings) {
        ratings_.add(ratings_.intern(r.dataset_id), r.config, r.score);
    }
}

std::vector<double> SlopeOneRecommender::predict_many(const std::string& dataset_id,
                                                      std::span<const ConfigIndex> candidates) const {
    const double fallback = ratings_.global_mean_or_default();
    std::vector<double> out(candidates.size(), fallback);
    const auto d = ratings_.find(dataset_id);
    if (!d) {
        return out;
    }
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic, 16) if (parallel_ && n > 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = slopeone_estimate(ratings_, candidates[i], *d).value_or(fallback);
    }
    return out;
}

}  // namespace algorec::rec
