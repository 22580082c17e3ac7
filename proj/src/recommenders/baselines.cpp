#include "algorec/recommenders/strategies.hpp"

#include <algorithm>

namespace algorec::rec {

std::vector<ConfigIndex> recommend_random(const Catalog& catalog, const std::string& dataset_id,
                                          const RepeatFilter& filter, std::size_t n, Rng& rng) {
    std::vector<std::vector<ConfigIndex>> open(catalog.algorithm_count());
    std::size_t remaining = 0;
    for (std::size_t alg = 0; alg < open.size(); ++alg) {
        for (ConfigIndex a : catalog.configs_of_algorithm(alg)) {
            if (!filter.contains(dataset_id, a)) {
                open[alg].push_back(a);
            }
        }
        remaining += open[alg].size();
    }
    std::vector<ConfigIndex> out;
    if (open.empty()) {
        return out;
    }
    std::uniform_int_distribution<std::size_t> pick_alg(0, open.size() - 1);
    while (out.size() < n && remaining > 0) {
        auto& pool = open[pick_alg(rng)];
        if (pool.empty()) {
            continue;
        }
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        const std::size_t j = pick(rng);
        out.push_back(pool[j]);
        pool[j] = pool.back();
        pool.pop_back();
        --remaining;
    }
    return out;
}

void RandomRecommender::do_update(std::span<const Rating> ratings) {
    for (const auto& r : ratings) {
        score_sum_ += r.score;
        ++score_count_;
    }
}

std::vector<Recommendation> RandomRecommender::do_recommend(const std::string& dataset_id, std::size_t n,
                                                            const RepeatFilter& filter, Rng& rng) {
    const double mu = score_count_ > 0 ? score_sum_ / static_cast<double>(score_count_) : 0.5;
    std::vector<Recommendation> out;
    for (ConfigIndex a : recommend_random(*catalog_, dataset_id, filter, n, rng)) {
        out.push_back({a, mu});
    }
    return out;
}

AverageRecommender::AverageRecommender(std::shared_ptr<const Catalog> catalog)
    : Recommender(std::move(catalog)), sums_(catalog_->size(), 0.0), counts_(catalog_->size(), 0) {}

std::optional<double> AverageRecommender::mean(ConfigIndex a) const {
    if (a >= counts_.size() || counts_[a] == 0) {
        return std::nullopt;
    }
    return sums_[a] / static_cast<double>(counts_[a]);
}

void AverageRecommender::do_update(std::span<const Rating> ratings) {
    for (const auto& r : ratings) {
        sums_[r.config] += r.score;
        ++counts_[r.config];
        total_ += r.score;
        ++n_;
    }
}

std::vector<Recommendation> AverageRecommender::do_recommend(const std::string& dataset_id, std::size_t n,
                                                             const RepeatFilter& filter, Rng& rng) {
    (void)rng;
    const double mu = n_ > 0 ? total_ / static_cast<double>(n_) : 0.5;
    std::vector<Recommendation> seen;
    std::vector<Recommendation> unseen;
    for (ConfigIndex a = 0; a < catalog_->size(); ++a) {
        if (filter.contains(dataset_id, a)) {
            continue;
        }
        if (auto m = mean(a)) {
            seen.push_back({a, *m});
        } else if (unseen.size() < n) {
            unseen.push_back({a, mu});
        }
    }
    rank_candidates(seen, n);
    for (std::size_t i = 0; seen.size() < n && i < unseen.size(); ++i) {
        seen.push_back(unseen[i]);
    }
    return seen;
}

}  // namespace algorec::rec
