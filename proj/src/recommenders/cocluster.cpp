#include "algorec/recommenders/strategies.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace algorec::rec {

namespace {

void compute_means(const RatingMatrix& ratings, CoclusterModel& m) {
    const double mu = ratings.global_mean_or_default();
    std::vector<double> ds(m.k_datasets, 0.0);
    std::vector<double> as(m.k_configs, 0.0);
    std::vector<double> cs(m.k_datasets * m.k_configs, 0.0);
    std::vector<std::size_t> dn(ds.size(), 0);
    std::vector<std::size_t> an(as.size(), 0);
    std::vector<std::size_t> cn(cs.size(), 0);
    for (DatasetIndex d = 0; d < ratings.dataset_count(); ++d) {
        const int cd = m.dataset_cluster[d];
        if (cd < 0) {
            continue;
        }
        for (const auto& [a, r] : ratings.by_dataset(d)) {
            const int ca = m.config_cluster[a];
            ds[cd] += r;
            ++dn[cd];
            as[ca] += r;
            ++an[ca];
            cs[cd * m.k_configs + ca] += r;
            ++cn[cd * m.k_configs + ca];
        }
    }
    auto finish = [mu](std::vector<double>& sum, const std::vector<std::size_t>& n) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] = n[i] > 0 ? sum[i] / static_cast<double>(n[i]) : mu;
        }
    };
    finish(ds, dn);
    finish(as, an);
    finish(cs, cn);
    m.dataset_cluster_mean = std::move(ds);
    m.config_cluster_mean = std::move(as);
    m.cocluster_mean = std::move(cs);
}

double estimate(const CoclusterModel& m, int cd, int ca, double mu_d, double mu_a) {
    return m.cocluster_mean[cd * m.k_configs + ca] + (mu_a - m.config_cluster_mean[ca]) +
           (mu_d - m.dataset_cluster_mean[cd]);
}

// Squared error of every row (dataset) or column (config) under its own cluster.
std::vector<double> dataset_errors(const RatingMatrix& ratings, const CoclusterModel& m,
                                   const std::vector<double>& mu_a) {
    std::vector<double> err(ratings.dataset_count(), 0.0);
    for (DatasetIndex d = 0; d < ratings.dataset_count(); ++d) {
        if (m.dataset_cluster[d] < 0) {
            continue;
        }
        const double mu_d = *ratings.dataset_mean(d);
        for (const auto& [a, r] : ratings.by_dataset(d)) {
            const double e = r - estimate(m, m.dataset_cluster[d], m.config_cluster[a], mu_d, mu_a[a]);
            err[d] += e * e;
        }
    }
    return err;
}

std::vector<double> config_errors(const RatingMatrix& ratings, const CoclusterModel& m,
                                  const std::vector<double>& mu_d) {
    std::vector<double> err(ratings.config_count(), 0.0);
    for (ConfigIndex a = 0; a < ratings.config_count(); ++a) {
        if (m.config_cluster[a] < 0) {
            continue;
        }
        const double mu_a = *ratings.config_mean(a);
        for (const auto& [d, r] : ratings.by_config(a)) {
            const double e = r - estimate(m, m.dataset_cluster[d], m.config_cluster[a], mu_d[d], mu_a);
            err[a] += e * e;
        }
    }
    return err;
}

// Moves the worst-fitting member of a multi-member cluster into each empty one.
bool reseed_empty(std::vector<int>& cluster, std::size_t k, const std::vector<double>& err) {
    bool changed = false;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<std::size_t> size(k, 0);
        for (int x : cluster) {
            if (x >= 0) {
                ++size[x];
            }
        }
        if (size[c] > 0) {
            continue;
        }
        std::size_t worst = cluster.size();
        for (std::size_t i = 0; i < cluster.size(); ++i) {
            if (cluster[i] < 0 || size[cluster[i]] < 2) {
                continue;
            }
            if (worst == cluster.size() || err[i] > err[worst]) {
                worst = i;
            }
        }
        if (worst == cluster.size()) {
            break;
        }
        cluster[worst] = static_cast<int>(c);
        changed = true;
    }
    return changed;
}

}  // namespace

double cocluster_objective(const RatingMatrix& ratings, const CoclusterModel& model) {
    double total = 0.0;
    for (DatasetIndex d = 0; d < ratings.dataset_count(); ++d) {
        if (model.dataset_cluster[d] < 0) {
            continue;
        }
        const double mu_d = *ratings.dataset_mean(d);
        for (const auto& [a, r] : ratings.by_dataset(d)) {
            const double e =
                r - estimate(model, model.dataset_cluster[d], model.config_cluster[a], mu_d, *ratings.config_mean(a));
            total += e * e;
        }
    }
    return total;
}

namespace {

CoclusterModel fit_once(const RatingMatrix& ratings, std::size_t k_datasets, std::size_t k_configs,
                        std::size_t iterations, Rng& rng) {
    CoclusterModel m;
    m.dataset_cluster.assign(ratings.dataset_count(), -1);
    m.config_cluster.assign(ratings.config_count(), -1);

    // Datasets in id order and configs in index order, so the fit does not
    // depend on the order results arrived in.
    std::vector<DatasetIndex> datasets;
    for (DatasetIndex d = 0; d < ratings.dataset_count(); ++d) {
        if (!ratings.by_dataset(d).empty()) {
            datasets.push_back(d);
        }
    }
    std::sort(datasets.begin(), datasets.end(),
              [&](DatasetIndex x, DatasetIndex y) { return ratings.dataset_name(x) < ratings.dataset_name(y); });
    std::vector<ConfigIndex> configs;
    for (ConfigIndex a = 0; a < ratings.config_count(); ++a) {
        if (!ratings.by_config(a).empty()) {
            configs.push_back(a);
        }
    }
    m.k_datasets = std::max<std::size_t>(1, std::min(k_datasets, datasets.size()));
    m.k_configs = std::max<std::size_t>(1, std::min(k_configs, configs.size()));
    if (datasets.empty()) {
        compute_means(ratings, m);
        m.objective_trace.push_back(0.0);
        return m;
    }

    std::vector<double> mu_d(ratings.dataset_count(), 0.0);
    for (DatasetIndex d : datasets) {
        mu_d[d] = *ratings.dataset_mean(d);
    }
    std::vector<double> mu_a(ratings.config_count(), 0.0);
    for (ConfigIndex a : configs) {
        mu_a[a] = *ratings.config_mean(a);
    }

    std::uniform_int_distribution<int> pick_d(0, static_cast<int>(m.k_datasets) - 1);
    std::uniform_int_distribution<int> pick_a(0, static_cast<int>(m.k_configs) - 1);
    for (DatasetIndex d : datasets) {
        m.dataset_cluster[d] = pick_d(rng);
    }
    for (ConfigIndex a : configs) {
        m.config_cluster[a] = pick_a(rng);
    }
    compute_means(ratings, m);
    if (reseed_empty(m.dataset_cluster, m.k_datasets, dataset_errors(ratings, m, mu_a))) {
        compute_means(ratings, m);
    }
    if (reseed_empty(m.config_cluster, m.k_configs, config_errors(ratings, m, mu_d))) {
        compute_means(ratings, m);
    }
    double objective = cocluster_objective(ratings, m);
    m.objective_trace.push_back(objective);

    for (std::size_t it = 0; it < iterations; ++it) {
        CoclusterModel next = m;
        for (DatasetIndex d : datasets) {
            int best = next.dataset_cluster[d];
            double best_err = std::numeric_limits<double>::infinity();
            for (int c = 0; c < static_cast<int>(next.k_datasets); ++c) {
                double err = 0.0;
                for (const auto& [a, r] : ratings.by_dataset(d)) {
                    const double e = r - estimate(m, c, m.config_cluster[a], mu_d[d], mu_a[a]);
                    err += e * e;
                }
                if (err < best_err || (err == best_err && c == m.dataset_cluster[d])) {
                    best_err = err;
                    best = c;
                }
            }
            next.dataset_cluster[d] = best;
        }
        compute_means(ratings, next);
        if (reseed_empty(next.dataset_cluster, next.k_datasets, dataset_errors(ratings, next, mu_a))) {
            compute_means(ratings, next);
        }
        const CoclusterModel mid = next;
        for (ConfigIndex a : configs) {
            int best = mid.config_cluster[a];
            double best_err = std::numeric_limits<double>::infinity();
            for (int c = 0; c < static_cast<int>(mid.k_configs); ++c) {
                double err = 0.0;
                for (const auto& [d, r] : ratings.by_config(a)) {
                    const double e = r - estimate(mid, mid.dataset_cluster[d], c, mu_d[d], mu_a[a]);
                    err += e * e;
                }
                if (err < best_err || (err == best_err && c == mid.config_cluster[a])) {
                    best_err = err;
                    best = c;
                }
            }
            next.config_cluster[a] = best;
        }
        compute_means(ratings, next);
        if (reseed_empty(next.config_cluster, next.k_configs, config_errors(ratings, next, mu_d))) {
            compute_means(ratings, next);
        }
        const double value = cocluster_objective(ratings, next);
        const bool same = next.dataset_cluster == m.dataset_cluster && next.config_cluster == m.config_cluster;
        if (value > objective || same) {
            break;
        }
        next.objective_trace.push_back(value);
        m = std::move(next);
        objective = value;
    }
    return m;
}

}  // namespace

CoclusterModel fit_coclusters(const RatingMatrix& ratings, std::size_t k_datasets, std::size_t k_configs,
                              std::size_t iterations, Rng& rng, std::size_t restarts) {
    CoclusterModel best = fit_once(ratings, k_datasets, k_configs, iterations, rng);
    for (std::size_t r = 1; r < restarts; ++r) {
        CoclusterModel next = fit_once(ratings, k_datasets, k_configs, iterations, rng);
        if (next.objective_trace.back() < best.objective_trace.back()) {
            best = std::move(next);
        }
    }
    return best;
}

double predict_cocluster(const RatingMatrix& ratings, const CoclusterModel& model, std::optional<DatasetIndex> d,
                         ConfigIndex a) {
    const bool known_d = d && *d < model.dataset_cluster.size() && model.dataset_cluster[*d] >= 0;
    const bool known_a = a < model.config_cluster.size() && model.config_cluster[a] >= 0;
    if (known_d && known_a) {
        return estimate(model, model.dataset_cluster[*d], model.config_cluster[a], *ratings.dataset_mean(*d),
                        *ratings.config_mean(a));
    }
    if (known_a) {
        return *ratings.config_mean(a);
    }
    if (known_d) {
        return *ratings.dataset_mean(*d);
    }
    return ratings.global_mean_or_default();
}

CoclusterRecommender::CoclusterRecommender(std::shared_ptr<const Catalog> catalog, CoclusterParams params,
                                           std::uint64_t seed)
    : ScoringRecommender(std::move(catalog)), ratings_(catalog_->size()), params_(params), seed_(seed) {}

void CoclusterRecommender::do_update(std::span<const Rating> ratings) {
    for (const auto& r : ratings) {
        ratings_.add(ratings_.intern(r.dataset_id), r.config, r.score);
    }
    auto rng = make_rng(seed_, "cocluster");
    model_ = fit_coclusters(ratings_, params_.k_datasets, params_.k_configs, params_.iterations, rng, params_.restarts);
}

std::vector<double> CoclusterRecommender::predict_many(const std::string& dataset_id,
                                                       std::span<const ConfigIndex> candidates) const {
    std::vector<double> out(candidates.size());
    const auto d = ratings_.find(dataset_id);
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for if (parallel_ && n > 256)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = predict_cocluster(ratings_, model_, d, candidates[i]);
    }
    return out;
}

}  // namespace algorec::rec
