#include "algorec/errors.hpp"
#include "algorec/recommenders/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace algorec::rec {

SvdState::SvdState(SvdHyper h, std::size_t n_configs)
    : hyper(h), config_bias(n_configs, 0.0), config_factors(n_configs * h.n_factors, 0.0) {}

void SvdState::ensure_dataset(DatasetIndex d) {
    if (d >= dataset_bias.size()) {
        dataset_bias.resize(d + 1, 0.0);
        dataset_factors.resize((d + 1) * hyper.n_factors, 0.0);
    }
}

double SvdState::predict(std::optional<DatasetIndex> d, ConfigIndex a) const {
    double r = mu + config_bias[a];
    if (d && *d < dataset_bias.size()) {
        r += dataset_bias[*d];
        const auto pd = p(*d);
        const auto qa = q(a);
        for (std::size_t f = 0; f < hyper.n_factors; ++f) {
            r += qa[f] * pd[f];
        }
    }
    return r;
}

void SvdState::sgd_step(const IndexedRating& r) {
    const double gamma = hyper.learning_rate;
    const double lambda = hyper.regularization;
    const double e = r.score - predict(r.dataset, r.config);
    dataset_bias[r.dataset] += gamma * (e - lambda * dataset_bias[r.dataset]);
    config_bias[r.config] += gamma * (e - lambda * config_bias[r.config]);
    auto pd = p(r.dataset);
    auto qa = q(r.config);
    for (std::size_t f = 0; f < hyper.n_factors; ++f) {
        const double pf = pd[f];
        const double qf = qa[f];
        pd[f] += gamma * (e * qf - lambda * pf);
        qa[f] += gamma * (e * pf - lambda * qf);
    }
}

namespace {

bool finite_after(const SvdState& s, const IndexedRating& r) {
    double acc = s.dataset_bias[r.dataset] + s.config_bias[r.config];
    for (double x : s.p(r.dataset)) {
        acc += x;
    }
    for (double x : s.q(r.config)) {
        acc += x;
    }
    return std::isfinite(acc);
}

}  // namespace

void sgd_epoch(SvdState& state, std::span<const IndexedRating> ratings, Rng& rng) {
    std::vector<std::size_t> order(ratings.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
        state.sgd_step(ratings[i]);
        if (!finite_after(state, ratings[i])) {
            throw DivergenceError(state.hyper.learning_rate);
        }
    }
}

double svd_rating_loss(const SvdState& state, const IndexedRating& r) {
    const double e = r.score - state.predict(r.dataset, r.config);
    double reg = state.dataset_bias[r.dataset] * state.dataset_bias[r.dataset] +
                 state.config_bias[r.config] * state.config_bias[r.config];
    for (double x : state.p(r.dataset)) {
        reg += x * x;
    }
    for (double x : state.q(r.config)) {
        reg += x * x;
    }
    return e * e + state.hyper.regularization * reg;
}

double svd_loss(const SvdState& state, std::span<const IndexedRating> ratings) {
    double total = 0.0;
    for (const auto& r : ratings) {
        total += svd_rating_loss(state, r);
    }
    return total;
}

SvdRecommender::SvdRecommender(std::shared_ptr<const Catalog> catalog, SvdHyper hyper, std::uint64_t seed)
    : ScoringRecommender(std::move(catalog)),
      state_(hyper, catalog_->size()),
      config_seen_(catalog_->size(), false),
      rng_(make_rng(seed, "svd")) {}

std::optional<DatasetIndex> SvdRecommender::dataset_index(const std::string& dataset_id) const {
    auto it = datasets_.find(dataset_id);
    if (it == datasets_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void SvdRecommender::initialize_factors(std::span<double> v) {
    std::normal_distribution<double> init(0.0, 1.0);
    for (auto& x : v) {
        x = state_.hyper.init_sd * init(rng_);
    }
}

void SvdRecommender::do_update(std::span<const Rating> ratings) {
    for (const auto& r : ratings) {
        auto [it, inserted] = datasets_.emplace(r.dataset_id, static_cast<DatasetIndex>(datasets_.size()));
        const DatasetIndex d = it->second;
        if (inserted) {
            state_.ensure_dataset(d);
            initialize_factors(state_.p(d));
        }
        if (!config_seen_[r.config]) {
            config_seen_[r.config] = true;
            initialize_factors(state_.q(r.config));
        }
        training_.push_back({d, r.config, r.score});
        score_sum_ += r.score;
    }
    state_.mu = score_sum_ / static_cast<double>(training_.size());
    const double wanted = std::round(state_.hyper.epochs_per_result * static_cast<double>(ratings.size()));
    const auto epochs = std::clamp(static_cast<std::size_t>(wanted), state_.hyper.min_epochs, state_.hyper.max_epochs);
    train(epochs);
    last_epochs_ = epochs;
}

void SvdRecommender::train(std::size_t epochs) {
    for (std::size_t e = 0; e < epochs; ++e) {
        sgd_epoch(state_, training_, rng_);
    }
}

std::vector<double> SvdRecommender::predict_many(const std::string& dataset_id,
                                                 std::span<const ConfigIndex> candidates) const {
    std::vector<double> out(candidates.size());
    const auto d = dataset_index(dataset_id);
    const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for if (parallel_ && n > 256)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        out[i] = state_.predict(d, candidates[i]);
    }
    return out;
}

}  // namespace algorec::rec
