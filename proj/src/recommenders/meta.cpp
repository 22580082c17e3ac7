#include "algorec/errors.hpp"
#include "algorec/recommenders/strategies.hpp"

#include <algorithm>

namespace algorec::rec {

namespace {

bool archive_before(const DatasetEntry& x, const DatasetEntry& y) {
    if (x.second != y.second) {
        return x.second > y.second;
    }
    return x.first < y.first;
}

}  // namespace

void MetaArchive::insert(const std::string& dataset_id, ConfigIndex a, double score) {
    auto& list = entries_[dataset_id];
    const DatasetEntry entry{a, score};
    list.insert(std::upper_bound(list.begin(), list.end(), entry, archive_before), entry);
}

const std::vector<DatasetEntry>& MetaArchive::results(const std::string& dataset_id) const {
    static const std::vector<DatasetEntry> none;
    auto it = entries_.find(dataset_id);
    return it == entries_.end() ? none : it->second;
}

std::vector<std::string> nearest_datasets(const MetaArchive& archive,
                                          const std::map<std::string, metafeatures::MetafeatureVector>& store,
                                          const std::string& dataset_id, std::size_t k) {
    auto self = store.find(dataset_id);
    if (self == store.end()) {
        throw MissingMetafeaturesError(dataset_id);
    }
    std::vector<const metafeatures::MetafeatureVector*> all;
    all.reserve(store.size());
    for (const auto& [id, v] : store) {
        all.push_back(&v);
    }
    const auto norm = metafeatures::NormStats::from_vectors(all);

    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [id, list] : archive.all()) {
        if (id == dataset_id || list.empty()) {
            continue;
        }
        auto mf = store.find(id);
        if (mf == store.end()) {
            continue;
        }
        ranked.emplace_back(metafeatures::metafeature_distance(self->second, mf->second, norm), id);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ranked.size() && i < k; ++i) {
        out.push_back(ranked[i].second);
    }
    return out;
}

std::vector<Recommendation> recommend_meta(const MetaArchive& archive,
                                           const std::map<std::string, metafeatures::MetafeatureVector>& store,
                                           const Catalog& catalog, const std::string& dataset_id, std::size_t k,
                                           std::size_t n, const RepeatFilter& filter, double fill_score, Rng& rng) {
    const auto neighbors = nearest_datasets(archive, store, dataset_id, k);
    std::vector<bool> taken(catalog.size(), false);
    auto available = [&](ConfigIndex a) { return !taken[a] && !filter.contains(dataset_id, a); };

    std::vector<Recommendation> out;
    std::vector<std::size_t> cursor(neighbors.size(), 0);
    bool progress = true;
    while (out.size() < n && progress) {
        progress = false;
        for (std::size_t i = 0; i < neighbors.size() && out.size() < n; ++i) {
            const auto& list = archive.results(neighbors[i]);
            auto& c = cursor[i];
            while (c < list.size() && !available(list[c].first)) {
                ++c;
            }
            if (c < list.size()) {
                out.push_back({list[c].first, list[c].second});
                taken[list[c].first] = true;
                ++c;
                progress = true;
            }
        }
    }

    if (out.size() < n) {
        std::vector<ConfigIndex> rest;
        for (ConfigIndex a = 0; a < catalog.size(); ++a) {
            if (available(a)) {
                rest.push_back(a);
            }
        }
        // Partial Fisher-Yates: each prefix is a uniform sample without replacement.
        for (std::size_t i = 0; i < rest.size() && out.size() < n; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
            std::swap(rest[i], rest[pick(rng)]);
            out.push_back({rest[i], fill_score});
        }
    }
    return out;
}

KnnMetaRecommender::KnnMetaRecommender(std::shared_ptr<const Catalog> catalog, std::size_t k)
    : Recommender(std::move(catalog)), k_(k) {}

void KnnMetaRecommender::set_metafeatures(const metafeatures::MetafeatureVector& vector) {
    store_.insert_or_assign(vector.dataset_id, vector);
}

void KnnMetaRecommender::do_update(std::span<const Rating> ratings) {
    for (const auto& r : ratings) {
        archive_.insert(r.dataset_id, r.config, r.score);
        score_sum_ += r.score;
        ++score_count_;
    }
}

std::vector<Recommendation> KnnMetaRecommender::do_recommend(const std::string& dataset_id, std::size_t n,
                                                             const RepeatFilter& filter, Rng& rng) {
    const double fill = score_count_ > 0 ? score_sum_ / static_cast<double>(score_count_) : 0.5;
    return recommend_meta(archive_, store_, *catalog_, dataset_id, k_, n, filter, fill, rng);
}

}  // namespace algorec::rec
