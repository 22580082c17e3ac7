#include "algorec/recommenders/ratings.hpp"

#include "algorec/errors.hpp"

#include <algorithm>

namespace algorec::rec {

DatasetIndex RatingMatrix::intern(const std::string& dataset_id) {
    auto [it, inserted] = dataset_index_.emplace(dataset_id, static_cast<DatasetIndex>(dataset_names_.size()));
    if (inserted) {
        dataset_names_.push_back(dataset_id);
        by_dataset_.emplace_back();
        dataset_sum_.push_back(0.0);
    }
    return it->second;
}

std::optional<DatasetIndex> RatingMatrix::find(const std::string& dataset_id) const {
    auto it = dataset_index_.find(dataset_id);
    if (it == dataset_index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

void RatingMatrix::add(DatasetIndex d, ConfigIndex a, double score) {
    auto& row = by_dataset_[d];
    auto pos = std::lower_bound(row.begin(), row.end(), a, [](const DatasetEntry& e, ConfigIndex x) { return e.first < x; });
    if (pos != row.end() && pos->first == a) {
        throw DuplicateError("rating for dataset '" + dataset_names_[d] + "' and config " + std::to_string(a) +
                             " already present");
    }
    row.insert(pos, {a, score});
    auto& col = by_config_[a];
    auto cpos =
        std::lower_bound(col.begin(), col.end(), d, [](const ConfigEntry& e, DatasetIndex x) { return e.first < x; });
    col.insert(cpos, {d, score});
    dataset_sum_[d] += score;
    config_sum_[a] += score;
    total_sum_ += score;
    ++count_;
}

std::optional<double> RatingMatrix::rating(DatasetIndex d, ConfigIndex a) const {
    const auto& row = by_dataset_[d];
    auto pos = std::lower_bound(row.begin(), row.end(), a, [](const DatasetEntry& e, ConfigIndex x) { return e.first < x; });
    if (pos == row.end() || pos->first != a) {
        return std::nullopt;
    }
    return pos->second;
}

std::optional<double> RatingMatrix::global_mean() const {
    if (count_ == 0) {
        return std::nullopt;
    }
    return total_sum_ / static_cast<double>(count_);
}

std::optional<double> RatingMatrix::dataset_mean(DatasetIndex d) const {
    if (d >= by_dataset_.size() || by_dataset_[d].empty()) {
        return std::nullopt;
    }
    return dataset_sum_[d] / static_cast<double>(by_dataset_[d].size());
}

std::optional<double> RatingMatrix::config_mean(ConfigIndex a) const {
    if (by_config_[a].empty()) {
        return std::nullopt;
    }
    return config_sum_[a] / static_cast<double>(by_config_[a].size());
}

bool RepeatFilter::contains(const std::string& dataset_id, ConfigIndex a) const {
    if (a >= n_configs_) {
        return false;
    }
    auto it = seen_.find(dataset_id);
    return it != seen_.end() && it->second[a];
}

bool RepeatFilter::insert(const std::string& dataset_id, ConfigIndex a) {
    if (a >= n_configs_) {
        throw ValidationError("config index " + std::to_string(a) + " out of range");
    }
    auto& bits = seen_[dataset_id];
    if (bits.empty()) {
        bits.assign(n_configs_, false);
    }
    if (bits[a]) {
        return false;
    }
    bits[a] = true;
    ++counts_[dataset_id];
    ++total_;
    return true;
}

std::size_t RepeatFilter::count(const std::string& dataset_id) const {
    auto it = counts_.find(dataset_id);
    return it == counts_.end() ? 0 : it->second;
}

double msd_similarity(const std::map<std::string, double>& x, const std::map<std::string, double>& y) {
    std::size_t common = 0;
    double sq = 0.0;
    auto i = x.begin();
    auto j = y.begin();
    while (i != x.end() && j != y.end()) {
        if (i->first < j->first) {
            ++i;
        } else if (j->first < i->first) {
            ++j;
        } else {
            const double diff = i->second - j->second;
            sq += diff * diff;
            ++common;
            ++i;
            ++j;
        }
    }
    if (common == 0) {
        return 0.0;
    }
    return 1.0 / (sq / static_cast<double>(common) + 1.0);
}

}  // namespace algorec::rec
