#pragma once

#include "algorec/recommenders/catalog.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace algorec::rec {

/// One observed training score, with the config resolved against a Catalog.
struct Rating {
    std::string dataset_id;
    ConfigIndex config = 0;
    double score = 0.0;
};

using DatasetEntry = std::pair<ConfigIndex, double>;
using ConfigEntry = std::pair<DatasetIndex, double>;

/// Sparse (dataset, config) -> score store with the running means the
/// neighborhood methods fall back on. Rows and columns are kept sorted by
/// index so pairwise statistics are simple merges.
class RatingMatrix {
public:
    explicit RatingMatrix(std::size_t n_configs) : by_config_(n_configs), config_sum_(n_configs, 0.0) {}

    /// Interns a dataset id; returns the existing index when already known.
    DatasetIndex intern(const std::string& dataset_id);
    [[nodiscard]] std::optional<DatasetIndex> find(const std::string& dataset_id) const;
    [[nodiscard]] const std::string& dataset_name(DatasetIndex d) const { return dataset_names_[d]; }
    [[nodiscard]] std::size_t dataset_count() const { return dataset_names_.size(); }
    [[nodiscard]] std::size_t config_count() const { return by_config_.size(); }

    /// Throws DuplicateError if (dataset, config) is already rated.
    void add(DatasetIndex d, ConfigIndex a, double score);

    [[nodiscard]] const std::vector<DatasetEntry>& by_dataset(DatasetIndex d) const { return by_dataset_[d]; }
    [[nodiscard]] const std::vector<ConfigEntry>& by_config(ConfigIndex a) const { return by_config_[a]; }
    [[nodiscard]] std::optional<double> rating(DatasetIndex d, ConfigIndex a) const;

    [[nodiscard]] std::size_t size() const { return count_; }
    [[nodiscard]] bool empty() const { return count_ == 0; }

    [[nodiscard]] std::optional<double> global_mean() const;
    [[nodiscard]] std::optional<double> dataset_mean(DatasetIndex d) const;
    [[nodiscard]] std::optional<double> config_mean(ConfigIndex a) const;

    /// Global mean, or 0.5 when nothing has been observed.
    [[nodiscard]] double global_mean_or_default() const { return global_mean().value_or(0.5); }

private:
    std::vector<std::string> dataset_names_;
    std::unordered_map<std::string, DatasetIndex> dataset_index_;
    std::vector<std::vector<DatasetEntry>> by_dataset_;
    std::vector<std::vector<ConfigEntry>> by_config_;
    std::vector<double> dataset_sum_;
    std::vector<double> config_sum_;
    double total_sum_ = 0.0;
    std::size_t count_ = 0;
};

/// Per-dataset set of config indices that have already been recommended.
class RepeatFilter {
public:
    explicit RepeatFilter(std::size_t n_configs) : n_configs_(n_configs) {}

    [[nodiscard]] bool contains(const std::string& dataset_id, ConfigIndex a) const;
    /// Returns false if the pair was already present.
    bool insert(const std::string& dataset_id, ConfigIndex a);
    [[nodiscard]] std::size_t count(const std::string& dataset_id) const;
    [[nodiscard]] std::size_t total() const { return total_; }
    [[nodiscard]] std::size_t config_count() const { return n_configs_; }
    [[nodiscard]] bool exhausted(const std::string& dataset_id) const { return count(dataset_id) >= n_configs_; }

    friend bool operator==(const RepeatFilter&, const RepeatFilter&) = default;

private:
    std::size_t n_configs_;
    std::map<std::string, std::vector<bool>> seen_;
    std::map<std::string, std::size_t> counts_;
    std::size_t total_ = 0;
};

/// Mean-squared-deviation similarity 1/(msd + 1) over common keys; 0 when
/// there are none.
double msd_similarity(const std::map<std::string, double>& x, const std::map<std::string, double>& y);

/// Same statistic over two index-sorted rating lists.
template <typename Entry>
double msd_similarity_sorted(std::span<const Entry> x, std::span<const Entry> y) {
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t common = 0;
    double sq = 0.0;
    while (i < x.size() && j < y.size()) {
        if (x[i].first < y[j].first) {
            ++i;
        } else if (y[j].first < x[i].first) {
            ++j;
        } else {
            const double diff = x[i].second - y[j].second;
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
