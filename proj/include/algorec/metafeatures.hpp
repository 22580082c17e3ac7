#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace algorec::metafeatures {

inline constexpr std::size_t kCount = 45;

// Slot order is part of the metafeatures TSV format; do not reorder.
inline constexpr std::array<std::string_view, kCount> kNames = {
    // size and shape
    "n_instances", "n_features", "n_classes", "n_numeric_features", "n_categorical_features",
    // class distribution
    "class_majority_fraction", "class_minority_fraction", "class_entropy", "class_imbalance_ratio",
    "class_fraction_mean",
    // aggregates over per-column statistics: feature_<stat>_<aggregate>
    "feature_mean_mean", "feature_mean_min", "feature_mean_max", "feature_mean_skew", "feature_mean_kurtosis",
    "feature_std_mean", "feature_std_min", "feature_std_max", "feature_std_skew", "feature_std_kurtosis",
    "feature_skew_mean", "feature_skew_min", "feature_skew_max", "feature_skew_skew", "feature_skew_kurtosis",
    "feature_kurtosis_mean", "feature_kurtosis_min", "feature_kurtosis_max", "feature_kurtosis_skew",
    "feature_kurtosis_kurtosis",
    "feature_distinct_mean", "feature_distinct_min", "feature_distinct_max", "feature_distinct_skew",
    "feature_distinct_kurtosis",
    // absolute Pearson correlation with the encoded target
    "corr_with_target_mean", "corr_with_target_min", "corr_with_target_max", "corr_with_target_sd",
    "corr_with_target_frac_above_half",
    // miscellany
    "missing_fraction", "feature_entropy_mean", "log_instances", "log_features", "features_to_instances",
};

/// Index of a named slot; throws NotFoundError for unknown names.
std::size_t slot_index(std::string_view name);

struct MetafeatureVector {
    std::string dataset_id;
    std::array<std::optional<double>, kCount> values{};

    [[nodiscard]] std::optional<double> get(std::string_view name) const { return values[slot_index(name)]; }
    void set(std::string_view name, std::optional<double> value) { values[slot_index(name)] = value; }

    friend bool operator==(const MetafeatureVector&, const MetafeatureVector&) = default;
};

/// A labeled tabular dataset held as raw cells, one column per feature.
struct Table {
    std::vector<std::string> feature_names;
    std::vector<std::vector<std::string>> columns;
    std::vector<std::string> target;

    [[nodiscard]] std::size_t rows() const { return target.size(); }
};

/// Reads a delimited table; `delimiter` 0 picks tab for .tsv files and comma otherwise.
Table read_table(const std::filesystem::path& path, const std::string& target_column, char delimiter = 0);
Table parse_table(std::istream& in, const std::string& target_column, char delimiter);

/// Computes the 45-slot vector. Undefined statistics (moments of a constant
/// column, correlations with no variance) are left empty rather than NaN.
/// Results are invariant to row order and feature-column order.
MetafeatureVector compute_metafeatures(const Table& table, std::string dataset_id = {});

/// Per-slot location and scale used to z-score vectors before comparing them.
struct NormStats {
    std::array<double, kCount> mean{};
    std::array<double, kCount> sd{};

    static NormStats from_vectors(const std::vector<const MetafeatureVector*>& vectors);
};

/// Euclidean distance between z-scored vectors. Missing slots are imputed
/// with the mean (z = 0); slots with zero spread are ignored.
double metafeature_distance(const MetafeatureVector& x, const MetafeatureVector& y, const NormStats& norm);

std::map<std::string, MetafeatureVector> read_metafeature_tsv(const std::filesystem::path& path);
std::map<std::string, MetafeatureVector> parse_metafeature_tsv(std::istream& in);
void write_metafeature_tsv(std::ostream& out, const std::map<std::string, MetafeatureVector>& vectors);
void write_metafeature_tsv(const std::filesystem::path& path, const std::map<std::string, MetafeatureVector>& vectors);

}  // namespace algorec::metafeatures
