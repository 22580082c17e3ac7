#include "algorec/metafeatures.hpp"

#include "algorec/errors.hpp"
#include "algorec/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_map>
#include <utility>

namespace algorec::metafeatures {

namespace {

bool is_missing_token(std::string_view cell) {
    cell = text::trim(cell);
    return cell.empty() || cell == "?" || cell == "NA" || cell == "na" || cell == "NaN" || cell == "nan" ||
           cell == "null";
}

// Moments of a sample. Inputs are sorted first so the floating-point result
// does not depend on the order the values arrive in.
struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    std::optional<double> skew;
    std::optional<double> kurtosis;
};

Moments moments_of(std::vector<double> values) {
    Moments m;
    m.n = values.size();
    if (values.empty()) {
        return m;
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    m.mean = sum / static_cast<double>(m.n);
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double v : values) {
        const double d = v - m.mean;
        const double d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const auto n = static_cast<double>(m.n);
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.sd = std::sqrt(m2);
    // Relative threshold: rounding in the mean can leave a tiny m2 for a constant column.
    const double scale = std::max(1.0, std::abs(m.mean));
    if (m.sd > 1e-12 * scale) {
        m.skew = m3 / std::pow(m2, 1.5);
        m.kurtosis = m4 / (m2 * m2) - 3.0;
    } else {
        m.sd = 0.0;
    }
    return m;
}

struct Aggregate {
    std::optional<double> mean, min, max, skew, kurtosis;
};

Aggregate aggregate_of(const std::vector<double>& values) {
    Aggregate a;
    if (values.empty()) {
        return a;
    }
    const Moments m = moments_of(values);
    a.mean = m.mean;
    a.min = *std::min_element(values.begin(), values.end());
    a.max = *std::max_element(values.begin(), values.end());
    a.skew = m.skew;
    a.kurtosis = m.kurtosis;
    return a;
}

double entropy_bits(const std::vector<std::size_t>& counts) {
    std::size_t total = 0;
    for (auto c : counts) {
        total += c;
    }
    if (total == 0) {
        return 0.0;
    }
    std::vector<double> terms;
    terms.reserve(counts.size());
    for (auto c : counts) {
        if (c == 0) {
            continue;
        }
        const double p = static_cast<double>(c) / static_cast<double>(total);
        terms.push_back(-p * std::log2(p));
    }
    std::sort(terms.begin(), terms.end());
    double h = 0.0;
    for (double t : terms) {
        h += t;
    }
    return h;
}

std::optional<double> abs_pearson(std::vector<std::pair<double, double>> pairs) {
    if (pairs.size() < 2) {
        return std::nullopt;
    }
    std::sort(pairs.begin(), pairs.end());
    const auto n = static_cast<double>(pairs.size());
    double sx = 0.0;
    double sy = 0.0;
    for (auto [x, y] : pairs) {
        sx += x;
        sy += y;
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
    for (auto [x, y] : pairs) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if (sxx <= 1e-24 * std::max(1.0, mx * mx) * n || syy <= 1e-24 * std::max(1.0, my * my) * n) {
        return std::nullopt;
    }
    return std::min(1.0, std::abs(sxy / std::sqrt(sxx * syy)));
}

// One feature column after encoding: missing cells are absent.
struct EncodedColumn {
    bool categorical = false;
    std::vector<std::optional<double>> values;
    std::size_t missing = 0;
    std::vector<std::size_t> category_counts;  // distinct raw values, for entropy and distinct count
};

EncodedColumn encode_column(const std::vector<std::string>& cells) {
    EncodedColumn col;
    col.values.resize(cells.size());
    std::vector<std::optional<double>> parsed(cells.size());
    bool numeric = true;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (is_missing_token(cells[i])) {
            ++col.missing;
            continue;
        }
        parsed[i] = text::parse_double(cells[i]);
        if (!parsed[i]) {
            numeric = false;
        }
    }

    std::map<std::string, std::size_t> raw_counts;
    std::map<double, std::size_t> numeric_counts;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (is_missing_token(cells[i])) {
            continue;
        }
        if (numeric) {
            ++numeric_counts[*parsed[i]];
        } else {
            ++raw_counts[std::string(text::trim(cells[i]))];
        }
    }

    col.categorical = !numeric;
    const auto present = static_cast<double>(cells.size() - col.missing);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (is_missing_token(cells[i])) {
            continue;
        }
        if (numeric) {
            col.values[i] = *parsed[i];
        } else {
            // frequency encoding
            col.values[i] = static_cast<double>(raw_counts[std::string(text::trim(cells[i]))]) / present;
        }
    }
    if (numeric) {
        for (auto& [v, c] : numeric_counts) {
            col.category_counts.push_back(c);
        }
    } else {
        for (auto& [v, c] : raw_counts) {
            col.category_counts.push_back(c);
        }
    }
    return col;
}

}  // namespace

std::size_t slot_index(std::string_view name) {
    for (std::size_t i = 0; i < kCount; ++i) {
        if (kNames[i] == name) {
            return i;
        }
    }
    throw NotFoundError("unknown metafeature '" + std::string(name) + "'");
}

Table parse_table(std::istream& in, const std::string& target_column, char delimiter) {
    std::string line;
    if (!std::getline(in, line)) {
        throw EmptyInputError("table has no header");
    }
    auto header = text::split(text::trim(line), delimiter);
    for (auto& h : header) {
        h = std::string(text::trim(h));
    }
    const auto target_it = std::find(header.begin(), header.end(), target_column);
    if (target_it == header.end()) {
        throw ValidationError("target column '" + target_column + "' not found in header");
    }
    const auto target_idx = static_cast<std::size_t>(target_it - header.begin());

    Table table;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c != target_idx) {
            table.feature_names.push_back(header[c]);
        }
    }
    table.columns.resize(table.feature_names.size());

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        auto cells = text::split(line, delimiter);
        if (cells.size() != header.size()) {
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(cells.size()));
        }
        std::size_t f = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c == target_idx) {
                table.target.emplace_back(text::trim(cells[c]));
            } else {
                table.columns[f++].push_back(std::move(cells[c]));
            }
        }
    }
    return table;
}

Table read_table(const std::filesystem::path& path, const std::string& target_column, char delimiter) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open table '" + path.string() + "'");
    }
    if (delimiter == 0) {
        delimiter = path.extension() == ".tsv" ? '\t' : ',';
    }
    return parse_table(in, target_column, delimiter);
}

MetafeatureVector compute_metafeatures(const Table& table, std::string dataset_id) {
    const std::size_t n = table.rows();
    const std::size_t m = table.columns.size();
    if (n == 0 || m == 0) {
        throw EmptyInputError("metafeatures need at least one row and one feature column");
    }
    for (const auto& col : table.columns) {
        if (col.size() != n) {
            throw ValidationError("feature column length does not match target length");
        }
    }

    MetafeatureVector mf;
    mf.dataset_id = std::move(dataset_id);
    auto set = [&mf](std::string_view name, std::optional<double> v) { mf.set(name, v); };

    // Class distribution; labels are encoded by frequency rank (most frequent = 0, ties by label).
    std::map<std::string, std::size_t> label_counts;
    for (const auto& y : table.target) {
        ++label_counts[y];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(label_counts.begin(), label_counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::unordered_map<std::string, double> label_code;
    std::vector<std::size_t> class_counts;
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        label_code[ranked[r].first] = static_cast<double>(r);
        class_counts.push_back(ranked[r].second);
    }
    const auto c = static_cast<double>(class_counts.size());
    const auto majority = static_cast<double>(class_counts.front());
    const auto minority = static_cast<double>(class_counts.back());

    set("n_instances", static_cast<double>(n));
    set("n_features", static_cast<double>(m));
    set("n_classes", c);
    set("class_majority_fraction", majority / static_cast<double>(n));
    set("class_minority_fraction", minority / static_cast<double>(n));
    set("class_entropy", entropy_bits(class_counts));
    set("class_imbalance_ratio", majority / minority);
    set("class_fraction_mean", 1.0 / c);

    std::vector<double> target_encoded(n);
    for (std::size_t i = 0; i < n; ++i) {
        target_encoded[i] = label_code[table.target[i]];
    }

    std::vector<double> col_means, col_sds, col_skews, col_kurts, col_distinct, col_entropy, abs_corrs;
    std::size_t n_numeric = 0;
    std::size_t n_categorical = 0;
    std::size_t missing_cells = 0;

    for (const auto& cells : table.columns) {
        const EncodedColumn col = encode_column(cells);
        (col.categorical ? n_categorical : n_numeric) += 1;
        missing_cells += col.missing;

        std::vector<double> present;
        std::vector<std::pair<double, double>> pairs;
        for (std::size_t i = 0; i < n; ++i) {
            if (col.values[i]) {
                present.push_back(*col.values[i]);
                pairs.emplace_back(*col.values[i], target_encoded[i]);
            }
        }
        col_distinct.push_back(static_cast<double>(col.category_counts.size()));
        if (present.empty()) {
            continue;
        }
        const Moments mo = moments_of(present);
        col_means.push_back(mo.mean);
        col_sds.push_back(mo.sd);
        if (mo.skew) {
            col_skews.push_back(*mo.skew);
        }
        if (mo.kurtosis) {
            col_kurts.push_back(*mo.kurtosis);
        }
        col_entropy.push_back(entropy_bits(col.category_counts));
        if (auto r = abs_pearson(std::move(pairs))) {
            abs_corrs.push_back(*r);
        }
    }

    set("n_numeric_features", static_cast<double>(n_numeric));
    set("n_categorical_features", static_cast<double>(n_categorical));

    const std::array<std::pair<std::string_view, const std::vector<double>*>, 5> per_column = {{
        {"mean", &col_means},
        {"std", &col_sds},
        {"skew", &col_skews},
        {"kurtosis", &col_kurts},
        {"distinct", &col_distinct},
    }};
    for (const auto& [stat, values] : per_column) {
        const Aggregate a = aggregate_of(*values);
        const std::string prefix = "feature_" + std::string(stat) + "_";
        set(prefix + "mean", a.mean);
        set(prefix + "min", a.min);
        set(prefix + "max", a.max);
        set(prefix + "skew", a.skew);
        set(prefix + "kurtosis", a.kurtosis);
    }

    if (!abs_corrs.empty()) {
        const Moments mo = moments_of(abs_corrs);
        set("corr_with_target_mean", mo.mean);
        set("corr_with_target_min", *std::min_element(abs_corrs.begin(), abs_corrs.end()));
        set("corr_with_target_max", *std::max_element(abs_corrs.begin(), abs_corrs.end()));
        set("corr_with_target_sd", mo.sd);
    }
    const auto strong = std::count_if(abs_corrs.begin(), abs_corrs.end(), [](double r) { return r > 0.5; });
    set("corr_with_target_frac_above_half", static_cast<double>(strong) / static_cast<double>(m));

    set("missing_fraction", static_cast<double>(missing_cells) / static_cast<double>(n * m));
    if (!col_entropy.empty()) {
        set("feature_entropy_mean", moments_of(col_entropy).mean);
    }
    set("log_instances", std::log(static_cast<double>(n)));
    set("log_features", std::log(static_cast<double>(m)));
    set("features_to_instances", static_cast<double>(m) / static_cast<double>(n));
    return mf;
}

NormStats NormStats::from_vectors(const std::vector<const MetafeatureVector*>& vectors) {
    NormStats stats;
    for (std::size_t s = 0; s < kCount; ++s) {
        std::vector<double> present;
        for (const auto* v : vectors) {
            if (v->values[s]) {
                present.push_back(*v->values[s]);
            }
        }
        if (present.empty()) {
            continue;
        }
        const Moments mo = moments_of(std::move(present));
        stats.mean[s] = mo.mean;
        stats.sd[s] = mo.sd;
    }
    return stats;
}

double metafeature_distance(const MetafeatureVector& x, const MetafeatureVector& y, const NormStats& norm) {
    double sum = 0.0;
    for (std::size_t s = 0; s < kCount; ++s) {
        if (!(norm.sd[s] > 0.0)) {
            continue;
        }
        const double zx = x.values[s] ? (*x.values[s] - norm.mean[s]) / norm.sd[s] : 0.0;
        const double zy = y.values[s] ? (*y.values[s] - norm.mean[s]) / norm.sd[s] : 0.0;
        sum += (zx - zy) * (zx - zy);
    }
    return std::sqrt(sum);
}

std::map<std::string, MetafeatureVector> parse_metafeature_tsv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw EmptyInputError("metafeatures file has no header");
    }
    const auto header = text::split(text::trim(line), '\t');
    if (header.empty() || text::trim(header[0]) != "dataset_id") {
        throw ParseError(1, "first metafeatures column must be 'dataset_id'");
    }
    std::vector<std::size_t> slot_of_column(header.size(), kCount);
    std::set<std::size_t> seen;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const auto name = text::trim(header[c]);
        std::size_t slot = kCount;
        try {
            slot = slot_index(name);
        } catch (const NotFoundError&) {
            throw ParseError(1, "unknown metafeature column '" + std::string(name) + "'");
        }
        if (!seen.insert(slot).second) {
            throw ParseError(1, "duplicate metafeature column '" + std::string(name) + "'");
        }
        slot_of_column[c] = slot;
    }
    if (seen.size() != kCount) {
        throw ParseError(1, "metafeatures header must name all " + std::to_string(kCount) + " slots");
    }

    std::map<std::string, MetafeatureVector> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        if (line.back() == '\r') {
            line.pop_back();
        }
        const auto cells = text::split(line, '\t');
        if (cells.size() != header.size()) {
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields");
        }
        MetafeatureVector v;
        v.dataset_id = std::string(text::trim(cells[0]));
        if (v.dataset_id.empty()) {
            throw ParseError(line_no, "empty dataset_id");
        }
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const auto cell = text::trim(cells[c]);
            if (cell == "NA" || cell.empty()) {
                continue;
            }
            auto value = text::parse_double(cell);
            if (!value) {
                throw ParseError(line_no, "non-numeric metafeature value '" + std::string(cell) + "'");
            }
            v.values[slot_of_column[c]] = *value;
        }
        if (out.count(v.dataset_id) != 0) {
            throw DuplicateError("duplicate metafeatures for dataset '" + v.dataset_id + "'");
        }
        out.emplace(v.dataset_id, std::move(v));
    }
    return out;
}

std::map<std::string, MetafeatureVector> read_metafeature_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open metafeatures file '" + path.string() + "'");
    }
    return parse_metafeature_tsv(in);
}

void write_metafeature_tsv(std::ostream& out, const std::map<std::string, MetafeatureVector>& vectors) {
    out << "dataset_id";
    for (auto name : kNames) {
        out << '\t' << name;
    }
    out << '\n';
    for (const auto& [id, v] : vectors) {
        out << id;
        for (const auto& value : v.values) {
            out << '\t' << (value ? text::format_double(*value) : std::string("NA"));
        }
        out << '\n';
    }
}

void write_metafeature_tsv(const std::filesystem::path& path, const std::map<std::string, MetafeatureVector>& vectors) {
    std::ofstream out(path);
    if (!out) {
        throw NotFoundError("cannot write metafeatures file '" + path.string() + "'");
    }
    write_metafeature_tsv(out, vectors);
}

}  // namespace algorec::metafeatures
