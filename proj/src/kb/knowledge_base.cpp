#include "algorec/errors.hpp"
#include "algorec/kb.hpp"
#include "algorec/rng.hpp"
#include "algorec/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace algorec::kb {

namespace {

std::string result_key(const std::string& dataset_id, const std::string& config_id) {
    return dataset_id + '\n' + config_id;
}

void check_score(double score, const char* what, const std::string& where) {
    if (!(score >= 0.0 && score <= 1.0)) {
        throw ValidationError(std::string(what) + " " + text::format_double(score) + " outside [0,1] for " + where);
    }
}

}  // namespace

void KnowledgeBase::add(ExperimentResult result) {
    if (result.dataset_id.empty()) {
        throw ValidationError("empty dataset_id");
    }
    space_.validate(result.config);
    const auto id = result.config.config_id();
    check_score(result.train_score, "train_score", result.dataset_id + "/" + id);
    check_score(result.holdout_score, "holdout_score", result.dataset_id + "/" + id);
    auto [it, inserted] = index_.emplace(result_key(result.dataset_id, id), results_.size());
    if (!inserted) {
        throw DuplicateError("duplicate result for dataset '" + result.dataset_id + "' and config '" + id + "'");
    }
    results_.push_back(std::move(result));
}

const ExperimentResult* KnowledgeBase::find(const std::string& dataset_id, const std::string& config_id) const {
    auto it = index_.find(result_key(dataset_id, config_id));
    return it == index_.end() ? nullptr : &results_[it->second];
}

std::vector<std::string> KnowledgeBase::datasets() const {
    std::set<std::string> ids;
    for (const auto& r : results_) {
        ids.insert(r.dataset_id);
    }
    return {ids.begin(), ids.end()};
}

KnowledgeBase parse_kb(std::istream& in, const ConfigSpace& space) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(1, "missing header");
    }
    auto header = text::split(text::trim(line), '\t');
    for (auto& h : header) {
        h = std::string(text::trim(h));
    }
    const std::vector<std::string> full = {"dataset_id", "algorithm", "params_json", "train_score", "holdout_score"};
    const std::vector<std::string> short_form(full.begin(), full.end() - 1);
    bool has_holdout = true;
    if (header == short_form) {
        has_holdout = false;
    } else if (header != full) {
        throw ParseError(1, "header must be 'dataset_id\\talgorithm\\tparams_json\\ttrain_score[\\tholdout_score]'");
    }

    KnowledgeBase kb(space);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (text::trim(line).empty()) {
            continue;
        }
        const auto cells = text::split(line, '\t');
        if (cells.size() != header.size()) {
            throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                          std::to_string(cells.size()));
        }
        ExperimentResult r;
        r.dataset_id = std::string(text::trim(cells[0]));
        if (r.dataset_id.empty()) {
            throw ParseError(line_no, "empty dataset_id");
        }
        nlohmann::json params;
        try {
            params = nlohmann::json::parse(cells[2]);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(line_no, std::string("params_json: ") + e.what());
        }
        r.config = space.config_from_json(std::string(text::trim(cells[1])), params);
        auto train = text::parse_double(cells[3]);
        if (!train) {
            throw ParseError(line_no, "train_score is not a number");
        }
        r.train_score = *train;
        if (has_holdout) {
            auto holdout = text::parse_double(cells[4]);
            if (!holdout) {
                throw ParseError(line_no, "holdout_score is not a number");
            }
            r.holdout_score = *holdout;
        } else {
            r.holdout_score = r.train_score;
        }
        try {
            kb.add(std::move(r));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!has_holdout) {
        kb.warnings.push_back("holdout_score column absent; holdout scores copied from train scores");
    }
    return kb;
}

KnowledgeBase load_kb(const std::filesystem::path& path, const ConfigSpace& space) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open knowledge base '" + path.string() + "'");
    }
    return parse_kb(in, space);
}

void save_kb(std::ostream& out, const KnowledgeBase& kb) {
    out << "dataset_id\talgorithm\tparams_json\ttrain_score\tholdout_score\n";
    for (const auto& r : kb.results()) {
        out << r.dataset_id << '\t' << r.config.algorithm << '\t' << r.config.params_json().dump() << '\t'
            << text::format_double(r.train_score) << '\t' << text::format_double(r.holdout_score) << '\n';
    }
}

void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb) {
    std::ofstream out(path);
    if (!out) {
        throw NotFoundError("cannot write knowledge base '" + path.string() + "'");
    }
    save_kb(out, kb);
}

SyntheticKb synthesize_kb(const ConfigSpace& space, const SynthesisOptions& options) {
    if (options.n_datasets == 0) {
        throw EmptyInputError("synthesize_kb needs at least one dataset");
    }
    if (options.rank == 0) {
        throw ValidationError("latent rank must be at least 1");
    }
    if (!(options.noise_sd >= 0.0) || !(options.factor_sd >= 0.0)) {
        throw ValidationError("noise and factor standard deviations must be nonnegative");
    }

    SyntheticKb out{KnowledgeBase(space), {}, enumerate_space(space), {}};
    const std::size_t n_configs = out.configs.size();
    const std::size_t rank = options.rank;

    auto factor_rng = make_rng(options.seed, "synth.factors");
    auto noise_rng = make_rng(options.seed, "synth.noise");
    auto meta_rng = make_rng(options.seed, "synth.metafeatures");
    std::normal_distribution<double> std_normal(0.0, 1.0);

    std::vector<double> u(options.n_datasets * rank);
    std::vector<double> v(n_configs * rank);
    for (auto& x : u) {
        x = options.factor_sd * std_normal(factor_rng);
    }
    for (auto& x : v) {
        x = options.factor_sd * std_normal(factor_rng);
    }

    const std::size_t width = std::max<std::size_t>(3, std::to_string(options.n_datasets - 1).size());
    std::vector<std::string> dataset_ids;
    for (std::size_t d = 0; d < options.n_datasets; ++d) {
        std::string n = std::to_string(d);
        n.insert(0, width - n.size(), '0');
        dataset_ids.push_back("d" + n);
    }

    std::vector<std::string> config_ids;
    config_ids.reserve(n_configs);
    for (const auto& c : out.configs) {
        config_ids.push_back(c.config_id());
    }

    auto clip = [](double x) { return std::clamp(x, 0.0, 1.0); };
    for (std::size_t d = 0; d < options.n_datasets; ++d) {
        auto& latent = out.latent[dataset_ids[d]];
        latent.resize(n_configs);
        std::size_t best = 0;
        for (std::size_t a = 0; a < n_configs; ++a) {
            double dot = 0.0;
            for (std::size_t k = 0; k < rank; ++k) {
                dot += u[d * rank + k] * v[a * rank + k];
            }
            const double mean = options.mean_score + dot;
            latent[a] = clip(mean);
            double train_noise = 0.0;
            double holdout_noise = 0.0;
            if (options.noise_sd > 0.0) {
                train_noise = options.noise_sd * std_normal(noise_rng);
                holdout_noise = options.noise_sd * std_normal(noise_rng);
            }
            out.kb.add({dataset_ids[d], out.configs[a], clip(mean + train_noise), clip(mean + holdout_noise)});
            if (latent[a] > latent[best] || (latent[a] == latent[best] && config_ids[a] < config_ids[best])) {
                best = a;
            }
        }
        out.planted_best[dataset_ids[d]] = config_ids[best];
    }

    // Metafeatures: size slots are constant, the other slots are noisy linear
    // projections of the (standardized) dataset factors.
    std::vector<double> projection(metafeatures::kCount * rank);
    for (auto& w : projection) {
        w = std_normal(meta_rng);
    }
    const double scale = options.factor_sd > 0.0 ? options.factor_sd : 1.0;
    for (std::size_t d = 0; d < options.n_datasets; ++d) {
        metafeatures::MetafeatureVector mf;
        mf.dataset_id = dataset_ids[d];
        for (std::size_t s = 0; s < metafeatures::kCount; ++s) {
            double x = 0.0;
            for (std::size_t k = 0; k < rank; ++k) {
                x += projection[s * rank + k] * u[d * rank + k] / scale;
            }
            mf.values[s] = x + 0.1 * std_normal(meta_rng);
        }
        mf.set("n_instances", 1000.0);
        mf.set("n_features", 10.0);
        mf.set("n_classes", 2.0);
        mf.set("n_numeric_features", 10.0);
        mf.set("n_categorical_features", 0.0);
        out.kb.metafeatures.emplace(dataset_ids[d], std::move(mf));
    }
    return out;
}

}  // namespace algorec::kb
