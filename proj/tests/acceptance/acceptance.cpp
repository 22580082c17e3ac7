// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when a criterion fails that is not listed as a known failure.

#include "algorec/errors.hpp"
#include "algorec/harness.hpp"
#include "algorec/kb.hpp"
#include "algorec/recommenders/strategies.hpp"
#include "CLI11.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

using namespace algorec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_s;
    bool known_failure;
    std::function<Outcome()> check;
};

std::string fmt(double x, int precision = 4) {
    std::ostringstream s;
    s.precision(precision);
    s << x;
    return s.str();
}

kb::ConfigSpace data_space(const std::string& name) { return kb::ConfigSpace::load(ALGOREC_DATA_DIR "/" + name); }

std::vector<rec::ConfigIndex> all_configs(std::size_t n) {
    std::vector<rec::ConfigIndex> out(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
}

// 1: neighbourhood, SlopeOne and co-cluster predictions against brute force.
Outcome equation_oracles() {
    std::mt19937_64 gen(20240601);
    double worst = 0.0;
    std::size_t predictions = 0;
    const int n_kbs = 200;
    for (int rep = 0; rep < n_kbs; ++rep) {
        const std::size_t n_configs = 2 + rep % 9;
        const std::size_t n_datasets = 1 + rep % 6;
        const auto r = oracle::random_ratings(gen, n_datasets, n_configs, 20);
        const std::size_t k = 1 + rep % 4;
        auto catalog = std::make_shared<const rec::Catalog>(oracle::tiny_space(n_configs));
        rec::KnnMlRecommender ml(catalog, k);
        rec::KnnDataRecommender data(catalog, k);
        rec::SlopeOneRecommender slope(catalog);
        rec::CoclusterRecommender cc(catalog, {static_cast<std::size_t>(1 + rep % 3), static_cast<std::size_t>(1 + (rep / 3) % 3), 10}, static_cast<std::uint64_t>(rep));
        const auto ratings = oracle::to_ratings(r);
        ml.update(ratings);
        data.update(ratings);
        slope.update(ratings);
        cc.update(ratings);

        const auto& m = cc.ratings();
        std::map<std::string, int> dc;
        for (rec::DatasetIndex d = 0; d < m.dataset_count(); ++d) {
            dc[m.dataset_name(d)] = cc.model().dataset_cluster[d];
        }
        std::map<rec::ConfigIndex, int> ac;
        for (rec::ConfigIndex a = 0; a < n_configs; ++a) {
            if (cc.model().config_cluster[a] >= 0) {
                ac[a] = cc.model().config_cluster[a];
            }
        }

        std::vector<std::string> ds = {"unseen"};
        for (std::size_t i = 0; i < n_datasets; ++i) {
            ds.push_back("d" + std::to_string(i));
        }
        const auto candidates = all_configs(n_configs);
        for (const auto& d : ds) {
            const auto p_ml = ml.predict_many(d, candidates);
            const auto p_data = data.predict_many(d, candidates);
            const auto p_slope = slope.predict_many(d, candidates);
            const auto p_cc = cc.predict_many(d, candidates);
            for (rec::ConfigIndex a = 0; a < n_configs; ++a) {
                worst = std::max(worst, std::abs(p_ml[a] - oracle::knn_ml(r, a, d, k)));
                worst = std::max(worst, std::abs(p_data[a] - oracle::knn_data(r, a, d, k)));
                worst = std::max(worst, std::abs(p_slope[a] - oracle::slopeone(r, a, d)));
                worst = std::max(worst, std::abs(p_cc[a] - oracle::cocluster(r, dc, ac, a, d)));
                predictions += 4;
            }
        }
    }
    return {worst <= 1e-9, std::to_string(n_kbs) + " KBs, " + std::to_string(predictions) +
                               " predictions, max abs error " + fmt(worst, 3)};
}

// 2: one SGD step against central differences of the single-rating loss.
Outcome svd_gradient() {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 0.3);
    double worst = 0.0;
    const int points = 1000;
    for (int point = 0; point < points; ++point) {
        rec::SvdHyper h;
        h.n_factors = 1 + point % 8;
        h.learning_rate = 1e-3 + 0.01 * u(gen);
        h.regularization = 0.1 * u(gen);
        rec::SvdState s(h, 5);
        s.ensure_dataset(3);
        s.mu = u(gen);
        for (auto* v : {&s.dataset_bias, &s.config_bias, &s.dataset_factors, &s.config_factors}) {
            for (auto& x : *v) {
                x = g(gen);
            }
        }
        const rec::IndexedRating r{static_cast<rec::DatasetIndex>(point % 4), static_cast<rec::ConfigIndex>(point % 5),
                                   u(gen)};
        auto stepped = s;
        stepped.sgd_step(r);

        auto touched = [&r](rec::SvdState& st) {
            std::vector<double*> out = {&st.dataset_bias[r.dataset], &st.config_bias[r.config]};
            for (auto& x : st.p(r.dataset)) {
                out.push_back(&x);
            }
            for (auto& x : st.q(r.config)) {
                out.push_back(&x);
            }
            return out;
        };
        const auto after = touched(stepped);
        const auto params = touched(s);
        double diff_sq = 0.0;
        double norm_sq = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double step = 1e-4;
            const double x = *params[i];
            *params[i] = x + step;
            const double up = rec::svd_rating_loss(s, r);
            *params[i] = x - step;
            const double down = rec::svd_rating_loss(s, r);
            *params[i] = x;
            // the loss carries a factor 1/2 relative to the update rule
            const double expected = -h.learning_rate / 2.0 * (up - down) / (2.0 * step);
            const double actual = *after[i] - x;
            diff_sq += (actual - expected) * (actual - expected);
            norm_sq += expected * expected;
        }
        worst = std::max(worst, std::sqrt(diff_sq / norm_sq));
    }
    return {worst <= 1e-5, std::to_string(points) + " points, max relative error " + fmt(worst, 3)};
}

// 3: noiseless rank-1 KB, 10 x 50, 60% observed.
Outcome svd_recovery() {
    kb::SynthesisOptions o;
    o.n_datasets = 10;
    o.rank = 1;
    o.noise_sd = 0.0;
    o.seed = 2;
    const auto space = data_space("space_knn.json");
    const auto synthetic = kb::synthesize_kb(space, o);
    auto catalog = std::make_shared<const rec::Catalog>(space);

    auto all = synthetic.kb.results();
    std::mt19937_64 gen(5);
    std::shuffle(all.begin(), all.end(), gen);
    const std::size_t n_train = all.size() * 6 / 10;

    rec::SvdHyper h;
    h.n_factors = 1;
    h.learning_rate = 0.3;
    h.regularization = 0.0;
    h.init_sd = 0.1;
    h.epochs_per_result = 0.0;
    h.min_epochs = 500;
    h.max_epochs = 500;
    rec::SvdRecommender model(catalog, h, 9);
    model.update(std::span(all).first(n_train));

    double sq = 0.0;
    for (std::size_t i = n_train; i < all.size(); ++i) {
        const double e = model.predict(all[i].dataset_id, catalog->index_of(all[i].config)) - all[i].train_score;
        sq += e * e;
    }
    const double rmse = std::sqrt(sq / static_cast<double>(all.size() - n_train));
    return {rmse <= 0.01 && model.last_epochs() <= 500,
            std::to_string(catalog->size()) + " configs x " + std::to_string(o.n_datasets) + " datasets, " +
                std::to_string(model.last_epochs()) + " epochs, held-out RMSE " + fmt(rmse)};
}

kb::KnowledgeBase replay_kb() {
    kb::SynthesisOptions o;
    o.n_datasets = 20;
    o.rank = 2;
    o.noise_sd = 0.01;
    o.seed = 1;
    return kb::synthesize_kb(data_space("space_small.json"), o).kb;
}

bool tied(const harness::Interval& a, const harness::Interval& b) { return a.lo <= b.hi && b.lo <= a.hi; }

// x <= y by at least 0.01, or x and y tied.
bool ordered(const harness::Interval& x, const harness::Interval& y) {
    return x.median + 0.01 <= y.median || tied(x, y);
}

std::string interval(const harness::Interval& i) {
    return fmt(i.median) + " [" + fmt(i.lo) + ", " + fmt(i.hi) + "]";
}

// 4: replay on a rank-2 KB, 30 trials, medians at iteration 150.
Outcome scaled_replay() {
    const auto base = replay_kb();
    const harness::ReplayIndex index(base);
    std::map<std::string, harness::Interval> at150;
    for (const std::string s : {"svd", "knn-data", "random"}) {
        harness::ExperimentPlan plan;
        plan.strategy = s;
        plan.n_trials = 30;
        plan.n_iterations = 150;
        plan.n_init = 100;
        plan.n_recs = 10;
        plan.seed = 4;
        const auto report = harness::run_experiment(index, plan);
        if (report.delta_ba.size() < 150) {
            return {false, s + " stopped after " + std::to_string(report.delta_ba.size()) + " iterations"};
        }
        at150[s] = report.delta_ba[149];
    }
    const auto& svd = at150["svd"];
    const auto& knn = at150["knn-data"];
    const auto& rnd = at150["random"];
    const bool converged = svd.median <= 0.05;
    const bool order = ordered(svd, knn) && ordered(knn, rnd);
    return {converged && order, "median gap at 150: svd " + interval(svd) + ", knn-data " + interval(knn) +
                                    ", random " + interval(rnd) + (converged ? "" : "; svd above 0.05") +
                                    (order ? "" : "; ordering violated")};
}

// 5: a planted twin leads knn-meta, then the rest is drawn uniformly.
Outcome meta_cold_start() {
    const std::size_t n_configs = 40;
    auto catalog = std::make_shared<const rec::Catalog>(oracle::tiny_space(n_configs));
    std::size_t twin_hits = 0;
    const int runs = 50;
    for (int run = 0; run < runs; ++run) {
        std::mt19937_64 gen(1000 + run);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::uniform_int_distribution<rec::ConfigIndex> pick(0, n_configs - 1);
        auto model = rec::make_recommender("knn-meta", catalog, {}, static_cast<std::uint64_t>(run));
        std::vector<rec::Rating> ratings;
        const auto best = pick(gen);
        for (int d = 0; d < 6; ++d) {
            const std::string name = d == 0 ? "twin" : "other" + std::to_string(d);
            metafeatures::MetafeatureVector mf;
            mf.dataset_id = name;
            for (auto& v : mf.values) {
                v = u(gen) * 10.0;
            }
            model->set_metafeatures(mf);
            if (d == 0) {
                mf.dataset_id = "new";
                model->set_metafeatures(mf);
            }
            for (rec::ConfigIndex a = 0; a < n_configs; ++a) {
                if (u(gen) < 0.3 || (d == 0 && a == best)) {
                    ratings.push_back({name, a, d == 0 && a == best ? 0.99 : 0.2 + 0.7 * u(gen)});
                }
            }
        }
        model->update(ratings);
        rec::RepeatFilter filter(n_configs);
        Rng rng(static_cast<std::uint64_t>(run));
        if (model->recommend("new", 1, filter, rng).front().config == best) {
            ++twin_hits;
        }
    }

    // Archives cover configs 0..9; after those are filtered the draws must be uniform.
    auto model = rec::make_recommender("knn-meta", catalog, {}, 3);
    std::vector<rec::Rating> ratings;
    for (const std::string d : {"a", "b"}) {
        metafeatures::MetafeatureVector mf;
        mf.dataset_id = d;
        mf.values.fill(d == "a" ? 1.0 : 2.0);
        model->set_metafeatures(mf);
        for (rec::ConfigIndex c = 0; c < 10; ++c) {
            ratings.push_back({d, c, 0.5 + 0.01 * c});
        }
    }
    metafeatures::MetafeatureVector mf;
    mf.dataset_id = "new";
    mf.values.fill(1.5);
    model->set_metafeatures(mf);
    model->update(ratings);
    rec::RepeatFilter exhausted(n_configs);
    Rng rng(99);
    const auto archive_batch = model->recommend("new", 10, exhausted, rng);
    bool archive_first = true;
    for (const auto& r : archive_batch) {
        archive_first = archive_first && r.config < 10;
    }
    std::vector<std::size_t> counts(n_configs, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        auto filter = exhausted;
        ++counts[model->recommend("new", 1, filter, rng).front().config];
    }
    const std::vector<std::size_t> rest(counts.begin() + 10, counts.end());
    const bool archive_skipped = std::all_of(counts.begin(), counts.begin() + 10, [](auto c) { return c == 0; });
    const double chi = oracle::chi_square_uniform(rest);
    const double critical = oracle::chi_square_critical_99(rest.size() - 1);
    return {twin_hits == static_cast<std::size_t>(runs) && archive_first && archive_skipped && chi < critical,
            "twin best first in " + std::to_string(twin_hits) + "/" + std::to_string(runs) + " runs; chi2 " +
                fmt(chi) + " < " + fmt(critical) + " over " + std::to_string(draws) + " draws on " +
                std::to_string(rest.size()) + " configs"};
}

// 6: exact relative gaps.
Outcome delta_ba_exact() {
    bool ok = harness::delta_ba(0.9, 0.81) == 0.1;
    std::mt19937_64 gen(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t zeros = 0;
    for (int i = 0; i < 1000; ++i) {
        const double x = 1.0 - u(gen);  // (0, 1]
        zeros += harness::delta_ba(x, x) == 0.0 ? 1 : 0;
    }
    ok = ok && zeros == 1000 && harness::delta_ba(1.0, 1.0) == 0.0;
    return {ok, std::string("delta_ba(0.9, 0.81) ") + (harness::delta_ba(0.9, 0.81) == 0.1 ? "==" : "!=") + " 0.1; " + std::to_string(zeros) +
                    "/1000 self gaps are 0"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            out[fs::relative(e.path(), dir).string()] = slurp(e.path());
        }
    }
    return out;
}

// 7: no repeated (dataset, config) across 10^6 events; reruns are byte-identical.
Outcome filter_and_determinism() {
    kb::SynthesisOptions o;
    o.n_datasets = 30;
    o.seed = 8;
    const auto base = kb::synthesize_kb(data_space("space_knn.json"), o).kb;
    const harness::ReplayIndex index(base);
    const std::size_t target = 1'000'000;
    const std::size_t per_strategy = target / std::size(rec::kStrategyNames);
    std::size_t events = 0;
    std::size_t duplicates = 0;
    for (auto name : rec::kStrategyNames) {
        std::size_t mine = 0;
        for (std::uint64_t chunk = 0; mine < per_strategy; ++chunk) {
            harness::ExperimentPlan plan;
            plan.strategy = std::string(name);
            plan.n_trials = 16;
            plan.n_iterations = 150;
            plan.n_init = 50;
            plan.n_recs = 10;
            plan.seed = 100 + chunk;
            const auto report = harness::run_experiment(index, plan);
            for (const auto& t : report.trials) {
                std::set<std::pair<std::string, rec::ConfigIndex>> seen;
                for (const auto& it : t.iterations) {
                    for (const auto& r : it.recommendations) {
                        duplicates += seen.emplace(it.dataset_id, r.config).second ? 0 : 1;
                        ++mine;
                    }
                }
            }
        }
        events += mine;
    }

    const auto root = fs::temp_directory_path() / "algorec_acceptance_determinism";
    std::size_t identical = 0;
    for (auto name : rec::kStrategyNames) {
        harness::ExperimentPlan plan;
        plan.strategy = std::string(name);
        plan.n_trials = 4;
        plan.n_iterations = 20;
        plan.n_init = 50;
        plan.n_recs = 5;
        plan.seed = 17;
        fs::remove_all(root);
        harness::write_report(root / "a", index, harness::run_experiment(index, plan));
        harness::write_report(root / "b", index, harness::run_experiment(index, plan));
        identical += tree(root / "a") == tree(root / "b") ? 1 : 0;
    }
    fs::remove_all(root);
    return {events >= target && duplicates == 0 && identical == std::size(rec::kStrategyNames),
            std::to_string(events) + " events, " + std::to_string(duplicates) + " duplicates; " +
                std::to_string(identical) + "/" + std::to_string(std::size(rec::kStrategyNames)) +
                " strategies byte-identical on rerun"};
}

// 8: grid sizes and lossless round trips.
Outcome config_space_fidelity() {
    const auto space = kb::ConfigSpace::pmlb();
    std::map<std::string, std::size_t> counted;
    for (const auto& c : kb::enumerate_space(space)) {
        ++counted[c.algorithm];
    }
    bool products = space.constraints().empty();
    for (const auto& grid : space.algorithms()) {
        std::size_t product = 1;
        for (const auto& p : grid.params) {
            product *= p.values.size();
        }
        products = products && counted[grid.algorithm] == product;
    }
    const bool named = counted["AdaBoostClassifier"] == 35 && counted["KNeighborsClassifier"] == 50 &&
                       counted["MultinomialNB"] == 20;

    const bool space_json = kb::ConfigSpace::from_json(space.to_json()) == space &&
                            kb::ConfigSpace::from_json(nlohmann::json::parse(space.to_json().dump())) == space;

    kb::SynthesisOptions o;
    o.n_datasets = 3;
    o.seed = 21;
    const auto synthetic = kb::synthesize_kb(space, o);
    std::stringstream first;
    kb::save_kb(first, synthetic.kb);
    auto back = kb::parse_kb(first, space);
    back.metafeatures = synthetic.kb.metafeatures;
    std::stringstream second;
    kb::save_kb(second, back);
    const bool kb_tsv = back == synthetic.kb && second.str() == first.str();

    std::size_t total = 0;
    for (const auto& [a, n] : counted) {
        total += n;
    }
    return {products && named && space_json && kb_tsv,
            "AdaBoost " + std::to_string(counted["AdaBoostClassifier"]) + ", KNeighbors " +
                std::to_string(counted["KNeighborsClassifier"]) + ", MultinomialNB " +
                std::to_string(counted["MultinomialNB"]) + ", " + std::to_string(total) + " configs in " +
                std::to_string(counted.size()) + " algorithms; space JSON " + (space_json ? "lossless" : "LOSSY") +
                ", KB TSV " + (kb_tsv ? "lossless" : "LOSSY") + " over " + std::to_string(synthetic.kb.size()) +
                " rows"};
}

double median_evaluations(const std::vector<harness::TrialLog>& logs, std::size_t cap) {
    std::vector<double> v;
    for (const auto& l : logs) {
        v.push_back(static_cast<double>(l.evaluations_to_threshold.value_or(cap + 1)));
    }
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// 9: leave-one-out, pre-trained vs cold SVD.
Outcome leave_one_out_advantage() {
    const auto base = replay_kb();
    const harness::ReplayIndex index(base);
    harness::ExperimentPlan plan;
    plan.strategy = "svd";
    plan.mode = harness::Mode::leave_one_out;
    plan.n_iterations = 200;
    plan.n_recs = 1;
    plan.threshold = 0.05;
    plan.seed = 9;
    const auto warm = harness::run_leave_one_out_all(index, plan, true);
    const auto cold = harness::run_leave_one_out_all(index, plan, false);
    const std::size_t cap = plan.n_iterations * plan.n_recs;
    const double w = median_evaluations(warm, cap);
    const double c = median_evaluations(cold, cap);
    return {warm.size() == 20 && w < c, std::to_string(warm.size()) + " held-out datasets, median evaluations " +
                                            fmt(w) + " pre-trained vs " + fmt(c) + " cold (unreached counts as " +
                                            std::to_string(cap + 1) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance checks", "acceptance"};
    std::vector<int> only;
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> criteria = {
        {1, "prediction oracles", 10.0, false, equation_oracles},
        {2, "svd gradient check", 5.0, false, svd_gradient},
        {3, "svd rank-1 recovery", 30.0, false, svd_recovery},
        {4, "scaled replay", 600.0, true, scaled_replay},
        {5, "knn-meta cold start", 60.0, false, meta_cold_start},
        {6, "delta_ba exactness", 60.0, false, delta_ba_exact},
        {7, "repeat filter and determinism", 1e9, false, filter_and_determinism},
        {8, "config space fidelity", 60.0, false, config_space_fidelity},
        {9, "leave-one-out advantage", 1e9, true, leave_one_out_advantage},
    };

    int unexpected = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
            continue;
        }
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (seconds > c.budget_s) {
            o.pass = false;
            o.detail += "; over the " + fmt(c.budget_s) + " s budget";
        }
        std::cout << (o.pass ? "PASS" : "FAIL") << " C" << c.id << ' ' << c.name << " (" << fmt(seconds, 3)
                  << " s): " << o.detail << (!o.pass && c.known_failure ? " [known failure]" : "") << std::endl;
        if (!o.pass && !c.known_failure) {
            ++unexpected;
        }
    }
    return unexpected == 0 ? 0 : 1;
}
