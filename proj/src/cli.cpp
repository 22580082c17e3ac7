#include "algorec/cli.hpp"

#include "algorec/errors.hpp"
#include "algorec/harness.hpp"
#include "algorec/kb.hpp"
#include "algorec/metafeatures.hpp"
#include "algorec/recommenders/recommender.hpp"
#include "algorec/service.hpp"
#include "algorec/text.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace algorec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parse: return "parse";
        case ErrorKind::validation: return "validation";
        case ErrorKind::duplicate: return "duplicate";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::conflict: return "conflict";
        case ErrorKind::exhausted: return "exhausted";
        case ErrorKind::divergence: return "divergence";
        case ErrorKind::empty_input: return "empty_input";
        case ErrorKind::domain: return "domain";
        case ErrorKind::missing_metafeatures: return "missing_metafeatures";
    }
    return "error";
}

void report_error(std::ostream& err, std::string_view code, const std::string& message) {
    err << json{{"error", code}, {"message", message}}.dump() << '\n';
}

// Shared by the subcommands that read a knowledge base.
struct KbOptions {
    std::string kb;
    std::string space;
    std::string metafeatures;
};

void add_kb_options(CLI::App* cmd, KbOptions& o, bool kb_required) {
    auto* kb = cmd->add_option("--kb", o.kb, "Knowledge base TSV");
    if (kb_required) {
        kb->required();
    }
    cmd->add_option("--space", o.space, "Configuration space JSON (default: built-in benchmark grids)");
    cmd->add_option("--metafeatures", o.metafeatures,
                    "Metafeatures TSV (default: <kb>.metafeatures.tsv when present)");
}

kb::ConfigSpace load_space(const KbOptions& o) {
    return o.space.empty() ? kb::ConfigSpace::pmlb() : kb::ConfigSpace::load(o.space);
}

fs::path metafeatures_path(const KbOptions& o) {
    if (!o.metafeatures.empty()) {
        return o.metafeatures;
    }
    if (o.kb.empty()) {
        return {};
    }
    auto sibling = fs::path(o.kb).replace_extension(".metafeatures.tsv");
    return fs::exists(sibling) ? sibling : fs::path();
}

kb::KnowledgeBase load_knowledge_base(const KbOptions& o, const kb::ConfigSpace& space) {
    auto base = kb::load_kb(o.kb, space);
    if (auto mf = metafeatures_path(o); !mf.empty()) {
        base.metafeatures = metafeatures::read_metafeature_tsv(mf);
    }
    return base;
}

json kb_json(const KbOptions& o) {
    const auto mf = metafeatures_path(o);
    return {{"kb", o.kb},
            {"space", o.space.empty() ? json("builtin:pmlb") : json(o.space)},
            {"metafeatures", mf.empty() ? json(nullptr) : json(mf.string())}};
}

rec::StrategyParams parse_params(const std::vector<std::string>& raw) {
    rec::StrategyParams out;
    for (const auto& kv : raw) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ValidationError("--param expects key=value, got '" + kv + "'");
        }
        out[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return out;
}

// A path with an extension names the file itself; anything else is a directory.
fs::path output_file(const std::string& out, const char* default_name) {
    fs::path p(out);
    if (p.has_extension()) {
        if (p.has_parent_path()) {
            fs::create_directories(p.parent_path());
        }
        return p;
    }
    fs::create_directories(p);
    return p / default_name;
}

std::pair<std::string, int> parse_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    int port = 0;
    if (colon == std::string::npos ||
        std::from_chars(listen.data() + colon + 1, listen.data() + listen.size(), port).ec != std::errc() ||
        port <= 0 || port > 65535) {
        throw ValidationError("--listen expects host:port, got '" + listen + "'");
    }
    return {listen.substr(0, colon), port};
}

void emit_config(std::ostream& err, json config) {
    err << config.dump() << '\n';
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Algorithm and hyperparameter recommendation from a knowledge base of results", "algorec"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string out_dir = "./out";
    std::vector<std::string> raw_params;
    std::string strategy;
    KbOptions kbo;

    // bench
    auto* bench = app.add_subcommand("bench", "Replay recommendation trials against a knowledge base");
    harness::ExperimentPlan plan;
    std::size_t jobs = 0;
    add_kb_options(bench, kbo, true);
    bench->add_option("--strategy", strategy, "Recommender strategy")->required();
    bench->add_option("--param", raw_params, "Strategy hyperparameter, strategy.key=value");
    bench->add_option("--trials", plan.n_trials, "Number of trials")->capture_default_str();
    bench->add_option("--iters", plan.n_iterations, "Iterations per trial")->capture_default_str();
    bench->add_option("--n-init", plan.n_init, "Random KB rows used to train each trial")->capture_default_str();
    bench->add_option("--n-recs", plan.n_recs, "Recommendations per iteration")->capture_default_str();
    bench->add_option("--seed", seed, "Random seed")->capture_default_str();
    bench->add_option("--out", out_dir, "Output directory")->capture_default_str();
    bench->add_option("--jobs", jobs, "Parallel trials (0: all cores)")->capture_default_str();
    bench->add_flag("--timing", plan.record_timing, "Log per-iteration wall time");

    // loo
    auto* loo = app.add_subcommand("loo", "Leave-one-out: recommend for each dataset with the others as training data");
    harness::ExperimentPlan loo_plan;
    loo_plan.n_iterations = 100;
    bool cold = false;
    std::vector<std::string> held_out;
    add_kb_options(loo, kbo, true);
    loo->add_option("--strategy", strategy, "Recommender strategy")->required();
    loo->add_option("--param", raw_params, "Strategy hyperparameter, strategy.key=value");
    loo->add_option("--iters", loo_plan.n_iterations, "Iterations per held-out dataset")->capture_default_str();
    loo->add_option("--n-recs", loo_plan.n_recs, "Recommendations per iteration")->capture_default_str();
    loo->add_option("--threshold", loo_plan.threshold, "Gap counted as success")->capture_default_str();
    loo->add_option("--dataset", held_out, "Held-out dataset (default: every dataset)");
    loo->add_flag("--cold", cold, "Do not train on the other datasets");
    loo->add_option("--seed", seed, "Random seed")->capture_default_str();
    loo->add_option("--out", out_dir, "Output directory")->capture_default_str();

    // metafeatures
    auto* mf = app.add_subcommand("metafeatures", "Compute dataset metafeatures from CSV/TSV tables");
    std::vector<std::string> inputs;
    std::string target;
    char delimiter = 0;
    mf->add_option("inputs", inputs, "Table files; the dataset id is the file stem")
        ->required()
        ->check(CLI::ExistingFile);
    mf->add_option("--target", target, "Class column")->required();
    mf->add_option("--delimiter", delimiter, "Field delimiter (default: tab for .tsv, comma otherwise)");
    mf->add_option("--out", out_dir, "Output TSV or directory")->capture_default_str();
    mf->add_option("--seed", seed, "Unused; accepted for uniformity");

    // recommend
    auto* recommend = app.add_subcommand("recommend", "One-shot recommendations for a dataset");
    std::string dataset;
    std::size_t n_recs = 10;
    bool exclude_evaluated = false;
    add_kb_options(recommend, kbo, true);
    recommend->add_option("--strategy", strategy, "Recommender strategy")->required();
    recommend->add_option("--param", raw_params, "Strategy hyperparameter, strategy.key=value");
    recommend->add_option("--dataset", dataset, "Dataset to recommend for")->required();
    recommend->add_option("--n", n_recs, "Number of configurations")->capture_default_str();
    recommend->add_flag("--exclude-evaluated", exclude_evaluated,
                        "Skip configurations the KB already holds for the dataset");
    recommend->add_option("--seed", seed, "Random seed")->capture_default_str();

    // serve
    auto* serve = app.add_subcommand("serve", "Run the HTTP recommendation service");
    std::string listen = "127.0.0.1:8080";
    std::vector<std::string> snapshot_args;
    std::string state_dir;
    std::string ui_dir;
    serve->add_option("--listen", listen, "host:port")->envname("ALGOREC_LISTEN")->capture_default_str();
    serve->add_option("--kb", kbo.kb, "Seed KB, offered as snapshot 'default'")->envname("ALGOREC_KB");
    serve->add_option("--space", kbo.space, "Configuration space JSON")->envname("ALGOREC_SPACE");
    serve->add_option("--metafeatures", kbo.metafeatures, "Metafeatures TSV for the seed KB")
        ->envname("ALGOREC_METAFEATURES");
    serve->add_option("--snapshot", snapshot_args, "Additional seed KB, name=path");
    serve->add_option("--state-dir", state_dir, "Directory for session event logs")->envname("ALGOREC_STATE_DIR");
    serve->add_option("--ui-dir", ui_dir, "Static UI files served under /app")->envname("ALGOREC_UI_DIR");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a dense synthetic knowledge base");
    kb::SynthesisOptions so;
    synth->add_option("--datasets", so.n_datasets, "Number of datasets")->capture_default_str();
    synth->add_option("--rank", so.rank, "Latent rank")->capture_default_str();
    synth->add_option("--noise", so.noise_sd, "Score noise standard deviation")->capture_default_str();
    synth->add_option("--mean", so.mean_score, "Mean latent score")->capture_default_str();
    synth->add_option("--factor-sd", so.factor_sd, "Latent factor standard deviation")->capture_default_str();
    synth->add_option("--space", kbo.space, "Configuration space JSON (default: built-in benchmark grids)");
    synth->add_option("--seed", seed, "Random seed")->capture_default_str();
    synth->add_option("--out", out_dir, "Output KB TSV or directory")->capture_default_str();

    if (argc > 1 && argv[1][0] != '-') {
        const std::string name = argv[1];
        const auto subs = app.get_subcommands([&](CLI::App* sub) { return sub->get_name() == name; });
        if (subs.empty()) {
            report_error(err, "usage", "unknown subcommand '" + name + "'");
            return 2;
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e, out, err);
        }
        report_error(err, "usage", e.what());
        return 2;
    }

    try {
        const auto params = parse_params(raw_params);

        if (bench->parsed()) {
            plan.strategy = strategy;
            plan.params = params;
            plan.seed = seed;
            plan.validate();
            json config = {{"subcommand", "bench"}, {"plan", plan.to_json()}, {"jobs", jobs}, {"out", out_dir}};
            config.update(kb_json(kbo));
            emit_config(err, config);
            const auto space = load_space(kbo);
            const auto base = load_knowledge_base(kbo, space);
            const harness::ReplayIndex index(base);
            const auto report = harness::run_experiment(index, plan, jobs);
            harness::write_report(out_dir, index, report);
            std::ofstream(fs::path(out_dir) / "config.json") << config.dump(2) << '\n';
            out << "wrote " << report.trials.size() << " trials to " << out_dir << '\n';
        } else if (loo->parsed()) {
            loo_plan.strategy = strategy;
            loo_plan.params = params;
            loo_plan.seed = seed;
            loo_plan.mode = harness::Mode::leave_one_out;
            loo_plan.validate();
            json config = {{"subcommand", "loo"},
                           {"plan", loo_plan.to_json()},
                           {"pretrain", !cold},
                           {"datasets", held_out},
                           {"out", out_dir}};
            config.update(kb_json(kbo));
            emit_config(err, config);
            const auto space = load_space(kbo);
            const auto base = load_knowledge_base(kbo, space);
            const harness::ReplayIndex index(base);
            const auto logs = harness::run_leave_one_out_all(index, loo_plan, !cold, 1, held_out);
            harness::write_loo(out_dir, index, logs);
            std::ofstream(fs::path(out_dir) / "config.json") << config.dump(2) << '\n';
            out << "wrote " << logs.size() << " held-out runs to " << out_dir << '\n';
        } else if (mf->parsed()) {
            const auto path = output_file(out_dir, "metafeatures.tsv");
            emit_config(err, {{"subcommand", "metafeatures"},
                              {"inputs", inputs},
                              {"target", target},
                              {"delimiter", delimiter ? json(std::string(1, delimiter)) : json(nullptr)},
                              {"out", path.string()}});
            std::map<std::string, metafeatures::MetafeatureVector> vectors;
            for (const auto& input : inputs) {
                const auto id = fs::path(input).stem().string();
                if (vectors.count(id)) {
                    throw DuplicateError("two inputs share the dataset id '" + id + "'");
                }
                vectors.emplace(id, metafeatures::compute_metafeatures(
                                        metafeatures::read_table(input, target, delimiter), id));
            }
            metafeatures::write_metafeature_tsv(path, vectors);
            out << "wrote " << vectors.size() << " metafeature vectors to " << path.string() << '\n';
        } else if (recommend->parsed()) {
            json config = {{"subcommand", "recommend"},
                           {"strategy", strategy},
                           {"params", params},
                           {"dataset", dataset},
                           {"n", n_recs},
                           {"exclude_evaluated", exclude_evaluated},
                           {"seed", seed}};
            config.update(kb_json(kbo));
            emit_config(err, config);
            const auto space = load_space(kbo);
            const auto base = load_knowledge_base(kbo, space);
            auto catalog = std::make_shared<const rec::Catalog>(space);
            auto model = rec::make_recommender(strategy, catalog, params, derive_seed(seed, "recommend.model"));
            model->set_parallel(false);
            for (const auto& [id, vec] : base.metafeatures) {
                model->set_metafeatures(vec);
            }
            model->update(std::span<const kb::ExperimentResult>(base.results()));
            rec::RepeatFilter filter(catalog->size());
            if (exclude_evaluated) {
                for (const auto& r : base.results()) {
                    if (r.dataset_id == dataset) {
                        filter.insert(dataset, catalog->index_of(r.config));
                    }
                }
            }
            auto rng = make_rng(seed, "recommend");
            const auto recs = model->recommend(dataset, n_recs, filter, rng);
            for (std::size_t i = 0; i < recs.size(); ++i) {
                const auto& c = catalog->config(recs[i].config);
                out << json{{"rank", i + 1},
                            {"config_id", catalog->id(recs[i].config)},
                            {"algorithm", c.algorithm},
                            {"params", c.params_json()},
                            {"predicted_score", recs[i].predicted}}
                           .dump()
                    << '\n';
            }
        } else if (serve->parsed()) {
            service::ServiceConfig sc;
            sc.space = load_space(kbo);
            json snapshots = json::object();
            if (!kbo.kb.empty()) {
                sc.snapshots["default"] = std::make_shared<const kb::KnowledgeBase>(load_knowledge_base(kbo, sc.space));
                sc.default_snapshot = "default";
                snapshots["default"] = kbo.kb;
            }
            for (const auto& arg : snapshot_args) {
                const auto eq = arg.find('=');
                if (eq == std::string::npos || eq == 0) {
                    throw ValidationError("--snapshot expects name=path, got '" + arg + "'");
                }
                KbOptions so_kb{arg.substr(eq + 1), kbo.space, {}};
                sc.snapshots[arg.substr(0, eq)] =
                    std::make_shared<const kb::KnowledgeBase>(load_knowledge_base(so_kb, sc.space));
                snapshots[arg.substr(0, eq)] = so_kb.kb;
            }
            if (!state_dir.empty()) {
                sc.state_dir = state_dir;
            }
            if (!ui_dir.empty()) {
                sc.ui_dir = ui_dir;
            }
            const auto [host, port] = parse_listen(listen);
            emit_config(err, {{"subcommand", "serve"},
                              {"listen", listen},
                              {"space", kbo.space.empty() ? json("builtin:pmlb") : json(kbo.space)},
                              {"snapshots", snapshots},
                              {"state_dir", state_dir.empty() ? json(nullptr) : json(state_dir)},
                              {"ui_dir", ui_dir.empty() ? json(nullptr) : json(ui_dir)}});
            service::Service svc(std::move(sc));
            service::serve(svc, host, port);
        } else if (synth->parsed()) {
            so.seed = seed;
            const auto path = output_file(out_dir, "kb.tsv");
            auto mf_path = path;
            mf_path.replace_extension(".metafeatures.tsv");
            auto planted_path = path;
            planted_path.replace_extension(".planted.tsv");
            emit_config(err, {{"subcommand", "synth"},
                              {"datasets", so.n_datasets},
                              {"rank", so.rank},
                              {"noise", so.noise_sd},
                              {"mean", so.mean_score},
                              {"factor_sd", so.factor_sd},
                              {"seed", seed},
                              {"space", kbo.space.empty() ? json("builtin:pmlb") : json(kbo.space)},
                              {"out", path.string()}});
            const auto synthetic = kb::synthesize_kb(load_space(kbo), so);
            kb::save_kb(path, synthetic.kb);
            metafeatures::write_metafeature_tsv(mf_path, synthetic.kb.metafeatures);
            std::ofstream planted(planted_path);
            planted << "dataset_id\tconfig_id\n";
            for (const auto& [ds, id] : synthetic.planted_best) {
                planted << ds << '\t' << id << '\n';
            }
            out << "wrote " << synthetic.kb.size() << " results to " << path.string() << '\n';
        }
    } catch (const Error& e) {
        report_error(err, kind_name(e.kind()), e.what());
        return 1;
    } catch (const std::exception& e) {
        report_error(err, "internal", e.what());
        return 1;
    }
    return 0;
}

}  // namespace algorec::cli
