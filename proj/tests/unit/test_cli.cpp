#include "doctest.h"

#include "algorec/cli.hpp"
#include "algorec/kb.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::initializer_list<std::string> args) {
    std::vector<std::string> owned{"algorec"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : owned) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = algorec::cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty()) {
            out.push_back(line);
        }
    }
    return out;
}

json last_error(const std::string& err) {
    const auto lines = lines_of(err);
    REQUIRE_FALSE(lines.empty());
    return json::parse(lines.back());
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
    ~TempDir() { fs::remove_all(path); }
};

const std::string kSmall = ALGOREC_DATA_DIR "/space_small.json";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes the same files for the same seed") {
    TempDir dir("algorec_cli_synth");
    const auto a = (dir.path / "a" / "kb.tsv").string();
    const auto b = (dir.path / "b" / "kb.tsv").string();
    auto first = run({"synth", "--space", kSmall, "--datasets", "5", "--seed", "9", "--out", a});
    auto second = run({"synth", "--space", kSmall, "--datasets", "5", "--seed", "9", "--out", b});
    REQUIRE(first.code == 0);
    REQUIRE(second.code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(slurp(dir.path / "a" / "kb.metafeatures.tsv") == slurp(dir.path / "b" / "kb.metafeatures.tsv"));
    CHECK(slurp(dir.path / "a" / "kb.planted.tsv") == slurp(dir.path / "b" / "kb.planted.tsv"));
    CHECK(lines_of(slurp(a)).size() == 1 + 5 * 200);
    // The resolved configuration is echoed as the first stderr line.
    CHECK(json::parse(lines_of(first.err).front())["subcommand"] == "synth");

    const auto dir_out = (dir.path / "c").string();
    CHECK(run({"synth", "--space", kSmall, "--datasets", "2", "--out", dir_out}).code == 0);
    CHECK(fs::exists(dir.path / "c" / "kb.tsv"));
}

TEST_CASE("recommend prints ranked configurations") {
    TempDir dir("algorec_cli_recommend");
    const auto kb = (dir.path / "kb.tsv").string();
    REQUIRE(run({"synth", "--space", kSmall, "--datasets", "6", "--seed", "1", "--out", kb}).code == 0);
    auto res = run({"recommend", "--kb", kb, "--space", kSmall, "--strategy", "average", "--dataset", "new", "--n", "3"});
    REQUIRE(res.code == 0);
    const auto rows = lines_of(res.out);
    REQUIRE(rows.size() == 3);
    double previous = 2.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = json::parse(rows[i]);
        CHECK(row["rank"] == i + 1);
        CHECK(row["predicted_score"].get<double>() <= previous);
        previous = row["predicted_score"].get<double>();
    }

    // knn-meta picks up the sibling metafeature file without a flag.
    const auto first_dataset = algorec::kb::load_kb(kb, algorec::kb::ConfigSpace::load(kSmall)).datasets().front();
    auto meta = run({"recommend", "--kb", kb, "--space", kSmall, "--strategy", "knn-meta", "--dataset", first_dataset,
                     "--n", "2"});
    CHECK(meta.code == 0);
    CHECK(lines_of(meta.out).size() == 2);

    // Every config is evaluated on a dense synthetic KB.
    auto evaluated = run({"recommend", "--kb", kb, "--space", kSmall, "--strategy", "average", "--dataset",
                          first_dataset, "--exclude-evaluated"});
    CHECK(evaluated.code == 1);
    CHECK(last_error(evaluated.err)["error"] == "exhausted");
    CHECK(json::parse(lines_of(evaluated.err).front())["exclude_evaluated"] == true);
}

TEST_CASE("bench writes a gap table with one row per iteration") {
    TempDir dir("algorec_cli_bench");
    const auto kb = (dir.path / "kb.tsv").string();
    const auto out = (dir.path / "run").string();
    REQUIRE(run({"synth", "--space", kSmall, "--datasets", "8", "--seed", "2", "--out", kb}).code == 0);
    auto res = run({"bench", "--kb", kb, "--space", kSmall, "--strategy", "svd", "--trials", "2", "--iters", "10",
                    "--n-init", "50", "--seed", "3", "--out", out, "--jobs", "1"});
    REQUIRE(res.code == 0);
    const auto table = lines_of(slurp(fs::path(out) / "delta_ba.tsv"));
    CHECK(table.size() == 11);
    CHECK(fs::exists(fs::path(out) / "config.json"));
    CHECK(fs::exists(fs::path(out) / "trials" / "trial_0.jsonl"));
    CHECK(fs::exists(fs::path(out) / "trials" / "trial_1.jsonl"));
    CHECK(json::parse(slurp(fs::path(out) / "config.json"))["plan"]["strategy"] == "svd");

    const auto loo_out = (dir.path / "loo").string();
    auto loo = run({"loo", "--kb", kb, "--space", kSmall, "--strategy", "average", "--iters", "3", "--out", loo_out});
    CHECK(loo.code == 0);
    CHECK(fs::exists(fs::path(loo_out) / "config.json"));
}

TEST_CASE("metafeatures reads tables and names vectors by file stem") {
    TempDir dir("algorec_cli_mf");
    fs::create_directories(dir.path);
    const auto table = (dir.path / "toy.csv").string();
    std::ofstream(table) << "x,y,label\n1,2,a\n2,1,b\n3,5,a\n4,4,b\n";
    const auto out = (dir.path / "mf.tsv").string();
    auto res = run({"metafeatures", table, "--target", "label", "--out", out});
    REQUIRE(res.code == 0);
    const auto rows = lines_of(slurp(out));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].rfind("toy\t", 0) == 0);
    CHECK(run({"metafeatures", table, "--target", "missing", "--out", out}).code == 1);
}

TEST_CASE("usage errors exit with 2 and runtime failures with 1") {
    auto unknown = run({"frobnicate"});
    CHECK(unknown.code == 2);
    CHECK(last_error(unknown.err)["error"] == "usage");
    CHECK(run({}).code == 2);
    CHECK(run({"bench", "--kb", "x.tsv"}).code == 2);
    CHECK(run({"recommend", "--kb", "x.tsv", "--strategy", "average"}).code == 2);
    CHECK(run({"synth", "--datasets", "many"}).code == 2);

    auto missing = run({"recommend", "--kb", "/nonexistent/kb.tsv", "--strategy", "average", "--dataset", "d"});
    CHECK(missing.code == 1);
    CHECK(last_error(missing.err).contains("message"));
    CHECK(run({"bench", "--kb", "/nonexistent/kb.tsv", "--strategy", "nope"}).code == 1);
    CHECK(run({"recommend", "--kb", "/nonexistent/kb.tsv", "--strategy", "svd", "--dataset", "d", "--param",
               "oops"})
              .code == 1);
    CHECK(run({"serve", "--listen", "nowhere"}).code == 1);

    auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("synth") != std::string::npos);
}

}  // TEST_SUITE
