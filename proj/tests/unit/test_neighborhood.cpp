#include "doctest.h"

#include "algorec/errors.hpp"
#include "algorec/recommenders/strategies.hpp"
#include "oracles.hpp"

#include <numeric>

using namespace algorec;
using namespace algorec::rec;

namespace {

std::shared_ptr<const Catalog> tiny(std::size_t n) { return std::make_shared<const Catalog>(oracle::tiny_space(n)); }

RatingMatrix matrix(std::size_t n_configs, const oracle::Ratings& r) {
    RatingMatrix m(n_configs);
    for (const auto& [key, v] : r) {
        m.add(m.intern(key.first), key.second, v);
    }
    return m;
}

std::vector<ConfigIndex> all_configs(std::size_t n) {
    std::vector<ConfigIndex> out(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
}

}  // namespace

TEST_SUITE("neighborhood") {

TEST_CASE("msd similarity examples") {
    CHECK(msd_similarity({{"k1", 0.4}, {"k2", 0.9}}, {{"k1", 0.4}, {"k2", 0.9}, {"k3", 0.1}}) == 1.0);
    CHECK(msd_similarity({{"k1", 0.4}}, {{"k2", 0.4}}) == 0.0);
    CHECK(msd_similarity({}, {}) == 0.0);
    const double s = msd_similarity({{"k1", 0.5}, {"k2", 0.9}}, {{"k1", 0.7}, {"k2", 0.5}});
    CHECK(s == doctest::Approx(1.0 / 1.1).epsilon(1e-12));
    CHECK(s == doctest::Approx(0.9091).epsilon(1e-4));
}

TEST_CASE("msd similarity is symmetric and in (0,1] with common keys") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        std::map<std::string, double> x;
        std::map<std::string, double> y;
        for (int k = 0; k < 6; ++k) {
            if (u(rng) < 0.6) {
                x["k" + std::to_string(k)] = u(rng);
            }
            if (u(rng) < 0.6) {
                y["k" + std::to_string(k)] = u(rng);
            }
        }
        const double s = msd_similarity(x, y);
        CHECK(s == msd_similarity(y, x));
        CHECK(s == oracle::msd(x, y));
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("knn-ml with a single qualifying neighbor returns its rating") {
    // configs 0 and 1 share dataset e; only config 1 is rated on d
    auto m = matrix(3, {{{"d", 1}, 0.8}, {{"e", 0}, 0.5}, {{"e", 1}, 0.6}});
    CHECK(knn_ml_estimate(m, 0, *m.find("d"), 40) == doctest::Approx(0.8));
}

TEST_CASE("knn-ml with two equally similar neighbors averages them") {
    auto m = matrix(3, {{{"d", 1}, 0.6}, {{"d", 2}, 0.8}, {{"e", 0}, 0.5}, {{"e", 1}, 0.5}, {{"e", 2}, 0.5}});
    CHECK(knn_ml_estimate(m, 0, *m.find("d"), 40) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("knn-ml weights three neighbors by similarity") {
    // column differences of 1/3, 1 and 3 give similarities 0.9, 0.5 and 0.1
    auto m = matrix(4, {{{"d", 1}, 0.9},
                        {{"d", 2}, 0.6},
                        {{"d", 3}, 0.3},
                        {{"e1", 0}, 0.0},
                        {{"e1", 1}, 1.0 / 3.0},
                        {{"e2", 0}, 0.0},
                        {{"e2", 2}, 1.0},
                        {{"e3", 0}, 0.0},
                        {{"e3", 3}, 3.0}});
    CHECK(knn_ml_estimate(m, 0, *m.find("d"), 3) == doctest::Approx(0.76).epsilon(1e-12));
    // k = 1 keeps only the most similar neighbor
    CHECK(knn_ml_estimate(m, 0, *m.find("d"), 1) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("knn-ml falls back to the dataset mean and signals a cold dataset") {
    auto m = matrix(3, {{{"d", 1}, 0.6}, {{"d", 2}, 0.8}, {{"e", 0}, 0.1}});
    CHECK(knn_ml_estimate(m, 0, *m.find("d"), 40) == doctest::Approx(0.7));
    const auto e = m.intern("cold");
    CHECK_FALSE(knn_ml_estimate(m, 0, e, 40).has_value());
}

TEST_CASE("knn-data examples with given similarities") {
    auto m = matrix(2, {{{"d", 1}, 0.5}, {{"e1", 0}, 0.75}});
    const auto d = *m.find("d");
    std::vector<double> sims(m.dataset_count(), 0.0);
    sims[*m.find("e1")] = 0.3;
    CHECK(knn_data_estimate(m, 0, d, 40, sims) == doctest::Approx(0.75));

    auto m2 = matrix(2, {{{"d", 1}, 0.5}, {{"e1", 0}, 0.5}, {{"e2", 0}, 0.9}});
    std::vector<double> eq(m2.dataset_count(), 0.0);
    eq[*m2.find("e1")] = 0.4;
    eq[*m2.find("e2")] = 0.4;
    CHECK(knn_data_estimate(m2, 0, *m2.find("d"), 40, eq) == doctest::Approx(0.7).epsilon(1e-12));

    auto m3 = matrix(2, {{{"d", 1}, 0.5}, {{"e1", 0}, 1.0}, {{"e2", 0}, 0.5}});
    std::vector<double> w(m3.dataset_count(), 0.0);
    w[*m3.find("e1")] = 0.8;
    w[*m3.find("e2")] = 0.2;
    CHECK(knn_data_estimate(m3, 0, *m3.find("d"), 40, w) == doctest::Approx(0.9).epsilon(1e-12));
    // no similar dataset: the config mean
    std::vector<double> none(m3.dataset_count(), 0.0);
    CHECK(knn_data_estimate(m3, 0, *m3.find("d"), 40, none) == doctest::Approx(0.75));
    CHECK(knn_data_estimate(m3, 1, *m3.find("e1"), 40, none) == doctest::Approx(0.5));
    RatingMatrix empty_config(2);
    empty_config.add(empty_config.intern("d"), 0, 0.4);
    CHECK_FALSE(knn_data_estimate(empty_config, 1, 0, 40, std::vector<double>{1.0}).has_value());
}

TEST_CASE("knn-data neighbor ties go to the smaller dataset id") {
    auto m = matrix(2, {{{"d", 1}, 0.5}, {{"zz", 0}, 0.2}, {{"aa", 0}, 0.8}});
    std::vector<double> sims(m.dataset_count(), 0.0);
    sims[*m.find("zz")] = 0.5;
    sims[*m.find("aa")] = 0.5;
    CHECK(knn_data_estimate(m, 0, *m.find("d"), 1, sims) == doctest::Approx(0.8));
}

TEST_CASE("slopeone deviation and estimate") {
    // A = config 0, B = config 1
    auto m = matrix(2, {{{"D1", 0}, 0.6}, {{"D1", 1}, 0.8}, {{"D2", 0}, 0.7}});
    CHECK(*slopeone_deviation(m, 1, 0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(*slopeone_deviation(m, 0, 1) == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(*slopeone_estimate(m, 1, *m.find("D2")) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("slopeone falls back to the dataset mean") {
    // config 2 shares no dataset with anything rated on d
    auto m = matrix(3, {{{"d", 0}, 0.4}, {{"d", 1}, 0.6}, {{"e", 2}, 0.9}});
    CHECK(*slopeone_estimate(m, 2, *m.find("d")) == doctest::Approx(0.5));
    CHECK_FALSE(slopeone_deviation(m, 2, 0).has_value());
    const auto cold = m.intern("cold");
    CHECK_FALSE(slopeone_estimate(m, 0, cold).has_value());
}

TEST_CASE("slopeone with zero deviations predicts the dataset mean everywhere") {
    oracle::Ratings r;
    const double row_value[3] = {0.2, 0.5, 0.9};
    for (int d = 0; d < 3; ++d) {
        for (ConfigIndex a = 0; a < 4; ++a) {
            if (!(d == 2 && a >= 2)) {
                r[{"d" + std::to_string(d), a}] = row_value[d];
            }
        }
    }
    auto m = matrix(4, r);
    for (ConfigIndex a = 0; a < 4; ++a) {
        CHECK(*slopeone_estimate(m, a, *m.find("d2")) == doctest::Approx(0.9));
    }
}

TEST_CASE("recommender predictions match brute-force oracles on random knowledge bases") {
    std::mt19937_64 rng(1234);
    for (int rep = 0; rep < 150; ++rep) {
        const std::size_t n_configs = 2 + rep % 7;
        const std::size_t n_datasets = 1 + rep % 5;
        const auto r = oracle::random_ratings(rng, n_datasets, n_configs, 20);
        const std::size_t k = 1 + rep % 4;
        auto catalog = tiny(n_configs);
        KnnMlRecommender ml(catalog, k);
        KnnDataRecommender data(catalog, k);
        SlopeOneRecommender slope(catalog);
        const auto ratings = oracle::to_ratings(r);
        ml.update(ratings);
        data.update(ratings);
        slope.update(ratings);
        std::vector<std::string> ds = {"unknown"};
        for (std::size_t i = 0; i < n_datasets; ++i) {
            ds.push_back("d" + std::to_string(i));
        }
        const auto candidates = all_configs(n_configs);
        for (const auto& d : ds) {
            const auto p_ml = ml.predict_many(d, candidates);
            const auto p_data = data.predict_many(d, candidates);
            const auto p_slope = slope.predict_many(d, candidates);
            for (ConfigIndex a = 0; a < n_configs; ++a) {
                CHECK(p_ml[a] == doctest::Approx(oracle::knn_ml(r, a, d, k)).epsilon(1e-9));
                CHECK(p_data[a] == doctest::Approx(oracle::knn_data(r, a, d, k)).epsilon(1e-9));
                CHECK(p_slope[a] == doctest::Approx(oracle::slopeone(r, a, d)).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("incremental updates equal a single batch") {
    std::mt19937_64 rng(8);
    const auto r = oracle::random_ratings(rng, 5, 8, 30);
    auto catalog = tiny(8);
    const auto ratings = oracle::to_ratings(r);
    KnnMlRecommender once(catalog, 3);
    once.update(ratings);
    KnnMlRecommender split(catalog, 3);
    const std::size_t half = ratings.size() / 2;
    split.update(std::span(ratings).first(half));
    split.update(std::span(ratings).subspan(half));
    const auto candidates = all_configs(8);
    for (int d = 0; d < 5; ++d) {
        const auto name = "d" + std::to_string(d);
        CHECK(once.predict_many(name, candidates) == split.predict_many(name, candidates));
    }
}

TEST_CASE("serial and parallel scoring agree exactly") {
    auto catalog = std::make_shared<const Catalog>(kb::ConfigSpace::load(ALGOREC_DATA_DIR "/space_small.json"));
    std::mt19937_64 rng(99);
    const auto r = oracle::random_ratings(rng, 12, catalog->size(), 600);
    const auto ratings = oracle::to_ratings(r);
    const auto candidates = all_configs(catalog->size());
    std::vector<std::unique_ptr<ScoringRecommender>> models;
    models.push_back(std::make_unique<KnnMlRecommender>(catalog, 10));
    models.push_back(std::make_unique<KnnDataRecommender>(catalog, 10));
    models.push_back(std::make_unique<SlopeOneRecommender>(catalog));
    for (auto& m : models) {
        m->update(ratings);
        for (const std::string d : {"d0", "d5", "fresh"}) {
            m->set_parallel(false);
            const auto serial = m->predict_many(d, candidates);
            m->set_parallel(true);
            CHECK(m->predict_many(d, candidates) == serial);
        }
    }
}

}  // TEST_SUITE
