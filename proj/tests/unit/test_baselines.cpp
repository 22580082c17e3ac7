#include "doctest.h"

#include "algorec/errors.hpp"
#include "algorec/recommenders/strategies.hpp"
#include "oracles.hpp"

#include <functional>

using namespace algorec;
using namespace algorec::rec;

namespace {

std::shared_ptr<const Catalog> tiny(std::size_t n) { return std::make_shared<const Catalog>(oracle::tiny_space(n)); }

std::vector<ConfigIndex> configs_of(const std::vector<Recommendation>& recs) {
    std::vector<ConfigIndex> out;
    for (const auto& r : recs) {
        out.push_back(r.config);
    }
    return out;
}

std::vector<ConfigIndex> average_order(AverageRecommender& rec, std::size_t n, RepeatFilter filter) {
    Rng rng(0);
    return configs_of(rec.recommend("target", n, filter, rng));
}

void for_each_strategy(const std::function<void(std::string_view)>& body) {
    for (auto name : kStrategyNames) {
        const std::string label(name);
        CAPTURE(label);
        body(name);
    }
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("tiny space ids sort as strings") {
    auto catalog = tiny(10);
    CHECK(catalog->id(0) == "KNeighborsClassifier|n_neighbors=1");
    CHECK(catalog->id(1) == "KNeighborsClassifier|n_neighbors=10");
    CHECK(catalog->id(2) == "KNeighborsClassifier|n_neighbors=2");
}

TEST_CASE("average keeps a running mean per config") {
    AverageRecommender rec(tiny(3));
    rec.update(std::vector<Rating>{{"d1", 0, 0.8}, {"d2", 0, 0.6}});
    CHECK(*rec.mean(0) == doctest::Approx(0.7));
    CHECK_FALSE(rec.mean(1).has_value());
}

TEST_CASE("average orders configs by mean") {
    AverageRecommender rec(tiny(3));
    rec.update(std::vector<Rating>{{"d1", 0, 0.8}, {"d1", 1, 0.9}, {"d1", 2, 0.7}});
    RepeatFilter filter(3);
    CHECK(average_order(rec, 3, filter) == std::vector<ConfigIndex>{1, 0, 2});
    filter.insert("target", 1);
    CHECK(average_order(rec, 2, filter) == std::vector<ConfigIndex>{0, 2});
}

TEST_CASE("average breaks ties by config id") {
    AverageRecommender rec(tiny(3));
    rec.update(std::vector<Rating>{{"d1", 2, 0.6}, {"d1", 1, 0.6}, {"d1", 0, 0.5}});
    CHECK(average_order(rec, 3, RepeatFilter(3)) == std::vector<ConfigIndex>{1, 2, 0});
}

TEST_CASE("average ranks unseen configs last in id order") {
    AverageRecommender rec(tiny(5));
    rec.update(std::vector<Rating>{{"d1", 3, 0.8}, {"d1", 1, 0.9}});
    RepeatFilter filter(5);
    filter.insert("target", 1);
    CHECK(average_order(rec, 4, filter) == std::vector<ConfigIndex>{3, 0, 2, 4});
    Rng rng(0);
    const auto recs = rec.recommend("target", 2, filter, rng);
    CHECK(recs[1].predicted == doctest::Approx(0.85));
}

TEST_CASE("average reorders after the running mean changes") {
    AverageRecommender rec(tiny(3));
    rec.update(std::vector<Rating>{{"d1", 0, 0.8}, {"d1", 1, 0.9}});
    CHECK(average_order(rec, 2, RepeatFilter(3)) == std::vector<ConfigIndex>{1, 0});
    rec.update(std::vector<Rating>{{"d2", 0, 1.0}, {"d3", 0, 1.0}, {"d4", 0, 1.0}});
    CHECK(*rec.mean(0) == doctest::Approx(0.95));
    CHECK(average_order(rec, 2, RepeatFilter(3)) == std::vector<ConfigIndex>{0, 1});
}

TEST_CASE("random picks the algorithm first, then a config") {
    auto catalog = std::make_shared<const Catalog>(oracle::two_algorithm_space(2, 8));
    RepeatFilter filter(catalog->size());
    Rng rng(2024);
    std::vector<std::size_t> per_algorithm(2, 0);
    std::vector<std::size_t> per_config(catalog->size(), 0);
    for (int i = 0; i < 10000; ++i) {
        const auto a = recommend_random(*catalog, "d", filter, 1, rng).front();
        ++per_algorithm[catalog->algorithm_of(a)];
        ++per_config[a];
    }
    CHECK(oracle::chi_square_uniform(per_algorithm) < oracle::chi_square_critical_99(1));
    const auto big = catalog->algorithm_count() == 2 && catalog->configs_of_algorithm(0).size() == 2 ? 1 : 0;
    std::vector<std::size_t> within;
    for (ConfigIndex a : catalog->configs_of_algorithm(big)) {
        within.push_back(per_config[a]);
    }
    REQUIRE(within.size() == 8);
    CHECK(oracle::chi_square_uniform(within) < oracle::chi_square_critical_99(7));
}

TEST_CASE("a fully filtered algorithm passes its share to the others") {
    kb::ConfigSpace space({{"KNeighborsClassifier", {{"n_neighbors", {1.0, 2.0}}}},
                           {"MultinomialNB", {{"alpha", {1.0, 2.0, 3.0}}}},
                           {"SVC", {{"C", {1.0, 2.0, 3.0, 4.0}}}}});
    Catalog catalog(space);
    RepeatFilter filter(catalog.size());
    std::size_t knn = 0;
    for (std::size_t alg = 0; alg < catalog.algorithm_count(); ++alg) {
        if (catalog.algorithm_name(alg) == "KNeighborsClassifier") {
            knn = alg;
            for (ConfigIndex a : catalog.configs_of_algorithm(alg)) {
                filter.insert("d", a);
            }
        }
    }
    Rng rng(7);
    std::vector<std::size_t> counts(catalog.algorithm_count(), 0);
    for (int i = 0; i < 9000; ++i) {
        ++counts[catalog.algorithm_of(recommend_random(catalog, "d", filter, 1, rng).front())];
    }
    CHECK(counts[knn] == 0);
    counts.erase(counts.begin() + static_cast<std::ptrdiff_t>(knn));
    CHECK(oracle::chi_square_uniform(counts) < oracle::chi_square_critical_99(1));
}

TEST_CASE("random batches have no duplicates and stop at the space size") {
    auto catalog = std::make_shared<const Catalog>(oracle::two_algorithm_space(3, 4));
    RepeatFilter filter(catalog->size());
    filter.insert("d", 0);
    Rng rng(5);
    auto out = recommend_random(*catalog, "d", filter, 20, rng);
    CHECK(out.size() == 6);
    CHECK(std::set<ConfigIndex>(out.begin(), out.end()).size() == 6);
    CHECK(std::find(out.begin(), out.end(), 0) == out.end());
}

TEST_CASE("n = 0 is rejected by every strategy") {
    for_each_strategy([](std::string_view name) {
        auto rec = make_recommender(name, tiny(4), {}, 1);
        rec->set_metafeatures(metafeatures::MetafeatureVector{"d", {}});
        RepeatFilter filter(4);
        Rng rng(1);
        CHECK_THROWS_AS(rec->recommend("d", 0, filter, rng), ValidationError);
    });
}

TEST_CASE("every strategy walks the whole space once and then reports exhaustion") {
    for_each_strategy([](std::string_view name) {
        auto rec = make_recommender(name, tiny(7), {}, 3);
        rec->set_metafeatures(metafeatures::MetafeatureVector{"d", {}});
        rec->set_metafeatures(metafeatures::MetafeatureVector{"e", {}});
        rec->update(std::vector<Rating>{{"e", 1, 0.9}, {"e", 2, 0.4}, {"d", 3, 0.6}});
        RepeatFilter filter(7);
        Rng rng(1);
        std::set<ConfigIndex> seen;
        std::size_t total = 0;
        while (!filter.exhausted("d")) {
            for (const auto& r : rec->recommend("d", 3, filter, rng)) {
                seen.insert(r.config);
                ++total;
                CHECK(r.predicted >= 0.0);
                CHECK(r.predicted <= 1.0);
            }
        }
        CHECK(total == 7);
        CHECK(seen.size() == 7);
        CHECK_THROWS_AS(rec->recommend("d", 1, filter, rng), ExhaustedError);
    });
}

TEST_CASE("scoring strategies return predictions best first") {
    for (std::string name : {"knn-ml", "knn-data", "cocluster", "svd", "slopeone"}) {
        CAPTURE(name);
        auto rec = make_recommender(name, tiny(9), {}, 4);
        std::mt19937_64 gen(3);
        rec->update(oracle::to_ratings(oracle::random_ratings(gen, 4, 9, 20)));
        RepeatFilter filter(9);
        Rng rng(1);
        const auto out = rec->recommend("d0", 9, filter, rng);
        for (std::size_t i = 1; i < out.size(); ++i) {
            const bool ordered = out[i - 1].predicted > out[i].predicted ||
                                 (out[i - 1].predicted == out[i].predicted && out[i - 1].config < out[i].config);
            CHECK(ordered);
        }
    }
}

TEST_CASE("predictions outside [0,1] are clipped at recommendation time") {
    SlopeOneRecommender rec(tiny(2));
    rec.update(std::vector<Rating>{{"D1", 0, 0.0}, {"D1", 1, 1.0}, {"D2", 0, 1.0}});
    CHECK(rec.predict("D2", 1) == doctest::Approx(2.0));
    RepeatFilter filter(2);
    filter.insert("D2", 0);
    Rng rng(1);
    CHECK(rec.recommend("D2", 1, filter, rng)[0].predicted == 1.0);
}

TEST_CASE("updates reject duplicates and out-of-range scores") {
    for_each_strategy([](std::string_view name) {
        auto rec = make_recommender(name, tiny(3), {}, 1);
        rec->update(std::vector<Rating>{{"d", 0, 0.5}});
        CHECK_THROWS_AS(rec->update(std::vector<Rating>{{"d", 0, 0.7}}), DuplicateError);
        CHECK_THROWS_AS(rec->update(std::vector<Rating>{{"d", 1, 0.7}, {"d", 1, 0.6}}), DuplicateError);
        CHECK_THROWS_AS(rec->update(std::vector<Rating>{{"d", 2, 1.2}}), ValidationError);
        CHECK_THROWS_AS(rec->update(std::vector<Rating>{{"d", 2, -0.1}}), ValidationError);
        CHECK_THROWS_AS(rec->update(std::vector<Rating>{{"d", 9, 0.5}}), ValidationError);
        CHECK(rec->result_count() == 1);
        CHECK_FALSE(rec->has_result("d", 1));
    });
}

TEST_CASE("an empty update leaves predictions unchanged") {
    for (std::string name : {"knn-ml", "knn-data", "cocluster", "svd", "slopeone"}) {
        CAPTURE(name);
        auto rec = make_recommender(name, tiny(6), {}, 2);
        std::mt19937_64 gen(9);
        rec->update(oracle::to_ratings(oracle::random_ratings(gen, 3, 6, 12)));
        auto& scoring = dynamic_cast<ScoringRecommender&>(*rec);
        const std::vector<ConfigIndex> all = {0, 1, 2, 3, 4, 5};
        const auto before = scoring.predict_many("d1", all);
        rec->update(std::vector<Rating>{});
        CHECK(scoring.predict_many("d1", all) == before);
    }
}

TEST_CASE("strategy parameters are validated") {
    auto catalog = tiny(3);
    CHECK_THROWS_AS(make_recommender("nope", catalog, {}, 1), ValidationError);
    CHECK_THROWS_AS(make_recommender("svd", catalog, {{"svd.bogus", "1"}}, 1), ValidationError);
    CHECK_THROWS_AS(make_recommender("svd", catalog, {{"knn-ml.k", "3"}}, 1), ValidationError);
    CHECK_THROWS_AS(make_recommender("svd", catalog, {{"svd.learning_rate", "-1"}}, 1), ValidationError);
    CHECK_THROWS_AS(make_recommender("knn-ml", catalog, {{"knn-ml.k", "0"}}, 1), ValidationError);
    CHECK_THROWS_AS(make_recommender("knn-ml", catalog, {{"knn-ml.k", "2.5"}}, 1), ValidationError);
    CHECK_THROWS_AS(make_recommender("cocluster", catalog, {{"cocluster.k_datasets", "x"}}, 1), ValidationError);
    auto ok = make_recommender("svd", catalog, {{"svd.n_factors", "4"}, {"svd.learning_rate", "0.01"}}, 1);
    CHECK(ok->name() == "svd");
    CHECK(dynamic_cast<SvdRecommender&>(*ok).state().hyper.n_factors == 4);
}

TEST_CASE("recommendations are reproducible for a seed") {
    for_each_strategy([](std::string_view name) {
        std::vector<ConfigIndex> runs[2];
        for (auto& run : runs) {
            auto rec = make_recommender(name, tiny(10), {}, 42);
            rec->set_metafeatures(metafeatures::MetafeatureVector{"d", {}});
            std::mt19937_64 gen(1);
            rec->update(oracle::to_ratings(oracle::random_ratings(gen, 3, 10, 12)));
            RepeatFilter filter(10);
            Rng rng(42);
            run = configs_of(rec->recommend("d", 5, filter, rng));
        }
        CHECK(runs[0] == runs[1]);
    });
}

}  // TEST_SUITE
