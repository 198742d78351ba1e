#include <cmath>

#include "biobo/stats.hpp"
#include "doctest.h"

using namespace biobo::stats;

TEST_SUITE("stats") {
    TEST_CASE("mean and sem") {
        CHECK(mean({1.0, 2.0, 3.0}) == 2.0);
        CHECK(sem({0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4}) == 0.0);
        CHECK(sem({5.0}) == 0.0);
        // sd = 1 (n-1 denominator) over sqrt(3)
        CHECK(sem({1.0, 2.0, 3.0}) == doctest::Approx(1.0 / std::sqrt(3.0)));
    }

    TEST_CASE("average ranks") {
        CHECK(average_ranks({10.0, 30.0, 20.0}) == std::vector<double>{1.0, 3.0, 2.0});
        CHECK(average_ranks({1.0, 2.0, 2.0, 3.0}) == std::vector<double>{1.0, 2.5, 2.5, 4.0});
    }

    TEST_CASE("correlations") {
        const std::vector<double> x = {-2, -1, 0, 1, 2};
        std::vector<double> cube;
        for (double v : x) cube.push_back(v * v * v);
        CHECK(pearson(x, x) == 1.0);
        CHECK(spearman(x, x) == 1.0);
        CHECK(spearman(x, cube) == 1.0);
        CHECK(pearson(x, cube) < 1.0);
        CHECK(std::isnan(pearson(x, {1, 1, 1, 1, 1})));
        CHECK(pearson(x, {2, 1, 0, -1, -2}) == -1.0);
        CHECK_THROWS(pearson({1, 2}, {1, 2, 3}));
    }

    TEST_CASE("spearman with ties") {
        // ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4)
        const double r = spearman({1, 2, 2, 3}, {1, 2, 3, 4});
        const std::vector<double> a = {1, 2.5, 2.5, 4}, b = {1, 2, 3, 4};
        double sab = 0, saa = 0, sbb = 0;
        for (int i = 0; i < 4; ++i) {
            sab += (a[i] - 2.5) * (b[i] - 2.5);
            saa += (a[i] - 2.5) * (a[i] - 2.5);
            sbb += (b[i] - 2.5) * (b[i] - 2.5);
        }
        CHECK(r == doctest::Approx(sab / std::sqrt(saa * sbb)).epsilon(1e-14));
    }
}
