#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jgs/knn.hpp"
#include "jgs/rng.hpp"

using namespace jgs;

TEST_CASE("nearest neighbor matches brute force") {
    Rng rng(31);
    std::vector<Eigen::Vector3d> pts(200);
    for (auto& p : pts) p = rng.normal3(1.0);
    const KdTree3 tree(pts);

    for (int q = 0; q < 100; ++q) {
        const Eigen::Vector3d query = rng.normal3(1.5);
        double best = 1e300;
        int best_i = -1;
        for (int i = 0; i < 200; ++i) {
            const double d2 = (pts[i] - query).squaredNorm();
            if (d2 < best) {
                best = d2;
                best_i = i;
            }
        }
        double d2 = 0.0;
        CHECK(tree.nearest(query, &d2) == best_i);
        CHECK(d2 == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("k nearest matches brute force, self excluded") {
    Rng rng(32);
    std::vector<Eigen::Vector3d> pts(120);
    for (auto& p : pts) p = rng.normal3(1.0);
    const KdTree3 tree(pts);

    for (int q = 0; q < 40; ++q) {
        const auto got = tree.k_nearest(pts[q], 3, q);
        std::vector<std::pair<double, int>> ref;
        for (int i = 0; i < 120; ++i) {
            if (i == q) continue;
            ref.emplace_back((pts[i] - pts[q]).squaredNorm(), i);
        }
        std::sort(ref.begin(), ref.end());
        REQUIRE(got.size() == 3);
        for (int k = 0; k < 3; ++k) {
            const double got_d = (pts[got[k]] - pts[q]).squaredNorm();
            CHECK(got_d == doctest::Approx(ref[k].first).epsilon(1e-12));
        }
    }
}

TEST_CASE("empty and single-point trees") {
    const KdTree3 empty;
    CHECK(empty.empty());

    const KdTree3 one({Eigen::Vector3d(1, 2, 3)});
    double d2 = 0.0;
    CHECK(one.nearest({1, 2, 4}, &d2) == 0);
    CHECK(d2 == doctest::Approx(1.0));
    CHECK(one.k_nearest({0, 0, 0}, 3, 0).empty());
}
