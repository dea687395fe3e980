#include "tdoa/geometry.hpp"

#include "tdoa/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace tdoa;

namespace {

SensorArray aligned_between_array() {
    return SensorArray({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}});
}

SensorArray square_corner_array() {
    return SensorArray({{0, 0, 0}, {0, 1, 0}, {1, 1, 0}});
}

Eigen::Vector2d oriented_pair_of(const TdoaSet& set, int j, int k, int shared) {
    return {*set.get(j, shared), *set.get(k, shared)};
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("canonical pair enumeration and linear indexing") {
    const auto pairs = enumerate_pairs(3);
    REQUIRE(pairs.size() == 6);
    CHECK(pairs[0] == PairIndex{1, 0});
    CHECK(pairs[1] == PairIndex{2, 0});
    CHECK(pairs[2] == PairIndex{2, 1});
    CHECK(pairs[5] == PairIndex{3, 2});
    for (std::size_t t = 0; t < pairs.size(); ++t)
        CHECK(pair_linear_index(pairs[t]) == static_cast<int>(t));

    const OrientedPair flipped = orient_pair(0, 2);
    CHECK(flipped.pair == PairIndex{2, 0});
    CHECK(flipped.sign == -1.0);
    CHECK_THROWS_AS(orient_pair(1, 1), std::invalid_argument);
}

TEST_CASE("sensor array validation") {
    CHECK_THROWS_AS(SensorArray({{0, 0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(SensorArray({{0, 0, 0}, {0, 0, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(SensorArray({{0, 0, 0}, {1, 0, std::nan("")}}), std::invalid_argument);

    const SensorArray array({{0, 0, 0}, {3, 4, 0}, {0, 0, 2}});
    CHECK(array.distance(1, 0) == doctest::Approx(5.0));
    CHECK(array.distance(1, 0) == array.distance(0, 1));
    CHECK(array.pair_count() == 3);
}

TEST_CASE("tdoa set stores canonically with signed access") {
    TdoaSet set;
    set.set(0, 2, 0.25);  // reversed orientation
    REQUIRE(set.contains(PairIndex{2, 0}));
    CHECK(*set.get(2, 0) == doctest::Approx(-0.25));
    CHECK(*set.get(0, 2) == doctest::Approx(0.25));
    set.set(PairIndex{2, 0}, 0.5);
    CHECK(set.size() == 1);  // one entry per canonical pair
    CHECK(*set.get(2, 0) == doctest::Approx(0.5));
}

TEST_CASE("tdoa map boundary and symmetry cases") {
    const SensorArray two({{0, 0, 0}, {1, 0, 0}});

    SUBCASE("collinear source beyond the first sensor attains the boundary") {
        const TdoaSet set = tdoa_map({-0.6, 0, 0}, two);
        CHECK(*set.get(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("source at a sensor gives -d") {
        const SensorArray array({{0, 0, 0}, {1, 0, 0}, {0.3, 0.9, -0.2}});
        const TdoaSet set = tdoa_map(array.position(2), array);
        CHECK(*set.get(2, 0) == doctest::Approx(-array.distance(2, 0)));
        CHECK(*set.get(2, 1) == doctest::Approx(-array.distance(2, 1)));
    }
    SUBCASE("mirror-symmetric sources are indistinguishable") {
        const TdoaSet a = tdoa_map({0.6, 0.7, 0}, two);
        const TdoaSet b = tdoa_map({0.6, -0.7, 0}, two);
        CHECK(*a.get(1, 0) == doctest::Approx(*b.get(1, 0)).epsilon(1e-15));
    }
    SUBCASE("triangle bounds and zero-sum residuals hold everywhere") {
        const SensorArray array({{0, 0, 0}, {0.3, 0, 0}, {0, 0.3, 0}, {0.1, 0.1, 0.3}, {-0.2, 0.2, -0.1}});
        Rng rng(42);
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::Vector3d x(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
            const TdoaSet set = tdoa_map(x, array);
            for (const auto& [pair, value] : set.entries())
                CHECK(std::abs(value) <= array.distance(pair) + 1e-12);
            for (int i = 0; i <= array.last_index(); ++i)
                for (int j = i + 1; j <= array.last_index(); ++j)
                    for (int k = j + 1; k <= array.last_index(); ++k) {
                        const double residual =
                            *set.get(j, i) - *set.get(k, i) + *set.get(k, j);
                        CHECK(std::abs(residual) < 1e-9);
                    }
        }
    }
}

TEST_CASE("theta1 interval") {
    const SensorArray two({{0, 0, 0}, {1, 0, 0}});
    const Interval interval = theta1_interval(PairIndex{1, 0}, two);
    CHECK(interval.lo == doctest::Approx(-1.0));
    CHECK(interval.hi == doctest::Approx(1.0));

    const SensorArray scaled({{0, 0, 0}, {2, 0, 0}});
    const Interval twice = theta1_interval(PairIndex{1, 0}, scaled);
    CHECK(twice.hi == doctest::Approx(2.0 * interval.hi));
    CHECK_THROWS_AS(theta1_interval(PairIndex{5, 0}, two), std::invalid_argument);
}

TEST_CASE("triple classification") {
    SUBCASE("shared sensor between the others") {
        const auto geom = classify_triple(0, 1, 2, aligned_between_array());
        CHECK(geom.classification == TripleClass::AlignedSharedBetween);
        CHECK(geom.d_kj == doctest::Approx(2.0));
    }
    SUBCASE("shared sensor outside the segment") {
        const SensorArray array({{1, 0, 0}, {0, 0, 0}, {-1, 0, 0}});
        const auto geom = classify_triple(0, 1, 2, array);
        CHECK(geom.classification == TripleClass::AlignedSharedOutside);
    }
    SUBCASE("right-angle corner is general") {
        const auto geom = classify_triple(0, 1, 2, square_corner_array());
        CHECK(geom.classification == TripleClass::General);
    }
    SUBCASE("equilateral triangle area determinant") {
        const SensorArray array({{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}});
        const auto geom = classify_triple(0, 1, 2, array);
        CHECK(geom.classification == TripleClass::General);
        CHECK(std::abs(geom.area_det) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
    }
    SUBCASE("embedding preserves pairwise distances for skew 3D triples") {
        const SensorArray array({{0.1, -0.4, 0.7}, {1.2, 0.3, -0.5}, {-0.6, 0.9, 0.4}});
        const auto geom = classify_triple(0, 1, 2, array);
        CHECK(geom.disp_j.norm() == doctest::Approx(geom.d_ji).epsilon(1e-12));
        CHECK(geom.disp_k.norm() == doctest::Approx(geom.d_ki).epsilon(1e-12));
        CHECK((geom.disp_k - geom.disp_j).norm() == doctest::Approx(geom.d_kj).epsilon(1e-12));
        CHECK(geom.area_det > 0.0);
    }
    CHECK_THROWS_AS(classify_triple(0, 0, 2, aligned_between_array()), std::invalid_argument);
}

TEST_CASE("theta2 membership") {
    SUBCASE("image points are members, general position") {
        const SensorArray array = square_corner_array();
        const auto geom = classify_triple(0, 1, 2, array);
        Rng rng(7);
        for (int trial = 0; trial < 500; ++trial) {
            const Eigen::Vector3d x(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
            const TdoaSet set = tdoa_map(x, array);
            CHECK(theta2_membership(oriented_pair_of(set, 1, 2, 0), geom));
        }
    }
    SUBCASE("image points are members, aligned") {
        const SensorArray array = aligned_between_array();
        const auto geom = classify_triple(0, 1, 2, array);
        Rng rng(8);
        for (int trial = 0; trial < 500; ++trial) {
            const Eigen::Vector3d x(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
            const TdoaSet set = tdoa_map(x, array);
            CHECK(theta2_membership(oriented_pair_of(set, 1, 2, 0), geom));
        }
    }
    SUBCASE("vertices are members") {
        const auto geom = classify_triple(0, 1, 2, square_corner_array());
        CHECK(theta2_membership(geom.vertex_r0, geom));
        CHECK(theta2_membership(Eigen::Vector2d(geom.d_ji, geom.d_ki), geom));
    }
    SUBCASE("outside the hexagon is not a member") {
        const auto geom = classify_triple(0, 1, 2, square_corner_array());
        CHECK_FALSE(theta2_membership(Eigen::Vector2d(geom.d_ji + 1.0, 0.0), geom));
        const auto aligned = classify_triple(0, 1, 2, aligned_between_array());
        CHECK_FALSE(theta2_membership(Eigen::Vector2d(aligned.d_ji + 1.0, 0.0), aligned));
    }
}

TEST_CASE("strip distance, general triples") {
    const auto geom = classify_triple(0, 1, 2, square_corner_array());
    const Eigen::Matrix2d iso = Eigen::Matrix2d::Identity();

    SUBCASE("boundary of the strip scores zero") {
        const Eigen::Vector2d tau(0.0, geom.d_kj);
        CHECK(strip_distance_general(tau, geom, iso) == 0.0);
    }
    SUBCASE("isotropic excess of 2 sigma gives sqrt 2") {
        const double sigma = 0.01;
        const Eigen::Matrix2d cov = sigma * sigma * Eigen::Matrix2d::Identity();
        const Eigen::Vector2d tau(0.0, geom.d_kj + 2.0 * sigma);
        CHECK(strip_distance_general(tau, geom, cov) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    }
    SUBCASE("feasible sources score zero") {
        Rng rng(5);
        const SensorArray array = square_corner_array();
        for (int trial = 0; trial < 200; ++trial) {
            const Eigen::Vector3d x(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
            const TdoaSet set = tdoa_map(x, array);
            CHECK(strip_distance_general(oriented_pair_of(set, 1, 2, 0), geom, iso) == 0.0);
        }
    }
    SUBCASE("aligned geometry is rejected") {
        const auto aligned = classify_triple(0, 1, 2, aligned_between_array());
        CHECK_THROWS_AS(strip_distance_general({0, 0}, aligned, iso), std::invalid_argument);
    }
    SUBCASE("non-positive-definite covariance is rejected") {
        Eigen::Matrix2d bad;
        bad << 1.0, 2.0, 2.0, 1.0;
        CHECK_THROWS_AS(strip_distance_general({0, 10}, geom, bad), std::invalid_argument);
    }
}

TEST_CASE("aligned distance") {
    const Eigen::Matrix2d iso = Eigen::Matrix2d::Identity();

    SUBCASE("noiseless sources score zero, both aligned kinds") {
        const SensorArray array({{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {2.5, 0, 0}});
        Rng rng(11);
        for (int shared = 0; shared < 3; ++shared) {
            int a = -1, b = -1;
            for (int s = 0; s < 4 && b < 0; ++s) {
                if (s == shared) continue;
                (a < 0 ? a : b) = s;
            }
            const auto geom = classify_triple(shared, a, b, array);
            for (int trial = 0; trial < 100; ++trial) {
                const Eigen::Vector3d x(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
                const TdoaSet set = tdoa_map(x, array);
                CHECK(aligned_distance(oriented_pair_of(set, a, b, shared), geom, iso) == 0.0);
            }
        }
    }
    SUBCASE("between case: hand value and half-plane oracle") {
        const auto geom = classify_triple(0, 1, 2, aligned_between_array());
        REQUIRE(geom.classification == TripleClass::AlignedSharedBetween);
        const double sigma = 0.05;
        const Eigen::Matrix2d cov = sigma * sigma * Eigen::Matrix2d::Identity();
        const Eigen::Vector2d tau(-sigma, -sigma);
        const double f = aligned_distance(tau, geom, cov);
        CHECK(f == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));

        const Eigen::Vector2d normal(geom.c(+1, -1, -1), geom.c(-1, +1, -1));
        const double rhs = geom.d_kj * geom.c(+1, +1, -1);
        CHECK(f == doctest::Approx(oracles::halfplane_distance(tau, normal, rhs, cov)).epsilon(1e-6));
    }
    SUBCASE("deep inside the triangle scores zero") {
        const auto geom = classify_triple(0, 1, 2, aligned_between_array());
        CHECK(aligned_distance({0.2, 0.3}, geom, iso) == 0.0);
    }
    SUBCASE("outside case hits the diagonal sides") {
        const SensorArray array({{1, 0, 0}, {0, 0, 0}, {-1, 0, 0}});
        const auto geom = classify_triple(0, 1, 2, array);
        REQUIRE(geom.classification == TripleClass::AlignedSharedOutside);
        // Feasible triangle: tau_ki - tau_ji <= d_kj, tau_ki >= 2 tau_ji, tau_ji >= -d_ji.
        const Eigen::Vector2d violating(0.5, 0.2);  // violates tau_ki >= 2 tau_ji only
        const double f = aligned_distance(violating, geom, Eigen::Matrix2d::Identity());
        CHECK(f > 0.0);
        const Eigen::Vector2d normal(2.0 * geom.d_ki, geom.c(-1, -1, +1));
        const double rhs = geom.d_ki * geom.c(+1, -1, +1);
        CHECK(f ==
              doctest::Approx(oracles::halfplane_distance(violating, normal, rhs,
                                                          Eigen::Matrix2d::Identity()))
                  .epsilon(1e-6));
    }
    SUBCASE("general geometry is rejected") {
        const auto general = classify_triple(0, 1, 2, square_corner_array());
        CHECK_THROWS_AS(aligned_distance({0, 0}, general, iso), std::invalid_argument);
    }
}

TEST_CASE("simplified distances never exceed the sampled feasible-set distance") {
    Rng rng(13);
    const Eigen::Matrix2d cov = 0.02 * 0.02 * Eigen::Matrix2d::Identity();

    SUBCASE("general triple") {
        const auto geom = classify_triple(0, 1, 2, square_corner_array());
        for (int trial = 0; trial < 8; ++trial) {
            const Eigen::Vector2d tau(rng.uniform(-geom.d_ji, geom.d_ji) * 1.1,
                                      rng.uniform(-geom.d_ki, geom.d_ki) * 1.1);
            const double f = strip_distance_general(tau, geom, cov);
            const double sampled = oracles::theta2_sampled_distance(tau, geom, cov);
            CHECK(f <= sampled + 1e-6);
        }
    }
    SUBCASE("aligned triple") {
        const auto geom = classify_triple(0, 1, 2, aligned_between_array());
        for (int trial = 0; trial < 8; ++trial) {
            const Eigen::Vector2d tau(rng.uniform(-geom.d_ji, geom.d_ji) * 1.1,
                                      rng.uniform(-geom.d_ki, geom.d_ki) * 1.1);
            const double f = aligned_distance(tau, geom, cov);
            const double sampled = oracles::theta2_sampled_distance(tau, geom, cov);
            CHECK(f <= sampled + 1e-6);
        }
    }
}

TEST_CASE("zsc plane distance") {
    SUBCASE("hand value") {
        CHECK(zsc_plane_distance({1, 2, 3}, Eigen::Matrix3d::Identity()) ==
              doctest::Approx(2.0 / std::sqrt(3.0)).epsilon(1e-12));
    }
    SUBCASE("noiseless triples and in-plane perturbations") {
        const SensorArray array({{0, 0, 0}, {0.3, 0, 0}, {0, 0.3, 0}, {0.2, 0.1, 0.4}});
        const TdoaSet set = tdoa_map({0.9, -1.1, 0.4}, array);
        const Eigen::Vector3d triple(*set.get(1, 0), *set.get(2, 0), *set.get(2, 1));
        const Eigen::Matrix3d cov = 0.007 * 0.007 * Eigen::Matrix3d::Identity();
        CHECK(zsc_plane_distance(triple, cov) < 1e-9);
        const double delta = 0.4;
        CHECK(zsc_plane_distance(triple + Eigen::Vector3d(delta, delta, 0.0), cov) <
              1e-9);
    }
    SUBCASE("covariance validation") {
        Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
        bad(2, 2) = -1.0;
        CHECK_THROWS_AS(zsc_plane_distance({1, 2, 3}, bad), std::invalid_argument);
    }
}

TEST_CASE("unit homogeneity of the distance functions") {
    const double scale = 3.7;
    const SensorArray base({{0, 0, 0}, {0.4, 0.1, 0}, {-0.2, 0.5, 0.3}});
    std::vector<Eigen::Vector3d> scaled_positions;
    for (const auto& p : base.positions()) scaled_positions.push_back(scale * p);
    const SensorArray scaled(scaled_positions);

    const double sigma = 0.01;
    const Eigen::Matrix2d cov2 = sigma * sigma * Eigen::Matrix2d::Identity();
    const Eigen::Matrix2d cov2_scaled = scale * scale * cov2;
    const Eigen::Matrix3d cov3 = sigma * sigma * Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d cov3_scaled = scale * scale * cov3;

    const auto geom = classify_triple(0, 1, 2, base);
    const auto geom_scaled = classify_triple(0, 1, 2, scaled);

    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Vector2d tau(rng.uniform(-1, 1), rng.uniform(-1, 1));
        CHECK(strip_distance_general(tau, geom, cov2) ==
              doctest::Approx(strip_distance_general(scale * tau, geom_scaled, cov2_scaled))
                  .epsilon(1e-9));
        const Eigen::Vector3d triple(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        CHECK(zsc_plane_distance(triple, cov3) ==
              doctest::Approx(zsc_plane_distance(scale * triple, cov3_scaled)).epsilon(1e-9));
    }
}

TEST_CASE("relation space dimension equals q - n") {
    SUBCASE("three sensors: the single zero-sum relation") {
        const SensorArray array({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
        CHECK(relation_space_dimension(array, 120, 3) == 1);
    }
    SUBCASE("four sensors") {
        const SensorArray array({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.3, 0.4, 0.8}});
        CHECK(relation_space_dimension(array, 150, 4) == 3);
    }
    SUBCASE("seven sensors, including a fully collinear array") {
        std::vector<Eigen::Vector3d> line;
        for (int s = 0; s < 7; ++s) line.emplace_back(0.1 * s, 0.0, 0.0);
        const SensorArray collinear(line);
        CHECK(relation_space_dimension(collinear, 300, 5) == 21 - 6);

        Rng rng(19);
        std::vector<Eigen::Vector3d> random_positions;
        for (int s = 0; s < 7; ++s)
            random_positions.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
        const SensorArray random_array(random_positions);
        CHECK(relation_space_dimension(random_array, 300, 6) == 15);
    }
    SUBCASE("too few sources is rejected") {
        const SensorArray array({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
        CHECK_THROWS_AS(relation_space_dimension(array, 2, 1), std::invalid_argument);
    }
}

TEST_SUITE_END();
