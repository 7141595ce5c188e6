#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "hinfgrid/weights.hpp"

using namespace hg;

namespace {

// Brute force max over the grid of sigma_max(W o P).
double brute(const StateSpace& cl, const WeightingSpec& spec, const std::vector<double>& grid) {
    double best = 0.0;
    for (double w : grid) {
        CMat P = cl.freq(w);
        CMat M = CMat::Zero(P.rows(), P.cols());
        for (const auto& [ij, rw] : spec.entries) M(ij.first - 1, ij.second - 1) = rw.eval(w) * P(ij.first - 1, ij.second - 1);
        best = std::max(best, Eigen::JacobiSVD<CMat>(M).singularValues()(0));
    }
    return best;
}

}  // namespace

TEST_CASE("weight shapes evaluate as written") {
    const cplx s(0.0, 3.0);
    auto ll = RationalWeight::lead_lag(2.0, 0.5, 4.0);
    CHECK(std::abs(ll.eval(3.0) - 4.0 * (s + 2.0) / (s + 0.5)) < 1e-12);
    CHECK(std::abs(ll.eval(0.0)) == doctest::Approx(16.0));
    auto bq = RationalWeight::biquad_ratio(100.0, 0.3, 10.0, 0.7, 2.0);
    const cplx n = s * s / 100.0 + 1.4 * s / 10.0 + 1.0, d = s * s / 1e4 + 0.6 * s / 100.0 + 1.0;
    CHECK(std::abs(bq.eval(3.0) - 2.0 * n / d) < 1e-12);
    auto db = RationalWeight::double_biquad_inverse(50.0, 0.6, 0.5);
    const cplx e = s * s / 2500.0 + 1.2 * s / 50.0 + 1.0;
    CHECK(std::abs(db.eval(3.0) - 0.5 / (e * e)) < 1e-12);
}

TEST_CASE("realizations reproduce the weights") {
    std::vector<RationalWeight> ws = {RationalWeight::lead_lag(0.2, 1e-4, 1.0),
                                      RationalWeight::biquad_ratio(7e5, 0.35, 1000.0, 0.8, 1.0 / 6.0),
                                      RationalWeight::biquad_ratio(7e5, 0.1, 7e3, 0.1, 1.0),
                                      RationalWeight::double_biquad_inverse(1000.0, 0.6, -0.5)};
    for (const auto& w : ws) {
        auto g = w.realize();
        for (double om : {0.0, 1.0, 900.0, 1e5}) {
            const cplx ref = w.eval(om);
            CHECK(std::abs(g.freq(om)(0, 0) - ref) < 1e-9 * (1.0 + std::abs(ref)));
        }
    }
}

TEST_CASE("invalid weights are rejected") {
    CHECK_THROWS_AS(RationalWeight::lead_lag(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(RationalWeight::biquad_ratio(-1.0, 0.1, 1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(weight_kind_from_string("pid"), std::invalid_argument);
}

TEST_CASE("PV and PQ weight sets") {
    auto pv = default_pv_weights();
    auto pq = default_pq_weights();
    CHECK(!pv.pq_plant);
    CHECK(pq.pq_plant);
    CHECK(pv.find(1, 1) != nullptr);
    CHECK(pq.find(1, 1) == nullptr);
    CHECK(pq.find(6, 4) != nullptr);
    CHECK(pv.find(7, 7) != nullptr);
    CHECK(std::abs(eval_weight(pv, 7, 7, 0.0)) == doctest::Approx(2000.0));
    CHECK(eval_weight(pv, 2, 7, 1.0) == cplx(0.0));
}

TEST_CASE("weighted realization equals the entrywise product") {
    std::mt19937_64 rng(5);
    auto cl = testing::random_stable(rng, 5, 7, 10, 0.5, false);
    auto spec = default_pv_weights();
    auto wr = weighted_realization(cl, spec);
    for (double w : {0.01, 3.0, 2000.0}) {
        const CMat P = cl.freq(w), M = wr.freq(w);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 7; ++j) {
                const cplx ref = eval_weight(spec, i + 1, j + 1, w) * P(i, j);
                CHECK(std::abs(M(i, j) - ref) < 1e-8 * (1.0 + std::abs(ref)));
            }
    }
}

TEST_CASE("objective on the grid equals brute force, refinement only raises it") {
    std::mt19937_64 rng(9);
    auto spec = default_pv_weights();
    auto grid = default_grid(120);
    for (int k = 0; k < 5; ++k) {
        auto cl = testing::random_stable(rng, 6, 7, 10, 0.5, false);
        auto coarse = weighted_objective(cl, spec, grid, false);
        auto fine = weighted_objective(cl, spec, grid, true);
        const double b = brute(cl, spec, grid);
        CHECK(coarse.value >= b * (1 - 1e-9));
        CHECK(fine.value >= coarse.value * (1 - 1e-12));
        const double exact = hinf_norm(weighted_realization(cl, spec), 1e-8).norm;
        CHECK(fine.value <= exact * (1 + 1e-6));
        WeightedObjective obj(spec, grid);
        CHECK(obj(cl, true).value == doctest::Approx(fine.value).epsilon(1e-12));
    }
}

TEST_CASE("a resonance between grid points is found") {
    // Lightly damped mode at 1234 rad/s on the (5,5) channel.
    const double wn = 1234.0, zeta = 0.005;
    Mat A(2, 2), B = Mat::Zero(2, 7), C = Mat::Zero(10, 2);
    A << 0, 1, -wn * wn, -2 * zeta * wn;
    B(1, 4) = wn * wn;
    C(4, 0) = 1.0;
    StateSpace cl(A, B, C, Mat::Zero(10, 7));
    WeightingSpec spec;
    spec.entries[{5, 5}] = RationalWeight::lead_lag(1.0, 1.0, 1.0);
    auto v = weighted_objective(cl, spec, default_grid(50), true);
    const double exact = hinf_norm(weighted_realization(cl, spec), 1e-9).norm;
    CHECK(v.value == doctest::Approx(exact).epsilon(1e-4));
}

TEST_CASE("unstable closed loop is flagged") {
    StateSpace cl(Mat::Constant(1, 1, 1.0), Mat::Ones(1, 7), Mat::Ones(10, 1), Mat::Zero(10, 7));
    auto v = weighted_objective(cl, default_pv_weights(), default_grid(20));
    CHECK(!v.stable);
}

TEST_CASE("magnitude csv") {
    std::ostringstream os;
    write_weight_magnitude_csv(os, RationalWeight::lead_lag(1.0, 1.0, 3.0), {0.0, 1.0});
    CHECK(os.str().rfind("omega_rad_s,abs_Wij\n", 0) == 0);
    CHECK(os.str().find("0,3") != std::string::npos);
}
