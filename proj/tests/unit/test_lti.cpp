#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "hinfgrid/lti.hpp"

using namespace hg;

namespace {

StateSpace first_order(double a, double k) {
    return StateSpace(Mat::Constant(1, 1, -a), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, k), Mat::Zero(1, 1));
}

StateSpace second_order(double wn, double zeta) {
    Mat A(2, 2), B(2, 1), C(1, 2);
    A << 0, 1, -wn * wn, -2 * zeta * wn;
    B << 0, wn * wn;
    C << 1, 0;
    return StateSpace(A, B, C, Mat::Zero(1, 1));
}

}  // namespace

TEST_CASE("first-order norm is k/a") {
    auto h = hinf_norm(first_order(3.0, 6.0), 1e-9);
    CHECK(h.norm == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(h.method == HinfMethod::hamiltonian_bisection);
}

TEST_CASE("resonant peak matches the closed form") {
    for (double zeta : {0.02, 0.1, 0.3, 0.6}) {
        const double wn = 50.0;
        const double peak = 1.0 / (2.0 * zeta * std::sqrt(1.0 - zeta * zeta));
        const double wpk = wn * std::sqrt(1.0 - 2.0 * zeta * zeta);
        auto h = hinf_norm(second_order(wn, zeta), 1e-10);
        CHECK(h.norm == doctest::Approx(peak).epsilon(1e-8));
        CHECK(h.peak_frequency == doctest::Approx(wpk).epsilon(1e-3));
        auto g = hinf_norm_grid(second_order(wn, zeta));
        CHECK(g.norm == doctest::Approx(peak).epsilon(1e-8));
    }
}

TEST_CASE("static gain norm is its largest singular value") {
    Mat D(2, 2);
    D << 3, 0, 0, -4;
    CHECK(hinf_norm(StateSpace::gain(D)).norm == doctest::Approx(4.0));
}

TEST_CASE("unstable systems have no norm") {
    CHECK_THROWS_AS(hinf_norm(first_order(-1.0, 1.0)), UnstableSystemError);
    CHECK_THROWS_AS(hinf_norm_grid(first_order(-1.0, 1.0)), UnstableSystemError);
}

TEST_CASE("bisection and refined grid agree on random systems") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 30; ++k) {
        const int n = 1 + static_cast<int>(rng() % 8);
        auto g = testing::random_stable(rng, n, 2, 2);
        const double a = hinf_norm(g, 1e-9).norm, b = hinf_norm_grid(g).norm;
        CHECK(std::abs(a - b) <= 1e-6 * b);
    }
}

TEST_CASE("frequency response matches the resolvent") {
    std::mt19937_64 rng(3);
    auto g = testing::random_stable(rng, 6, 3, 2);
    ModalEvaluator ev(g);
    for (double w : {0.0, 0.1, 1.0, 17.0, 1e3}) {
        const CMat ref = testing::direct_freq(g, w);
        CHECK((g.freq(w) - ref).norm() < 1e-10 * (1.0 + ref.norm()));
        CHECK((ev.eval(w) - ref).norm() < 1e-8 * (1.0 + ref.norm()));
        CHECK(std::abs(ev.entry(w, 1, 2) - ref(1, 2)) < 1e-8 * (1.0 + ref.norm()));
        auto e = ev.entries(w, {{0, 0}, {1, 1}});
        CHECK(std::abs(e[1] - ref(1, 1)) < 1e-8 * (1.0 + ref.norm()));
    }
}

TEST_CASE("interconnections multiply, add and close loops") {
    std::mt19937_64 rng(11);
    auto g1 = testing::random_stable(rng, 3, 2, 2);
    auto g2 = testing::random_stable(rng, 4, 2, 2);
    Mat k(2, 2);
    k << 0.3, -0.1, 0.2, 0.05;
    const auto s = series(g1, g2), p = parallel(g1, g2), f = feedback(g1, k, -1);
    for (double w : {0.0, 0.7, 20.0}) {
        const CMat a = testing::direct_freq(g1, w), b = testing::direct_freq(g2, w);
        CHECK((s.freq(w) - b * a).norm() < 1e-9);
        CHECK((p.freq(w) - (a + b)).norm() < 1e-9);
        const CMat cl = (CMat::Identity(2, 2) + a * k.cast<cplx>()).inverse() * a;
        CHECK((f.freq(w) - cl).norm() < 1e-9);
    }
    auto ap = append(g1, g2);
    CHECK(ap.nu() == 4);
    CHECK(ap.ny() == 4);
}

TEST_CASE("dimension errors") {
    CHECK_THROWS_AS(StateSpace(Mat::Zero(2, 2), Mat::Zero(3, 1), Mat::Zero(1, 2), Mat::Zero(1, 1)), DimensionError);
    std::mt19937_64 rng(1);
    auto g1 = testing::random_stable(rng, 2, 2, 3);
    auto g2 = testing::random_stable(rng, 2, 2, 2);
    CHECK_THROWS_AS(series(g1, g2), DimensionError);
}

TEST_CASE("structural pruning keeps the response and drops dead states") {
    Mat A(3, 3), B(3, 1), C(1, 3);
    A << -1, 0, 0, 1, -2, 0, 0, 0, 0;  // third state is an isolated integrator
    B << 1, 0, 1;
    C << 0, 1, 0;
    StateSpace g(A, B, C, Mat::Zero(1, 1));
    auto p = prune_structural(g);
    CHECK(p.nx() == 2);
    CHECK(is_stable(p));
    CHECK(!is_stable(g));
    CHECK(std::abs(p.freq(3.0)(0, 0) - g.freq(3.0)(0, 0)) < 1e-12);
}

TEST_CASE("crossover of s/(s+1) is at 1 rad/s") {
    StateSpace hp(Mat::Constant(1, 1, -1.0), Mat::Constant(1, 1, 1.0), Mat::Constant(1, 1, -1.0),
                  Mat::Constant(1, 1, 1.0));
    CHECK(crossover_frequency(hp, log_grid(1e-3, 1e3, 200)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::isnan(crossover_frequency(first_order(1.0, 0.5), log_grid(1e-3, 1e3, 200))));
}

TEST_CASE("default grid spans 1e-4..1e4 Hz plus zero") {
    auto g = default_grid();
    CHECK(g.size() == 401);
    CHECK(g.front() == 0.0);
    CHECK(g[1] == doctest::Approx(2 * M_PI * 1e-4));
    CHECK(g.back() == doctest::Approx(2 * M_PI * 1e4));
}

TEST_CASE("sigma csv") {
    std::ostringstream os;
    write_sigma_csv(os, sigma_plot(StateSpace::identity(2), {0.0, 1.0}));
    CHECK(os.str().rfind("omega_rad_s,sigma1,sigma2\n", 0) == 0);
}
