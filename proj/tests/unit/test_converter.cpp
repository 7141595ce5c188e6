#include <doctest.h>

#include <cmath>
#include <sstream>

#include "../../src/model.hpp"
#include "hinfgrid/converter.hpp"

using namespace hg;
namespace m = hg::model;

namespace {

// Open-loop response of the partitioned plant at jw.
CMat open_loop(const GeneralizedPlant& g, double w) { return g.model.freq(w); }

// P_zw + P_zu K (I - P_yu K)^-1 P_yw from the open-loop response.
CMat closed_by_hand(const GeneralizedPlant& g, const Mat& K, double w) {
    const CMat P = open_loop(g, w);
    const CMat Kc = K.cast<cplx>();
    const CMat Pzw = P.topLeftCorner(10, 7), Pzu = P.topRightCorner(10, 3);
    const CMat Pyw = P.bottomLeftCorner(7, 7), Pyu = P.bottomRightCorner(7, 3);
    const CMat L = CMat::Identity(3, 3) - Kc * Pyu;
    return Pzw + Pzu * L.inverse() * Kc * Pyw;
}

}  // namespace

TEST_CASE("operating point is an equilibrium with the requested power") {
    for (double lg : {0.05, 0.2, 0.5}) {
        ConverterParams p;
        p.L_g = lg;
        auto op = solve_operating_point(p, 0.8, 1.0);
        CHECK(op.P0 == doctest::Approx(0.8).epsilon(1e-9));
        CHECK(steady_state_residual(p, op) < 1e-8);
    }
    ConverterParams q;
    q.mode = Mode::PQ;
    auto op = solve_operating_point(q, 1.0, 0.3);
    CHECK(op.P0 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(op.Q0 == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(steady_state_residual(q, op) < 1e-8);
}

TEST_CASE("infeasible operating point is reported") {
    ConverterParams p;
    p.L_g = 0.5;
    CHECK_THROWS_AS(solve_operating_point(p, 50.0, 1.0), InfeasibleOperatingPoint);
}

TEST_CASE("parameter validation") {
    ConverterParams p;
    p.L_F = -1.0;
    CHECK_THROWS(p.validate());
    ConverterParams ok;
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("plant agrees with central differences of the nonlinear model") {
    ConverterParams p;
    p.L_g = 0.3;
    auto op = solve_operating_point(p, 1.0, 1.0);
    auto g = build_plant(p, op);
    const double h = 1e-6;
    double x[m::NX], w[7] = {0, 0, 0, 0, 0, 0, 0}, u[3], dxp[m::NX], dxm[m::NX], z[10], y[7];
    for (int k = 0; k < m::NX; ++k) {
        for (int i = 0; i < m::NX; ++i) x[i] = op.x0(i);
        for (int i = 0; i < 3; ++i) u[i] = op.u0(i);
        x[k] += h;
        m::plant(p, op.mode, op.ref, op.U_grid, x, w, u, dxp, z, y);
        x[k] -= 2 * h;
        m::plant(p, op.mode, op.ref, op.U_grid, x, w, u, dxm, z, y);
        for (int i = 0; i < m::NX; ++i) {
            const double fd = (dxp[i] - dxm[i]) / (2 * h);
            CHECK(std::abs(fd - g.model.A()(i, k)) < 1e-5 * (1.0 + std::abs(fd)));
        }
    }
}

TEST_CASE("LCL and channel wiring entries") {
    ConverterParams p;
    p.L_g = 0.25;
    auto g = build_plant(p, solve_operating_point(p, 0.5, 1.0));
    const Mat& A = g.model.A();
    const Mat& B = g.model.B();
    const Mat& C = g.model.C();
    const Mat& D = g.model.D();
    const double wb = p.omega_b;
    CHECK(A(m::IC, m::VC) == doctest::Approx(-wb / p.L_F));
    CHECK(A(m::VC, m::IC) == doctest::Approx(wb / p.C_F));
    CHECK(A(m::VC, m::IG) == doctest::Approx(-wb / p.C_F));
    CHECK(A(m::VC, m::VC + 1) == doctest::Approx(wb));
    CHECK(A(m::IG, m::VC) == doctest::Approx(wb / p.L_g));
    CHECK(A(m::IG, m::IG) == doctest::Approx(-p.tau));
    CHECK(A(m::IG, m::IG + 1) == doctest::Approx(wb));
    CHECK(B(m::TH, 9) == doctest::Approx(1.0));   // d theta / dt = omega
    CHECK(C(6, m::TH) == doctest::Approx(1.0));   // z7 = theta + w7
    CHECK(D(6, 6) == doctest::Approx(1.0));
    CHECK(C(11, m::E1) == doctest::Approx(1.0));  // y2 is the integral of y1
    CHECK(C(13, m::E3) == doctest::Approx(1.0));
    CHECK(C(15, m::E5) == doctest::Approx(1.0));
    CHECK(g.model.nu() == 10);
    CHECK(g.model.ny() == 17);
}

TEST_CASE("lft closing matches the frequency-domain formula") {
    ConverterParams p;
    auto g = build_plant(p, solve_operating_point(p, 1.0, 1.0));
    for (const Mat& K : {droop_template().K, pll_template().K, reference_pv_gains()}) {
        auto cl = lft_close(g, K);
        CHECK(cl.nu() == 7);
        CHECK(cl.ny() == 10);
        for (double w : {0.3, 10.0, 400.0}) {
            const CMat ref = closed_by_hand(g, K, w);
            CHECK((cl.freq(w) - ref).norm() < 1e-7 * (1.0 + ref.norm()));
        }
    }
}

TEST_CASE("sensitivity entry is the matching closed-loop entry") {
    ConverterParams p;
    auto g = build_plant(p, solve_operating_point(p, 1.0, 1.0));
    auto k = droop_template();
    auto e = sensitivity_entry(g, k, 7, 7);
    auto cl = lft_close(g, k);
    CHECK(std::abs(e.freq(5.0)(0, 0) - cl.freq(5.0)(6, 6)) < 1e-10);
    CHECK_THROWS_AS(sensitivity_entry(g, k, 11, 1), std::out_of_range);
}

TEST_CASE("angle sensitivity: PLL has the higher bandwidth") {
    ConverterParams p;
    auto g = build_plant(p, solve_operating_point(p, 1.0, 1.0));
    const auto grid = default_grid();
    const double wd = crossover_frequency(sensitivity_entry(g, droop_template(), 7, 7), grid);
    const double wp = crossover_frequency(sensitivity_entry(g, pll_template(), 7, 7), grid);
    CHECK(wp > wd);
}

TEST_CASE("admittance is strictly proper and stable under droop") {
    ConverterParams p;
    auto g = build_plant(p, solve_operating_point(p, 1.0, 1.0));
    auto Y = extract_admittance(g, droop_template());
    CHECK(Y.nu() == 2);
    CHECK(Y.ny() == 2);
    CHECK(Y.D().norm() == 0.0);
    CHECK(is_stable(Y));
}

TEST_CASE("templates and masks") {
    auto d = droop_template({2.0, 10.0, 4.0 * M_PI});
    CHECK(d.free_count() == 5);
    CHECK(d.K(2, 4) == doctest::Approx(4.0 * M_PI));
    auto t = controller_template("pll", {{"KwP", 100.0}});
    CHECK(t.K(2, 2) == doctest::Approx(-100.0));
    CHECK_THROWS(controller_template("foo"));
    Mat K = Mat::Ones(3, 7);
    GainMatrix masked(K, d.mask);
    CHECK(masked.K.sum() == doctest::Approx(5.0));
    CHECK_THROWS_AS(GainMatrix(Mat::Zero(2, 7)), DimensionError);
}

TEST_CASE("matrix csv has label headers") {
    std::ostringstream os;
    Mat M(1, 2);
    M << 1.5, -2;
    write_matrix_csv(os, M, {"r"}, {"a", "b"});
    CHECK(os.str().find("a,b") != std::string::npos);
    CHECK(os.str().find("r,1.5,-2") != std::string::npos);
}
