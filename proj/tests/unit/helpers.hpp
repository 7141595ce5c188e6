#pragma once

#include <random>

#include "hinfgrid/lti.hpp"

namespace testing {

// Random stable system; the spectrum is shifted left of -margin.
inline hg::StateSpace random_stable(std::mt19937_64& rng, int n, int m, int p, double margin = 0.1,
                                    bool feedthrough = true) {
    std::normal_distribution<double> N(0.0, 1.0);
    auto rnd = [&](int r, int c) {
        hg::Mat M(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) M(i, j) = N(rng);
        return M;
    };
    hg::Mat A = rnd(n, n);
    A -= (hg::spectral_abscissa(A) + margin + std::abs(N(rng))) * hg::Mat::Identity(n, n);
    hg::Mat D = feedthrough ? hg::Mat(rnd(p, m)) : hg::Mat(hg::Mat::Zero(p, m));
    return hg::StateSpace(A, rnd(n, m), rnd(p, n), D);
}

// Direct C (jwI - A)^-1 B + D.
inline hg::CMat direct_freq(const hg::StateSpace& g, double w) {
    const int n = g.nx();
    hg::CMat M = hg::cplx(0.0, w) * hg::CMat::Identity(n, n) - g.A().cast<hg::cplx>();
    return g.C().cast<hg::cplx>() * M.fullPivLu().solve(g.B().cast<hg::cplx>()) + g.D().cast<hg::cplx>();
}

}  // namespace testing
