#include "hinfgrid/lti.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>

namespace hg {

namespace {

std::vector<std::string> default_labels(const char* stem, int n) {
    std::vector<std::string> v;
    v.reserve(n);
    for (int i = 0; i < n; ++i) v.push_back(std::string(stem) + std::to_string(i + 1));
    return v;
}

void check_unique(const std::vector<std::string>& v, const char* what) {
    std::set<std::string> s(v.begin(), v.end());
    if (s.size() != v.size()) throw DimensionError(std::string("duplicate ") + what + " label");
}

}  // namespace

StateSpace::StateSpace(Mat A, Mat B, Mat C, Mat D, std::vector<std::string> inputs,
                       std::vector<std::string> outputs)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)),
      in_(std::move(inputs)), out_(std::move(outputs)) {
    const auto n = A_.rows();
    if (A_.cols() != n) throw DimensionError("A must be square");
    if (B_.rows() != n) throw DimensionError("B row count must equal state dimension");
    if (C_.cols() != n) throw DimensionError("C column count must equal state dimension");
    if (D_.rows() != C_.rows() || D_.cols() != B_.cols())
        throw DimensionError("D must be outputs x inputs");
    if (in_.empty()) in_ = default_labels("u", static_cast<int>(D_.cols()));
    if (out_.empty()) out_ = default_labels("y", static_cast<int>(D_.rows()));
    if (static_cast<long>(in_.size()) != D_.cols()) throw DimensionError("input label count");
    if (static_cast<long>(out_.size()) != D_.rows()) throw DimensionError("output label count");
    check_unique(in_, "input");
    check_unique(out_, "output");
}

StateSpace StateSpace::gain(const Mat& D) {
    return StateSpace(Mat(0, 0), Mat(0, D.cols()), Mat(D.rows(), 0), D);
}

StateSpace StateSpace::identity(int n) { return gain(Mat::Identity(n, n)); }

int StateSpace::input_index(const std::string& name) const {
    auto it = std::find(in_.begin(), in_.end(), name);
    if (it == in_.end()) throw DimensionError("unknown input " + name);
    return static_cast<int>(it - in_.begin());
}

int StateSpace::output_index(const std::string& name) const {
    auto it = std::find(out_.begin(), out_.end(), name);
    if (it == out_.end()) throw DimensionError("unknown output " + name);
    return static_cast<int>(it - out_.begin());
}

CMat StateSpace::eval(cplx s) const {
    CMat G = D_.cast<cplx>();
    if (nx() == 0) return G;
    CMat M = s * CMat::Identity(nx(), nx()) - A_.cast<cplx>();
    CMat X = M.partialPivLu().solve(B_.cast<cplx>());
    G += C_.cast<cplx>() * X;
    return G;
}

StateSpace StateSpace::select(const std::vector<int>& outs, const std::vector<int>& ins) const {
    Mat B(nx(), ins.size()), C(outs.size(), nx()), D(outs.size(), ins.size());
    std::vector<std::string> il, ol;
    for (size_t j = 0; j < ins.size(); ++j) {
        if (ins[j] < 0 || ins[j] >= nu()) throw DimensionError("input index out of range");
        B.col(j) = B_.col(ins[j]);
        il.push_back(in_[ins[j]]);
    }
    for (size_t i = 0; i < outs.size(); ++i) {
        if (outs[i] < 0 || outs[i] >= ny()) throw DimensionError("output index out of range");
        C.row(i) = C_.row(outs[i]);
        ol.push_back(out_[outs[i]]);
        for (size_t j = 0; j < ins.size(); ++j) D(i, j) = D_(outs[i], ins[j]);
    }
    return StateSpace(A_, B, C, D, il, ol);
}

StateSpace StateSpace::scaled(double alpha) const {
    return StateSpace(A_, B_, alpha * C_, alpha * D_, in_, out_);
}

StateSpace StateSpace::relabeled(std::vector<std::string> inputs,
                                 std::vector<std::string> outputs) const {
    return StateSpace(A_, B_, C_, D_, std::move(inputs), std::move(outputs));
}

StateSpace series(const StateSpace& g1, const StateSpace& g2) {
    if (g1.ny() != g2.nu()) throw DimensionError("series: g1 outputs must match g2 inputs");
    const int n1 = g1.nx(), n2 = g2.nx();
    Mat A = Mat::Zero(n1 + n2, n1 + n2);
    A.topLeftCorner(n1, n1) = g1.A();
    A.bottomLeftCorner(n2, n1) = g2.B() * g1.C();
    A.bottomRightCorner(n2, n2) = g2.A();
    Mat B(n1 + n2, g1.nu());
    B << g1.B(), g2.B() * g1.D();
    Mat C(g2.ny(), n1 + n2);
    C << g2.D() * g1.C(), g2.C();
    return StateSpace(A, B, C, g2.D() * g1.D(), g1.inputs(), g2.outputs());
}

StateSpace parallel(const StateSpace& g1, const StateSpace& g2) {
    if (g1.nu() != g2.nu() || g1.ny() != g2.ny()) throw DimensionError("parallel: shape mismatch");
    const int n1 = g1.nx(), n2 = g2.nx();
    Mat A = Mat::Zero(n1 + n2, n1 + n2);
    A.topLeftCorner(n1, n1) = g1.A();
    A.bottomRightCorner(n2, n2) = g2.A();
    Mat B(n1 + n2, g1.nu());
    B << g1.B(), g2.B();
    Mat C(g1.ny(), n1 + n2);
    C << g1.C(), g2.C();
    return StateSpace(A, B, C, g1.D() + g2.D(), g1.inputs(), g1.outputs());
}

StateSpace append(const StateSpace& g1, const StateSpace& g2) {
    const int n1 = g1.nx(), n2 = g2.nx();
    const int m1 = g1.nu(), m2 = g2.nu(), p1 = g1.ny(), p2 = g2.ny();
    Mat A = Mat::Zero(n1 + n2, n1 + n2), B = Mat::Zero(n1 + n2, m1 + m2);
    Mat C = Mat::Zero(p1 + p2, n1 + n2), D = Mat::Zero(p1 + p2, m1 + m2);
    A.topLeftCorner(n1, n1) = g1.A();
    A.bottomRightCorner(n2, n2) = g2.A();
    B.topLeftCorner(n1, m1) = g1.B();
    B.bottomRightCorner(n2, m2) = g2.B();
    C.topLeftCorner(p1, n1) = g1.C();
    C.bottomRightCorner(p2, n2) = g2.C();
    D.topLeftCorner(p1, m1) = g1.D();
    D.bottomRightCorner(p2, m2) = g2.D();
    return StateSpace(A, B, C, D);
}

StateSpace feedback(const StateSpace& g, const StateSpace& k, int sign) {
    if (k.nu() != g.ny() || k.ny() != g.nu()) throw DimensionError("feedback: loop dimensions");
    const double s = sign >= 0 ? 1.0 : -1.0;
    const int n = g.nx(), nk = k.nx(), m = g.nu(), p = g.ny();
    Mat M = Mat::Identity(p, p) - s * g.D() * k.D();
    Eigen::FullPivLU<Mat> lu(M);
    if (!lu.isInvertible() || lu.rcond() < 1e-13)
        throw AlgebraicLoopError("feedback: I - sign*Dg*Dk is singular");
    Mat E = lu.inverse();
    // y = Cy_x x + Cy_k xk + Dy r
    Mat Cy_x = E * g.C();
    Mat Cy_k = s * E * g.D() * k.C();
    Mat Dy = E * g.D();
    // u = Cu_x x + Cu_k xk + Du r
    Mat Cu_x = s * k.D() * Cy_x;
    Mat Cu_k = s * k.C() + s * k.D() * Cy_k;
    Mat Du = Mat::Identity(m, m) + s * k.D() * Dy;

    Mat A(n + nk, n + nk), B(n + nk, m), C(p, n + nk);
    A << g.A() + g.B() * Cu_x, g.B() * Cu_k, k.B() * Cy_x, k.A() + k.B() * Cy_k;
    B << g.B() * Du, k.B() * Dy;
    C << Cy_x, Cy_k;
    return StateSpace(A, B, C, Dy, g.inputs(), g.outputs());
}

StateSpace feedback(const StateSpace& g, const Mat& k, int sign) {
    return feedback(g, StateSpace::gain(k), sign);
}

StateSpace prune_structural(const StateSpace& sys) {
    const int n = sys.nx();
    std::vector<bool> keep(n, true);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int j = 0; j < n; ++j) {
            if (!keep[j]) continue;
            bool used = sys.ny() > 0 && sys.C().col(j).cwiseAbs().maxCoeff() > 0.0;
            for (int i = 0; i < n && !used; ++i)
                if (i != j && keep[i] && sys.A()(i, j) != 0.0) used = true;
            if (!used) {
                keep[j] = false;
                changed = true;
            }
        }
    }
    std::vector<int> idx;
    for (int j = 0; j < n; ++j)
        if (keep[j]) idx.push_back(j);
    if (static_cast<int>(idx.size()) == n) return sys;
    const int r = static_cast<int>(idx.size());
    Mat A(r, r), B(r, sys.nu()), C(sys.ny(), r);
    for (int a = 0; a < r; ++a) {
        B.row(a) = sys.B().row(idx[a]);
        C.col(a) = sys.C().col(idx[a]);
        for (int b = 0; b < r; ++b) A(a, b) = sys.A()(idx[a], idx[b]);
    }
    return StateSpace(A, B, C, sys.D(), sys.inputs(), sys.outputs());
}

std::vector<cplx> eigenvalues(const Mat& m) {
    if (m.rows() != m.cols()) throw DimensionError("eigenvalues: matrix must be square");
    if (m.rows() == 0) return {};
    Eigen::EigenSolver<Mat> es(m, false);
    std::vector<cplx> out(m.rows());
    if (es.info() != Eigen::Success) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::fill(out.begin(), out.end(), cplx(nan, nan));
        return out;
    }
    for (int i = 0; i < m.rows(); ++i) out[i] = es.eigenvalues()(i);
    return out;
}

double spectral_abscissa(const Mat& m) {
    double a = -std::numeric_limits<double>::infinity();
    for (const auto& l : eigenvalues(m)) {
        if (std::isnan(l.real())) return std::numeric_limits<double>::infinity();
        a = std::max(a, l.real());
    }
    return a;
}

bool is_stable(const StateSpace& sys) { return sys.nx() == 0 || spectral_abscissa(sys.A()) < 0.0; }

std::vector<double> log_grid(double w_min, double w_max, int n, bool include_zero) {
    std::vector<double> g;
    if (include_zero) g.push_back(0.0);
    const double a = std::log10(w_min), b = std::log10(w_max);
    for (int i = 0; i < n; ++i) g.push_back(std::pow(10.0, a + (b - a) * i / std::max(1, n - 1)));
    return g;
}

std::vector<double> default_grid(int n) {
    return log_grid(2.0 * M_PI * 1e-4, 2.0 * M_PI * 1e4, n, true);
}

FrequencyResponse freqresp(const StateSpace& sys, const std::vector<double>& grid) {
    FrequencyResponse fr;
    fr.frequencies = grid;
    fr.values.reserve(grid.size());
    for (double w : grid) fr.values.push_back(sys.freq(w));
    return fr;
}

double sigma_max(const CMat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMat> svd(m);
    return svd.singularValues()(0);
}

SigmaPlot sigma_plot(const StateSpace& sys, const std::vector<double>& grid) {
    SigmaPlot sp;
    sp.frequencies = grid;
    for (double w : grid) {
        Eigen::JacobiSVD<CMat> svd(sys.freq(w));
        sp.sigma.push_back(svd.singularValues());
    }
    return sp;
}

void write_sigma_csv(std::ostream& os, const SigmaPlot& plot) {
    const int k = plot.sigma.empty() ? 0 : static_cast<int>(plot.sigma.front().size());
    os << "omega_rad_s";
    for (int i = 0; i < k; ++i) os << ",sigma" << (i + 1);
    os << "\n" << std::setprecision(15);
    for (size_t r = 0; r < plot.frequencies.size(); ++r) {
        os << plot.frequencies[r];
        for (int i = 0; i < k; ++i) os << "," << plot.sigma[r](i);
        os << "\n";
    }
}

namespace {

// Frequencies of purely imaginary Hamiltonian eigenvalues at level gamma.
std::vector<double> imaginary_crossings(const StateSpace& sys, double gamma) {
    const int n = sys.nx(), m = sys.nu(), p = sys.ny();
    const Mat& A = sys.A();
    const Mat& B = sys.B();
    const Mat& C = sys.C();
    const Mat& D = sys.D();
    const double g2 = gamma * gamma;
    Mat R = D.transpose() * D - g2 * Mat::Identity(m, m);
    Mat S = D * D.transpose() - g2 * Mat::Identity(p, p);
    Eigen::PartialPivLU<Mat> Rl(R), Sl(S);
    Mat RiDtC = Rl.solve(D.transpose() * C);
    Mat RiBt = Rl.solve(B.transpose());
    Mat H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = A - B * RiDtC;
    H.topRightCorner(n, n) = -gamma * B * RiBt;
    H.bottomLeftCorner(n, n) = gamma * C.transpose() * Sl.solve(C);
    H.bottomRightCorner(n, n) = -A.transpose() + C.transpose() * D * RiBt;
    std::vector<double> ws;
    for (const auto& l : eigenvalues(H)) {
        if (std::isnan(l.real())) continue;
        if (std::abs(l.real()) < 1e-8 * (1.0 + std::abs(l)) && l.imag() >= 0.0) ws.push_back(l.imag());
    }
    std::sort(ws.begin(), ws.end());
    return ws;
}

}  // namespace

double crossover_frequency(const StateSpace& siso, const std::vector<double>& grid, double level) {
    if (siso.nu() != 1 || siso.ny() != 1) throw DimensionError("crossover_frequency needs a SISO system");
    auto mag = [&](double w) { return std::abs(siso.freq(w)(0, 0)); };
    for (size_t i = 0; i < grid.size(); ++i) {
        if (mag(grid[i]) < level) continue;
        if (i == 0) return grid[0];
        double lo = grid[i - 1], hi = grid[i];
        for (int it = 0; it < 60; ++it) {
            const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
            (mag(mid) < level ? lo : hi) = mid;
        }
        return hi;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

HinfResult hinf_norm_grid(const StateSpace& sys, int points) {
    if (points < 3) throw std::invalid_argument("hinf_norm_grid: need at least 3 points");
    HinfResult res;
    res.method = HinfMethod::grid;
    const double dnorm = sigma_max(sys.D().cast<cplx>());
    res.norm = dnorm;
    if (sys.nx() == 0) return res;
    const auto poles = eigenvalues(sys.A());
    double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
    std::vector<double> grid;
    for (const auto& l : poles) {
        if (std::isnan(l.real()) || l.real() >= 0.0)
            throw UnstableSystemError("hinf_norm_grid: system is not stable, norm undefined");
        const double r = std::abs(l);
        if (r > 0) wmin = std::min(wmin, r), wmax = std::max(wmax, r);
        grid.push_back(r);
        grid.push_back(std::abs(l.imag()));
    }
    if (!(wmax > 0.0)) wmin = wmax = 1.0;
    const auto base = log_grid(1e-3 * wmin, 1e3 * wmax, points, true);
    grid.insert(grid.end(), base.begin(), base.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    auto f = [&](double w) { return sigma_max(sys.freq(w)); };
    std::vector<double> s(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) s[i] = f(grid[i]);
    auto consider = [&](double w, double v) {
        if (v > res.norm) res.norm = v, res.peak_frequency = w;
    };
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (size_t i = 0; i < grid.size(); ++i) {
        consider(grid[i], s[i]);
        const bool left = i == 0 || s[i] >= s[i - 1];
        const bool right = i + 1 == grid.size() || s[i] >= s[i + 1];
        if (!left || !right || i == 0 || i + 1 == grid.size()) continue;
        double a = grid[i - 1], b = grid[i + 1];
        double c = b - g * (b - a), d = a + g * (b - a);
        double fc = f(c), fd = f(d);
        for (int it = 0; it < 200 && b - a > 1e-14 * b; ++it) {
            if (fc > fd) {
                b = d, d = c, fd = fc;
                c = b - g * (b - a), fc = f(c);
            } else {
                a = c, c = d, fc = fd;
                d = a + g * (b - a), fd = f(d);
            }
        }
        consider(c, fc);
        consider(d, fd);
    }
    return res;
}

HinfResult hinf_norm(const StateSpace& sys, double rel_tol) {
    if (!(rel_tol > 0.0)) throw std::invalid_argument("hinf_norm: rel_tol must be positive");
    HinfResult res;
    res.method = HinfMethod::hamiltonian_bisection;
    const double dnorm = sigma_max(sys.D().cast<cplx>());
    if (sys.nx() == 0 || sys.B().norm() == 0.0 || sys.C().norm() == 0.0) {
        res.norm = dnorm;
        return res;
    }
    const auto poles = eigenvalues(sys.A());
    double wmin = std::numeric_limits<double>::infinity(), wmax = 0.0;
    for (const auto& l : poles) {
        if (std::isnan(l.real()) || l.real() >= 0.0)
            throw UnstableSystemError("hinf_norm: system is not stable, norm undefined");
        if (std::abs(l.real()) < 1e-6 * (1.0 + std::abs(l))) res.ill_conditioned = true;
        const double r = std::abs(l);
        if (r > 0) wmin = std::min(wmin, r), wmax = std::max(wmax, r);
    }
    std::vector<double> probe = log_grid(0.1 * wmin, 10.0 * wmax, 20, true);
    for (const auto& l : poles)
        if (std::abs(l.imag()) > 0.0) probe.push_back(std::abs(l.imag()));

    double lo = dnorm, peak = std::numeric_limits<double>::infinity();
    auto consider = [&](double w) {
        const double s = sigma_max(sys.freq(w));
        if (s > lo) lo = s, peak = w;
    };
    for (double w : probe) consider(w);
    if (lo == 0.0) {
        res.norm = 0.0;
        return res;
    }

    // Lower bound always comes from an evaluated sigma; crossings that fail to raise it are spurious.
    for (int it = 0; it < 200; ++it) {
        const double g = (1.0 + 2.0 * rel_tol) * lo;
        auto ws = imaginary_crossings(sys, g);
        if (ws.empty()) break;
        const double before = lo;
        for (double w : ws) consider(w);
        for (size_t i = 0; i + 1 < ws.size(); ++i) consider(0.5 * (ws[i] + ws[i + 1]));
        for (size_t i = 0; i + 1 < ws.size(); ++i) consider(std::sqrt(ws[i] * ws[i + 1]));
        if (lo <= before * (1.0 + rel_tol)) break;
    }
    res.norm = lo;
    res.peak_frequency = peak;
    return res;
}

ModalEvaluator::ModalEvaluator(const StateSpace& sys) : sys_(sys) {
    const int n = sys.nx();
    if (n == 0) {
        modal_ = true;
        return;
    }
    Eigen::EigenSolver<Mat> es(sys.A(), true);
    if (es.info() != Eigen::Success) {
        abscissa_ = std::numeric_limits<double>::infinity();
        return;
    }
    abscissa_ = es.eigenvalues().real().maxCoeff();
    poles_ = es.eigenvalues();
    CMat V = es.eigenvectors();
    Eigen::PartialPivLU<CMat> lu(V);
    if (!(lu.rcond() > 1e-9)) return;
    lambda_ = es.eigenvalues();
    VB_ = lu.solve(sys.B().cast<cplx>());
    CV_ = sys.C().cast<cplx>() * V;
    modal_ = true;
}

CMat ModalEvaluator::eval(double w) const {
    if (!modal_) return sys_.freq(w);
    CMat G = sys_.D().cast<cplx>();
    if (sys_.nx() == 0) return G;
    const cplx s(0.0, w);
    CVec d = (s - lambda_.array()).inverse();
    G += CV_ * d.asDiagonal() * VB_;
    return G;
}

std::vector<cplx> ModalEvaluator::entries(double w, const std::vector<std::pair<int, int>>& idx) const {
    std::vector<cplx> out(idx.size());
    if (!modal_) {
        CMat G = sys_.freq(w);
        for (size_t e = 0; e < idx.size(); ++e) out[e] = G(idx[e].first, idx[e].second);
        return out;
    }
    const int n = static_cast<int>(lambda_.size());
    if (idx != cached_idx_) {
        cached_idx_ = idx;
        R_.resize(idx.size(), n);
        D0_.resize(idx.size());
        for (size_t e = 0; e < idx.size(); ++e) {
            const auto [i, j] = idx[e];
            R_.row(e) = CV_.row(i).cwiseProduct(VB_.col(j).transpose());
            D0_(e) = sys_.D()(i, j);
        }
    }
    CVec d(n);
    for (int k = 0; k < n; ++k) {
        const double re = -lambda_(k).real(), im = w - lambda_(k).imag();
        const double r2 = re * re + im * im;
        d(k) = cplx(re / r2, -im / r2);
    }
    CVec v = D0_ + R_ * d;
    for (size_t e = 0; e < idx.size(); ++e) out[e] = v(e);
    return out;
}

cplx ModalEvaluator::entry(double w, int i, int j) const {
    if (!modal_) return sys_.freq(w)(i, j);
    cplx acc = sys_.D()(i, j);
    const cplx s(0.0, w);
    for (int k = 0; k < lambda_.size(); ++k) acc += CV_(i, k) * VB_(k, j) / (s - lambda_(k));
    return acc;
}

}  // namespace hg
