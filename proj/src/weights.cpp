#include "hinfgrid/weights.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>

namespace hg {

std::string to_string(WeightKind k) {
    switch (k) {
        case WeightKind::zero: return "zero";
        case WeightKind::lead_lag: return "lead_lag";
        case WeightKind::biquad_ratio: return "biquad_ratio";
        case WeightKind::double_biquad_inverse: return "double_biquad_inverse";
    }
    return "zero";
}

WeightKind weight_kind_from_string(const std::string& s) {
    if (s == "zero") return WeightKind::zero;
    if (s == "lead_lag") return WeightKind::lead_lag;
    if (s == "biquad_ratio") return WeightKind::biquad_ratio;
    if (s == "double_biquad_inverse") return WeightKind::double_biquad_inverse;
    throw std::invalid_argument("unknown weight kind '" + s + "'");
}

RationalWeight RationalWeight::lead_lag(double a, double b, double k) {
    RationalWeight w;
    w.kind = WeightKind::lead_lag;
    w.a = a;
    w.b = b;
    w.k = k;
    w.validate();
    return w;
}

RationalWeight RationalWeight::biquad_ratio(double w1, double xi1, double w2, double xi2, double k) {
    RationalWeight w;
    w.kind = WeightKind::biquad_ratio;
    w.w1 = w1;
    w.xi1 = xi1;
    w.w2 = w2;
    w.xi2 = xi2;
    w.k = k;
    w.validate();
    return w;
}

RationalWeight RationalWeight::double_biquad_inverse(double w1, double xi1, double k) {
    RationalWeight w;
    w.kind = WeightKind::double_biquad_inverse;
    w.w1 = w1;
    w.xi1 = xi1;
    w.k = k;
    w.validate();
    return w;
}

void RationalWeight::validate() const {
    switch (kind) {
        case WeightKind::zero: return;
        case WeightKind::lead_lag:
            if (!(b > 0)) throw std::invalid_argument("lead_lag weight needs b > 0");
            return;
        case WeightKind::biquad_ratio:
            if (!(w1 > 0 && xi1 > 0 && w2 > 0 && xi2 >= 0))
                throw std::invalid_argument("biquad weight needs positive frequencies and damping");
            return;
        case WeightKind::double_biquad_inverse:
            if (!(w1 > 0 && xi1 > 0)) throw std::invalid_argument("double biquad weight needs w1, xi1 > 0");
            return;
    }
}

cplx RationalWeight::eval(double w) const {
    const cplx s(0.0, w);
    switch (kind) {
        case WeightKind::zero: return 0.0;
        case WeightKind::lead_lag: return k * (s + a) / (s + b);
        case WeightKind::biquad_ratio: {
            cplx n = s * s / (w2 * w2) + 2.0 * xi2 * s / w2 + 1.0;
            cplx d = s * s / (w1 * w1) + 2.0 * xi1 * s / w1 + 1.0;
            return k * n / d;
        }
        case WeightKind::double_biquad_inverse: {
            cplx d = s * s / (w1 * w1) + 2.0 * xi1 * s / w1 + 1.0;
            return k / (d * d);
        }
    }
    return 0.0;
}

namespace {

// (n2 s^2 + n1 s + n0) / (s^2 + 2 xi w s + w^2) in a frequency-scaled coordinate
// x1 = w^2/den * u, x2 = s/w * x1.
StateSpace second_order(double n2, double n1, double n0, double w, double xi) {
    Mat A(2, 2), B(2, 1), C(1, 2), D(1, 1);
    A << 0.0, w, -w, -2.0 * xi * w;
    B << 0.0, w;
    const double b1 = n1 - n2 * 2.0 * xi * w;
    const double b0 = n0 - n2 * w * w;
    C << b0 / (w * w), b1 / w;
    D << n2;
    return StateSpace(A, B, C, D);
}

}  // namespace

StateSpace RationalWeight::realize() const {
    switch (kind) {
        case WeightKind::zero: return StateSpace::gain(Mat::Zero(1, 1));
        case WeightKind::lead_lag: {
            Mat A(1, 1), B(1, 1), C(1, 1), D(1, 1);
            A << -b;
            B << 1.0;
            C << k * (a - b);
            D << k;
            return StateSpace(A, B, C, D);
        }
        case WeightKind::biquad_ratio: {
            const double r = (w1 * w1) / (w2 * w2);
            return second_order(k * r, k * r * 2.0 * xi2 * w2, k * r * w2 * w2, w1, xi1);
        }
        case WeightKind::double_biquad_inverse: {
            const double g = std::sqrt(std::abs(k));
            StateSpace s1 = second_order(0.0, 0.0, g * w1 * w1, w1, xi1);
            StateSpace s2 = second_order(0.0, 0.0, (k < 0 ? -g : g) * w1 * w1, w1, xi1);
            return series(s1, s2);
        }
    }
    return StateSpace::gain(Mat::Zero(1, 1));
}

const RationalWeight* WeightingSpec::find(int i, int j) const {
    auto it = entries.find({i, j});
    if (it == entries.end() || it->second.kind == WeightKind::zero) return nullptr;
    return &it->second;
}

WeightingSpec default_pv_weights() {
    WeightingSpec s;
    auto ll = RationalWeight::lead_lag;
    auto bq = RationalWeight::biquad_ratio;
    s.entries[{7, 7}] = ll(0.2, 1e-4, 1.0);
    s.entries[{8, 3}] = ll(5.0, 5e-4, 1.0);
    s.entries[{5, 3}] = bq(7e5, 0.35, 1000.0, 0.8, 1.0);
    s.entries[{5, 5}] = bq(7e5, 0.35, 1000.0, 0.8, 1.0);
    s.entries[{6, 3}] = bq(7e5, 0.35, 1000.0, 0.8, 1.0 / 6.0);
    s.entries[{3, 1}] = ll(20.0, 1e-5, 1.0);
    s.entries[{4, 2}] = ll(20.0, 1e-5, 1.0);
    s.entries[{1, 1}] = bq(7e5, 0.1, 7e3, 0.1, 1.0);
    s.entries[{2, 2}] = bq(7e5, 0.1, 7e3, 0.1, 1.0);
    const auto ad = RationalWeight::double_biquad_inverse(1000.0, 0.6, 0.5);
    s.entries[{9, 5}] = ad;
    s.entries[{9, 6}] = ad;
    s.entries[{10, 5}] = ad;
    s.entries[{10, 6}] = ad;
    return s;
}

WeightingSpec default_pq_weights() {
    WeightingSpec s = default_pv_weights();
    s.entries.erase({1, 1});
    s.entries.erase({3, 1});
    s.entries[{6, 4}] = s.entries.at({5, 3});
    s.entries[{3, 4}] = s.entries.at({8, 3});
    s.pq_plant = true;
    return s;
}

cplx eval_weight(const WeightingSpec& spec, int i, int j, double w) {
    const RationalWeight* r = spec.find(i, j);
    return r ? r->eval(w) : cplx(0.0);
}

WeightedObjective::WeightedObjective(WeightingSpec spec, std::vector<double> grid)
    : spec_(std::move(spec)), grid_(std::move(grid)) {
    if (grid_.empty()) throw std::invalid_argument("weighted objective: empty grid");
    for (const auto& [ij, w] : spec_.entries) {
        if (w.kind == WeightKind::zero) continue;
        if (ij.first < 1 || ij.second < 1) throw std::out_of_range("weight index out of range");
        idx_.push_back({ij.first - 1, ij.second - 1});
        rows_ = std::max(rows_, ij.first);
        cols_ = std::max(cols_, ij.second);
    }
    wgrid_.resize(grid_.size());
    for (size_t g = 0; g < grid_.size(); ++g)
        for (const auto& [i, j] : idx_) wgrid_[g].push_back(spec_.entries.at({i + 1, j + 1}).eval(grid_[g]));

    // split into blocks that share no rows or columns; sigma_max is the max over blocks
    std::vector<int> parent(rows_ + cols_);
    for (size_t k = 0; k < parent.size(); ++k) parent[k] = static_cast<int>(k);
    std::function<int(int)> root = [&](int x) { return parent[x] == x ? x : parent[x] = root(parent[x]); };
    for (const auto& [i, j] : idx_) parent[root(i)] = root(rows_ + j);
    std::map<int, size_t> which;
    for (size_t e = 0; e < idx_.size(); ++e) {
        const int r = root(idx_[e].first);
        if (!which.count(r)) {
            which[r] = blocks_.size();
            blocks_.emplace_back();
        }
        Block& b = blocks_[which[r]];
        auto local = [](std::vector<int>& v, int x) {
            auto it = std::find(v.begin(), v.end(), x);
            if (it != v.end()) return static_cast<int>(it - v.begin());
            v.push_back(x);
            return static_cast<int>(v.size() - 1);
        };
        b.entries.push_back({e, local(b.rows, idx_[e].first), local(b.cols, idx_[e].second)});
    }
}

double WeightedObjective::sigma_at(const ModalEvaluator& ev, double w, const std::vector<cplx>* wvals) const {
    if (idx_.empty()) return 0.0;
    std::vector<cplx> m = ev.entries(w, idx_);
    for (size_t e = 0; e < idx_.size(); ++e) {
        const auto [i, j] = idx_[e];
        m[e] *= wvals ? (*wvals)[e] : spec_.entries.at({i + 1, j + 1}).eval(w);
    }
    double best = 0.0;
    for (const Block& b : blocks_) {
        if (b.rows.size() == 1 || b.cols.size() == 1) {
            double s2 = 0.0;
            for (const auto& t : b.entries) s2 += std::norm(m[t.e]);
            best = std::max(best, s2);
            continue;
        }
        if (b.rows.size() > 16 || b.cols.size() > 16) {
            CMat M = CMat::Zero(b.rows.size(), b.cols.size());
            for (const auto& t : b.entries) M(t.r, t.c) = m[t.e];
            best = std::max(best, std::pow(sigma_max(M), 2));
            continue;
        }
        using Small = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, 16, 16>;
        Small M = Small::Zero(b.rows.size(), b.cols.size());
        for (const auto& t : b.entries) M(t.r, t.c) = m[t.e];
        Small G = M.rows() < M.cols() ? Small(M * M.adjoint()) : Small(M.adjoint() * M);
        Eigen::SelfAdjointEigenSolver<Small> es(G, Eigen::EigenvaluesOnly);
        best = std::max(best, es.eigenvalues()(G.rows() - 1));
    }
    return std::sqrt(std::max(0.0, best));
}

ObjectiveValue WeightedObjective::operator()(const StateSpace& cl, bool refine) const {
    if (cl.ny() < rows_ || cl.nu() < cols_) throw DimensionError("weighted objective: closed loop too small");
    return evaluate(ModalEvaluator(cl), refine);
}

ObjectiveValue WeightedObjective::evaluate(const ModalEvaluator& ev, bool refine) const {
    ObjectiveValue out;
    if (!(ev.abscissa() < 0.0)) {
        out.value = std::numeric_limits<double>::infinity();
        out.stable = false;
        return out;
    }
    std::vector<double> vals(grid_.size());
    for (size_t g = 0; g < grid_.size(); ++g) vals[g] = sigma_at(ev, grid_[g], &wgrid_[g]);
    size_t best = std::max_element(vals.begin(), vals.end()) - vals.begin();
    out.value = vals[best];
    out.omega = grid_[best];
    auto consider = [&](double w, double v) {
        if (v > out.value) {
            out.value = v;
            out.omega = w;
        }
    };

    // resonances can fall between grid points
    const double wlo = grid_.front() > 0.0 ? grid_.front() : (grid_.size() > 1 ? grid_[1] : 0.0);
    const double whi = grid_.back();
    std::vector<std::pair<double, double>> resonances;  // (frequency, damping)
    for (const cplx& l : ev.poles()) {
        const double w = l.imag();
        if (w <= 0.0 || w < wlo || w > whi) continue;
        resonances.push_back({w, -l.real() / std::abs(l)});
        consider(w, sigma_at(ev, w, nullptr));
    }
    if (!refine || grid_.size() < 3) return out;

    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    auto golden = [&](double lo, double hi) {
        const bool logscale = lo > 0.0;
        auto map = [&](double t) { return logscale ? std::exp(t) : t; };
        double a = logscale ? std::log(lo) : lo, b = logscale ? std::log(hi) : hi;
        double c = b - phi * (b - a), d = a + phi * (b - a);
        double fc = sigma_at(ev, map(c), nullptr), fd = sigma_at(ev, map(d), nullptr);
        for (int it = 0; it < 60; ++it) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = sigma_at(ev, map(c), nullptr);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = sigma_at(ev, map(d), nullptr);
            }
        }
        consider(map(fc > fd ? c : d), std::max(fc, fd));
    };

    // local maxima, highest three
    std::vector<size_t> peaks;
    for (size_t g = 0; g < grid_.size(); ++g) {
        const bool left = g == 0 || vals[g] >= vals[g - 1];
        const bool right = g + 1 == grid_.size() || vals[g] >= vals[g + 1];
        if (left && right) peaks.push_back(g);
    }
    std::sort(peaks.begin(), peaks.end(), [&](size_t a, size_t b) { return vals[a] > vals[b]; });
    if (peaks.size() > 3) peaks.resize(3);
    for (size_t g : peaks)
        if (g > 0 && g + 1 < grid_.size()) golden(grid_[g - 1], grid_[g + 1]);
    for (const auto& [w, zeta] : resonances)
        if (zeta < 0.2) {
            const double r = 1.0 + 4.0 * zeta + 1e-3;
            golden(std::max(wlo, w / r), std::min(whi, w * r));
        }
    return out;
}

ObjectiveValue weighted_objective(const StateSpace& cl, const WeightingSpec& spec, const std::vector<double>& grid,
                                  bool refine) {
    return WeightedObjective(spec, grid)(cl, refine);
}

StateSpace weighted_realization(const StateSpace& cl, const WeightingSpec& spec) {
    if (cl.ny() != 10 || cl.nu() != 7) throw DimensionError("weighted realization expects a 10x7 closed loop");
    std::vector<StateSpace> cols;
    for (int j = 0; j < 7; ++j) {
        std::vector<int> rows;
        for (int i = 0; i < 10; ++i)
            if (spec.find(i + 1, j + 1)) rows.push_back(i);
        if (rows.empty()) {
            cols.push_back(StateSpace::gain(Mat::Zero(10, 1)));
            continue;
        }
        StateSpace Pj = prune_structural(cl.select(rows, {j}));
        StateSpace Wd = spec.find(rows[0] + 1, j + 1)->realize();
        for (size_t r = 1; r < rows.size(); ++r) Wd = append(Wd, spec.find(rows[r] + 1, j + 1)->realize());
        StateSpace G = series(Pj, Wd);
        Mat E = Mat::Zero(10, rows.size());
        for (size_t r = 0; r < rows.size(); ++r) E(rows[r], r) = 1.0;
        cols.push_back(StateSpace(G.A(), G.B(), E * G.C(), E * G.D()));
    }
    int n = 0;
    for (const auto& c : cols) n += c.nx();
    Mat A = Mat::Zero(n, n), B = Mat::Zero(n, 7), C = Mat::Zero(10, n), D = Mat::Zero(10, 7);
    int off = 0;
    for (int j = 0; j < 7; ++j) {
        const auto& c = cols[j];
        const int k = c.nx();
        A.block(off, off, k, k) = c.A();
        B.block(off, j, k, 1) = c.B();
        C.block(0, off, 10, k) = c.C();
        D.col(j) = c.D();
        off += k;
    }
    return StateSpace(A, B, C, D, cl.inputs(), cl.outputs());
}

void write_weight_magnitude_csv(std::ostream& os, const RationalWeight& w, const std::vector<double>& grid) {
    os << "omega_rad_s,abs_Wij\n" << std::setprecision(15);
    for (double x : grid) os << x << "," << std::abs(w.eval(x)) << "\n";
}

}  // namespace hg
