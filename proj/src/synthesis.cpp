#include "hinfgrid/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace hg {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kUnstable = 1e30;
}  // namespace

LoopPlant LoopPlant::from(const GeneralizedPlant& g) {
    const auto& m = g.model;
    LoopPlant p;
    p.A = m.A();
    p.Bw = m.B().leftCols(7);
    p.Bu = m.B().rightCols(3);
    p.Cz = m.C().topRows(10);
    p.Cy = m.C().bottomRows(7);
    p.Dzw = m.D().topLeftCorner(10, 7);
    p.Dzu = m.D().topRightCorner(10, 3);
    p.Dyw = m.D().bottomLeftCorner(7, 7);
    p.Dyu = m.D().bottomRightCorner(7, 3);
    p.L_g = g.params.L_g;
    return p;
}

StateSpace LoopPlant::close(const Mat& K) const {
    if (K.rows() != Bu.cols() || K.cols() != Cy.rows()) throw DimensionError("K has wrong dimensions");
    Mat L = Mat::Identity(K.rows(), K.rows()) - K * Dyu;
    Eigen::FullPivLU<Mat> lu(L);
    if (!lu.isInvertible()) throw AlgebraicLoopError("I - K*D22 is singular");
    Mat M = lu.solve(K);
    return prune_structural(
        StateSpace(A + Bu * M * Cy, Bw + Bu * M * Dyw, Cz + Dzu * M * Cy, Dzw + Dzu * M * Dyw));
}

void SynthesisConfig::validate() const {
    if (starts < 1) throw std::invalid_argument("synthesis: starts must be >= 1");
    if (grid.empty()) throw std::invalid_argument("synthesis: frequency grid is empty");
    if (plants.empty()) throw std::invalid_argument("synthesis: plant family is empty");
    if (!(box > 0)) throw std::invalid_argument("synthesis: box bound must be positive");
    const auto& p = plants.front();
    if (mask.rows() != p.Bu.cols() || mask.cols() != p.Cy.rows())
        throw std::invalid_argument("synthesis: mask dimensions do not match the plant");
}

double spectral_abscissa(const std::vector<LoopPlant>& plants, const Mat& K) {
    double a = -kInf;
    for (const auto& p : plants) {
        try {
            StateSpace cl = p.close(K);
            a = std::max(a, cl.nx() ? hg::spectral_abscissa(cl.A()) : -kInf);
        } catch (const AlgebraicLoopError&) {
            return kInf;
        }
    }
    return a;
}

namespace {

struct NMResult {
    Vec x;
    double f = kInf;
    int evals = 0;
};

// Adaptive Nelder-Mead.
NMResult nelder_mead(const std::function<double(const Vec&)>& f, const Vec& x0, double step, int max_evals,
                     const std::function<bool(double)>& done) {
    const int n = static_cast<int>(x0.size());
    NMResult r;
    r.x = x0;
    if (n == 0) {
        r.f = f(x0);
        r.evals = 1;
        return r;
    }
    const double alpha = 1.0, beta = 1.0 + 2.0 / n, gamma = 0.75 - 0.5 / n, delta = 1.0 - 1.0 / n;
    std::vector<Vec> X(n + 1, x0);
    std::vector<double> F(n + 1);
    for (int i = 0; i < n; ++i) X[i + 1](i) += step * std::max(1.0, std::abs(x0(i)));
    int evals = 0;
    auto eval = [&](const Vec& x) {
        ++evals;
        return f(x);
    };
    for (int i = 0; i <= n; ++i) F[i] = eval(X[i]);
    std::vector<int> ord(n + 1);
    while (evals < max_evals) {
        for (int i = 0; i <= n; ++i) ord[i] = i;
        std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return F[a] < F[b]; });
        const int best = ord[0], worst = ord[n], second = ord[n - 1];
        if (done && done(F[best])) break;
        double diam = 0.0;
        for (int i = 1; i <= n; ++i) diam = std::max(diam, (X[ord[i]] - X[best]).cwiseAbs().maxCoeff());
        if (diam < 1e-9 || (std::isfinite(F[worst]) && F[worst] - F[best] < 1e-12 * (1.0 + std::abs(F[best]))))
            break;
        Vec c = Vec::Zero(n);
        for (int i = 0; i < n; ++i) c += X[ord[i]];
        c /= n;
        Vec xr = c + alpha * (c - X[worst]);
        const double fr = eval(xr);
        if (fr < F[best]) {
            Vec xe = c + beta * (xr - c);
            const double fe = eval(xe);
            if (fe < fr) {
                X[worst] = xe;
                F[worst] = fe;
            } else {
                X[worst] = xr;
                F[worst] = fr;
            }
        } else if (fr < F[second]) {
            X[worst] = xr;
            F[worst] = fr;
        } else {
            const bool outside = fr < F[worst];
            Vec xc = outside ? Vec(c + gamma * (xr - c)) : Vec(c - gamma * (xr - c));
            const double fc = eval(xc);
            if ((outside && fc <= fr) || (!outside && fc < F[worst])) {
                X[worst] = xc;
                F[worst] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    X[ord[i]] = X[best] + delta * (X[ord[i]] - X[best]);
                    F[ord[i]] = eval(X[ord[i]]);
                }
            }
        }
    }
    int b = static_cast<int>(std::min_element(F.begin(), F.end()) - F.begin());
    r.x = X[b];
    r.f = F[b];
    r.evals = evals;
    return r;
}

struct Problem {
    const SynthesisConfig& cfg;
    WeightedObjective obj;
    std::vector<std::pair<int, int>> free;
    Vec scale;
    int rows, cols;

    explicit Problem(const SynthesisConfig& c) : cfg(c), obj(c.weights, c.grid) {
        rows = static_cast<int>(c.mask.rows());
        cols = static_cast<int>(c.mask.cols());
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j)
                if (c.mask(i, j)) free.push_back({i, j});
        scale.resize(free.size());
        for (size_t k = 0; k < free.size(); ++k) {
            const auto [i, j] = free[k];
            double s = (j % 2 == 1) ? 10.0 : 1.0;  // integral columns carry larger gains
            if (rows == 3 && i == 2) s *= 10.0;     // frequency row
            scale(k) = s;
        }
    }

    Mat toK(const Vec& x) const {
        Mat K = Mat::Zero(rows, cols);
        for (size_t k = 0; k < free.size(); ++k) {
            const double v = std::clamp(x(k) * scale(k), -cfg.box, cfg.box);
            K(free[k].first, free[k].second) = v;
        }
        return K;
    }
    Vec fromK(const Mat& K) const {
        Vec x(free.size());
        for (size_t k = 0; k < free.size(); ++k) x(k) = K(free[k].first, free[k].second) / scale(k);
        return x;
    }
    double abscissa(const Vec& x) const { return spectral_abscissa(cfg.plants, toK(x)); }
    double objective(const Vec& x) const {
        const Mat K = toK(x);
        double worst = 0.0;
        for (const auto& p : cfg.plants) {
            StateSpace cl;
            try {
                cl = p.close(K);
            } catch (const AlgebraicLoopError&) {
                return kUnstable * 10.0;
            }
            ModalEvaluator ev(cl);
            if (!(ev.abscissa() < 0.0)) return kUnstable + std::max(0.0, ev.abscissa());
            worst = std::max(worst, obj.evaluate(ev, false).value);
        }
        return worst;
    }
};

Mat masked(const Mat& K, const BoolMat& mask) {
    Mat out = K;
    for (int i = 0; i < K.rows(); ++i)
        for (int j = 0; j < K.cols(); ++j)
            if (!mask(i, j)) out(i, j) = 0.0;
    return out;
}

std::vector<Mat> initial_points(const SynthesisConfig& cfg, const Problem& pb) {
    std::vector<Mat> pts;
    for (const auto& K : cfg.initial) pts.push_back(masked(K, cfg.mask));
    const bool converter = cfg.mask.rows() == 3 && cfg.mask.cols() == 7;
    Mat base = converter ? droop_template().K : Mat::Zero(cfg.mask.rows(), cfg.mask.cols());
    if (converter) {
        pts.push_back(masked(base, cfg.mask));
        pts.push_back(masked(pll_template().K, cfg.mask));
    }
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    Vec xb = pb.fromK(masked(base, cfg.mask));
    while (static_cast<int>(pts.size()) < cfg.starts) {
        Vec x = xb;
        for (int k = 0; k < x.size(); ++k) x(k) = xb(k) * (1.0 + 0.3 * nd(rng)) + 0.5 * nd(rng);
        pts.push_back(pb.toK(x));
    }
    pts.resize(cfg.starts);
    return pts;
}

// Phase 1 on one start; returns the stabilized point or nullopt.
std::optional<Vec> stabilize_from(const Problem& pb, const Vec& x0, double& best_abscissa) {
    const double target = -pb.cfg.stability_margin;
    double a0 = pb.abscissa(x0);
    best_abscissa = std::min(best_abscissa, a0);
    if (a0 < target) return x0;
    auto f = [&](const Vec& x) {
        const double a = pb.abscissa(x);
        return std::isfinite(a) ? a : kUnstable;
    };
    auto done = [&](double v) { return v < target; };
    Vec x = x0;
    int used = 0;
    double step = 0.3;
    while (used < pb.cfg.max_iters_phase1) {
        NMResult r = nelder_mead(f, x, step, pb.cfg.max_iters_phase1 - used, done);
        used += r.evals;
        best_abscissa = std::min(best_abscissa, r.f);
        x = r.x;
        if (r.f < target) return x;
        step *= 0.7;
        if (r.evals < 2) break;
    }
    return std::nullopt;
}

}  // namespace

GainMatrix stabilize(const SynthesisConfig& cfg) {
    cfg.validate();
    Problem pb(cfg);
    double best = kInf;
    for (const Mat& K0 : initial_points(cfg, pb)) {
        auto x = stabilize_from(pb, pb.fromK(K0), best);
        if (x) return GainMatrix(pb.toK(*x), cfg.mask);
    }
    throw StabilizationFailure("no stabilizing K found (best spectral abscissa " + std::to_string(best) + ")", best);
}

SynthesisResult evaluate_controller(const Mat& K, const SynthesisConfig& cfg, bool verify) {
    if (cfg.plants.empty()) throw std::invalid_argument("evaluate_controller: empty plant family");
    WeightedObjective obj(cfg.weights, cfg.grid);
    SynthesisResult res;
    res.K = GainMatrix(K);
    res.objective = 0.0;
    res.verification = 0.0;
    for (const auto& p : cfg.plants) {
        PlantReport pr;
        pr.L_g = p.L_g;
        pr.certified = std::numeric_limits<double>::quiet_NaN();
        try {
            StateSpace cl = p.close(K);
            ModalEvaluator ev(cl);
            pr.abscissa = ev.abscissa();
            pr.stable = pr.abscissa < 0.0;
            ObjectiveValue v = obj.evaluate(ev, true);
            pr.norm = v.value;
            if (pr.stable && verify) {
                StateSpace wp = weighted_realization(cl, cfg.weights);
                pr.certified = hinf_norm(wp, 1e-5).norm;
                res.verification = std::max(res.verification, pr.certified);
            }
        } catch (const AlgebraicLoopError&) {
            pr.abscissa = kInf;
            pr.stable = false;
            pr.norm = kInf;
        }
        res.objective = std::max(res.objective, pr.norm);
        res.per_plant.push_back(pr);
    }
    if (!verify) res.verification = std::numeric_limits<double>::quiet_NaN();
    return res;
}

SynthesisResult synthesize(const SynthesisConfig& cfg) {
    cfg.validate();
    Problem pb(cfg);
    const auto starts = initial_points(cfg, pb);
    double best_abscissa = kInf;
    double best_f = kInf;
    Vec best_x;
    int best_start = -1, total = 0;
    std::vector<double> trace;
    bool any_stable = false;
    for (size_t s = 0; s < starts.size(); ++s) {
        auto xs = stabilize_from(pb, pb.fromK(starts[s]), best_abscissa);
        if (!xs) continue;
        any_stable = true;
        auto f = [&](const Vec& x) {
            const double v = pb.objective(x);
            ++total;
            if (v < best_f) {
                best_f = v;
                best_x = x;
                best_start = static_cast<int>(s);
            }
            trace.push_back(best_f);
            return v;
        };
        Vec x = *xs;
        int used = 0;
        double step = 0.25, last = kInf;
        while (used < cfg.max_iters_phase2) {
            NMResult r = nelder_mead(f, x, step, cfg.max_iters_phase2 - used, nullptr);
            used += r.evals;
            x = r.x;
            if (r.evals < 2) break;
            if (std::isfinite(last) && last - r.f < 1e-4 * std::abs(r.f)) {
                step *= 0.5;
                if (step < 1e-3) break;
            }
            last = r.f;
        }
    }
    if (!any_stable)
        throw StabilizationFailure("no stabilizing K found (best spectral abscissa " + std::to_string(best_abscissa) +
                                       ")",
                                   best_abscissa);
    SynthesisResult res = evaluate_controller(pb.toK(best_x), cfg, true);
    res.K = GainMatrix(pb.toK(best_x), cfg.mask);
    res.trace = std::move(trace);
    res.iterations = total;
    res.best_start = best_start;
    return res;
}

std::vector<double> design_lg_set() {
    std::vector<double> v;
    for (int x = 1; x <= 10; ++x) v.push_back(0.05 * x);
    return v;
}

std::vector<GeneralizedPlant> plant_family(const ConverterParams& base, const std::vector<double>& lgs, double P_ref,
                                           double V_or_Q_ref) {
    std::vector<GeneralizedPlant> out;
    const double ref = V_or_Q_ref >= 0.0 ? V_or_Q_ref : (base.mode == Mode::PV ? 1.0 : 0.0);
    for (double lg : lgs) {
        ConverterParams p = base;
        p.L_g = lg;
        out.push_back(build_plant(p, solve_operating_point(p, P_ref, ref)));
    }
    return out;
}

std::vector<LoopPlant> loop_family(const std::vector<GeneralizedPlant>& g) {
    std::vector<LoopPlant> out;
    for (const auto& p : g) out.push_back(LoopPlant::from(p));
    return out;
}

void write_gain_file(std::ostream& os, const Mat& K) {
    os << std::setprecision(17);
    for (int i = 0; i < K.rows(); ++i) {
        for (int j = 0; j < K.cols(); ++j) os << (j ? " " : "") << K(i, j);
        os << "\n";
    }
}

Mat read_gain_file(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> r;
        double v;
        while (ls >> v) r.push_back(v);
        if (!r.empty()) rows.push_back(r);
    }
    if (rows.size() != 3) throw std::runtime_error("gain file must have 3 rows");
    Mat K(3, 7);
    for (int i = 0; i < 3; ++i) {
        if (rows[i].size() != 7) throw std::runtime_error("gain file rows must have 7 entries");
        for (int j = 0; j < 7; ++j) K(i, j) = rows[i][j];
    }
    return K;
}

void write_report_text(std::ostream& os, const SynthesisResult& r) {
    os << std::setprecision(12);
    os << "K =\n";
    for (int i = 0; i < r.K.K.rows(); ++i) {
        os << "  ";
        for (int j = 0; j < r.K.K.cols(); ++j) os << (j ? "  " : "") << r.K.K(i, j);
        os << "\n";
    }
    os << "objective " << r.objective << "\n";
    os << "verification " << r.verification << "\n";
    os << "iterations " << r.iterations << "\n";
    os << "L_g        norm               certified          abscissa           stable\n";
    for (const auto& p : r.per_plant)
        os << p.L_g << "  " << p.norm << "  " << p.certified << "  " << p.abscissa << "  " << (p.stable ? "yes" : "no")
           << "\n";
}

void write_report_json(std::ostream& os, const SynthesisResult& r) {
    nlohmann::json j;
    std::vector<std::vector<double>> K;
    for (int i = 0; i < r.K.K.rows(); ++i) {
        std::vector<double> row;
        for (int c = 0; c < r.K.K.cols(); ++c) row.push_back(r.K.K(i, c));
        K.push_back(row);
    }
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j["K"] = K;
    j["objective"] = num(r.objective);
    j["verification"] = num(r.verification);
    j["iterations"] = r.iterations;
    j["best_start"] = r.best_start;
    for (const auto& p : r.per_plant)
        j["plants"].push_back({{"L_g", p.L_g},
                               {"norm", num(p.norm)},
                               {"certified", num(p.certified)},
                               {"abscissa", num(p.abscissa)},
                               {"stable", p.stable}});
    os << std::setprecision(15) << j.dump(2) << "\n";
}

void write_trace_csv(std::ostream& os, const SynthesisResult& r) {
    os << "evaluation,best_objective\n" << std::setprecision(15);
    for (size_t i = 0; i < r.trace.size(); ++i) os << (i + 1) << "," << r.trace[i] << "\n";
}

}  // namespace hg
