#include "hinfgrid/converter.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include "model.hpp"

namespace hg {

std::string to_string(Mode m) { return m == Mode::PV ? "PV" : "PQ"; }

Mode mode_from_string(const std::string& s) {
    if (s == "PV" || s == "pv") return Mode::PV;
    if (s == "PQ" || s == "pq") return Mode::PQ;
    throw std::invalid_argument("unknown mode '" + s + "'");
}

void ConverterParams::validate() const {
    if (!(L_F > 0 && C_F > 0 && L_g > 0)) throw std::invalid_argument("L_F, C_F, L_g must be positive");
    if (!(tau >= 0)) throw std::invalid_argument("tau must be nonnegative");
    if (!(T_VF > 0)) throw std::invalid_argument("T_VF must be positive");
    if (!(X_v >= 0)) throw std::invalid_argument("X_v must be nonnegative");
    if (!(omega_b > 0)) throw std::invalid_argument("omega_b must be positive");
    if (!(omega_f >= 0)) throw std::invalid_argument("omega_f must be nonnegative");
}

namespace {

using model::NX;

template <class T>
void op_residual(const ConverterParams& p, Mode mode, const References& r, double U, const T* v, T* res) {
    const T V[2] = {v[0], v[1]};
    const T I[2] = {v[2], v[3]};
    const double Rg = p.R_g();
    res[0] = V[0] - U - Rg * I[0] + p.L_g * I[1];
    res[1] = V[1] - Rg * I[1] - p.L_g * I[0];
    T x[NX];
    for (auto& e : x) e = T(0.0);
    x[model::IC] = I[0] - p.C_F * V[1];
    x[model::IC + 1] = I[1] + p.C_F * V[0];
    x[model::VC] = V[0];
    x[model::VC + 1] = V[1];
    x[model::IG] = I[0];
    x[model::IG + 1] = I[1];
    x[model::TH] = v[4];
    ConverterParams q = p;
    q.omega_f = 0.0;
    const T w[7] = {T(0.0), T(0.0), T(0.0), T(0.0), T(0.0), T(0.0), T(0.0)};
    auto m = model::measure(q, mode, r, x, x + model::IG, w);
    if (mode == Mode::PV) {
        res[2] = m.y[0];
    } else {
        res[2] = m.QE - r.Q;
    }
    res[3] = m.y[2];
    res[4] = m.PE - r.P;
}

}  // namespace

OperatingPoint complete_operating_point(const ConverterParams& p, const References& ref,
                                        const Eigen::Vector2d& V, const Eigen::Vector2d& I, double theta,
                                        double U_grid) {
    OperatingPoint op;
    op.mode = p.mode;
    op.ref = ref;
    op.U_grid = U_grid;
    op.V0 = V;
    op.I0 = I;
    op.theta0 = theta;
    op.Ic0 = Eigen::Vector2d(I(0) - p.C_F * V(1), I(1) + p.C_F * V(0));
    op.Uc0 = Eigen::Vector2d(V(0) - p.L_F * op.Ic0(1), V(1) + p.L_F * op.Ic0(0));
    op.P0 = V(0) * I(0) + V(1) * I(1);
    op.Q0 = V(1) * I(0) - V(0) * I(1);
    const double c = std::cos(theta), s = std::sin(theta);
    double Vc[2], Icc[2], Ucc[2];
    model::to_ctrl(c, s, V.data(), Vc);
    model::to_ctrl(c, s, op.Ic0.data(), Icc);
    model::to_ctrl(c, s, op.Uc0.data(), Ucc);
    Vec x = Vec::Zero(NX);
    x.segment<2>(model::IC) = op.Ic0;
    x.segment<2>(model::VC) = V;
    x.segment<2>(model::IG) = I;
    x(model::XI) = (Ucc[0] + p.L_F * Icc[1] - p.K_VF * Vc[0]) / p.Ki_i;
    x(model::XI + 1) = (Ucc[1] - p.L_F * Icc[0] - p.K_VF * Vc[1]) / p.Ki_i;
    x(model::VFF) = Vc[0];
    x(model::VFF + 1) = Vc[1];
    x(model::TH) = theta;
    x(model::PF) = op.P0;
    x(model::QF) = op.Q0;
    op.x0 = x;
    op.u0 = Eigen::Vector3d(Icc[0], Icc[1], 0.0);
    return op;
}

OperatingPoint solve_operating_point(const ConverterParams& p, double P_ref, double V_or_Q_ref, double U_grid) {
    p.validate();
    if (!(U_grid > 0)) throw std::invalid_argument("grid voltage magnitude must be positive");
    References r;
    r.P = P_ref;
    if (p.mode == Mode::PV) {
        r.Vd = V_or_Q_ref;
    } else {
        r.Q = V_or_Q_ref;
        r.Vd = 1.0;
    }
    Eigen::Matrix<double, 5, 1> v;
    v << U_grid, 0.0, P_ref / U_grid, 0.0, 0.0;
    auto resid = [&](const Eigen::Matrix<double, 5, 1>& vv) {
        Eigen::Matrix<double, 5, 1> out;
        op_residual(p, p.mode, r, U_grid, vv.data(), out.data());
        return out;
    };
    Eigen::Matrix<double, 5, 1> f = resid(v);
    bool ok = false;
    for (int it = 0; it < 50; ++it) {
        if (f.cwiseAbs().maxCoeff() < 1e-13) {
            ok = true;
            break;
        }
        Eigen::Matrix<double, 5, 5> J;
        const double h = 1e-20;
        for (int k = 0; k < 5; ++k) {
            std::complex<double> vc[5], rc[5];
            for (int i = 0; i < 5; ++i) vc[i] = v(i);
            vc[k] += std::complex<double>(0.0, h);
            op_residual(p, p.mode, r, U_grid, vc, rc);
            for (int i = 0; i < 5; ++i) J(i, k) = rc[i].imag() / h;
        }
        Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(J);
        if (!lu.isInvertible()) break;
        Eigen::Matrix<double, 5, 1> step = lu.solve(f);
        double a = 1.0;
        Eigen::Matrix<double, 5, 1> vn = v - step, fn = resid(vn);
        for (int ls = 0; ls < 12 && !(fn.norm() < f.norm()); ++ls) {
            a *= 0.5;
            vn = v - a * step;
            fn = resid(vn);
        }
        v = vn;
        f = fn;
    }
    if (!ok && f.cwiseAbs().maxCoeff() < 1e-10) ok = true;
    if (!ok || !f.allFinite())
        throw InfeasibleOperatingPoint("operating point: Newton did not converge in 50 iterations (residual " +
                                       std::to_string(f.cwiseAbs().maxCoeff()) + ")");
    OperatingPoint op = complete_operating_point(p, r, v.head<2>(), v.segment<2>(2), v(4), U_grid);
    op.residual = f.cwiseAbs().maxCoeff();
    return op;
}

double steady_state_residual(const ConverterParams& p, const OperatingPoint& op) {
    double dx[NX], z[10], y[7], w[7] = {0, 0, 0, 0, 0, 0, 0};
    model::plant(p, op.mode, op.ref, op.U_grid, op.x0.data(), w, op.u0.data(), dx, z, y);
    double m = 0.0;
    for (double d : dx) m = std::max(m, std::abs(d));
    return m;
}

GeneralizedPlant build_plant(const ConverterParams& p, const OperatingPoint& op) {
    p.validate();
    if (op.x0.size() != NX) throw DimensionError("operating point state has wrong dimension");
    using C = std::complex<double>;
    const double h = 1e-20;
    Mat A(NX, NX), B(NX, 10), Cm(17, NX), D(17, 10), CI = Mat::Zero(2, NX);
    C x[NX], w[7], u[3], dx[NX], z[10], y[7];
    auto reset = [&]() {
        for (int i = 0; i < NX; ++i) x[i] = op.x0(i);
        for (auto& e : w) e = 0.0;
        for (int i = 0; i < 3; ++i) u[i] = op.u0(i);
    };
    auto store = [&](int col, Mat& top, Mat& bottom) {
        for (int i = 0; i < NX; ++i) top(i, col) = dx[i].imag() / h;
        for (int i = 0; i < 10; ++i) bottom(i, col) = z[i].imag() / h;
        for (int i = 0; i < 7; ++i) bottom(10 + i, col) = y[i].imag() / h;
    };
    for (int k = 0; k < NX; ++k) {
        reset();
        x[k] += C(0.0, h);
        model::plant(p, op.mode, op.ref, op.U_grid, x, w, u, dx, z, y);
        store(k, A, Cm);
    }
    for (int k = 0; k < 10; ++k) {
        reset();
        if (k < 7)
            w[k] += C(0.0, h);
        else
            u[k - 7] += C(0.0, h);
        model::plant(p, op.mode, op.ref, op.U_grid, x, w, u, dx, z, y);
        store(k, B, D);
    }
    CI(0, model::IG) = 1.0;
    CI(1, model::IG + 1) = 1.0;
    std::vector<std::string> in = {"w1", "w2", "w3", "w4", "w5", "w6", "w7", "Icd_ref", "Icq_ref", "omega"};
    std::vector<std::string> out;
    for (int i = 1; i <= 10; ++i) out.push_back("z" + std::to_string(i));
    for (int i = 1; i <= 7; ++i) out.push_back("y" + std::to_string(i));
    GeneralizedPlant g{StateSpace(A, B, Cm, D, in, out), CI, op, p};
    return g;
}

GainMatrix::GainMatrix(const Mat& k) : K(k) {
    if (k.rows() != 3 || k.cols() != 7) throw DimensionError("gain matrix must be 3x7");
}

GainMatrix::GainMatrix(const Mat& k, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& m)
    : K(k), mask(m) {
    if (k.rows() != 3 || k.cols() != 7 || m.rows() != 3 || m.cols() != 7)
        throw DimensionError("gain matrix and mask must be 3x7");
    enforce_mask();
}

void GainMatrix::enforce_mask() {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 7; ++j)
            if (!mask(i, j)) K(i, j) = 0.0;
}

int GainMatrix::free_count() const { return static_cast<int>(mask.count()); }

Mat reference_pv_gains() {
    Mat K(3, 7);
    K << -0.01, 392.7, 0.1, 183.3, 0, 38.8, -2.1,
         -3.01, -67.1, -0.09, 484.6, 0, -62.9, 4.8,
         -97.7, -1.9, -134.5, 2.3, 55.7, -0.4, 0.04;
    return K;
}

Mat reference_pq_gains() {
    Mat K(3, 7);
    K << -1.35, -61.8, 0.66, 361.8, 0, 13.5, 0,
         -0.77, -46.1, -0.22, -27.2, 0, -14.9, -0.02,
         -0.3, -9.3, -257.5, -8.3, 61.6, -2.5, 0.95;
    return K;
}

GainMatrix droop_template(const DroopGains& g) {
    Mat K = Mat::Zero(3, 7);
    K(0, 0) = g.KVP;
    K(0, 1) = g.KVI;
    K(1, 2) = g.KVP;
    K(1, 3) = g.KVI;
    K(2, 4) = g.Kf;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> m = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(3, 7, false);
    m(0, 0) = m(0, 1) = m(1, 2) = m(1, 3) = m(2, 4) = true;
    return GainMatrix(K, m);
}

GainMatrix pll_template(const PllGains& g) {
    Mat K = Mat::Zero(3, 7);
    K(0, 4) = g.KPP;
    K(0, 5) = g.KPI;
    K(1, 0) = -g.KVP;
    K(1, 1) = -g.KVI;
    K(2, 2) = -g.KwP;
    K(2, 3) = -g.KwI;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> m = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(3, 7, false);
    m(0, 4) = m(0, 5) = m(1, 0) = m(1, 1) = m(2, 2) = m(2, 3) = true;
    return GainMatrix(K, m);
}

GainMatrix controller_template(const std::string& kind, const std::map<std::string, double>& gains) {
    auto get = [&](const char* key, double def) {
        auto it = gains.find(key);
        return it == gains.end() ? def : it->second;
    };
    if (kind == "droop") {
        DroopGains g;
        g.KVP = get("KVP", g.KVP);
        g.KVI = get("KVI", g.KVI);
        g.Kf = get("Kf", g.Kf);
        return droop_template(g);
    }
    if (kind == "pll") {
        PllGains g;
        g.KPP = get("KPP", g.KPP);
        g.KPI = get("KPI", g.KPI);
        g.KVP = get("KVP", g.KVP);
        g.KVI = get("KVI", g.KVI);
        g.KwP = get("KwP", g.KwP);
        g.KwI = get("KwI", g.KwI);
        return pll_template(g);
    }
    throw std::invalid_argument("unknown controller template '" + kind + "'");
}

namespace {

struct Closed {
    Mat A, B, C, D, CI;
};

Closed close_loop(const GeneralizedPlant& g, const Mat& K) {
    if (K.rows() != 3 || K.cols() != 7) throw DimensionError("K must be 3x7");
    const Mat& A = g.model.A();
    const Mat& B = g.model.B();
    const Mat& C = g.model.C();
    const Mat& D = g.model.D();
    Mat Bw = B.leftCols(7), Bu = B.rightCols(3);
    Mat Cz = C.topRows(10), Cy = C.bottomRows(7);
    Mat Dzw = D.topLeftCorner(10, 7), Dzu = D.topRightCorner(10, 3);
    Mat Dyw = D.bottomLeftCorner(7, 7), Dyu = D.bottomRightCorner(7, 3);
    Mat L = Mat::Identity(3, 3) - K * Dyu;
    Eigen::FullPivLU<Mat> lu(L);
    if (!lu.isInvertible()) throw AlgebraicLoopError("lft_close: I - K*D22 is singular");
    Mat M = lu.solve(K);
    Closed c;
    c.A = A + Bu * M * Cy;
    c.B = Bw + Bu * M * Dyw;
    c.C = Cz + Dzu * M * Cy;
    c.D = Dzw + Dzu * M * Dyw;
    c.CI = g.C_I;
    return c;
}

std::vector<std::string> labels(const char* stem, int n) {
    std::vector<std::string> v;
    for (int i = 1; i <= n; ++i) v.push_back(stem + std::to_string(i));
    return v;
}

}  // namespace

StateSpace lft_close(const GeneralizedPlant& plant, const Mat& K) {
    Closed c = close_loop(plant, K);
    return prune_structural(StateSpace(c.A, c.B, c.C, c.D, labels("w", 7), labels("z", 10)));
}

StateSpace lft_close(const GeneralizedPlant& plant, const GainMatrix& k) { return lft_close(plant, k.K); }

Mat closed_loop_A(const GeneralizedPlant& plant, const Mat& K) { return lft_close(plant, K).A(); }

StateSpace extract_admittance(const GeneralizedPlant& plant, const GainMatrix& k) {
    Closed c = close_loop(plant, k.K);
    StateSpace y(c.A, c.B.middleCols(4, 2), c.CI, Mat::Zero(2, 2), {"w5", "w6"}, {"Id", "Iq"});
    return prune_structural(y);
}

StateSpace sensitivity_entry(const GeneralizedPlant& plant, const GainMatrix& k, int i, int j) {
    if (i < 1 || i > 10 || j < 1 || j > 7) throw std::out_of_range("sensitivity_entry: index out of range");
    return prune_structural(lft_close(plant, k).select({i - 1}, {j - 1}));
}

void write_matrix_csv(std::ostream& os, const Mat& M, const std::vector<std::string>& rows,
                      const std::vector<std::string>& cols) {
    os << "row";
    for (const auto& c : cols) os << "," << c;
    os << "\n" << std::setprecision(15);
    for (int i = 0; i < M.rows(); ++i) {
        os << (i < static_cast<int>(rows.size()) ? rows[i] : "r" + std::to_string(i + 1));
        for (int j = 0; j < M.cols(); ++j) os << "," << M(i, j);
        os << "\n";
    }
}

void export_plant_csv(const GeneralizedPlant& plant, const std::string& prefix) {
    static const std::vector<std::string> states = {"Icd", "Icq", "Vd", "Vq", "Id", "Iq", "xi_d", "xi_q",
                                                    "vf_d", "vf_q", "theta", "eta1", "eta3", "eta5", "Pf", "Qf"};
    const auto& m = plant.model;
    auto dump = [&](const char* tag, const Mat& M, const std::vector<std::string>& r,
                    const std::vector<std::string>& c) {
        std::ofstream f(prefix + "_" + tag + ".csv");
        if (!f) throw std::runtime_error("cannot write " + prefix + "_" + tag + ".csv");
        write_matrix_csv(f, M, r, c);
    };
    dump("A", m.A(), states, states);
    dump("B", m.B(), states, m.inputs());
    dump("C", m.C(), m.outputs(), states);
    dump("D", m.D(), m.outputs(), m.inputs());
}

}  // namespace hg
