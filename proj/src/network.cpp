#include "hinfgrid/network.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>

namespace hg {

int NetworkSpec::index(const std::string& node) const {
    auto it = std::find(nodes.begin(), nodes.end(), node);
    if (it == nodes.end()) throw std::invalid_argument("unknown network node '" + node + "'");
    return static_cast<int>(it - nodes.begin());
}

void NetworkSpec::validate() const {
    std::set<std::string> s(nodes.begin(), nodes.end());
    if (s.size() != nodes.size()) throw std::invalid_argument("duplicate network node");
    if (!(omega0 > 0)) throw std::invalid_argument("omega0 must be positive");
    auto check = [&](double R, double X) {
        if (!(X > 0)) throw std::invalid_argument("branch reactance must be positive");
        const double ratio = R * omega0 / X;
        if (std::abs(ratio - tau) > 1e-9 * std::max(1.0, tau))
            throw std::invalid_argument("network is not homogeneous: R/L = " + std::to_string(ratio) +
                                        " differs from tau = " + std::to_string(tau));
    };
    for (const auto& b : branches) {
        index(b.from);
        index(b.to);
        if (b.from == b.to) throw std::invalid_argument("branch endpoints must differ");
        check(b.R, b.X);
    }
    for (const auto& l : self_loops) {
        index(l.node);
        check(l.R, l.X);
    }
    for (const auto& b : boundary) index(b);
    for (const auto& l : loads) index(l.node);
    std::set<std::string> bs(boundary.begin(), boundary.end());
    if (bs.size() != boundary.size()) throw std::invalid_argument("duplicate boundary node");
}

Laplacian assemble_laplacian(const NetworkSpec& spec) {
    spec.validate();
    const int n = static_cast<int>(spec.nodes.size());
    Laplacian lap{Mat::Zero(n, n), Vec::Zero(n)};
    for (const auto& b : spec.branches) {
        const int i = spec.index(b.from), j = spec.index(b.to);
        const double y = 1.0 / b.X;
        lap.L(i, i) += y;
        lap.L(j, j) += y;
        lap.L(i, j) -= y;
        lap.L(j, i) -= y;
    }
    for (const auto& l : spec.self_loops) {
        const int i = spec.index(l.node);
        lap.L(i, i) += 1.0 / l.X;
        lap.ground(i) += 1.0 / l.X;
    }
    return lap;
}

StateSpace line_F(double omega0, double tau) {
    if (!(omega0 > 0)) throw std::invalid_argument("line_F: omega0 must be positive");
    Mat A(2, 2);
    A << -tau, omega0, -omega0, -tau;
    return StateSpace(A, omega0 * Mat::Identity(2, 2), Mat::Identity(2, 2), Mat::Zero(2, 2), {"i_d", "i_q"},
                      {"v_d", "v_q"});
}

CMat line_F_inv(double omega0, double tau, double w) {
    CMat M(2, 2);
    const cplx a = (cplx(0.0, w) + tau) / omega0;
    M << a, -1.0, 1.0, a;
    return M;
}

StateSpace finv_cascade(const StateSpace& Y, double omega0, double tau) {
    if (Y.ny() != 2) throw DimensionError("finv_cascade: admittance must have two outputs");
    if (Y.D().cwiseAbs().maxCoeff() > 0.0)
        throw std::invalid_argument("finv_cascade: admittance must be strictly proper");
    Mat Jp(2, 2);
    Jp << 0.0, -1.0, 1.0, 0.0;
    Mat C = (Y.C() * Y.A() + tau * Y.C()) / omega0 + Jp * Y.C();
    Mat D = Y.C() * Y.B() / omega0;
    return StateSpace(Y.A(), Y.B(), C, D, Y.inputs(), Y.outputs());
}

double lambda_min(const Mat& Q) {
    if (Q.rows() != Q.cols()) throw DimensionError("lambda_min: matrix must be square");
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
        throw std::invalid_argument("lambda_min: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

ReducedNetwork reduced_from_matrix(const Mat& Q, double omega0, double tau) {
    ReducedNetwork r;
    r.Q = Q;
    r.lambda1 = lambda_min(Q);
    r.omega0 = omega0;
    r.tau = tau;
    for (int i = 0; i < Q.rows(); ++i) r.boundary.push_back("b" + std::to_string(i + 1));
    return r;
}

ReducedNetwork kron_reduce(const NetworkSpec& spec) {
    Laplacian lap = assemble_laplacian(spec);
    std::vector<int> b, in;
    for (const auto& name : spec.boundary) b.push_back(spec.index(name));
    for (int i = 0; i < static_cast<int>(spec.nodes.size()); ++i)
        if (std::find(b.begin(), b.end(), i) == b.end()) in.push_back(i);
    const int nb = static_cast<int>(b.size()), ni = static_cast<int>(in.size());
    Mat Lbb(nb, nb), Lbi(nb, ni), Lii(ni, ni);
    for (int r = 0; r < nb; ++r) {
        for (int c = 0; c < nb; ++c) Lbb(r, c) = lap.L(b[r], b[c]);
        for (int c = 0; c < ni; ++c) Lbi(r, c) = lap.L(b[r], in[c]);
    }
    for (int r = 0; r < ni; ++r)
        for (int c = 0; c < ni; ++c) Lii(r, c) = lap.L(in[r], in[c]);
    Mat Q = Lbb;
    if (ni > 0) {
        Eigen::FullPivLU<Mat> lu(Lii);
        if (!lu.isInvertible() || lu.rcond() < 1e-14)
            throw std::runtime_error("kron_reduce: interior block is singular (floating interior subnetwork)");
        Q -= Lbi * lu.solve(Lbi.transpose());
    }
    Q = 0.5 * (Q + Q.transpose());
    ReducedNetwork r;
    r.Q = Q;
    r.lambda1 = lambda_min(Q);
    r.tau = spec.tau;
    r.omega0 = spec.omega0;
    r.boundary = spec.boundary;
    return r;
}

CertificateReport certify(const std::vector<StateSpace>& devices, const ReducedNetwork& reduced,
                          const std::vector<std::string>& names, double lambda1_scale) {
    CertificateReport rep;
    rep.lambda1 = reduced.lambda1 * lambda1_scale;
    double worst = 0.0;
    for (size_t i = 0; i < devices.size(); ++i) {
        DeviceCertificate d;
        d.name = i < names.size() ? names[i] : "device" + std::to_string(i + 1);
        if (!is_stable(devices[i])) {
            d.norm = std::numeric_limits<double>::infinity();
        } else {
            HinfResult h = hinf_norm(finv_cascade(devices[i], reduced.omega0, reduced.tau), 1e-6);
            d.norm = h.norm;
            d.peak_frequency = h.peak_frequency;
        }
        worst = std::max(worst, d.norm);
        rep.devices.push_back(d);
    }
    rep.margin = rep.lambda1 - worst;
    rep.pass = rep.margin > 0.0;
    return rep;
}

void write_certificate_text(std::ostream& os, const CertificateReport& r) {
    os << std::setprecision(12);
    os << "lambda1 " << r.lambda1 << "\n";
    for (const auto& d : r.devices)
        os << "device " << d.name << " norm " << d.norm << " peak_rad_s " << d.peak_frequency << "\n";
    os << "margin " << r.margin << "\n";
    os << "verdict " << (r.pass ? "pass" : "fail") << "\n";
}

void write_certificate_csv(std::ostream& os, const CertificateReport& r) {
    os << "device,norm,peak_rad_s,margin\n" << std::setprecision(15);
    for (const auto& d : r.devices)
        os << d.name << "," << d.norm << "," << d.peak_frequency << "," << (r.lambda1 - d.norm) << "\n";
}

StateSpace build_interconnection(const ReducedNetwork& reduced, const std::vector<StateSpace>& devices) {
    const int nb = static_cast<int>(reduced.Q.rows());
    if (static_cast<int>(devices.size()) != nb)
        throw DimensionError("build_interconnection: device count must match boundary size");
    int n = 0;
    for (const auto& d : devices) {
        if (d.nu() != 2 || d.ny() != 2) throw DimensionError("devices must be 2x2 admittances");
        n += d.nx();
    }
    Mat A = Mat::Zero(n, n), B = Mat::Zero(n, 2 * nb), C = Mat::Zero(2 * nb, n), D = Mat::Zero(2 * nb, 2 * nb);
    int off = 0;
    for (int i = 0; i < nb; ++i) {
        StateSpace g = finv_cascade(devices[i], reduced.omega0, reduced.tau);
        const int k = g.nx();
        A.block(off, off, k, k) = g.A();
        B.block(off, 2 * i, k, 2) = g.B();
        C.block(2 * i, off, 2, k) = g.C();
        D.block(2 * i, 2 * i, 2, 2) = g.D();
        off += k;
    }
    Mat QI = Mat::Zero(2 * nb, 2 * nb);
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) QI.block(2 * i, 2 * j, 2, 2) = reduced.Q(i, j) * Mat::Identity(2, 2);
    Eigen::FullPivLU<Mat> lu(QI - D);
    if (!lu.isInvertible()) throw AlgebraicLoopError("build_interconnection: ill-posed interconnection");
    Mat Acl = A + B * lu.solve(C);
    return StateSpace(Acl, Mat::Zero(n, 0), Mat::Zero(0, n), Mat::Zero(0, 0));
}

namespace {

Branch line(const std::string& a, const std::string& b, double R, double X) { return Branch{a, b, R, X}; }

}  // namespace

NetworkSpec nine_bus_network() {
    NetworkSpec s;
    s.nodes = {"4", "5", "6", "7", "8", "9"};
    s.branches = {line("4", "9", 0.00125, 0.0125), line("8", "9", 0.0025, 0.025), line("7", "8", 0.012, 0.12),
                  line("6", "7", 0.008, 0.08),     line("4", "5", 0.0012, 0.012), line("5", "6", 0.0007, 0.007)};
    s.self_loops = {SelfLoop{"9", 0.0005, 0.005}};
    s.boundary = {"4", "8", "6"};
    s.loads = {Load{"5", 0.12, 0.0}, Load{"7", 0.2, 0.0}, Load{"9", 0.18, 0.0}};
    return s;
}

NetworkSpec nine_bus_with_converters(const std::vector<double>& L_g) {
    if (L_g.size() != 3) throw std::invalid_argument("nine-bus system has three converters");
    NetworkSpec s = nine_bus_network();
    const double r = s.tau / s.omega0;
    s.nodes.insert(s.nodes.begin(), {"c1", "c2", "c3"});
    s.branches.push_back(line("c1", "4", r * L_g[0], L_g[0]));
    s.branches.push_back(line("c2", "8", r * L_g[1], L_g[1]));
    s.branches.push_back(line("c3", "6", r * L_g[2], L_g[2]));
    s.boundary = {"c1", "c2", "c3"};
    return s;
}

Mat fixture_q_red() {
    Mat Q(3, 3);
    Q << 114.55, -10.0, -54.55, -10.0, 40.0, -5.0, -54.55, -5.0, 59.55;
    return Q;
}

}  // namespace hg
