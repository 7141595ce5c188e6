#pragma once

// Nonlinear averaged dq model of one converter, templated on the scalar so the
// same code is integrated in time and differentiated by complex step.

#include <cmath>
#include <complex>

#include "hinfgrid/converter.hpp"

namespace hg::model {

enum : int { IC = 0, VC = 2, IG = 4, XI = 6, VFF = 8, TH = 10, E1 = 11, E3 = 12, E5 = 13, PF = 14, QF = 15, NX = 16 };

using std::cos;
using std::sin;

template <class T>
struct Measured {
    T Vc[2], Icc[2], Igc[2];
    T phi, c, s;
    T PE, QE, Pm, Qm;
    T y[7];
};

// Park rotation x^c = R(-phi) x^g.
template <class T>
inline void to_ctrl(const T& c, const T& s, const T* g, T* out) {
    out[0] = c * g[0] + s * g[1];
    out[1] = -s * g[0] + c * g[1];
}
template <class T>
inline void to_grid(const T& c, const T& s, const T* k, T* out) {
    out[0] = c * k[0] - s * k[1];
    out[1] = s * k[0] + c * k[1];
}

template <class T>
Measured<T> measure(const ConverterParams& p, Mode mode, const References& r, const T* x, const T* Ig,
                    const T* w) {
    Measured<T> m;
    m.phi = x[TH] + w[6];
    m.c = cos(m.phi);
    m.s = sin(m.phi);
    to_ctrl(m.c, m.s, x + VC, m.Vc);
    to_ctrl(m.c, m.s, x + IC, m.Icc);
    to_ctrl(m.c, m.s, Ig, m.Igc);
    m.PE = m.Vc[0] * m.Igc[0] + m.Vc[1] * m.Igc[1];
    m.QE = m.Vc[1] * m.Igc[0] - m.Vc[0] * m.Igc[1];
    const bool filt = p.omega_f > 0.0;
    m.Pm = filt ? x[PF] : m.PE;
    m.Qm = filt ? x[QF] : m.QE;
    const T y1 = r.Vd - m.Vc[0] + p.X_v * m.Igc[1] + w[0];
    const T y3 = r.Vq - m.Vc[1] - p.X_v * m.Igc[0] + w[1];
    const T y5 = r.P - m.Pm + w[2];
    const T y7 = r.Q - m.Qm + w[3];
    m.y[0] = y1;
    m.y[1] = x[E1];
    m.y[2] = y3;
    m.y[3] = x[E3];
    m.y[4] = y5;
    m.y[5] = x[E5];
    m.y[6] = y7;
    (void)mode;
    return m;
}

// Derivatives of every state except the grid current (IG), which the caller supplies.
template <class T>
void derivs(const ConverterParams& p, Mode mode, const Measured<T>& m, const T* x, const T* u, T* dx) {
    const T e0 = u[0] - m.Icc[0], e1 = u[1] - m.Icc[1];
    const T Ucc[2] = {p.Kp_i * e0 + p.Ki_i * x[XI] - p.L_F * m.Icc[1] + p.K_VF * x[VFF],
                      p.Kp_i * e1 + p.Ki_i * x[XI + 1] + p.L_F * m.Icc[0] + p.K_VF * x[VFF + 1]};
    T Uc[2];
    to_grid(m.c, m.s, Ucc, Uc);
    const T* Ic = x + IC;
    const T* V = x + VC;
    const T* I = x + IG;
    const double kL = p.omega_b / p.L_F, kC = p.omega_b / p.C_F;
    // J = [[0,1],[-1,0]]
    dx[IC] = kL * (Uc[0] - V[0] + p.L_F * Ic[1]);
    dx[IC + 1] = kL * (Uc[1] - V[1] - p.L_F * Ic[0]);
    dx[VC] = kC * (Ic[0] - I[0] + p.C_F * V[1]);
    dx[VC + 1] = kC * (Ic[1] - I[1] - p.C_F * V[0]);
    dx[XI] = e0;
    dx[XI + 1] = e1;
    dx[VFF] = (m.Vc[0] - x[VFF]) / p.T_VF;
    dx[VFF + 1] = (m.Vc[1] - x[VFF + 1]) / p.T_VF;
    dx[TH] = u[2];
    dx[E1] = mode == Mode::PQ ? m.y[6] : m.y[0];
    dx[E3] = m.y[2];
    dx[E5] = m.y[4];
    dx[PF] = p.omega_f * (m.PE - x[PF]);
    dx[QF] = p.omega_f * (m.QE - x[QF]);
}

// Grid-side inductor towards a voltage source U (global dq).
template <class T>
void grid_branch(const ConverterParams& p, const T* x, const T* U, T* dI) {
    const T* V = x + VC;
    const T* I = x + IG;
    const double k = p.omega_b / p.L_g, Rg = p.R_g();
    dI[0] = k * (V[0] - U[0] - Rg * I[0] + p.L_g * I[1]);
    dI[1] = k * (V[1] - U[1] - Rg * I[1] - p.L_g * I[0]);
}

// Single converter against a stiff source: full derivatives plus z (10) and y (7).
template <class T>
void plant(const ConverterParams& p, Mode mode, const References& r, double U_grid, const T* x, const T* w,
           const T* u, T* dx, T* z, T* y) {
    Measured<T> m = measure(p, mode, r, x, x + IG, w);
    derivs(p, mode, m, x, u, dx);
    const T U[2] = {U_grid + w[4], w[5]};
    grid_branch(p, x, U, dx + IG);
    for (int i = 0; i < 7; ++i) y[i] = m.y[i];
    z[0] = m.Vc[0];
    z[1] = m.Vc[1];
    z[2] = mode == Mode::PQ ? m.y[6] : m.y[0];
    z[3] = m.y[2];
    z[4] = m.Pm;
    z[5] = m.Qm;
    z[6] = x[TH] + w[6];
    z[7] = m.y[4];
    // F^-1(s) I' with F^-1 = (1/w0)[[s+tau, -w0],[w0, s+tau]]
    const T* I = x + IG;
    z[8] = (dx[IG] + p.tau * I[0]) / p.omega_b - I[1];
    z[9] = (dx[IG + 1] + p.tau * I[1]) / p.omega_b + I[0];
}

}  // namespace hg::model
