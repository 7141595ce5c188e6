#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hinfgrid/lti.hpp"

namespace hg {

struct Branch {
    std::string from, to;
    double R = 0.0, X = 0.0;  // p.u.
    bool operator==(const Branch&) const = default;
};

// Branch from a node to the grounded (infinite) bus.
struct SelfLoop {
    std::string node;
    double R = 0.0, X = 0.0;
    bool operator==(const SelfLoop&) const = default;
};

struct Load {
    std::string node;
    double P = 0.0, Q = 0.0;
    bool operator==(const Load&) const = default;
};

struct NetworkSpec {
    std::vector<std::string> nodes;
    std::vector<Branch> branches;
    std::vector<SelfLoop> self_loops;
    std::vector<std::string> boundary;
    std::vector<Load> loads;
    double omega0 = 2.0 * M_PI * 50.0;
    double tau = 0.1 * 2.0 * M_PI * 50.0;

    void validate() const;
    int index(const std::string& node) const;
    bool operator==(const NetworkSpec&) const = default;
};

struct ReducedNetwork {
    Mat Q;
    double lambda1 = 0.0;
    double tau = 0.0;
    double omega0 = 0.0;
    std::vector<std::string> boundary;
};

// Grounded susceptance Laplacian (weights 1/X) and ground-tie susceptances per node.
struct Laplacian {
    Mat L;
    Vec ground;
};
Laplacian assemble_laplacian(const NetworkSpec& spec);

StateSpace line_F(double omega0, double tau);
// F^-1(jw) = (1/w0)[[jw+tau, -w0],[w0, jw+tau]].
CMat line_F_inv(double omega0, double tau, double w);
// Proper realization of F^-1 * Y for strictly proper Y.
StateSpace finv_cascade(const StateSpace& Y, double omega0, double tau);

ReducedNetwork kron_reduce(const NetworkSpec& spec);
ReducedNetwork reduced_from_matrix(const Mat& Q, double omega0, double tau);
double lambda_min(const Mat& Q);

struct DeviceCertificate {
    std::string name;
    double norm = 0.0;
    double peak_frequency = 0.0;
};

struct CertificateReport {
    std::vector<DeviceCertificate> devices;
    double lambda1 = 0.0;
    double margin = 0.0;
    bool pass = false;
};

CertificateReport certify(const std::vector<StateSpace>& devices, const ReducedNetwork& reduced,
                          const std::vector<std::string>& names = {}, double lambda1_scale = 1.0);
void write_certificate_text(std::ostream& os, const CertificateReport& r);
void write_certificate_csv(std::ostream& os, const CertificateReport& r);

// Autonomous closed loop of devices and reduced network (A only).
StateSpace build_interconnection(const ReducedNetwork& reduced, const std::vector<StateSpace>& devices);

// Buses 4..9 with the converter lines folded into the devices; boundary [4, 8, 6].
NetworkSpec nine_bus_network();
// Same network with converter capacitor nodes c1..c3 attached through L_g (boundary c1, c2, c3).
NetworkSpec nine_bus_with_converters(const std::vector<double>& L_g);
Mat fixture_q_red();

}  // namespace hg
