#include "qkdnet/quantum.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace qkdnet {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;

Eigen::Matrix4cd to_eigen(const TwoQubitState& s) {
    Eigen::Matrix4cd m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) m(r, c) = s.at(r, c);
    return m;
}

const Eigen::Matrix4cd& sigma_yy() {
    static const Eigen::Matrix4cd m = [] {
        Eigen::Matrix4cd y = Eigen::Matrix4cd::Zero();
        y(0, 3) = -1.0;
        y(1, 2) = 1.0;
        y(2, 1) = 1.0;
        y(3, 0) = -1.0;
        return y;
    }();
    return m;
}

TwoQubitState projector(const std::array<double, 4>& v) {
    TwoQubitState s;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) s.at(r, c) = v[static_cast<std::size_t>(r)] * v[static_cast<std::size_t>(c)];
    return s;
}

std::array<double, 2> outcome_vector(Outcome x) {
    switch (x) {
        case Outcome::H: return {1.0, 0.0};
        case Outcome::V: return {0.0, 1.0};
        case Outcome::D: return {kInvSqrt2, kInvSqrt2};
        case Outcome::A: return {kInvSqrt2, -kInvSqrt2};
    }
    throw domain_error("invalid outcome");
}

double joint_probability_unchecked(const TwoQubitState& s, Outcome a, Outcome b,
                                   double angle_a, double angle_b) {
    const auto ma = povm_element(a, angle_a);
    const auto mb = povm_element(b, angle_b);
    // Tr[rho (Ma x Mb)] with kron index (qa*2 + qb).
    cplx tr = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    const cplx kcr = ma[static_cast<std::size_t>(i * 2 + j)] *
                                     mb[static_cast<std::size_t>(k * 2 + l)];
                    tr += s.at(j * 2 + l, i * 2 + k) * kcr;
                }
    return tr.real();
}

}  // namespace

void TwoQubitState::validate() const {
    const Eigen::Matrix4cd m = to_eigen(*this);
    const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (herm > 1e-12)
        throw validation_error("state is not Hermitian (max |rho - rho^dag| = " +
                               std::to_string(herm) + ")");
    const cplx tr = m.trace();
    if (std::abs(tr - cplx(1.0, 0.0)) > 1e-12)
        throw validation_error("state trace differs from 1 by " + std::to_string(std::abs(tr - cplx(1.0, 0.0))));
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw numeric_error("eigensolver failed during state validation");
    const double min_ev = es.eigenvalues().minCoeff();
    if (min_ev < -1e-10)
        throw validation_error("state is not positive semidefinite (min eigenvalue " +
                               std::to_string(min_ev) + ")");
}

TwoQubitState make_psi_plus() {
    return projector({0.0, kInvSqrt2, kInvSqrt2, 0.0});
}

TwoQubitState make_colored_noise_state(double visibility) {
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw domain_error("visibility must lie in [0, 1]");
    // (1+V)/2 |psi+><psi+| + (1-V)/2 |phi-><phi-| with phi- = (|HH> - |VV>)/sqrt(2):
    // the unique Bell-diagonal mix with fidelity (1+V)/2, tangle V^2 and
    // intrinsic QBER (1-V)/2 in both the H/V and D/A bases.
    const double wp = 0.5 * (1.0 + visibility);
    const double wm = 0.5 * (1.0 - visibility);
    TwoQubitState s;
    s.at(1, 1) = s.at(2, 2) = s.at(1, 2) = s.at(2, 1) = 0.5 * wp;
    s.at(0, 0) = s.at(3, 3) = 0.5 * wm;
    s.at(0, 3) = s.at(3, 0) = -0.5 * wm;
    return s;
}

TwoQubitState make_werner_state(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw domain_error("Werner parameter must lie in [0, 1]");
    TwoQubitState s = make_psi_plus();
    for (auto& z : s.rho) z *= p;
    for (int d = 0; d < 4; ++d) s.at(d, d) += (1.0 - p) * 0.25;
    return s;
}

double fidelity_to_psi_plus(const TwoQubitState& s) {
    s.validate();
    // <psi+|rho|psi+> over the {HV, VH} block.
    const cplx f = 0.5 * (s.at(1, 1) + s.at(1, 2) + s.at(2, 1) + s.at(2, 2));
    return f.real();
}

double concurrence(const TwoQubitState& s) {
    s.validate();
    const Eigen::Matrix4cd rho = to_eigen(s);
    const Eigen::Matrix4cd& yy = sigma_yy();
    const Eigen::Matrix4cd r = rho * yy * rho.conjugate() * yy;
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> es(r, false);
    if (es.info() != Eigen::Success) throw numeric_error("concurrence eigensolver failed");
    std::array<double, 4> lam{};
    for (int i = 0; i < 4; ++i) {
        const cplx ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) > 1e-9)
            throw numeric_error("concurrence eigenvalue " + std::to_string(i) +
                                " has imaginary residue " + std::to_string(ev.imag()));
        double re = ev.real();
        if (re < 0.0) {
            if (re < -1e-9)
                throw numeric_error("concurrence eigenvalue " + std::to_string(i) +
                                    " is negative: " + std::to_string(re));
            re = 0.0;
        }
        lam[static_cast<std::size_t>(i)] = std::sqrt(re);
    }
    std::sort(lam.rbegin(), lam.rend());
    return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

double tangle(const TwoQubitState& s) {
    const double c = concurrence(s);
    return c * c;
}

std::array<cplx, 4> povm_element(Outcome x, double angle_rad) {
    const auto v = outcome_vector(x);
    const double c = std::cos(angle_rad);
    const double sn = std::sin(angle_rad);
    const double a = c * v[0] - sn * v[1];
    const double b = sn * v[0] + c * v[1];
    return {0.5 * a * a, 0.5 * a * b, 0.5 * b * a, 0.5 * b * b};
}

double joint_probability(const TwoQubitState& s, Outcome a, Outcome b, double angle_a_rad,
                         double angle_b_rad) {
    s.validate();
    return joint_probability_unchecked(s, a, b, angle_a_rad, angle_b_rad);
}

std::array<std::array<double, 4>, 4> probability_table(const TwoQubitState& s, double angle_a_rad,
                                                       double angle_b_rad) {
    s.validate();
    std::array<std::array<double, 4>, 4> t{};
    for (Outcome a : kOutcomes)
        for (Outcome b : kOutcomes)
            t[outcome_index(a)][outcome_index(b)] =
                joint_probability_unchecked(s, a, b, angle_a_rad, angle_b_rad);
    return t;
}

TwoQubitState parse_state_text(std::istream& in) {
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double x = 0.0;
        while (ls >> x) vals.push_back(x);
        if (!ls.eof()) {
            ls.clear();
            std::string tok;
            ls >> tok;
            throw format_error("invalid token '" + tok + "' in state matrix");
        }
    }
    if (vals.size() != 32)
        throw format_error("state matrix needs 32 reals (16 re/im pairs, row-major), got " +
                           std::to_string(vals.size()));
    TwoQubitState s;
    for (std::size_t i = 0; i < 16; ++i) s.rho[i] = cplx(vals[2 * i], vals[2 * i + 1]);
    return s;
}

TwoQubitState load_state_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw config_error("cannot open state file '" + path + "'");
    return parse_state_text(f);
}

}  // namespace qkdnet
