#pragma once

#include <array>
#include <complex>
#include <iosfwd>
#include <string>

#include "qkdnet/errors.hpp"
#include "qkdnet/outcome.hpp"

namespace qkdnet {

using cplx = std::complex<double>;

// Two-qubit polarization density matrix, row-major in the ordered basis {HH, HV, VH, VV}.
struct TwoQubitState {
    std::array<cplx, 16> rho{};

    cplx& at(int r, int c) { return rho[static_cast<std::size_t>(r * 4 + c)]; }
    const cplx& at(int r, int c) const { return rho[static_cast<std::size_t>(r * 4 + c)]; }

    // Throws validation_error unless Hermitian (1e-12), unit trace (1e-12) and
    // positive semidefinite (min eigenvalue >= -1e-10).
    void validate() const;
};

TwoQubitState make_psi_plus();

// One-parameter basis-aligned noise family: fidelity (1+V)/2, tangle V^2 and
// intrinsic QBER (1-V)/2 in both measurement bases.
TwoQubitState make_colored_noise_state(double visibility);

// Isotropic noise: rho = p |psi+><psi+| + (1-p) I/4; concurrence max(0,(3p-1)/2).
TwoQubitState make_werner_state(double p);

double fidelity_to_psi_plus(const TwoQubitState& s);

// Square of the Wootters concurrence.
double tangle(const TwoQubitState& s);
double concurrence(const TwoQubitState& s);

// Single-party POVM element for the passive analyzer: (1/2) |x><x|, optionally with
// the measurement basis rotated by angle_rad about the H/V great circle.
std::array<cplx, 4> povm_element(Outcome x, double angle_rad = 0.0);

// Tr[rho (M_a x M_b)] under the passive POVM; the 16 joint probabilities sum to 1.
double joint_probability(const TwoQubitState& s, Outcome a, Outcome b,
                         double angle_a_rad = 0.0, double angle_b_rad = 0.0);

// All 16 joint probabilities, indexed [outcome_a][outcome_b].
std::array<std::array<double, 4>, 4> probability_table(const TwoQubitState& s,
                                                       double angle_a_rad = 0.0,
                                                       double angle_b_rad = 0.0);

// Text format: 32 whitespace-separated reals = 16 (re, im) entries, row-major
// over {HH, HV, VH, VV}; '#' starts a comment.
TwoQubitState parse_state_text(std::istream& in);
TwoQubitState load_state_file(const std::string& path);

}  // namespace qkdnet
