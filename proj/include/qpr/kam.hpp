// Reducibility iteration for quasi-periodic sl(2,R) systems: resonance-aware
// conjugation steps driving the perturbation to zero, with measured bounds.

#pragma once

#include "qpr/cocycle.hpp"
#include "qpr/fourier.hpp"
#include "qpr/sl2.hpp"

#include <optional>
#include <string>
#include <vector>

namespace qpr {

// perturbation norm fails to contract at the scheme's rate
struct SchemeDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// a small divisor fell below the resonance threshold mid-solve
struct ResonanceEscape : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct KamParams {
    double eps0 = 1e-2;          // initial perturbation size
    double sigma = 1.0 / 33.0;   // contraction exponent
    double r0 = 0.1;             // initial analyticity radius
    int max_steps = 40;
    double stop_tol = 1e-12;
    int n_cap = 64;              // truncation-order cap per dimension
    double resonance_cap = 0.05; // upper cap on the resonance threshold
    int work_order_cap = 48;     // coefficient-box cap for intermediate maps

    double eps_j(int j) const;       // eps0^{(1+sigma)^j}
    double r_j(int j) const;         // r0 * 2^{-j}
    int n_j(int j) const;            // (2 sigma/(r_j - r_{j+1})) ln(1/eps_j), capped
    double res_thresh(int j) const;  // min(eps_j^sigma, resonance_cap)
    double varsigma() const;         // ln(1+sigma)/ln(8+8 sigma)
};

struct KamStep {
    int index = 0;
    bool resonant = false;
    VecXi n;           // resonant lattice vector (empty when non-resonant)
    TorusMap y;        // step transformation on the doubled torus
    TorusMap z;        // exponential generator of the non-resonant part
    Mat2 a_next = Mat2::Zero();
    double z_norm = 0.0;       // ||Z_j|| at the shrunk radius
    double a_shift = 0.0;      // |A_{j+1} - A_j| (non-res) or |A_{j+1}| (res)
    double f_next_norm = 0.0;  // measured ||F_{j+1}||
};

struct KamTranscript {
    std::vector<KamStep> steps;
    Mat2 b = Mat2::Zero();       // final constant matrix
    double final_residual = 0.0; // ||F_K||
    VecXi label;                 // sum of resonant lattice vectors
    bool converged = false;
    std::string diagnostic;
};

// n minimizing |2 xi - 2 pi <n, omega>| over 0 < |n|_1 <= n_max if the minimum
// is below thresh; ties broken lexicographically.
std::optional<VecXi> resonance_scan(double xi, const FrequencyVector& omega, int n_max,
                                    double thresh);

// Z with d_omega Z = [A, Z] + (F truncated to |k|_1 <= n_trunc, zero mode
// removed); the zero mode (to be absorbed into A) is returned via avg_out.
// Solved mode-by-mode as a 4x4 linear system; throws ResonanceEscape when a
// small divisor falls below divisor_floor.
TorusMap solve_homological(const Mat2& a, const TorusMap& f, const FrequencyVector& omega,
                           int n_trunc, double divisor_floor, Mat2* avg_out = nullptr);

// Y(theta) = exp((pi <n, theta> / xi) A) on the doubled torus; conjugation
// shifts the elliptic phase xi by -pi <n, omega>.
TorusMap resonant_rotation(const VecXi& n, double xi, const Mat2& a, double radius);

struct KamState {
    Mat2 a = Mat2::Zero();
    TorusMap f;  // doubled-torus representation
    int j = 0;
};

// One step of the scheme; advances state in place. Throws SchemeDivergence
// when the measured ||F_{j+1}|| exceeds eps_{j+1} while still above stop_tol.
KamStep kam_step(KamState& state, const KamParams& p, const FrequencyVector& omega);

// Iterate kam_step from (A0, F0) until ||F|| < stop_tol or max_steps; failures
// are recorded on the transcript rather than thrown.
KamTranscript reduce(const QpLinearSystem& sys, const KamParams& p);

// Max over random (theta, t) of |d/dt Pi - (A0 + F0) Pi + Pi B| with
// Pi(t) = prod_j Y_j(theta + omega t), d/dt by 4th-order central differences.
double verify_conjugation(const QpLinearSystem& sys, const KamTranscript& t,
                          int n_samples, unsigned seed = 12345);

}  // namespace qpr
