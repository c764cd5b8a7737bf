// Parameter sweeps over E, gap detection/labeling, the model families, and
// the local embedding of discrete cocycles into quasi-periodic flows.

#pragma once

#include "qpr/cocycle.hpp"
#include "qpr/kam.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace qpr {

struct EmbedDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class FamilyKind { GenericQuadratic, SchrodingerFlow, AmoEmbedded };

// nu(E) conventions (cycles for AmoEmbedded, radians/time otherwise):
//   GenericQuadratic: nu(E) = E, A0 = [[0,E],[-E,0]], F0 fixed.
//   SchrodingerFlow:  companion form [[0,1],[-E+q,0]], nu(E) = sqrt(E).
//   AmoEmbedded:      nu(E) = arccos(-E/2)/(2 pi), flow generator 2 pi nu J + F
//                     obtained by local embedding of the cocycle.
struct ModelFamily {
    FamilyKind kind = FamilyKind::GenericQuadratic;
    FrequencyVector omega;  // flow frequencies; (1, alpha) for AmoEmbedded
    TorusMap f0;            // sl(2,R) perturbation (GenericQuadratic/SchrodingerFlow)
    double lambda = 0.0;    // AMO coupling
    double alpha = 0.0;     // AMO base frequency
    double e_min = 0.0, e_max = 1.0;
    double l1 = 0.0, l2 = 0.0;  // |nu'| >= l1, |nu''| <= l2 on [e_min, e_max]

    double nu(double e) const;
    double nu_prime(double e) const;
    bool in_interval(double e) const { return e >= e_min && e <= e_max; }
};

ModelFamily amo_family(double lambda, double alpha);

struct AmoFrame {
    Mat2 b;       // log of [[-E,-1],[1,0]] in sl(2,R)
    Mat2 m;       // normalizing frame, M^{-1} e^B M = rotation by nu
    double nu;    // arccos(-E/2), radians
};

// S_E^lambda(theta) = [[-E + 2 lambda cos(2 pi theta), -1], [1, 0]]
DiscreteCocycle amo_cocycle(double lambda, double alpha, double e);

AmoFrame amo_normal_frame(double e);

// exact cocycle generator in the normal frame: e^{nu J} e^{G(theta)} equals
// M^{-1} S_E^lambda M, G = M^{-1} [[0,0],[-2 lambda cos(2 pi theta),0]] M
TorusMap amo_cocycle_generator(double lambda, double e, double radius);

// Flow system for the family at E (AmoEmbedded routes through local_embed).
QpLinearSystem system_at(const ModelFamily& fam, double e, double embed_tol = 1e-10);

struct SweepPoint {
    double e = 0.0;
    double rho = 0.0;   // cycles mod 1 for AmoEmbedded, radians/time otherwise
    double lyap = 0.0;
    double rho_err = 0.0;
    bool rho_ok = true;
    bool lyap_ok = true;
};

struct SweepOptions {
    double t_max = 400.0;       // flow horizon
    long n_iter = 200000;       // discrete-cocycle orbit length
    double rho_tol = 1e-4;
    bool with_lyapunov = true;
    int jobs = 1;               // grid points evaluated in parallel
};

std::vector<SweepPoint> sweep(const ModelFamily& fam, const std::vector<double>& grid,
                              const SweepOptions& opt);

struct GapRecord {
    VecXi label;
    double a = 0.0, b = 0.0;      // refined edges
    double plateau = 0.0;         // rotation-number value on the gap
    double length() const { return b - a; }
};

struct LabelCandidate {
    VecXi k;
    double value;  // expected plateau in the curve's rho units
};

// Plateau candidates for flows: pi <k, omega> (radians/time), |k|_1 <= k_max.
std::vector<LabelCandidate> flow_label_candidates(const FrequencyVector& omega, int k_max);
// For the AMO (cycles mod 1): min_j |k alpha / 2 - j|.
std::vector<LabelCandidate> amo_label_candidates(double alpha, int k_max);

// Maximal runs of >= 2 grid points with |rho - value| < plateau_tol for a
// candidate; edges refined by bisection on rho_eval to grid_step * 1e-3.
// mod_one treats rho on the circle. Throws on ambiguous double labels.
std::vector<GapRecord> detect_gaps(const std::vector<SweepPoint>& curve,
                                   const std::vector<LabelCandidate>& candidates,
                                   double plateau_tol,
                                   const std::function<double(double)>& rho_eval,
                                   bool mod_one);

bool measure_check(const std::vector<GapRecord>& gaps, double eps0);

// --- local embedding machinery (doubled-frequency divisor functions) ---

// k-tilde minimizing |x + k| over a range of x (E-independent choice); throws
// when no single integer keeps the value within [0, 5/6] over [x_lo, x_hi].
int select_ktilde(double x_lo, double x_hi);

// H(x) = (e^{2 pi i x} - 1)/(2 pi i x), H(0) = 1; requires |x| <= 5/6.
cplx h_eval(double x);

// Solve L(F) = phi where L(F)(theta) = int_0^1 e^{-2 pi nu J s} F(s, theta+s mu)
// e^{2 pi nu J s} ds; phi is sl(2,R)-valued on T^{d-1}, F lives on T^d in the
// resonance-site subspace.
TorusMap invert_L(const TorusMap& phi, double nu, const VecXd& mu);

// Forward application of L (coefficientwise), for round-trip audits.
TorusMap apply_L(const TorusMap& f, double nu, const VecXd& mu);

// Empirical operator norm of invert_L over random inputs.
double measure_invert_norm(double nu, const VecXd& mu, int order, int trials,
                           unsigned seed = 7);

struct EmbeddingResult {
    TorusMap f;                 // flow perturbation on T^d
    double norm_ratio = 0.0;    // ||F|| / ||G||
    double residual = 0.0;      // max |Phi^1 - e^{2 pi nu J} e^G| over samples
    int iterations = 0;
    double c_measured = 0.0;    // empirical ||L^{-1}||
};

// Newton iteration F <- F - L^{-1}(traceless Psi(F,G)) with
// Psi = e^{-2 pi nu J} Phi^1(theta) - e^{G(theta)}; throws EmbedDivergence
// when the residual stops contracting. f_init provides a warm start.
EmbeddingResult local_embed(double nu, const TorusMap& g, const VecXd& mu, double tol,
                            int max_iter = 30, const TorusMap* f_init = nullptr);

// local_embed with a ramp on the generator amplitude (warm-started stages);
// used when |G| is too large for a cold Newton start.
EmbeddingResult local_embed_continuation(double nu, const TorusMap& g, const VecXd& mu,
                                         double tol, int stages = 4);

// True when the finite-difference Dirichlet discretization of -y'' + q(omega t) y
// on [0, length] has no eigenvalue in (a, b); independent approximate oracle.
bool fd_schrodinger_gap_free(const std::function<double(double)>& potential,
                             double length, int n_grid, double a, double b);

}  // namespace qpr
