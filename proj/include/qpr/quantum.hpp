// Quantized evolution of the harmonic oscillator under quadratic
// time-quasi-periodic perturbations: Hermite-basis integrator, exact Gaussian
// propagator, Sobolev norms, and growth-law prediction/fitting.

#pragma once

#include "qpr/cocycle.hpp"
#include "qpr/sl2.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace qpr {

// i u_t = (nu/2) H0 u + W(theta0 + omega t)^W u with
// W = (a x^2 + 2 b x xi + c xi^2)/2; the coefficients are read off the
// sl(2,R)-valued map [[b, c],[-a, -b]] shared with the classical flow.
struct QuadraticSymbol {
    double nu = 0.0;
    FrequencyVector omega;
    TorusMap f;  // [[b, c],[-a, -b]]
    VecXd theta0;

    QuadraticSymbol() = default;
    QuadraticSymbol(double nu_in, FrequencyVector om, TorusMap f_in);

    Eigen::Vector3d abc_at(double t) const;  // (a, b, c)
    QpLinearSystem classical() const;        // Hamilton flow of the full symbol
};

struct HermiteState {
    Eigen::VectorXcd c;

    static HermiteState mode(int n, int n_trunc);
    int size() const { return static_cast<int>(c.size()); }
    double norm0() const { return c.norm(); }
    double tail_mass() const;  // |c_n|^2 summed over the top decile of modes
};

struct SobolevTrace {
    double s = 0.0;
    std::vector<double> t;
    std::vector<double> norm;
    std::vector<double> tail;
    std::vector<char> trusted;  // 0 after the first leakage flag
    long trusted_count() const;
};

// Matrix of (nu/2) H0 + W(theta)^W in the Hermite basis; couples n <-> n, n+-2.
Eigen::MatrixXcd weyl_matrix(const QuadraticSymbol& sym, const VecXd& theta, int n_trunc);

// Unitary Cayley-midpoint stepping in the interaction picture of the
// time-dependent diagonal; one trace per requested s. Leakage (tail mass
// > 1e-8) marks all later samples untrusted.
std::vector<SobolevTrace> hermite_evolve(const QuadraticSymbol& sym, const HermiteState& u0,
                                         const std::vector<double>& t_grid, double dt,
                                         const std::vector<double>& s_list);

// (sum (2n+1)^s |c_n|^2)^{1/2}
double sobolev_norm(const HermiteState& u, double s);

// ratio of sobolev_norm to the quadrature-grid norm |u|_{H^s} + |x^s u|_{L^2}
// (independent real-space evaluation); s in {1, 2}
double norm_equivalence_check(const HermiteState& u, int s);

// Moebius action of an SL(2,R) flow matrix on the width of exp(i beta x^2 / 2);
// Im beta > 0 is preserved (no caustic can occur on the upper half plane).
cplx gaussian_evolve(const Mat2& phi, cplx beta0);

// beta(t_k) along the flow of sys, chaining segment Moebius maps.
std::vector<cplx> gaussian_trajectory(const QpLinearSystem& sys, cplx beta0,
                                      const std::vector<double>& t_grid,
                                      double tol = 1e-10);

// closed-form Sobolev norm of the normalized Gaussian of width beta; s in {0,1,2}
double gaussian_sobolev(cplx beta, int s);

struct ExplicitNorms {
    double x_moment = 0.0;      // int x^{2s} |v|^2
    double deriv_moment = 0.0;  // int |v^{(s)}|^2
    double total = 0.0;         // |v(t)|_s
};

// v(t,x) = e^{-lambda t/2} v0(e^{-lambda t} x) for Gaussian v0 of width beta0
ExplicitNorms explicit_hyperbolic(cplx beta0, double lambda, double t, int s);

// v(t,x) = e^{i kappa x^2 t / 2} v0(x) for Gaussian v0 of width beta0
ExplicitNorms explicit_parabolic(cplx beta0, double kappa, double t, int s);

enum class GrowthKind { Bounded, Exponential, Polynomial };

struct GrowthLaw {
    GrowthKind kind = GrowthKind::Bounded;
    double param = 0.0;  // rate (Exponential) or degree (Polynomial)
    std::string kind_name() const;
};

struct GrowthFit {
    GrowthKind kind = GrowthKind::Bounded;
    double param = 0.0;
    double r2 = 0.0;
};

// Elliptic/Zero -> Bounded; Hyperbolic{l} -> Exponential{s l};
// Parabolic{k} -> Polynomial{s}
GrowthLaw predict_growth(const ReducedForm& form, double s);

// model selection among constant / log-linear / log-log fits on the trusted
// samples with t >= 5; throws when fewer than 20 remain
GrowthFit fit_growth(const SobolevTrace& trace);

// Hermite coefficients of the normalized Gaussian exp(i beta x^2 / 2)
// (quadrature projection)
HermiteState project_gaussian(cplx beta, int n_trunc);

// values of the Hermite functions psi_0..psi_{n-1} at x (recurrence)
void hermite_values(double x, int n, double* out);

}  // namespace qpr
