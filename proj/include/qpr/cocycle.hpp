// Quasi-periodic sl(2,R) flows and discrete SL(2,R) cocycles: fundamental
// solutions, rotation numbers, Lyapunov exponents, Poincare maps.

#pragma once

#include "qpr/fourier.hpp"
#include "qpr/sl2.hpp"

#include <functional>

namespace qpr {

// X'(t) = (A0 + F(theta0 + omega t)) X(t)
struct QpLinearSystem {
    FrequencyVector omega;
    Mat2 a0 = Mat2::Zero();
    TorusMap f;  // real sl(2,R)-valued perturbation (may be empty/zero)
    VecXd theta0;

    QpLinearSystem() = default;
    QpLinearSystem(FrequencyVector om, const Mat2& a, TorusMap per);

    Mat2 generator_at(double t) const;  // A0 + F(theta0 + omega t)
    double generator_norm() const;      // |A0| + ||F||_0
};

// Fundamental solution Phi^t with Phi^0 = I, via commutator-free 4th-order
// Magnus steps (two closed-form sl(2) exponentials per step).
// Throws runtime_error with the achieved time on step underflow; the audit
// checks |det Phi - 1| <= tol along the way.
Mat2 integrate_flow(const QpLinearSystem& sys, double t, double tol = 1e-10);

struct RotationEstimate {
    double value = 0.0;  // best estimate
    double error = 0.0;  // Richardson/self-consistency error estimate
    bool converged = true;
};

// Average angular velocity of t -> Phi^t X (radians per unit time, >= 0),
// continuous unwrapping; Richardson-extrapolated between T_max and T_max/2 and
// cross-checked for independence of the initial vector X.
RotationEstimate rotation_number(const QpLinearSystem& sys, double t_max, double tol);

// (1/T) log growth of a propagated vector, renormalized every unit time;
// clipped below at 0.
double lyapunov_exponent(const QpLinearSystem& sys, double t_max);

// Phi^1 from initial phase (0, theta_tilde); requires omega = (1, mu).
Mat2 poincare_map(const QpLinearSystem& sys, const VecXd& theta_tilde,
                  double tol = 1e-10);

// (x, v) -> (x + alpha, A(x) v) over T^{d-1}
struct DiscreteCocycle {
    VecXd alpha;
    std::function<Mat2(const VecXd&)> map;
};

// Birkhoff average of the projective angle increment, in cycles mod 1
// (value in [0,1)); error estimated by comparing against the half orbit.
// Increments are lifted to (-pi/2, 3pi/2], matching cocycles whose per-step
// rotation lies in [0, pi] (transfer matrices of Schrodinger-type operators).
RotationEstimate fibered_rotation_number(const DiscreteCocycle& c, long n,
                                         double tol = 1e-6, const VecXd* x0 = nullptr);

// log growth per iterate of a propagated vector (second-half average,
// renormalized each step); clipped below at 0.
double lyapunov_exponent(const DiscreteCocycle& c, long n, const VecXd* x0 = nullptr);

}  // namespace qpr
