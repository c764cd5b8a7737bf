#include "qpr/cocycle.hpp"

#include <cmath>
#include <stdexcept>

namespace qpr {

namespace {

constexpr double kSqrt3Over6 = 0.28867513459481288225457439025098;

// Gauss nodes and split weights of the commutator-free 4th-order Magnus step:
// X(t+h) = exp(h(b B1 + a B2)) exp(h(a B1 + b B2)) X(t),
// B_i = A(t + c_i h), a = 1/4 + sqrt(3)/6, b = 1/4 - sqrt(3)/6.
struct Cf4Step {
    Mat2 left, right;
};

Cf4Step cf4_exponents(const QpLinearSystem& sys, double t, double h) {
    const double c1 = 0.5 - kSqrt3Over6;
    const double c2 = 0.5 + kSqrt3Over6;
    const double a = 0.25 + kSqrt3Over6;
    const double b = 0.25 - kSqrt3Over6;
    const Mat2 b1 = sys.generator_at(t + c1 * h);
    const Mat2 b2 = sys.generator_at(t + c2 * h);
    return {expm2(h * (b * b1 + a * b2)), expm2(h * (a * b1 + b * b2))};
}

double wrap_unit(double x) {
    double y = std::fmod(x, 1.0);
    if (y < 0.0) y += 1.0;
    return y;
}

double circle_dist(double x, double y) {
    const double d = wrap_unit(x - y);
    return std::min(d, 1.0 - d);
}

// step size from the 4th-order local error model (kA h)^5 per step,
// accumulated over t/h steps; capped so each step is well inside a period
double choose_step(double t, double norm, double tol) {
    const double ka = std::max(norm, 1e-6);
    double h = std::pow(std::max(tol, 1e-14) / (std::max(t, 1.0) * std::pow(ka, 5)),
                        0.25);
    h = std::min(h, 0.25 / std::max(1.0, ka));
    h = std::min(h, t);
    return h;
}

}  // namespace

QpLinearSystem::QpLinearSystem(FrequencyVector om, const Mat2& a, TorusMap per)
    : omega(std::move(om)), a0(a), f(std::move(per)) {
    if (!is_sl2(a0, 1e-10))
        throw std::invalid_argument("QpLinearSystem: A0 must be traceless");
    if (f.table_size() > 0 && f.dim() != omega.dim())
        throw std::invalid_argument("QpLinearSystem: F dimension mismatch");
    theta0 = VecXd::Zero(omega.dim());
}

Mat2 QpLinearSystem::generator_at(double t) const {
    if (f.table_size() == 0) return a0;
    return a0 + f.evaluate_real(theta0 + t * omega.omega);
}

double QpLinearSystem::generator_norm() const {
    double n = entry_norm(a0);
    if (f.table_size() > 0) n += f.weighted_norm(0.0);
    return n;
}

Mat2 integrate_flow(const QpLinearSystem& sys, double t, double tol) {
    if (tol <= 0.0) throw std::invalid_argument("integrate_flow: tol must be > 0");
    if (t < 0.0) throw std::invalid_argument("integrate_flow: t must be >= 0");
    if (t == 0.0) return Mat2::Identity();
    const double h0 = choose_step(t, sys.generator_norm(), tol);
    if (h0 < 1e-9 * t)
        throw std::runtime_error("integrate_flow: step underflow, achieved t=0");
    const long n_steps = static_cast<long>(std::ceil(t / h0));
    const double h = t / static_cast<double>(n_steps);
    Mat2 phi = Mat2::Identity();
    for (long i = 0; i < n_steps; ++i) {
        const Cf4Step s = cf4_exponents(sys, i * h, h);
        phi = s.left * s.right * phi;
    }
    if (std::abs(phi.determinant() - 1.0) > std::max(tol, 1e-8 * t)) {
        throw std::runtime_error("integrate_flow: determinant drift " +
                                 std::to_string(phi.determinant() - 1.0));
    }
    return phi;
}

namespace {

// continuous angle of t -> Phi^t x0, sampled at the CF4 step boundaries
double unwound_angle(const QpLinearSystem& sys, const Vec2& x0, double t_max,
                     double h, double* angle_half) {
    const long n_steps = static_cast<long>(std::ceil(t_max / h));
    const double hh = t_max / static_cast<double>(n_steps);
    Vec2 v = x0.normalized();
    double phi = 0.0;
    const long half = n_steps / 2;
    for (long i = 0; i < n_steps; ++i) {
        const Cf4Step s = cf4_exponents(sys, i * hh, hh);
        const Vec2 w = (s.left * (s.right * v)).normalized();
        phi += std::atan2(v(0) * w(1) - v(1) * w(0), v.dot(w));
        v = w;
        if (angle_half && i + 1 == half) *angle_half = phi;
    }
    if (angle_half && half > 0) *angle_half /= (half * hh);
    return phi / t_max;
}

}  // namespace

RotationEstimate rotation_number(const QpLinearSystem& sys, double t_max, double tol) {
    if (t_max <= 0.0 || tol <= 0.0)
        throw std::invalid_argument("rotation_number: t_max and tol must be > 0");
    const double norm = sys.generator_norm();
    // per-step rotation stays well under pi; accuracy follows the CF4 model
    // integration error kept well below the estimator tolerance
    double h = std::min(choose_step(t_max, norm, std::min(1e-8, 0.01 * tol)),
                        0.5 / (1.0 + norm));
    RotationEstimate out;
    double est[2], err[2];
    const Vec2 e1(1.0, 0.0), e2(0.0, 1.0);
    const Vec2 x0s[2] = {e1, e2};
    for (int k = 0; k < 2; ++k) {
        double rho_half = 0.0;
        const double rho_full = unwound_angle(sys, x0s[k], t_max, h, &rho_half);
        // Richardson in 1/T: boundary term cancels between T and T/2
        est[k] = std::abs(2.0 * rho_full - rho_half);
        err[k] = std::abs(rho_full - rho_half);
    }
    out.value = 0.5 * (est[0] + est[1]);
    out.error = std::max({err[0], err[1], std::abs(est[0] - est[1])});
    out.converged = out.error < tol;
    return out;
}

double lyapunov_exponent(const QpLinearSystem& sys, double t_max) {
    if (t_max <= 0.0) throw std::invalid_argument("lyapunov_exponent: t_max must be > 0");
    const double norm = sys.generator_norm();
    const double h = std::min(choose_step(t_max, norm, 1e-8), 0.5 / (1.0 + norm));
    const long n_steps = static_cast<long>(std::ceil(t_max / h));
    const double hh = t_max / static_cast<double>(n_steps);
    const long renorm_every = std::max<long>(1, static_cast<long>(1.0 / hh));
    Vec2 v(M_SQRT1_2, M_SQRT1_2);
    double log_sum = 0.0, log_half = 0.0;
    const long half = n_steps / 2;
    for (long i = 0; i < n_steps; ++i) {
        const Cf4Step s = cf4_exponents(sys, i * hh, hh);
        v = s.left * (s.right * v);
        if ((i + 1) % renorm_every == 0 || i + 1 == half || i + 1 == n_steps) {
            const double n = v.norm();
            log_sum += std::log(n);
            v /= n;
        }
        if (i + 1 == half) log_half = log_sum;
    }
    // second-half growth rate cancels the initial-vector transient
    return std::max(0.0, (log_sum - log_half) / (t_max - half * hh));
}

Mat2 poincare_map(const QpLinearSystem& sys, const VecXd& theta_tilde, double tol) {
    if (sys.omega.dim() != theta_tilde.size() + 1)
        throw std::invalid_argument("poincare_map: phase dimension mismatch");
    if (std::abs(sys.omega.omega(0) - 1.0) > 1e-12)
        throw std::invalid_argument("poincare_map: first frequency must equal 1");
    QpLinearSystem s = sys;
    s.theta0 = VecXd::Zero(sys.omega.dim());
    s.theta0.tail(theta_tilde.size()) = theta_tilde;
    return integrate_flow(s, 1.0, tol);
}

RotationEstimate fibered_rotation_number(const DiscreteCocycle& c, long n, double tol,
                                         const VecXd* x0) {
    if (n < 1000)
        throw std::invalid_argument("fibered_rotation_number: need n >= 1000");
    VecXd x = x0 ? *x0 : VecXd::Zero(c.alpha.size());
    Vec2 v(1.0, 0.0);
    double phi = 0.0, phi_half = 0.0;
    const long half = n / 2;
    for (long i = 0; i < n; ++i) {
        const Vec2 w = (c.map(x) * v).normalized();
        // lift increments to (-pi/2, 3pi/2]: transfer-matrix cocycles advance by
        // angles in [0, pi], which would straddle the atan2 cut at +-pi
        double inc = std::atan2(v(0) * w(1) - v(1) * w(0), v.dot(w));
        if (inc < -0.25 * kTwoPi) inc += kTwoPi;
        phi += inc;
        v = w;
        for (int j = 0; j < x.size(); ++j) x(j) = wrap_unit(x(j) + c.alpha(j));
        if (i + 1 == half) phi_half = phi;
    }
    RotationEstimate out;
    out.value = wrap_unit(phi / (kTwoPi * n));
    const double rho_half = wrap_unit(phi_half / (kTwoPi * half));
    out.error = circle_dist(out.value, rho_half);
    out.converged = out.error < tol;
    return out;
}

double lyapunov_exponent(const DiscreteCocycle& c, long n, const VecXd* x0) {
    if (n < 1000) throw std::invalid_argument("lyapunov_exponent: need n >= 1000");
    VecXd x = x0 ? *x0 : VecXd::Zero(c.alpha.size());
    Vec2 v(1.0, 0.0);
    double log_sum = 0.0, log_half = 0.0;
    const long half = n / 2;
    for (long i = 0; i < n; ++i) {
        v = c.map(x) * v;
        const double s = v.norm();
        log_sum += std::log(s);
        v /= s;
        for (int j = 0; j < x.size(); ++j) x(j) = wrap_unit(x(j) + c.alpha(j));
        if (i + 1 == half) log_half = log_sum;
    }
    return std::max(0.0, (log_sum - log_half) / static_cast<double>(n - half));
}

}  // namespace qpr
