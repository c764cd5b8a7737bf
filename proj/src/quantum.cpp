#include "qpr/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qpr {

namespace {

const cplx kIm(0.0, 1.0);

double ladder_r(int n) { return std::sqrt(double(n + 1) * double(n + 2)); }

// tridiagonal Thomas solve of (diag, sub, super) x = rhs, in place
void thomas(std::vector<cplx>& diag, const std::vector<cplx>& sub,
            const std::vector<cplx>& super, std::vector<cplx>& rhs) {
    const std::size_t m = diag.size();
    for (std::size_t i = 1; i < m; ++i) {
        const cplx w = sub[i] / diag[i - 1];
        diag[i] -= w * super[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[m - 1] /= diag[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) rhs[i] = (rhs[i] - super[i] * rhs[i + 1]) / diag[i];
}

struct LinFit {
    double slope = 0.0, intercept = 0.0, rss = 0.0, tss = 0.0;
};

LinFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LinFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.slope * x[i] - f.intercept;
        f.rss += r * r;
        f.tss += (y[i] - my) * (y[i] - my);
    }
    return f;
}

double simpson_weight(int i, int n) {
    if (i == 0 || i == n) return 1.0;
    return (i % 2) ? 4.0 : 2.0;
}

double gauss_x2(cplx beta) { return 1.0 / (2.0 * beta.imag()); }
double gauss_p2(cplx beta) { return std::norm(beta) / (2.0 * beta.imag()); }

}  // namespace

QuadraticSymbol::QuadraticSymbol(double nu_in, FrequencyVector om, TorusMap f_in)
    : nu(nu_in), omega(std::move(om)), f(std::move(f_in)) {
    if (f.order() > 0 && f.dim() != omega.dim())
        throw std::invalid_argument("QuadraticSymbol: dimension mismatch");
    if (!f.is_real(1e-10)) throw std::invalid_argument("QuadraticSymbol: W must be real");
    theta0 = VecXd::Zero(omega.dim());
}

Eigen::Vector3d QuadraticSymbol::abc_at(double t) const {
    const Mat2 m = f.evaluate_real(theta0 + t * omega.omega);
    return Eigen::Vector3d(-m(1, 0), m(0, 0), m(0, 1));
}

QpLinearSystem QuadraticSymbol::classical() const {
    Mat2 a0;
    a0 << 0.0, nu, -nu, 0.0;
    QpLinearSystem sys(omega, a0, f);
    sys.theta0 = theta0;
    return sys;
}

HermiteState HermiteState::mode(int n, int n_trunc) {
    if (n < 0 || n >= n_trunc) throw std::invalid_argument("HermiteState::mode: bad index");
    HermiteState u;
    u.c = Eigen::VectorXcd::Zero(n_trunc);
    u.c(n) = 1.0;
    return u;
}

double HermiteState::tail_mass() const {
    const int n = size();
    double m = 0.0;
    for (int i = (9 * n) / 10; i < n; ++i) m += std::norm(c(i));
    return m;
}

long SobolevTrace::trusted_count() const {
    long k = 0;
    for (char f : trusted) k += (f != 0);
    return k;
}

Eigen::MatrixXcd weyl_matrix(const QuadraticSymbol& sym, const VecXd& theta, int n_trunc) {
    if (n_trunc < 4) throw std::invalid_argument("weyl_matrix: need n_trunc >= 4");
    const Mat2 m = sym.f.evaluate_real(theta);
    const double a = -m(1, 0), b = m(0, 0), c = m(0, 1);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n_trunc, n_trunc);
    const double gd = sym.nu / 2.0 + (a + c) / 4.0;
    const cplx w = cplx((a - c) / 4.0, -b / 2.0);
    for (int n = 0; n < n_trunc; ++n) {
        h(n, n) = (2.0 * n + 1.0) * gd;
        if (n + 2 < n_trunc) {
            h(n, n + 2) = ladder_r(n) * w;
            h(n + 2, n) = ladder_r(n) * std::conj(w);
        }
    }
    return h;
}

std::vector<SobolevTrace> hermite_evolve(const QuadraticSymbol& sym, const HermiteState& u0,
                                         const std::vector<double>& t_grid, double dt,
                                         const std::vector<double>& s_list) {
    const int n = u0.size();
    if (n < 8) throw std::invalid_argument("hermite_evolve: state too small");
    if (dt <= 0.0) throw std::invalid_argument("hermite_evolve: dt must be positive");
    if (u0.tail_mass() > 1e-12)
        throw std::invalid_argument("hermite_evolve: initial tail mass too large");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] <= t_grid[i - 1])
            throw std::invalid_argument("hermite_evolve: t_grid must increase");

    Eigen::VectorXcd b = u0.c;  // interaction-picture amplitudes
    double t = 0.0, phase = 0.0;  // phase = int_0^t (nu/2 + (a+c)/4)
    bool leaked = false;

    std::vector<SobolevTrace> traces(s_list.size());
    for (std::size_t k = 0; k < s_list.size(); ++k) traces[k].s = s_list[k];

    auto record = [&]() {
        const double tail = [&] {
            double m = 0.0;
            for (int i = (9 * n) / 10; i < n; ++i) m += std::norm(b(i));
            return m;
        }();
        if (tail > 1e-8) leaked = true;
        for (std::size_t k = 0; k < s_list.size(); ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += std::pow(2.0 * i + 1.0, s_list[k]) * std::norm(b(i));
            traces[k].t.push_back(t);
            traces[k].norm.push_back(std::sqrt(acc));
            traces[k].tail.push_back(tail);
            traces[k].trusted.push_back(leaked ? 0 : 1);
        }
    };

    auto step = [&](double h) {
        const double tm = t + 0.5 * h;
        const Eigen::Vector3d abc = sym.abc_at(tm);
        const double g = sym.nu / 2.0 + (abc(0) + abc(2)) / 4.0;
        const cplx w = cplx((abc(0) - abc(2)) / 4.0, -abc(1) / 2.0);
        // interaction-picture coupling carries the n-independent phase -4 phase
        const cplx kappa = w * std::exp(cplx(0.0, -4.0 * (phase + 0.5 * h * g)));
        const cplx mul = kIm * (0.5 * h);
        for (int parity = 0; parity < 2; ++parity) {
            const int m = (n - parity + 1) / 2;
            if (m < 2) continue;
            std::vector<cplx> diag(m, cplx(1.0, 0.0)), sub(m), super(m), rhs(m);
            for (int i = 0; i < m; ++i) {
                const int idx = parity + 2 * i;
                const cplx up = (i + 1 < m) ? kappa * ladder_r(idx) : cplx(0.0, 0.0);
                const cplx dn = (i > 0) ? std::conj(kappa) * ladder_r(idx - 2) : cplx(0.0, 0.0);
                super[i] = mul * up;
                sub[i] = mul * dn;
                rhs[i] = b(idx);
                if (i + 1 < m) rhs[i] -= mul * up * b(idx + 2);
                if (i > 0) rhs[i] -= mul * dn * b(idx - 2);
            }
            thomas(diag, sub, super, rhs);
            for (int i = 0; i < m; ++i) b(parity + 2 * i) = rhs[i];
        }
        phase += h * g;
        t += h;
    };

    for (double target : t_grid) {
        if (target < t - 1e-12) throw std::invalid_argument("hermite_evolve: t_grid < 0");
        while (t < target - 1e-12) step(std::min(dt, target - t));
        t = target;
        record();
    }
    return traces;
}

double sobolev_norm(const HermiteState& u, double s) {
    double acc = 0.0;
    for (int i = 0; i < u.size(); ++i)
        acc += std::pow(2.0 * i + 1.0, s) * std::norm(u.c(i));
    return std::sqrt(acc);
}

void hermite_values(double x, int n, double* out) {
    if (n <= 0) return;
    const double pi = 0.5 * kTwoPi;
    out[0] = std::pow(pi, -0.25) * std::exp(-0.5 * x * x);
    if (n == 1) return;
    out[1] = std::sqrt(2.0) * x * out[0];
    for (int k = 1; k + 1 < n; ++k)
        out[k + 1] = std::sqrt(2.0 / (k + 1.0)) * x * out[k] -
                     std::sqrt(k / (k + 1.0)) * out[k - 1];
}

double norm_equivalence_check(const HermiteState& u, int s) {
    if (s != 1 && s != 2) throw std::invalid_argument("norm_equivalence_check: s in {1,2}");
    int nz = u.size();
    while (nz > 1 && std::abs(u.c(nz - 1)) < 1e-15) --nz;
    const double len = std::sqrt(2.0 * (2.0 * nz + 1.0)) + 6.0;
    const int m = 8000;  // Simpson panels (even)
    const double h = 2.0 * len / m;
    std::vector<double> psi(nz);
    std::vector<cplx> vals(m + 1);
    for (int i = 0; i <= m; ++i) {
        const double x = -len + i * h;
        hermite_values(x, nz, psi.data());
        cplx v = 0.0;
        for (int k = 0; k < nz; ++k) v += u.c(k) * psi[k];
        vals[i] = v;
    }
    double l2 = 0.0, xs2 = 0.0, ds2 = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double x = -len + i * h;
        const double wgt = simpson_weight(i, m) * h / 3.0;
        l2 += wgt * std::norm(vals[i]);
        xs2 += wgt * std::pow(x * x, s) * std::norm(vals[i]);
        cplx d;
        if (i == 0 || i == m)
            d = 0.0;
        else if (s == 1)
            d = (vals[i + 1] - vals[i - 1]) / (2.0 * h);
        else
            d = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (h * h);
        ds2 += wgt * std::norm(d);
    }
    const double rhs = std::sqrt(l2 + ds2) + std::sqrt(xs2);
    if (!(rhs > 0.0) || !std::isfinite(rhs))
        throw std::runtime_error("norm_equivalence_check: quadrature overflow");
    return sobolev_norm(u, s) / rhs;
}

cplx gaussian_evolve(const Mat2& phi, cplx beta0) {
    if (!(beta0.imag() > 0.0))
        throw std::invalid_argument("gaussian_evolve: need Im beta > 0");
    const cplx w1 = phi(0, 0) + phi(0, 1) * beta0;
    const cplx w2 = phi(1, 0) + phi(1, 1) * beta0;
    return w2 / w1;
}

std::vector<cplx> gaussian_trajectory(const QpLinearSystem& sys, cplx beta0,
                                      const std::vector<double>& t_grid, double tol) {
    std::vector<cplx> out;
    out.reserve(t_grid.size());
    cplx beta = beta0;
    double t_prev = 0.0;
    for (double tk : t_grid) {
        if (tk < t_prev - 1e-12)
            throw std::invalid_argument("gaussian_trajectory: t_grid must increase");
        if (tk > t_prev) {
            QpLinearSystem seg = sys;
            seg.theta0 = sys.theta0 + t_prev * sys.omega.omega;
            beta = gaussian_evolve(integrate_flow(seg, tk - t_prev, tol), beta);
            t_prev = tk;
        }
        out.push_back(beta);
    }
    return out;
}

double gaussian_sobolev(cplx beta, int s) {
    if (!(beta.imag() > 0.0))
        throw std::invalid_argument("gaussian_sobolev: need Im beta > 0");
    switch (s) {
        case 0:
            return 1.0;
        case 1:
            return std::sqrt(gauss_x2(beta) + gauss_p2(beta));
        case 2: {
            // |H0 u|^2 with H0 u = ((1 + beta^2) x^2 - i beta) u
            const cplx q = 1.0 + beta * beta;
            const double x2 = gauss_x2(beta);
            const double val = std::norm(q) * 3.0 * x2 * x2 +
                               2.0 * std::real(q * std::conj(-kIm * beta)) * x2 +
                               std::norm(beta);
            return std::sqrt(val);
        }
        default:
            throw std::invalid_argument("gaussian_sobolev: s in {0,1,2}");
    }
}

namespace {

double gauss_x_moment(cplx beta, int s) {
    const double x2 = gauss_x2(beta);
    if (s == 0) return 1.0;
    if (s == 1) return x2;
    if (s == 2) return 3.0 * x2 * x2;
    throw std::invalid_argument("explicit norms: s in {0,1,2}");
}

double gauss_p_moment(cplx beta, int s) {
    const double p2 = gauss_p2(beta);
    if (s == 0) return 1.0;
    if (s == 1) return p2;
    if (s == 2) return 3.0 * p2 * p2;
    throw std::invalid_argument("explicit norms: s in {0,1,2}");
}

}  // namespace

ExplicitNorms explicit_hyperbolic(cplx beta0, double lambda, double t, int s) {
    if (!(lambda > 0.0)) throw std::invalid_argument("explicit_hyperbolic: lambda > 0");
    const cplx beta = beta0 * std::exp(-2.0 * lambda * t);
    ExplicitNorms out;
    out.x_moment = gauss_x_moment(beta, s);
    out.deriv_moment = gauss_p_moment(beta, s);
    out.total = gaussian_sobolev(beta, s);
    return out;
}

ExplicitNorms explicit_parabolic(cplx beta0, double kappa, double t, int s) {
    if (kappa == 0.0) throw std::invalid_argument("explicit_parabolic: kappa != 0");
    const cplx beta = beta0 + kappa * t;
    ExplicitNorms out;
    out.x_moment = gauss_x_moment(beta, s);  // depends on Im beta only: constant in t
    out.deriv_moment = gauss_p_moment(beta, s);
    out.total = gaussian_sobolev(beta, s);
    return out;
}

std::string GrowthLaw::kind_name() const {
    switch (kind) {
        case GrowthKind::Bounded:
            return "Bounded";
        case GrowthKind::Exponential:
            return "Exponential";
        case GrowthKind::Polynomial:
            return "Polynomial";
    }
    return "?";
}

GrowthLaw predict_growth(const ReducedForm& form, double s) {
    GrowthLaw out;
    switch (form.kind) {
        case ReducedForm::Kind::Elliptic:
        case ReducedForm::Kind::Zero:
            out.kind = GrowthKind::Bounded;
            break;
        case ReducedForm::Kind::Hyperbolic:
            out.kind = GrowthKind::Exponential;
            out.param = s * form.value;
            break;
        case ReducedForm::Kind::Parabolic:
            out.kind = GrowthKind::Polynomial;
            out.param = s;
            break;
    }
    return out;
}

GrowthFit fit_growth(const SobolevTrace& trace) {
    std::vector<double> t, logy;
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
        if (!trace.trusted[i] || trace.t[i] < 5.0 || !(trace.norm[i] > 0.0)) continue;
        t.push_back(trace.t[i]);
        logy.push_back(std::log(trace.norm[i]));
    }
    if (t.size() < 20)
        throw std::runtime_error("fit_growth: fewer than 20 trusted samples past t = 5");
    std::vector<double> logt(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) logt[i] = std::log(t[i]);

    const LinFit lin = least_squares(t, logy);    // log-linear: exponential
    const LinFit pow = least_squares(logt, logy); // log-log: polynomial
    const double span = t.back() - t.front();
    const double lspan = logt.back() - logt.front();

    GrowthFit out;
    const bool lin_wins = lin.rss <= pow.rss;
    const double factor = lin_wins ? std::exp(std::abs(lin.slope) * span)
                                   : std::exp(std::abs(pow.slope) * lspan);
    if (factor < 2.0) {
        out.kind = GrowthKind::Bounded;
        double mean = 0.0;
        for (double v : logy) mean += v;
        out.param = std::exp(mean / logy.size());
        out.r2 = 0.0;
        return out;
    }
    const LinFit& best = lin_wins ? lin : pow;
    out.kind = lin_wins ? GrowthKind::Exponential : GrowthKind::Polynomial;
    out.param = best.slope;
    out.r2 = best.tss > 0.0 ? 1.0 - best.rss / best.tss : 1.0;
    return out;
}

HermiteState project_gaussian(cplx beta, int n_trunc) {
    if (!(beta.imag() > 0.0))
        throw std::invalid_argument("project_gaussian: need Im beta > 0");
    const double pi = 0.5 * kTwoPi;
    const double amp = std::pow(beta.imag() / pi, 0.25);
    const double len = 8.0 / std::sqrt(beta.imag()) + 2.0;
    // resolve the phase oscillation exp(i Re(beta) x^2 / 2)
    const double freq = std::abs(beta.real()) * len + 1.0;
    int m = static_cast<int>(std::ceil(std::max(4000.0, 30.0 * freq * len / pi)));
    if (m % 2) ++m;
    const double h = 2.0 * len / m;
    HermiteState u;
    u.c = Eigen::VectorXcd::Zero(n_trunc);
    std::vector<double> psi(n_trunc);
    for (int i = 0; i <= m; ++i) {
        const double x = -len + i * h;
        const cplx v = amp * std::exp(0.5 * kIm * beta * x * x);
        hermite_values(x, n_trunc, psi.data());
        const double wgt = simpson_weight(i, m) * h / 3.0;
        for (int k = 0; k < n_trunc; ++k) u.c(k) += wgt * psi[k] * v;
    }
    return u;
}

}  // namespace qpr
