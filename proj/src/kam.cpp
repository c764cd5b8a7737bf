#include "qpr/kam.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace qpr {

double KamParams::eps_j(int j) const {
    return std::pow(eps0, std::pow(1.0 + sigma, j));
}

double KamParams::r_j(int j) const { return r0 * std::pow(2.0, -j); }

int KamParams::n_j(int j) const {
    const double gap = r_j(j) - r_j(j + 1);  // r0 * 2^{-(j+1)}
    const double n = 2.0 * sigma / gap * std::log(1.0 / eps_j(j));
    return std::clamp(static_cast<int>(std::ceil(n)), 1, n_cap);
}

double KamParams::res_thresh(int j) const {
    return std::min(std::pow(eps_j(j), sigma), resonance_cap);
}

double KamParams::varsigma() const {
    return std::log(1.0 + sigma) / std::log(8.0 + 8.0 * sigma);
}

std::optional<VecXi> resonance_scan(double xi, const FrequencyVector& omega, int n_max,
                                    double thresh) {
    std::optional<VecXi> best;
    double best_val = thresh;
    for (const VecXi& n : lattice_ball_l1(omega.dim(), n_max)) {
        double nw = 0.0;
        for (int i = 0; i < omega.dim(); ++i) nw += n(i) * omega.omega(i);
        const double val = std::abs(2.0 * xi - kTwoPi * nw);
        if (val < best_val) {
            best_val = val;
            best = n;
        }
    }
    return best;
}

TorusMap solve_homological(const Mat2& a, const TorusMap& f, const FrequencyVector& omega,
                           int n_trunc, double divisor_floor, Mat2* avg_out) {
    using Mat4c = Eigen::Matrix4cd;
    using Vec4c = Eigen::Vector4cd;
    const int den = f.den();
    const int trunc_box = den * n_trunc;
    const double det = a.determinant();
    const double xi = det > 0.0 ? std::sqrt(det) : 0.0;

    // ad_A as a 4x4 operator on column-major vec(Z)
    Mat4c ad = Mat4c::Zero();
    const Mat2c ac = a.cast<cplx>();
    ad.block<2, 2>(0, 0) = ac;
    ad.block<2, 2>(2, 2) = ac;
    ad(0, 0) -= ac(0, 0);
    ad(1, 1) -= ac(0, 0);
    ad(2, 2) -= ac(1, 1);
    ad(3, 3) -= ac(1, 1);
    ad(0, 2) -= ac(1, 0);
    ad(1, 3) -= ac(1, 0);
    ad(2, 0) -= ac(0, 1);
    ad(3, 1) -= ac(0, 1);

    TorusMap z(f.dim(), std::min(f.order(), trunc_box), den, f.radius());
    if (avg_out) *avg_out = Mat2::Zero();
    // modes at roundoff level are dropped, not solved: dividing numerical noise
    // by a small divisor would inject spurious mass into Z
    const double noise_floor = 1e-13 * std::max(1e-30, f.max_abs());
    for (std::size_t i = 0; i < f.table_size(); ++i) {
        const VecXi k = f.index_of(i);
        const int l1 = k.cwiseAbs().sum();
        if (l1 == 0) {
            if (avg_out) *avg_out = f.coeff_flat(i).real();
            continue;
        }
        if (l1 > trunc_box || !z.in_box(k)) continue;
        const Mat2c& fk = f.coeff_flat(i);
        if (entry_norm(fk) < noise_floor) continue;
        double kw = 0.0;
        for (int j = 0; j < f.dim(); ++j) kw += k(j) * omega.omega(j);
        const double mu = kTwoPi * kw / den;
        // per-mode small-divisor audit against its own lower bound
        const double dc_floor =
            kTwoPi * omega.gamma /
            std::pow(static_cast<double>(l1) / den, omega.tau);
        if (std::abs(mu) < std::min(0.5 * dc_floor, divisor_floor)) {
            std::ostringstream msg;
            msg << "solve_homological: divisor |<k,omega>| = " << std::abs(mu)
                << " below floor at |k|_1 = " << l1;
            throw ResonanceEscape(msg.str());
        }
        if (xi > 0.0) {
            const double shifted = std::min(std::abs(mu - 2.0 * xi), std::abs(mu + 2.0 * xi));
            if (shifted < divisor_floor) {
                std::ostringstream msg;
                msg << "solve_homological: divisor |<k,omega> +- 2 xi| = " << shifted
                    << " below floor " << divisor_floor << " at |k|_1 = " << l1;
                throw ResonanceEscape(msg.str());
            }
        }
        Mat4c m = cplx(0.0, mu) * Mat4c::Identity() - ad;
        Vec4c rhs;
        rhs << fk(0, 0), fk(1, 0), fk(0, 1), fk(1, 1);
        const Vec4c zk = m.partialPivLu().solve(rhs);
        Mat2c zc;
        zc << zk(0), zk(2), zk(1), zk(3);
        z.coeff(k) = zc;
    }
    z.symmetrize_real();
    return z;
}

TorusMap resonant_rotation(const VecXi& n, double xi, const Mat2& a, double radius) {
    if (std::abs(xi) < 1e-12)
        throw std::invalid_argument("resonant_rotation: degenerate elliptic phase");
    const int d = static_cast<int>(n.size());
    TorusMap y(d, std::max(1, n.cwiseAbs().maxCoeff()), 2, radius);
    if (n.isZero()) {
        y.coeff(VecXi::Zero(d)) = Mat2c::Identity();
        return y;
    }
    // cos(pi<n,theta>) I + sin(pi<n,theta>) A/xi, modes at +-n on the doubled lattice
    const Mat2c i2 = Mat2c::Identity();
    const Mat2c ax = (a / xi).cast<cplx>();
    y.coeff(n) = 0.5 * (i2 - cplx(0.0, 1.0) * ax);
    y.coeff(VecXi(-n)) = 0.5 * (i2 + cplx(0.0, 1.0) * ax);
    return y;
}

namespace {

TorusMap conj_by_winding(const TorusMap& f, const TorusMap& y_inv, const TorusMap& y,
                         int ord_out) {
    return multiply(y_inv, multiply(f, y, f.order() + y.order()), ord_out);
}

// The perturbation provably lives on the componentwise-even sublattice of the
// doubled torus (windings enter in +-n pairs); odd-parity content is grid
// roundoff and is projected away.
void purge_odd_parity(TorusMap& f) {
    if (f.den() != 2) return;
    for (std::size_t i = 0; i < f.table_size(); ++i) {
        const VecXi k = f.index_of(i);
        for (int j = 0; j < k.size(); ++j) {
            if (k(j) % 2 != 0) {
                f.coeff_flat(i).setZero();
                break;
            }
        }
    }
}

}  // namespace

KamStep kam_step(KamState& state, const KamParams& p, const FrequencyVector& omega) {
    const int j = state.j;
    const double eps = p.eps_j(j);
    const double thresh = p.res_thresh(j);
    const double r_next = p.r_j(j + 1);
    const int n_max = p.n_j(j);
    KamStep step;
    step.index = j;

    Mat2 a_cur = state.a;
    TorusMap f_cur = state.f;
    const double det = a_cur.determinant();

    // resonant branch: wind away the near-resonant elliptic phase first
    TorusMap y_res;
    if (det > 0.0) {
        const double xi = std::sqrt(det);
        if (auto n = resonance_scan(xi, omega, n_max, thresh)) {
            step.resonant = true;
            step.n = *n;
            y_res = resonant_rotation(*n, xi, a_cur, state.f.radius());
            TorusMap y_res_inv = resonant_rotation(VecXi(-*n), xi, a_cur, state.f.radius());
            double nw = 0.0;
            for (int i = 0; i < omega.dim(); ++i) nw += (*n)(i) * omega.omega(i);
            // Y commutes with A: the constant part shifts exactly
            a_cur = (1.0 - M_PI * nw / xi) * a_cur;
            const int ord = std::min(p.work_order_cap,
                                     f_cur.order() + 2 * n->cwiseAbs().maxCoeff());
            f_cur = conj_by_winding(f_cur, y_res_inv, y_res, ord);
            f_cur.symmetrize_real();
        }
    }

    // non-resonant solve at the (possibly wound) pair
    Mat2 avg = Mat2::Zero();
    step.z = solve_homological(a_cur, f_cur, omega, n_max, 0.4 * thresh, &avg);
    step.z.set_radius(r_next);
    step.z_norm = step.z.weighted_norm(r_next);

    const int ord_z = step.z.order();
    const int ord_out = std::min(p.work_order_cap, std::max(f_cur.order(), ord_z) + 4);
    const int ord_mid = std::min(2 * p.work_order_cap, f_cur.order() + 2 * ord_z + 4);
    TorusMap ez = matrix_exp_pointwise(step.z, std::min(ord_mid, ord_z * 2 + 4), 1e-5);
    TorusMap ezm = matrix_exp_pointwise(-1.0 * step.z, std::min(ord_mid, ord_z * 2 + 4), 1e-5);
    TorusMap af = f_cur;
    af.coeff(VecXi::Zero(f_cur.dim())) += a_cur.cast<cplx>();
    TorusMap t1 = multiply(af, ez, ord_mid);
    t1 -= ez.derivative_along(omega.omega);
    TorusMap g = multiply(ezm, t1, ord_out);
    Mat2 a_next = g.coeff(VecXi::Zero(g.dim())).real();
    a_next -= 0.5 * a_next.trace() * Mat2::Identity();
    TorusMap f_next = g;
    f_next.coeff(VecXi::Zero(g.dim())) -= a_next.cast<cplx>();
    f_next.symmetrize_real();
    purge_odd_parity(f_next);
    f_next.set_radius(r_next);

    step.a_next = a_next;
    step.a_shift = step.resonant ? entry_norm(a_next) : entry_norm(Mat2(a_next - state.a));
    step.f_next_norm = f_next.weighted_norm(r_next);

    // step transformation (doubled torus)
    step.y = step.resonant ? multiply(y_res, ez, y_res.order() + ez.order()) : ez;
    step.y.set_radius(r_next);

    const double eps_next = p.eps_j(j + 1);
    if (step.f_next_norm > eps_next && step.f_next_norm > p.stop_tol) {
        std::ostringstream msg;
        msg << "kam_step " << j << ": measured ||F_next|| = " << step.f_next_norm
            << " exceeds eps_{j+1} = " << eps_next << " (||F_j|| = "
            << state.f.weighted_norm(r_next) << ", eps_j = " << eps << ")";
        throw SchemeDivergence(msg.str());
    }

    state.a = a_next;
    state.f = std::move(f_next);
    state.j = j + 1;
    return step;
}

KamTranscript reduce(const QpLinearSystem& sys, const KamParams& p) {
    KamTranscript out;
    out.label = VecXi::Zero(sys.omega.dim());
    KamState st;
    st.a = sys.a0;
    if (sys.f.table_size() == 0) {
        st.f = TorusMap(sys.omega.dim(), 0, 2, p.r0);
    } else {
        st.f = sys.f.den() == 2 ? sys.f : sys.f.with_den(2);
    }
    st.f.set_radius(p.r0);
    st.j = 0;
    while (st.j < p.max_steps) {
        const double res = st.f.weighted_norm(p.r_j(st.j));
        if (res < p.stop_tol) {
            out.converged = true;
            break;
        }
        try {
            KamStep step = kam_step(st, p, sys.omega);
            if (step.resonant) out.label += step.n;
            out.steps.push_back(std::move(step));
        } catch (const SchemeDivergence& e) {
            out.diagnostic = e.what();
            break;
        } catch (const ResonanceEscape& e) {
            out.diagnostic = e.what();
            break;
        }
    }
    out.b = st.a;
    out.final_residual = st.f.weighted_norm(p.r_j(st.j));
    if (!out.converged) {
        if (out.final_residual < p.stop_tol) {
            out.converged = true;
        } else if (out.diagnostic.empty()) {
            out.diagnostic = "max_steps reached with residual " +
                             std::to_string(out.final_residual);
        }
    }
    return out;
}

double verify_conjugation(const QpLinearSystem& sys, const KamTranscript& t,
                          int n_samples, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int d = sys.omega.dim();
    const double h = 5e-3;
    auto prod_at = [&](const VecXd& theta0, double tt) {
        Mat2 pi_m = Mat2::Identity();
        const VecXd th = theta0 + tt * sys.omega.omega;
        for (const KamStep& s : t.steps) pi_m = pi_m * s.y.evaluate_real(th);
        return pi_m;
    };
    double worst = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        VecXd theta0(d);
        for (int i = 0; i < d; ++i) theta0(i) = 2.0 * u01(rng);
        const double tt = u01(rng);
        const Mat2 pm2 = prod_at(theta0, tt - 2.0 * h);
        const Mat2 pm1 = prod_at(theta0, tt - h);
        const Mat2 pp1 = prod_at(theta0, tt + h);
        const Mat2 pp2 = prod_at(theta0, tt + 2.0 * h);
        const Mat2 dpi = (pm2 - 8.0 * pm1 + 8.0 * pp1 - pp2) / (12.0 * h);
        const Mat2 pi_m = prod_at(theta0, tt);
        Mat2 gen = sys.a0;
        if (sys.f.table_size() > 0)
            gen += sys.f.evaluate_real(theta0 + tt * sys.omega.omega);
        const Mat2 resid = dpi - gen * pi_m + pi_m * t.b;
        worst = std::max(worst, entry_norm(resid));
    }
    return worst;
}

}  // namespace qpr
