#include "qpr/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qpr {

namespace {

const cplx kI(0.0, 1.0);

// frame sending sl(2,R) to the su(1,1)-type form [[if, g],[conj(g), -if]]
Mat2c frame_mb() {
    Mat2c m;
    m << cplx(1, 0), cplx(0, -1), cplx(1, 0), cplx(0, 1);
    return m;
}

Mat2c frame_mb_inv() {
    Mat2c m;
    m << cplx(0.5, 0), cplx(0.5, 0), cplx(0, 0.5), cplx(0, -0.5);
    return m;
}

bool lex_nonnegative(const VecXi& k) {
    for (int i = 0; i < k.size(); ++i) {
        if (k(i) > 0) return true;
        if (k(i) < 0) return false;
    }
    return true;
}

double dot_mu(const VecXi& k, const VecXd& mu) {
    double s = 0.0;
    for (int i = 0; i < k.size(); ++i) s += k(i) * mu(i);
    return s;
}

double rho_dist(double r, double v, bool mod_one) {
    if (!mod_one) return std::abs(r - v);
    double best = std::abs(r - v);
    best = std::min(best, std::abs(r - v + 1.0));
    best = std::min(best, std::abs(r - v - 1.0));
    return best;
}

Mat2 rotation_2pi(double nu) {
    Mat2 r;
    const double c = std::cos(kTwoPi * nu), s = std::sin(kTwoPi * nu);
    r << c, -s, s, c;
    return r;
}

}  // namespace

double ModelFamily::nu(double e) const {
    switch (kind) {
        case FamilyKind::GenericQuadratic:
            return e;
        case FamilyKind::SchrodingerFlow:
            if (e <= 0.0) throw std::domain_error("ModelFamily::nu: need E > 0");
            return std::sqrt(e);
        case FamilyKind::AmoEmbedded:
            return std::acos(-0.5 * e) / kTwoPi;
    }
    throw std::logic_error("ModelFamily::nu: bad kind");
}

double ModelFamily::nu_prime(double e) const {
    switch (kind) {
        case FamilyKind::GenericQuadratic:
            return 1.0;
        case FamilyKind::SchrodingerFlow:
            if (e <= 0.0) throw std::domain_error("ModelFamily::nu_prime: need E > 0");
            return 0.5 / std::sqrt(e);
        case FamilyKind::AmoEmbedded:
            return 1.0 / (kTwoPi * std::sqrt(4.0 - e * e));
    }
    throw std::logic_error("ModelFamily::nu_prime: bad kind");
}

ModelFamily amo_family(double lambda, double alpha) {
    ModelFamily fam;
    fam.kind = FamilyKind::AmoEmbedded;
    VecXd om(2);
    om << 1.0, alpha;
    fam.omega = FrequencyVector{om};
    fam.lambda = lambda;
    fam.alpha = alpha;
    const double b = 2.0 / std::sqrt(37.0);
    fam.e_min = -b;
    fam.e_max = b;
    fam.l1 = 1.0 / (kTwoPi * 2.0);                                // inf |nu'| at E = 0
    fam.l2 = b / (kTwoPi * std::pow(4.0 - b * b, 1.5));           // sup |nu''|
    return fam;
}

DiscreteCocycle amo_cocycle(double lambda, double alpha, double e) {
    DiscreteCocycle c;
    c.alpha = VecXd::Constant(1, alpha);
    c.map = [lambda, e](const VecXd& x) {
        Mat2 s;
        s << -e + 2.0 * lambda * std::cos(kTwoPi * x(0)), -1.0, 1.0, 0.0;
        return s;
    };
    return c;
}

AmoFrame amo_normal_frame(double e) {
    if (!(e > -2.0 + 1e-6 && e < 2.0 - 1e-6))
        throw std::domain_error("amo_normal_frame: E outside (-2, 2)");
    AmoFrame out;
    out.nu = std::acos(-0.5 * e);
    const double c = -0.5 * e;
    const double s = std::sqrt(1.0 - c * c);
    Mat2 m;
    m << c, -s, 1.0, 0.0;
    m /= std::sqrt(s);
    out.m = m;
    out.b = out.nu * m * symp_j() * m.inverse();
    Mat2 target;
    target << -e, -1.0, 1.0, 0.0;
    if ((expm2(out.b) - target).cwiseAbs().maxCoeff() > 1e-10)
        throw std::runtime_error("amo_normal_frame: exponential check failed");
    return out;
}

TorusMap amo_cocycle_generator(double lambda, double e, double radius) {
    const AmoFrame fr = amo_normal_frame(e);
    Mat2 g0;
    g0 << 0.0, 0.0, -lambda, 0.0;  // coefficient of e^{+-2 pi i theta} in -2 lambda cos
    const Mat2 gm = fr.m.inverse() * g0 * fr.m;
    TorusMap g(1, 1, 1, radius);
    VecXi k(1);
    k << 1;
    g.coeff(k) = gm.cast<cplx>();
    k << -1;
    g.coeff(k) = gm.cast<cplx>();
    return g;
}

QpLinearSystem system_at(const ModelFamily& fam, double e, double embed_tol) {
    if (!fam.in_interval(e))
        throw std::domain_error("system_at: E outside the family interval");
    switch (fam.kind) {
        case FamilyKind::GenericQuadratic: {
            Mat2 a0;
            a0 << 0.0, e, -e, 0.0;
            return QpLinearSystem(fam.omega, a0, fam.f0);
        }
        case FamilyKind::SchrodingerFlow: {
            Mat2 a0;
            a0 << 0.0, 1.0, -e, 0.0;
            return QpLinearSystem(fam.omega, a0, fam.f0);
        }
        case FamilyKind::AmoEmbedded: {
            const double nu_c = fam.nu(e);
            TorusMap g = amo_cocycle_generator(fam.lambda, e, 0.05);
            VecXd mu = VecXd::Constant(1, fam.alpha);
            EmbeddingResult res = g.weighted_norm() < 0.1
                                      ? local_embed(nu_c, g, mu, embed_tol)
                                      : local_embed_continuation(nu_c, g, mu, embed_tol);
            return QpLinearSystem(fam.omega, kTwoPi * nu_c * symp_j(), res.f);
        }
    }
    throw std::logic_error("system_at: bad kind");
}

std::vector<SweepPoint> sweep(const ModelFamily& fam, const std::vector<double>& grid,
                              const SweepOptions& opt) {
    std::vector<SweepPoint> out(grid.size());
    auto eval_point = [&](std::size_t i) {
        SweepPoint p;
        p.e = grid[i];
        const double e = grid[i];
        try {
            if (fam.kind == FamilyKind::AmoEmbedded) {
                DiscreteCocycle c = amo_cocycle(fam.lambda, fam.alpha, e);
                RotationEstimate r = fibered_rotation_number(c, opt.n_iter, opt.rho_tol);
                p.rho = r.value;
                p.rho_err = r.error;
                p.rho_ok = r.converged;
                if (opt.with_lyapunov) p.lyap = lyapunov_exponent(c, opt.n_iter);
            } else {
                QpLinearSystem sys = system_at(fam, e);
                RotationEstimate r = rotation_number(sys, opt.t_max, opt.rho_tol);
                p.rho = r.value;
                p.rho_err = r.error;
                p.rho_ok = r.converged;
                if (opt.with_lyapunov) p.lyap = lyapunov_exponent(sys, opt.t_max);
            }
        } catch (const std::exception&) {
            p.rho_ok = false;
            p.lyap_ok = false;
        }
        out[i] = p;
    };
    const int jobs = std::max(1, opt.jobs);
    if (jobs == 1 || grid.size() < 2) {
        for (std::size_t i = 0; i < grid.size(); ++i) eval_point(i);
    } else {
        // points are independent; interleaved static partition keeps the
        // output order (and bytes) identical for every jobs value
        std::vector<std::thread> pool;
        const int nt = static_cast<int>(std::min<std::size_t>(jobs, grid.size()));
        pool.reserve(nt);
        for (int w = 0; w < nt; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < grid.size(); i += nt) eval_point(i);
            });
        for (auto& th : pool) th.join();
    }
    // rotation numbers of flows are monotone in E; flag violations
    if (fam.kind != FamilyKind::AmoEmbedded) {
        for (std::size_t i = 1; i < out.size(); ++i) {
            if (!out[i].rho_ok || !out[i - 1].rho_ok) continue;
            const double slack = out[i].rho_err + out[i - 1].rho_err + 1e-12;
            if (out[i].rho < out[i - 1].rho - slack) out[i].rho_ok = false;
        }
    }
    return out;
}

std::vector<LabelCandidate> flow_label_candidates(const FrequencyVector& omega, int k_max) {
    std::vector<LabelCandidate> out;
    const double kPi = 0.5 * kTwoPi;
    for (const VecXi& k : lattice_ball_l1(omega.dim(), k_max)) {
        if (!lex_nonnegative(k)) continue;  // +-k give the same |plateau|
        LabelCandidate c;
        c.k = k;
        c.value = std::abs(kPi * dot_mu(k, omega.omega));
        out.push_back(c);
    }
    return out;
}

std::vector<LabelCandidate> amo_label_candidates(double alpha, int k_max) {
    std::vector<LabelCandidate> out;
    for (int k = 1; k <= k_max; ++k) {
        const double half = 0.5 * k * alpha;
        const double v = std::abs(half - std::round(half));  // min_j |k alpha/2 - j|
        for (double cand : {v, 1.0 - v}) {
            LabelCandidate c;
            c.k = VecXi::Constant(1, k);
            c.value = cand;
            out.push_back(c);
        }
    }
    return out;
}

std::vector<GapRecord> detect_gaps(const std::vector<SweepPoint>& curve,
                                   const std::vector<LabelCandidate>& candidates,
                                   double plateau_tol,
                                   const std::function<double(double)>& rho_eval,
                                   bool mod_one) {
    std::vector<GapRecord> out;
    if (curve.size() < 2) return out;
    std::vector<int> match(curve.size(), -1);
    for (std::size_t i = 0; i < curve.size(); ++i) {
        if (!curve[i].rho_ok) continue;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            if (rho_dist(curve[i].rho, candidates[c].value, mod_one) >= plateau_tol)
                continue;
            if (match[i] >= 0 && candidates[match[i]].k != candidates[c].k) {
                std::ostringstream os;
                os << "detect_gaps: ambiguous labels at E = " << curve[i].e;
                throw std::runtime_error(os.str());
            }
            if (match[i] < 0) match[i] = static_cast<int>(c);
        }
    }
    auto refine = [&](double e_out, double e_in, double value) {
        // bisect the plateau edge between a non-matching and a matching point
        const double res = std::abs(e_in - e_out) * 1e-3;
        double lo = e_out, hi = e_in;
        while (std::abs(hi - lo) > res) {
            const double mid = 0.5 * (lo + hi);
            if (rho_dist(rho_eval(mid), value, mod_one) < plateau_tol)
                hi = mid;
            else
                lo = mid;
        }
        return 0.5 * (lo + hi);
    };
    std::size_t i = 0;
    while (i < curve.size()) {
        if (match[i] < 0) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < curve.size() && match[j + 1] == match[i]) ++j;
        if (j > i) {
            const LabelCandidate& cand = candidates[match[i]];
            GapRecord g;
            g.label = cand.k;
            g.plateau = cand.value;
            g.a = (i == 0) ? curve.front().e : refine(curve[i - 1].e, curve[i].e, cand.value);
            g.b = (j + 1 == curve.size()) ? curve.back().e
                                          : refine(curve[j + 1].e, curve[j].e, cand.value);
            out.push_back(g);
        }
        i = j + 1;
    }
    return out;
}

bool measure_check(const std::vector<GapRecord>& gaps, double eps0) {
    double total = 0.0;
    for (const GapRecord& g : gaps) total += g.length();
    return total < std::pow(eps0, 1.0 / 40.0);
}

int select_ktilde(double x_lo, double x_hi) {
    if (x_lo > x_hi) std::swap(x_lo, x_hi);
    const double mid = 0.5 * (x_lo + x_hi);
    const int kt = -static_cast<int>(std::floor(mid + 0.5));
    const double worst = std::max(std::abs(x_lo + kt), std::abs(x_hi + kt));
    if (worst > 5.0 / 6.0 + 1e-12)
        throw std::runtime_error("select_ktilde: no single integer works on the interval");
    return kt;
}

cplx h_eval(double x) {
    if (std::abs(x) > 5.0 / 6.0 + 1e-12)
        throw std::domain_error("h_eval: |x| > 5/6");
    const cplx w = kTwoPi * kI * x;
    if (std::abs(x) < 1e-4)
        return 1.0 + w * (0.5 + w * (1.0 / 6.0 + w / 24.0));
    return (std::exp(w) - 1.0) / w;
}

TorusMap invert_L(const TorusMap& phi, double nu, const VecXd& mu) {
    const int dm = phi.dim();
    if (static_cast<int>(mu.size()) != dm)
        throw std::invalid_argument("invert_L: dimension mismatch");
    if (phi.den() != 1) throw std::invalid_argument("invert_L: need den = 1");
    const Mat2c mb = frame_mb(), mbi = frame_mb_inv();

    struct Site {
        VecXi k;
        int kt0, ktg;
        Mat2c pb;
    };
    std::vector<Site> sites;
    int n1 = phi.order();
    for (std::size_t fidx = 0; fidx < phi.table_size(); ++fidx) {
        if (phi.coeff_flat(fidx).isZero(0.0)) continue;
        Site s;
        s.k = phi.index_of(fidx);
        const double x0 = dot_mu(s.k, mu);
        s.kt0 = lex_nonnegative(s.k) ? select_ktilde(x0, x0)
                                     : -select_ktilde(-x0, -x0);
        s.ktg = select_ktilde(x0 + 2.0 * nu, x0 + 2.0 * nu);
        Mat2c c = phi.coeff_flat(fidx);
        c -= 0.5 * c.trace() * Mat2c::Identity();
        s.pb = mb * c * mbi;
        n1 = std::max({n1, std::abs(s.kt0), std::abs(s.ktg)});
        sites.push_back(std::move(s));
    }
    const double r_out = phi.radius() / (1.0 + mu.cwiseAbs().maxCoeff());
    TorusMap fbar(dm + 1, n1, 1, r_out);
    VecXi kd(dm + 1);
    for (const Site& s : sites) {
        const double x0 = dot_mu(s.k, mu);
        const cplx fd = 0.5 * (s.pb(0, 0) - s.pb(1, 1)) / h_eval(x0 + s.kt0);
        kd(0) = s.kt0;
        kd.tail(dm) = s.k;
        fbar.coeff(kd)(0, 0) += fd;
        fbar.coeff(kd)(1, 1) -= fd;
        const cplx gd = s.pb(0, 1) / h_eval(x0 + 2.0 * nu + s.ktg);
        kd(0) = s.ktg;
        fbar.coeff(kd)(0, 1) += gd;
        kd(0) = -s.ktg;
        kd.tail(dm) = -s.k;
        fbar.coeff(kd)(1, 0) += std::conj(gd);
    }
    for (std::size_t fidx = 0; fidx < fbar.table_size(); ++fidx)
        fbar.coeff_flat(fidx) = mbi * fbar.coeff_flat(fidx) * mb;
    fbar.symmetrize_real();
    return fbar;
}

TorusMap apply_L(const TorusMap& f, double nu, const VecXd& mu) {
    const int dm = f.dim() - 1;
    if (static_cast<int>(mu.size()) != dm)
        throw std::invalid_argument("apply_L: dimension mismatch");
    const Mat2c mb = frame_mb(), mbi = frame_mb_inv();
    const double floor = 1e-16 * std::max(1e-300, f.max_abs());
    TorusMap obar(dm, f.order(), 1, f.radius());
    for (std::size_t fidx = 0; fidx < f.table_size(); ++fidx) {
        if (f.coeff_flat(fidx).isZero(0.0)) continue;
        const VecXi kd = f.index_of(fidx);
        const VecXi k = kd.tail(dm);
        const double x = kd(0) + dot_mu(k, mu);
        const Mat2c fb = mb * f.coeff_flat(fidx) * mbi;
        Mat2c& tgt = obar.coeff(k);
        const double offs[2][2] = {{0.0, 2.0 * nu}, {-2.0 * nu, 0.0}};
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                if (std::abs(fb(r, c)) < floor) continue;
                tgt(r, c) += fb(r, c) * h_eval(x + offs[r][c]);
            }
    }
    for (std::size_t fidx = 0; fidx < obar.table_size(); ++fidx)
        obar.coeff_flat(fidx) = mbi * obar.coeff_flat(fidx) * mb;
    obar.symmetrize_real();
    return obar;
}

double measure_invert_norm(double nu, const VecXd& mu, int order, int trials,
                           unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int dm = static_cast<int>(mu.size());
    double best = 0.0;
    for (int t = 0; t < trials; ++t) {
        TorusMap phi(dm, order, 1, 0.0);
        for (std::size_t i = 0; i < phi.table_size(); ++i) {
            Mat2c c;
            c << cplx(u(rng), u(rng)), cplx(u(rng), u(rng)), cplx(u(rng), u(rng)),
                cplx(0, 0);
            c(1, 1) = -c(0, 0);
            phi.coeff_flat(i) = c;
        }
        phi.symmetrize_real();
        const double den = phi.weighted_norm(0.0);
        if (den <= 0.0) continue;
        best = std::max(best, invert_L(phi, nu, mu).weighted_norm(0.0) / den);
    }
    return best;
}

EmbeddingResult local_embed(double nu, const TorusMap& g, const VecXd& mu, double tol,
                            int max_iter, const TorusMap* f_init) {
    const int dm = g.dim();
    if (static_cast<int>(mu.size()) != dm)
        throw std::invalid_argument("local_embed: dimension mismatch");
    if (!g.is_real(1e-12)) throw std::invalid_argument("local_embed: G must be real");
    VecXd om(dm + 1);
    om(0) = 1.0;
    om.tail(dm) = mu;
    FrequencyVector fv;
    fv.omega = om;
    const Mat2 rot = rotation_2pi(nu);
    const Mat2 rot_inv = rot.transpose();
    const Mat2 a0 = kTwoPi * nu * symp_j();
    // harmonics of e^G decay like |G|^m / m!; size the correction box so the
    // discarded orders sit below the target residual
    int n_psi = std::max(4, 2 * g.order() + 2);
    const double gn0 = g.weighted_norm(0.0);
    if (gn0 > 0.05) {
        double term = 1.0;
        int m = 0;
        while (m < 60 && term > 0.01 * tol) {
            ++m;
            term *= gn0 / m;
        }
        n_psi = std::max(n_psi, m * std::max(1, g.order()));
    }
    const double tol_int = std::max(1e-13, 1e-3 * tol);

    EmbeddingResult out;
    out.f = f_init ? *f_init
                   : TorusMap(dm + 1, 0, 1, g.radius() / (1.0 + mu.cwiseAbs().maxCoeff()));
    if (f_init && f_init->dim() != dm + 1)
        throw std::invalid_argument("local_embed: warm start has wrong dimension");
    double prev_norm = 0.0;
    bool done = false;
    for (int it = 0; it <= max_iter; ++it) {
        QpLinearSystem sys(fv, a0, out.f);
        TorusMap psi = fit_from_samples(dm, n_psi, 1, g.radius(), [&](const VecXd& tht) {
            const Mat2 p = poincare_map(sys, tht, tol_int);
            const Mat2 r = rot_inv * p - expm2(g.evaluate_real(tht));
            return Mat2c(r.cast<cplx>());
        });
        for (std::size_t i = 0; i < psi.table_size(); ++i)
            psi.coeff_flat(i) -= 0.5 * psi.coeff_flat(i).trace() * Mat2c::Identity();
        const double pn = psi.weighted_norm(0.0);
        out.iterations = it;
        if (pn < tol) {
            done = true;
            break;
        }
        if (it > 0 && pn > 0.7 * prev_norm) {
            std::ostringstream os;
            os << "local_embed: residual stopped contracting (" << prev_norm << " -> "
               << pn << " at iteration " << it << ")";
            throw EmbedDivergence(os.str());
        }
        if (it == max_iter) throw EmbedDivergence("local_embed: iteration cap reached");
        prev_norm = pn;
        out.f -= invert_L(psi, nu, mu);
        out.f.symmetrize_real();
    }
    (void)done;

    // independent residual audit with a finer integrator on fresh samples
    QpLinearSystem sys(fv, a0, out.f);
    const double tol_fine = std::max(1e-13, 1e-4 * tol);
    const int m = 17;
    double resid = 0.0;
    VecXd tht = VecXd::Zero(dm);
    for (int s = 0; s < m; ++s) {
        tht(0) = (s + 0.31) / m;
        const Mat2 p = poincare_map(sys, tht, tol_fine);
        const Mat2 target = rot * expm2(g.evaluate_real(tht));
        resid = std::max(resid, (p - target).cwiseAbs().maxCoeff());
    }
    out.residual = resid;
    const double gn = g.weighted_norm();
    out.norm_ratio = gn > 0.0 ? out.f.weighted_norm() / gn : 0.0;
    out.c_measured = measure_invert_norm(nu, mu, std::max(2, g.order()), 12);
    return out;
}

EmbeddingResult local_embed_continuation(double nu, const TorusMap& g, const VecXd& mu,
                                         double tol, int stages) {
    if (stages < 1) throw std::invalid_argument("local_embed_continuation: stages >= 1");
    EmbeddingResult res;
    bool have = false;
    for (int s = 1; s <= stages; ++s) {
        TorusMap gs = g;
        gs *= static_cast<double>(s) / stages;
        res = local_embed(nu, gs, mu, tol, 30, have ? &res.f : nullptr);
        have = true;
    }
    return res;
}

bool fd_schrodinger_gap_free(const std::function<double(double)>& potential,
                             double length, int n_grid, double a, double b) {
    if (n_grid < 3) throw std::invalid_argument("fd_schrodinger_gap_free: grid too small");
    const double h = length / (n_grid + 1);
    const double off2 = 1.0 / (h * h * h * h);  // squared off-diagonal (-1/h^2)^2
    std::vector<double> diag(n_grid);
    for (int i = 0; i < n_grid; ++i)
        diag[i] = 2.0 / (h * h) + potential((i + 1) * h);
    auto count_below = [&](double x) {
        // Sturm sequence: number of negative pivots in the LDL factorization
        long cnt = 0;
        double d = diag[0] - x;
        if (d < 0.0) ++cnt;
        for (int i = 1; i < n_grid; ++i) {
            if (d == 0.0) d = 1e-300;
            d = (diag[i] - x) - off2 / d;
            if (d < 0.0) ++cnt;
        }
        return cnt;
    };
    return count_below(b) == count_below(a);
}

}  // namespace qpr
