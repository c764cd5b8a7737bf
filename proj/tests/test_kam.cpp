#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qpr/kam.hpp"

#include <cmath>
#include <random>

using namespace qpr;

namespace {

TorusMap random_sl2_map(std::mt19937_64& rng, int d, int n, double scale,
                        double radius = 0.1, int den = 1) {
    std::uniform_real_distribution<double> u(-scale, scale);
    TorusMap f(d, n * den, den, radius);
    for (std::size_t i = 0; i < f.table_size(); ++i) {
        const VecXi k = f.index_of(i);
        bool on_lattice = true;
        for (int j = 0; j < d; ++j) on_lattice &= (k(j) % den == 0);
        if (!on_lattice) continue;
        Mat2c c;
        c << cplx(u(rng), u(rng)), cplx(u(rng), u(rng)), cplx(u(rng), u(rng)), cplx(0, 0);
        c(1, 1) = -c(0, 0);
        f.coeff_flat(i) = c;
    }
    f.symmetrize_real();
    return f;
}

// forward-constructed reducible system A(theta) = (d_omega e^Z)e^{-Z} + e^Z B e^{-Z}
QpLinearSystem forward_system(const TorusMap& z, const Mat2& b,
                              const FrequencyVector& fv, int ord) {
    TorusMap ez = matrix_exp_pointwise(z, ord, 1e-4);
    TorusMap ezm = matrix_exp_pointwise(-1.0 * z, ord, 1e-4);
    TorusMap a_field = multiply(ez.derivative_along(fv.omega), ezm, ord);
    TorusMap bconst = TorusMap::constant(z.dim(), b.cast<cplx>(), z.den(), z.radius());
    a_field += multiply(ez, multiply(bconst, ezm, ord), ord);
    a_field.symmetrize_real();
    Mat2 a0 = a_field.coeff(VecXi::Zero(z.dim())).real();
    a0 -= 0.5 * a0.trace() * Mat2::Identity();
    TorusMap f0 = a_field;
    f0.coeff(VecXi::Zero(z.dim())) -= a0.cast<cplx>();
    return QpLinearSystem(fv, a0, f0);
}

KamParams desk_params(double eps0, double r0 = 0.05) {
    KamParams p;
    p.eps0 = eps0;
    p.r0 = r0;
    p.max_steps = 25;
    p.stop_tol = 1e-11;
    return p;
}

}  // namespace

TEST_CASE("resonance scan finds the nearest half-lattice point") {
    FrequencyVector fv = golden_frequency();
    // far from every half-lattice point
    CHECK_FALSE(resonance_scan(0.40, fv, 10, 1e-3).has_value());
    // exact hit: 2 xi = 2 pi <(1,0), omega>
    auto hit = resonance_scan(M_PI * fv.omega(0), fv, 5, 1e-6);
    REQUIRE(hit.has_value());
    CHECK(((*hit)(0) == 1));
    CHECK(((*hit)(1) == 0));
    // near hit at n = (1,1)
    const double xi = M_PI * (fv.omega(0) + fv.omega(1)) + 1e-9;
    auto near = resonance_scan(xi, fv, 20, 1e-6);
    REQUIRE(near.has_value());
    CHECK(((*near)(0) == 1));
    CHECK(((*near)(1) == 1));
}

TEST_CASE("homological solve: constant F gives Z = 0 and the full average") {
    Mat2 a = 0.8 * symp_j();
    Mat2 c;
    c << 0.01, 0.002, -0.003, -0.01;
    TorusMap f = TorusMap::constant(2, c.cast<cplx>(), 2, 0.1);
    Mat2 avg;
    TorusMap z = solve_homological(a, f, golden_frequency(), 8, 1e-8, &avg);
    CHECK(z.max_abs() < 1e-15);
    CHECK((avg - c).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("homological solve satisfies its defining equation") {
    std::mt19937_64 rng(41);
    FrequencyVector fv = golden_frequency();
    Mat2 a = 0.8 * symp_j();
    TorusMap f = random_sl2_map(rng, 2, 3, 1e-4, 0.1, 2);
    Mat2 avg;
    TorusMap z = solve_homological(a, f, fv, 6, 1e-8, &avg);
    // d_omega Z - [A, Z] - (F - avg) = 0 coefficientwise
    TorusMap resid = z.derivative_along(fv.omega);
    TorusMap aconst = TorusMap::constant(2, a.cast<cplx>(), 2, 0.1);
    resid -= multiply(aconst, z, z.order()) - multiply(z, aconst, z.order());
    TorusMap rhs = f;
    rhs.coeff(VecXi::Zero(2)) -= avg.cast<cplx>();
    resid -= rhs;
    CHECK(resid.max_abs() < 1e-14);
}

TEST_CASE("homological solve obeys the two-thirds bound at small eps") {
    std::mt19937_64 rng(43);
    FrequencyVector fv = golden_frequency();
    Mat2 a = 0.8 * symp_j();  // non-resonant phase for golden omega
    const double eps = 1e-4;
    TorusMap f = random_sl2_map(rng, 2, 3, 1.0, 0.05, 2);
    f *= eps / f.weighted_norm(0.05);
    TorusMap z = solve_homological(a, f, fv, 6, 1e-8);
    z.set_radius(0.025);
    CHECK(z.weighted_norm(0.025) < std::pow(eps, 2.0 / 3.0));
}

TEST_CASE("single harmonic solves in closed form and contracts quadratically") {
    // F(theta) = eps cos(2 pi theta) [[0,1],[0,0]], elliptic A, d = 1
    FrequencyVector fv;
    fv.omega = VecXd::Constant(1, (std::sqrt(5.0) - 1.0) / 2.0);
    const double eps = 1e-4;
    Mat2 a = 0.7 * symp_j();
    TorusMap f(1, 2, 2, 0.1);
    VecXi k(1);
    Mat2c up = Mat2c::Zero();
    up(0, 1) = 0.5 * eps;
    k << 2;
    f.coeff(k) = up;
    k << -2;
    f.coeff(k) = up;
    QpLinearSystem sys(fv, a, f);
    KamParams p = desk_params(2 * eps, 0.05);
    KamState st{a, f, 0};
    st.f.set_radius(p.r0);
    KamStep step = kam_step(st, p, fv);
    CHECK_FALSE(step.resonant);
    CHECK(step.f_next_norm < 100.0 * eps * eps);
}

TEST_CASE("zero perturbation is a fixed point of the step") {
    FrequencyVector fv = golden_frequency();
    Mat2 a = 0.8 * symp_j();
    KamParams p = desk_params(1e-3);
    KamState st{a, TorusMap(2, 0, 2, p.r0), 0};
    KamStep step = kam_step(st, p, fv);
    CHECK(step.z_norm == 0.0);
    CHECK((step.a_next - a).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(step.f_next_norm < 1e-13);
}

TEST_CASE("winding transformation basics") {
    FrequencyVector fv = golden_frequency();
    const double xi = 0.9;
    Mat2 a = xi * symp_j();
    VecXi n(2);
    n << 1, -1;
    TorusMap y = resonant_rotation(n, xi, a, 0.1);
    CHECK(y.den() == 2);
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        VecXd theta(2);
        theta << u(rng), u(rng);
        const Mat2 yv = y.evaluate_real(theta);
        CHECK(std::abs(yv.determinant() - 1.0) < 1e-12);
    }
    // conjugated constant generator: Y^{-1}(A Y - d_omega Y) = (xi - pi<n,omega>) J
    TorusMap yinv = resonant_rotation(VecXi(-n), xi, a, 0.1);
    TorusMap aconst = TorusMap::constant(2, a.cast<cplx>(), 2, 0.1);
    TorusMap g = multiply(yinv, multiply(aconst, y, 4) - y.derivative_along(fv.omega), 4);
    const double shift = M_PI * (n(0) * fv.omega(0) + n(1) * fv.omega(1));
    TorusMap want = TorusMap::constant(2, ((xi - shift) * symp_j()).cast<cplx>(), 2, 0.1);
    CHECK((g - want).max_abs() < 1e-12);
}

TEST_CASE("resonant step shrinks the constant part") {
    std::mt19937_64 rng(53);
    FrequencyVector fv = golden_frequency();
    const double xi = M_PI * fv.omega(0) + 1e-3;  // resonant with n = (1,0)
    Mat2 a = xi * symp_j();
    const double eps = 1e-3;
    TorusMap f = random_sl2_map(rng, 2, 2, 1.0, 0.05, 2);
    f *= eps / f.weighted_norm(0.05);
    KamParams p = desk_params(eps);
    KamState st{a, f, 0};
    st.f.set_radius(p.r0);
    KamStep step = kam_step(st, p, fv);
    CHECK(step.resonant);
    CHECK(step.n(0) == 1);
    CHECK(step.n(1) == 0);
    CHECK(step.a_shift < std::pow(eps, p.sigma / 2.0));
    CHECK(step.f_next_norm <= p.eps_j(1));
}

TEST_CASE("reduce: zero perturbation returns immediately") {
    QpLinearSystem sys(golden_frequency(), 0.8 * symp_j(), TorusMap());
    KamTranscript t = reduce(sys, desk_params(1e-3));
    CHECK(t.converged);
    CHECK(t.steps.empty());
    CHECK((t.b - 0.8 * symp_j()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("reduce recovers a forward-constructed reduction") {
    std::mt19937_64 rng(59);
    FrequencyVector fv = golden_frequency();
    Mat2 b = 0.8 * symp_j();
    TorusMap z = random_sl2_map(rng, 2, 2, 4e-4, 0.1, 1);
    QpLinearSystem sys = forward_system(z, b, fv, 10);
    KamParams p = desk_params(std::max(1e-3, sys.f.weighted_norm(0.05)));
    KamTranscript t = reduce(sys, p);
    CHECK(t.converged);
    CHECK(std::abs(t.b.determinant() - b.determinant()) < 1e-8);
    // superlinear contraction after the first step
    for (std::size_t i = 1; i + 1 < t.steps.size(); ++i) {
        if (t.steps[i].f_next_norm < p.stop_tol) break;
        CHECK(t.steps[i + 1].f_next_norm <=
              std::pow(t.steps[i].f_next_norm, 1.0 + p.sigma / 2.0));
    }
    // elliptic phase moves slowly on non-resonant steps
    Mat2 prev = sys.a0;
    for (const KamStep& s : t.steps) {
        if (!s.resonant) {
            const double xi_prev = std::sqrt(std::max(0.0, prev.determinant()));
            const double xi_next = std::sqrt(std::max(0.0, s.a_next.determinant()));
            CHECK(std::abs(xi_next - xi_prev) < std::pow(p.eps_j(s.index), 2.0 / 3.0));
        }
        prev = s.a_next;
    }
    const double resid = verify_conjugation(sys, t, 20);
    CHECK(resid < 1e-6);
}

TEST_CASE("reduce handles an elliptic companion system") {
    std::mt19937_64 rng(61);
    FrequencyVector fv = golden_frequency();
    const double e_val = 1.3;
    Mat2 a0;
    a0 << 0.0, 1.0, -e_val, 0.0;
    TorusMap q(2, 2, 1, 0.05);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    for (std::size_t i = 0; i < q.table_size(); ++i) {
        Mat2c c = Mat2c::Zero();
        c(1, 0) = cplx(u(rng), u(rng));
        q.coeff_flat(i) = c;
    }
    q.symmetrize_real();
    QpLinearSystem sys(fv, a0, q);
    KamParams p = desk_params(std::max(5e-3, q.weighted_norm(0.05)));
    KamTranscript t = reduce(sys, p);
    CHECK(t.converged);
    CHECK(t.steps.size() <= 8);
    ReducedForm rf = classify(t.b, 1e-9);
    CHECK(rf.kind == ReducedForm::Kind::Elliptic);
}

TEST_CASE("verify_conjugation on the identity transcript of a constant system") {
    QpLinearSystem sys(golden_frequency(), 0.8 * symp_j(), TorusMap());
    KamTranscript t = reduce(sys, desk_params(1e-3));
    CHECK(verify_conjugation(sys, t, 10) < 1e-8);
}

TEST_CASE("divergent input is flagged, not thrown") {
    std::mt19937_64 rng(67);
    FrequencyVector fv = golden_frequency();
    Mat2 a = 0.8 * symp_j();
    TorusMap f = random_sl2_map(rng, 2, 2, 1.0, 0.05, 2);
    f *= 0.5 / f.weighted_norm(0.05);  // far beyond any admissible size
    QpLinearSystem sys(fv, a, f);
    KamParams p = desk_params(0.5);
    KamTranscript t = reduce(sys, p);
    if (!t.converged) {
        CHECK_FALSE(t.diagnostic.empty());
        CHECK(verify_conjugation(sys, t, 5) > 1e-4);
    }
}
