#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qpr/quantum.hpp"

#include <cmath>
#include <random>

using namespace qpr;

namespace {

TorusMap constant_symbol(double a, double b, double c) {
    Mat2 m;
    m << b, c, -a, -b;
    return TorusMap::constant(2, m.cast<cplx>(), 1, 0.05);
}

QuadraticSymbol make_symbol(double nu, double a, double b, double c) {
    return QuadraticSymbol(nu, golden_frequency(), constant_symbol(a, b, c));
}

Mat2 random_sl2(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Mat2 z;
    z << u(rng), u(rng), u(rng), 0.0;
    z(1, 1) = -z(0, 0);
    return expm2(z);
}

}  // namespace

TEST_CASE("weyl matrix entries from the ladder algebra") {
    // pure oscillator part: diag nu (2n+1)/2
    QuadraticSymbol osc = make_symbol(0.7, 0.0, 0.0, 0.0);
    Eigen::MatrixXcd h = weyl_matrix(osc, VecXd::Zero(2), 8);
    for (int n = 0; n < 8; ++n)
        CHECK(std::abs(h(n, n) - cplx(0.35 * (2 * n + 1), 0.0)) < 1e-14);
    CHECK(h.cwiseAbs().maxCoeff() == doctest::Approx(h(7, 7).real()));

    // W = x^2/2: matrix of x^2 has <0|x^2|0> = 1/2, <2|x^2|0> = sqrt(2)/2
    QuadraticSymbol x2 = make_symbol(0.0, 1.0, 0.0, 0.0);
    Eigen::MatrixXcd hx = weyl_matrix(x2, VecXd::Zero(2), 8);
    CHECK(std::abs(2.0 * hx(0, 0) - cplx(0.5, 0.0)) < 1e-14);
    CHECK(std::abs(2.0 * hx(2, 0) - cplx(std::sqrt(2.0) / 2.0, 0.0)) < 1e-14);

    // Hermitian at a random theta for a full symbol
    QuadraticSymbol full = make_symbol(1.0, 0.3, -0.2, 0.15);
    VecXd th(2);
    th << 0.37, 0.81;
    Eigen::MatrixXcd hf = weyl_matrix(full, th, 16);
    CHECK((hf - hf.adjoint()).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("sobolev norm closed forms") {
    CHECK(sobolev_norm(HermiteState::mode(0, 8), 2.0) == doctest::Approx(1.0));
    CHECK(sobolev_norm(HermiteState::mode(1, 8), 1.0) ==
          doctest::Approx(std::sqrt(3.0)));
    HermiteState u;
    u.c = Eigen::VectorXcd::Zero(8);
    u.c(0) = u.c(2) = 1.0 / std::sqrt(2.0);
    CHECK(sobolev_norm(u, 1.0) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("free evolution keeps every sobolev norm constant") {
    QuadraticSymbol osc = make_symbol(1.0, 0.0, 0.0, 0.0);
    HermiteState u0 = HermiteState::mode(3, 32);
    std::vector<double> grid{1.0, 2.5, 4.0};
    std::vector<SobolevTrace> tr = hermite_evolve(osc, u0, grid, 0.01, {0.0, 1.5});
    REQUIRE(tr.size() == 2);
    for (double v : tr[0].norm) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
    const double want = std::pow(7.0, 0.75);  // (2*3+1)^{1.5/2}
    for (double v : tr[1].norm) CHECK(v == doctest::Approx(want).epsilon(1e-10));
    for (char f : tr[0].trusted) CHECK(f == 1);
}

TEST_CASE("gaussian width evolution basics") {
    CHECK(std::abs(gaussian_evolve(Mat2::Identity(), cplx(0.3, 0.8)) - cplx(0.3, 0.8)) <
          1e-15);
    // harmonic rotation leaves the coherent state invariant
    QuadraticSymbol osc = make_symbol(1.0, 0.0, 0.0, 0.0);
    Mat2 phi = integrate_flow(osc.classical(), 2.7, 1e-12);
    CHECK(std::abs(gaussian_evolve(phi, cplx(0.0, 1.0)) - cplx(0.0, 1.0)) < 1e-10);
    // Moebius cocycle identity and preservation of the upper half plane
    std::mt19937_64 rng(91);
    for (int i = 0; i < 10; ++i) {
        Mat2 a = random_sl2(rng), b = random_sl2(rng);
        cplx beta(0.4, 1.3);
        cplx lhs = gaussian_evolve(b * a, beta);
        cplx rhs = gaussian_evolve(b, gaussian_evolve(a, beta));
        CHECK(std::abs(lhs - rhs) < 1e-12);
        CHECK(lhs.imag() > 0.0);
    }
}

TEST_CASE("gaussian sobolev closed forms") {
    CHECK(gaussian_sobolev(cplx(0.0, 1.0), 0) == doctest::Approx(1.0));
    CHECK(gaussian_sobolev(cplx(0.0, 1.0), 1) == doctest::Approx(1.0));
    CHECK(gaussian_sobolev(cplx(0.0, 1.0), 2) == doctest::Approx(1.0));
    CHECK(gaussian_sobolev(cplx(0.0, 2.0), 1) ==
          doctest::Approx(std::sqrt(1.25)).epsilon(1e-14));
    CHECK(gaussian_sobolev(cplx(1.0, 1.0), 1) ==
          doctest::Approx(std::sqrt(1.5)).epsilon(1e-14));
}

TEST_CASE("gaussian projection recovers the ground state") {
    HermiteState u = project_gaussian(cplx(0.0, 1.0), 64);
    CHECK(std::abs(u.c(0) - cplx(1.0, 0.0)) < 1e-10);
    CHECK(u.norm0() == doctest::Approx(1.0).epsilon(1e-10));
    for (int n = 1; n < 64; n += 2) CHECK(std::abs(u.c(n)) < 1e-12);
    // squeezed state still normalized with fast tail decay
    HermiteState v = project_gaussian(cplx(0.4, 0.5), 128);
    CHECK(v.norm0() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(v.tail_mass() < 1e-20);
    CHECK(sobolev_norm(v, 1.0) ==
          doctest::Approx(gaussian_sobolev(cplx(0.4, 0.5), 1)).epsilon(1e-8));
}

TEST_CASE("hermite and gaussian propagators agree on an elliptic symbol") {
    QuadraticSymbol sym = make_symbol(1.0, 0.2, 0.1, -0.05);
    HermiteState u0 = project_gaussian(cplx(0.0, 1.0), 128);
    std::vector<double> grid{1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
    std::vector<SobolevTrace> tr = hermite_evolve(sym, u0, grid, 1e-3, {1.0});
    std::vector<cplx> betas = gaussian_trajectory(sym.classical(), cplx(0.0, 1.0), grid,
                                                  1e-12);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double exact = gaussian_sobolev(betas[k], 1);
        CHECK(std::abs(tr[0].norm[k] - exact) / exact < 1e-4);
    }
    // unitarity: the L2 trace stays at 1
    std::vector<SobolevTrace> tr0 = hermite_evolve(sym, u0, {8.0}, 1e-3, {0.0});
    CHECK(std::abs(tr0[0].norm[0] - 1.0) < 1e-8);
}

TEST_CASE("explicit hyperbolic solution scales its moments exactly") {
    const cplx beta0(0.0, 1.0);
    const double lam = 0.5;
    ExplicitNorms n0 = explicit_hyperbolic(beta0, lam, 0.0, 1);
    ExplicitNorms n1 = explicit_hyperbolic(beta0, lam, 1.0, 1);
    CHECK(n1.x_moment / n0.x_moment == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(n1.deriv_moment / n0.deriv_moment ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    ExplicitNorms z0 = explicit_hyperbolic(beta0, lam, 0.0, 0);
    ExplicitNorms z1 = explicit_hyperbolic(beta0, lam, 3.0, 0);
    CHECK(z0.total == doctest::Approx(z1.total));
}

TEST_CASE("explicit parabolic solution grows polynomially with degree s") {
    const cplx beta0(0.0, 1.0);
    for (int s : {1, 2}) {
        SobolevTrace trace;
        trace.s = s;
        for (double t = 10.0; t <= 100.0; t += 1.0) {
            trace.t.push_back(t);
            trace.norm.push_back(explicit_parabolic(beta0, 0.7, t, s).total);
            trace.tail.push_back(0.0);
            trace.trusted.push_back(1);
        }
        GrowthFit fit = fit_growth(trace);
        CHECK(fit.kind == GrowthKind::Polynomial);
        CHECK(std::abs(fit.param - s) < 0.02);
    }
    ExplicitNorms p = explicit_parabolic(beta0, 0.7, 50.0, 1);
    CHECK(p.x_moment == doctest::Approx(0.5));  // x-moments constant in t
}

TEST_CASE("growth prediction from the reduced form") {
    ReducedForm ell{ReducedForm::Kind::Elliptic, 1.0};
    CHECK(predict_growth(ell, 3.0).kind == GrowthKind::Bounded);
    ReducedForm hyp{ReducedForm::Kind::Hyperbolic, 0.2};
    GrowthLaw g = predict_growth(hyp, 2.0);
    CHECK(g.kind == GrowthKind::Exponential);
    CHECK(g.param == doctest::Approx(0.4));
    ReducedForm par{ReducedForm::Kind::Parabolic, -1.0};
    GrowthLaw gp = predict_growth(par, 1.0);
    CHECK(gp.kind == GrowthKind::Polynomial);
    CHECK(gp.param == doctest::Approx(1.0));
}

TEST_CASE("growth fitting selects the right law on synthetic traces") {
    auto make = [](const std::function<double(double)>& fn) {
        SobolevTrace tr;
        tr.s = 1.0;
        for (double t = 5.0; t <= 60.0; t += 1.0) {
            tr.t.push_back(t);
            tr.norm.push_back(fn(t));
            tr.tail.push_back(0.0);
            tr.trusted.push_back(1);
        }
        return tr;
    };
    GrowthFit e = fit_growth(make([](double t) { return std::exp(0.3 * t); }));
    CHECK(e.kind == GrowthKind::Exponential);
    CHECK(std::abs(e.param - 0.3) < 0.01);
    GrowthFit p = fit_growth(make([](double t) { return t * t; }));
    CHECK(p.kind == GrowthKind::Polynomial);
    CHECK(std::abs(p.param - 2.0) < 0.05);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    GrowthFit b = fit_growth(make([&](double t) {
        (void)t;
        return 2.0 * (1.0 + noise(rng));
    }));
    CHECK(b.kind == GrowthKind::Bounded);
    SobolevTrace tiny;
    tiny.s = 1.0;
    CHECK_THROWS(fit_growth(tiny));
}

TEST_CASE("norm equivalence ratios sit in the calibrated band") {
    HermiteState ground = project_gaussian(cplx(0.0, 1.0), 64);
    const double r_ref = norm_equivalence_check(ground, 1);
    CHECK(r_ref > 0.4);
    CHECK(r_ref < 0.8);
    const double r_mode = norm_equivalence_check(HermiteState::mode(10, 64), 1);
    CHECK(r_mode > 0.5 * r_ref);
    CHECK(r_mode < 2.0 * r_ref);
    // dilated Gaussian e^{-(x/4)^2/2} has width beta = i/16
    HermiteState wide = project_gaussian(cplx(0.0, 1.0 / 16.0), 128);
    const double r_wide = norm_equivalence_check(wide, 1);
    CHECK(r_wide > 0.5 * r_ref);
    CHECK(r_wide < 2.0 * r_ref);
    const double r2 = norm_equivalence_check(ground, 2);
    CHECK(r2 > 0.2);
    CHECK(r2 < 1.0);
}

TEST_CASE("hyperbolic quantum evolution grows at the classical rate") {
    // nu = 0, W = b (x xi): dilation flow with lambda = b = 0.3
    QuadraticSymbol sym = make_symbol(0.0, 0.0, 0.3, 0.0);
    HermiteState u0 = project_gaussian(cplx(0.0, 1.0), 768);
    std::vector<double> grid;
    for (double t = 5.0; t <= 8.0 + 1e-9; t += 0.05) grid.push_back(t);
    std::vector<SobolevTrace> tr = hermite_evolve(sym, u0, grid, 1e-3, {1.0});
    REQUIRE(tr[0].trusted_count() >= 20);
    GrowthFit fit = fit_growth(tr[0]);
    CHECK(fit.kind == GrowthKind::Exponential);
    CHECK(std::abs(fit.param - 0.3) < 0.03);
    // against the exact dilation solution while trusted
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!tr[0].trusted[k]) break;
        const double exact = explicit_hyperbolic(cplx(0.0, 1.0), 0.3, grid[k], 1).total;
        CHECK(std::abs(tr[0].norm[k] - exact) / exact < 1e-3);
    }
}
