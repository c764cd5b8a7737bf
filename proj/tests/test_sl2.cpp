#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qpr/sl2.hpp"

#include <cmath>
#include <random>

using namespace qpr;

namespace {

Mat2 random_traceless(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Mat2 a;
    a << u(rng), u(rng), u(rng), 0.0;
    a(1, 1) = -a(0, 0);
    return a;
}

}  // namespace

TEST_CASE("expm2 matches rotation closed form") {
    const double nu = 0.7;
    Mat2 a = nu * symp_j();
    Mat2 e = expm2(a);
    CHECK(e(0, 0) == doctest::Approx(std::cos(nu)).epsilon(1e-14));
    CHECK(e(1, 0) == doctest::Approx(std::sin(nu)).epsilon(1e-14));
    CHECK(e(0, 1) == doctest::Approx(-std::sin(nu)).epsilon(1e-14));
}

TEST_CASE("expm2 matches hyperbolic closed form") {
    Mat2 a;
    a << 0.3, 0.0, 0.0, -0.3;
    Mat2 e = expm2(a);
    CHECK(e(0, 0) == doctest::Approx(std::exp(0.3)).epsilon(1e-14));
    CHECK(e(1, 1) == doctest::Approx(std::exp(-0.3)).epsilon(1e-14));
    CHECK(std::abs(e(0, 1)) < 1e-15);
}

TEST_CASE("expm2 on nilpotent matrix is I + N") {
    Mat2 n;
    n << 0.0, 0.0, 2.5, 0.0;
    Mat2 e = expm2(n);
    CHECK((e - (Mat2::Identity() + n)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("expm2 preserves determinant exp(trace)") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        Mat2 a;
        a << u(rng), u(rng), u(rng), u(rng);
        Mat2 e = expm2(a);
        CHECK(e.determinant() == doctest::Approx(std::exp(a.trace())).epsilon(1e-12));
    }
}

TEST_CASE("logm_sl2 round trip on random traceless generators") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        Mat2 a = random_traceless(rng, 0.8);
        // keep within the principal branch
        if (a.determinant() > 0.0 && std::sqrt(a.determinant()) > 3.0) continue;
        Mat2 back = logm_sl2(expm2(a));
        CHECK((back - a).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("logm_sl2 rejects non-SL2 and tr <= -2") {
    Mat2 m = 2.0 * Mat2::Identity();
    CHECK_THROWS_AS(logm_sl2(m), std::invalid_argument);
    Mat2 neg = -Mat2::Identity();
    CHECK_THROWS_AS(logm_sl2(neg), std::domain_error);
}

TEST_CASE("classify trichotomy on canonical forms") {
    const double eta = 1e-8;
    SUBCASE("elliptic") {
        Mat2 b = 0.4 * symp_j();
        ReducedForm rf = classify(b, eta);
        CHECK(rf.kind == ReducedForm::Kind::Elliptic);
        CHECK(rf.value == doctest::Approx(0.4).epsilon(1e-12));
    }
    SUBCASE("hyperbolic") {
        Mat2 b;
        b << 0.25, 0.0, 0.0, -0.25;
        ReducedForm rf = classify(b, eta);
        CHECK(rf.kind == ReducedForm::Kind::Hyperbolic);
        CHECK(rf.value == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("parabolic in canonical frame") {
        Mat2 b;
        b << 0.0, 0.0, 0.7, 0.0;
        ReducedForm rf = classify(b, eta);
        CHECK(rf.kind == ReducedForm::Kind::Parabolic);
        CHECK(std::abs(rf.value) == doctest::Approx(0.7).epsilon(1e-10));
    }
    SUBCASE("parabolic is rotation invariant") {
        Mat2 b;
        b << 0.0, 0.0, 0.7, 0.0;
        const double phi = 1.234;
        Mat2 r;
        r << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
        ReducedForm rf = classify(r * b * r.transpose(), eta);
        CHECK(rf.kind == ReducedForm::Kind::Parabolic);
        CHECK(std::abs(rf.value) == doctest::Approx(0.7).epsilon(1e-8));
    }
    SUBCASE("zero") {
        ReducedForm rf = classify(Mat2::Zero(), eta);
        CHECK(rf.kind == ReducedForm::Kind::Zero);
    }
}

TEST_CASE("eigen_data flags near-parabolic conditioning") {
    Mat2 a;
    a << 0.0, 1e-12, 1.0, 0.0;
    EigenData ed = eigen_data(a);
    CHECK(ed.frame_cond > 1e5);
    Mat2 rot = 0.5 * symp_j();
    EigenData er = eigen_data(rot);
    CHECK(er.xi.real() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(er.frame_cond == doctest::Approx(1.0).epsilon(1e-12));
}
