#include "qpr/sl2.hpp"

#include <cmath>
#include <limits>

namespace qpr {

namespace {

// cosh-like and sinh-like coefficients for exp of a traceless matrix with
// A0^2 = q I. Returns (C, S) with exp(A0) = C I + S A0.
void traceless_exp_coeffs(double q, double& c, double& s) {
    if (q > 1e-12) {
        const double w = std::sqrt(q);
        c = std::cosh(w);
        s = std::sinh(w) / w;
    } else if (q < -1e-12) {
        const double w = std::sqrt(-q);
        c = std::cos(w);
        s = std::sin(w) / w;
    } else {
        // series in q around 0
        c = 1.0 + q / 2.0 + q * q / 24.0;
        s = 1.0 + q / 6.0 + q * q / 120.0;
    }
}

}  // namespace

Mat2 expm2(const Mat2& a) {
    const double mu = 0.5 * (a(0, 0) + a(1, 1));
    const Mat2 a0 = a - mu * Mat2::Identity();
    const double q = -a0.determinant();  // a0^2 = q I
    double c, s;
    traceless_exp_coeffs(q, c, s);
    return std::exp(mu) * (c * Mat2::Identity() + s * a0);
}

Mat2 logm_sl2(const Mat2& m) {
    const double det = m.determinant();
    if (std::abs(det - 1.0) > 1e-8) {
        throw std::invalid_argument("logm_sl2: matrix is not in SL(2,R), det=" +
                                    std::to_string(det));
    }
    const double t = 0.5 * (m(0, 0) + m(1, 1));
    const Mat2 n = m - t * Mat2::Identity();  // traceless part, n^2 = (t^2-1) I
    if (t <= -1.0 + 1e-12) {
        throw std::domain_error("logm_sl2: no real logarithm (tr <= -2)");
    }
    double phi, s;
    if (t < 1.0 - 1e-8) {
        phi = std::acos(t);
        s = phi / std::sin(phi);
    } else if (t > 1.0 + 1e-8) {
        phi = std::acosh(t);
        s = phi / std::sinh(phi);
    } else {
        // t ~ 1: n is near-nilpotent, log(M) ~ n with O(|t-1|) correction
        const double q = t * t - 1.0;
        s = 1.0 - q / 6.0;
    }
    return s * n;
}

EigenData eigen_data(const Mat2& a) {
    EigenData out;
    const double det = a.determinant();
    if (det > 0.0) {
        out.xi = std::sqrt(det);
    } else {
        out.xi = std::complex<double>(0.0, std::sqrt(-det));
    }
    const double scale = entry_norm(a);
    if (std::abs(det) <= 1e-14 * std::max(1.0, scale * scale)) {
        out.nilpotent_rank = (scale > 1e-14) ? 1 : 0;
    }
    // eigenvector frame conditioning: for near-parabolic A the frame is singular
    if (scale > 0.0 && std::abs(det) > 0.0) {
        out.frame_cond = scale / std::sqrt(std::abs(det));
    } else if (scale > 0.0) {
        out.frame_cond = std::numeric_limits<double>::infinity();
    }
    return out;
}

std::string ReducedForm::kind_name() const {
    switch (kind) {
        case Kind::Elliptic: return "Elliptic";
        case Kind::Hyperbolic: return "Hyperbolic";
        case Kind::Parabolic: return "Parabolic";
        case Kind::Zero: return "Zero";
    }
    return "?";
}

ReducedForm classify(const Mat2& b, double eta) {
    if (eta <= 0.0) throw std::invalid_argument("classify: eta must be > 0");
    ReducedForm out;
    const double det = b.determinant();
    const double scale = entry_norm(b);
    if (det > eta) {
        out.kind = ReducedForm::Kind::Elliptic;
        out.value = std::sqrt(det);
    } else if (det < -eta) {
        out.kind = ReducedForm::Kind::Hyperbolic;
        out.value = std::sqrt(-det);
    } else if (scale > eta) {
        out.kind = ReducedForm::Kind::Parabolic;
        // Rotate the kernel direction v of the (near-)nilpotent part onto e2;
        // kappa = <e2', B e1'> is invariant under v -> -v.
        const Mat2 n = b - 0.5 * (b(0, 0) + b(1, 1)) * Mat2::Identity();
        Eigen::JacobiSVD<Mat2> svd(n, Eigen::ComputeFullV);
        const Vec2 v = svd.matrixV().col(1);  // near-null direction
        Vec2 u;                               // v rotated by -90 degrees
        u << v(1), -v(0);
        Mat2 r;
        r.col(0) = u;
        r.col(1) = v;
        const Mat2 nf = r.transpose() * n * r;
        out.value = nf(1, 0);
    } else {
        out.kind = ReducedForm::Kind::Zero;
        out.value = 0.0;
    }
    return out;
}

}  // namespace qpr
