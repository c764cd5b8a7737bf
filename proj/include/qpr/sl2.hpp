// 2x2 real matrix algebra for sl(2,R)/SL(2,R): closed-form exponentials and
// logarithms, eigenvalue data, and classification of constant reduced matrices.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace qpr {

using Mat2  = Eigen::Matrix2d;
using Mat2c = Eigen::Matrix2cd;
using Vec2  = Eigen::Vector2d;

// Symplectic generator J = [[0,-1],[1,0]] (counterclockwise rotation).
inline Mat2 symp_j() {
    Mat2 j;
    j << 0.0, -1.0, 1.0, 0.0;
    return j;
}

inline double trace_defect(const Mat2& a) { return std::abs(a(0, 0) + a(1, 1)); }

inline bool is_sl2(const Mat2& a, double tol = 1e-12) { return trace_defect(a) <= tol; }

// max-entry magnitude, the matrix norm used by the weighted Fourier norms
inline double entry_norm(const Mat2& a) { return a.cwiseAbs().maxCoeff(); }
inline double entry_norm(const Mat2c& a) { return a.cwiseAbs().maxCoeff(); }

// exp(A) for a general real 2x2 matrix, via A = (tr/2) I + A0 with A0 traceless
// and A0^2 = -det(A0) I.
Mat2 expm2(const Mat2& a);

// Principal logarithm of M in SL(2,R). Requires tr(M) > -2.
Mat2 logm_sl2(const Mat2& m);

struct EigenData {
    // xi real for elliptic A (eigenvalues +-i xi), xi = i*lambda for hyperbolic.
    std::complex<double> xi;
    int nilpotent_rank = 0;   // meaningful when det ~ 0
    double frame_cond = 1.0;  // condition number of the eigenvector frame
};

EigenData eigen_data(const Mat2& a);

struct ReducedForm {
    enum class Kind { Elliptic, Hyperbolic, Parabolic, Zero };
    Kind kind = Kind::Zero;
    double value = 0.0;  // rho_eff / lambda / kappa (unused for Zero)

    std::string kind_name() const;
};

// Trichotomy by det B with degeneracy threshold eta.
// Parabolic kappa is taken in the rotation frame that maps B to [[0,0],[kappa,0]].
ReducedForm classify(const Mat2& b, double eta);

}  // namespace qpr
