// Matrix-valued Fourier series on the d-torus (and its double cover), with the
// weighted-l1 analytic norm, algebra operations through FFT-grid sampling, and
// Diophantine frequency checks.

#pragma once

#include "qpr/sl2.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <optional>
#include <vector>

namespace qpr {

using VecXd = Eigen::VectorXd;
using VecXi = Eigen::VectorXi;
using cplx = std::complex<double>;

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct FrequencyVector {
    VecXd omega;
    double gamma = 0.1;
    double tau = 2.0;

    int dim() const { return static_cast<int>(omega.size()); }
};

// true iff |<n,omega>| > gamma/|n|_1^tau for all 0 < |n|_1 <= n_max
// (homogeneous small-divisor bound: the only form the reduction scheme uses)
bool dc_check(const FrequencyVector& fv, int n_max);

// Golden-style frequency vectors used throughout the tests and the CLI defaults.
FrequencyVector golden_frequency(double gamma = 0.1, double tau = 2.0);

// Dense coefficient box |k|_inf <= N on the torus with lattice denominator den:
//   f(theta) = sum_k c_k exp(2 pi i <k, theta> / den),   theta in [0, den)^d.
// den = 1 is the plain torus T^d, den = 2 the double cover 2T^d.
class TorusMap {
public:
    TorusMap() = default;
    TorusMap(int d, int n, int den = 1, double radius = 0.0);

    static TorusMap constant(int d, const Mat2c& m, int den = 1, double radius = 0.0);

    int dim() const { return d_; }
    int order() const { return n_; }
    int den() const { return den_; }
    double radius() const { return radius_; }
    void set_radius(double r) { radius_ = r; }

    const Mat2c& coeff(const VecXi& k) const;
    Mat2c& coeff(const VecXi& k);
    bool in_box(const VecXi& k) const;

    // flat storage in lexicographic k order (k_0 slowest)
    std::size_t table_size() const { return coeffs_.size(); }
    const Mat2c& coeff_flat(std::size_t i) const { return coeffs_[i]; }
    Mat2c& coeff_flat(std::size_t i) { return coeffs_[i]; }
    VecXi index_of(std::size_t flat) const;

    Mat2c evaluate(const VecXd& theta) const;
    Mat2 evaluate_real(const VecXd& theta) const;

    // sum_k |c_k|_max exp(2 pi (|k|_1/den) r); throws if r > radius
    double weighted_norm(double r) const;
    double weighted_norm() const { return weighted_norm(radius_); }

    // mass of coefficients in the outer shell max(|k|_inf) == N, relative to total
    double tail_ratio() const;

    TorusMap truncated(int n_new) const;
    // re-embed on a lattice with denominator new_den (multiple of den)
    TorusMap with_den(int new_den) const;

    TorusMap& operator+=(const TorusMap& g);
    TorusMap& operator-=(const TorusMap& g);
    TorusMap& operator*=(double s);
    TorusMap& operator*=(const cplx& s);

    // d/dt f(theta0 + omega t) expressed as a torus map
    TorusMap derivative_along(const VecXd& omega) const;

    bool is_real(double tol = 1e-10) const;
    void symmetrize_real();  // project onto real-valued maps
    bool is_sl2_valued(double tol = 1e-12) const;

    double max_abs() const;

private:
    int d_ = 1;
    int n_ = 0;
    int den_ = 1;
    double radius_ = 0.0;
    std::vector<Mat2c> coeffs_;

    std::size_t flat_of(const VecXi& k) const;
};

TorusMap operator+(TorusMap f, const TorusMap& g);
TorusMap operator-(TorusMap f, const TorusMap& g);
TorusMap operator*(double s, TorusMap f);

struct GridFitInfo {
    double discarded_mass = 0.0;  // coefficient mass dropped by the output box
    double total_mass = 0.0;
};

// Pointwise product through a padded FFT grid (exact for the untruncated
// product); output truncated to n_out with the dropped mass reported.
TorusMap multiply(const TorusMap& f, const TorusMap& g, int n_out, GridFitInfo* info = nullptr);

// Fourier table of theta -> exp(Z(theta)) sampled on a grid of
// grid_factor * (2 n_out + 1) points per dimension. Z must be real-valued.
// Throws if the aliasing tail ratio exceeds alias_tol.
TorusMap matrix_exp_pointwise(const TorusMap& z, int n_out, double alias_tol = 1e-9,
                              int grid_factor = 4);

// Fit a pointwise-defined function to a coefficient box (FFT on an
// oversampled grid). fn receives theta in [0, den)^d.
TorusMap fit_from_samples(int d, int n_out, int den, double radius,
                          const std::function<Mat2c(const VecXd&)>& fn, int grid_factor = 2);

// Enumerate lattice vectors 0 < |n|_1 <= n_max in Z^d (lexicographic order).
std::vector<VecXi> lattice_ball_l1(int d, int n_max);

}  // namespace qpr
