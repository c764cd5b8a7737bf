#include "qpr/fourier.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qpr {

bool dc_check(const FrequencyVector& fv, int n_max) {
    if (n_max < 1) throw std::invalid_argument("dc_check: n_max must be >= 1");
    // enumerate the full box |n|_inf <= n_max (the coefficient-box geometry the
    // certificate covers); the Diophantine weight uses the l1 norm
    const int d = fv.dim();
    VecXi n = VecXi::Constant(d, -n_max);
    while (true) {
        const int l1 = n.cwiseAbs().sum();
        if (l1 > 0) {
            double x = 0.0;
            for (int i = 0; i < d; ++i) x += n(i) * fv.omega(i);
            if (std::abs(x) <= fv.gamma / std::pow(static_cast<double>(l1), fv.tau))
                return false;
        }
        int i = d - 1;
        while (i >= 0 && n(i) == n_max) n(i--) = -n_max;
        if (i < 0) break;
        ++n(i);
    }
    return true;
}

FrequencyVector golden_frequency(double gamma, double tau) {
    FrequencyVector fv;
    fv.omega.resize(2);
    fv.omega << 1.0, (std::sqrt(5.0) - 1.0) / 2.0;
    fv.gamma = gamma;
    fv.tau = tau;
    return fv;
}

std::vector<VecXi> lattice_ball_l1(int d, int n_max) {
    std::vector<VecXi> out;
    VecXi k = VecXi::Constant(d, -n_max);
    while (true) {
        const int l1 = k.cwiseAbs().sum();
        if (l1 > 0 && l1 <= n_max) out.push_back(k);
        int i = d - 1;
        while (i >= 0 && k(i) == n_max) k(i--) = -n_max;
        if (i < 0) break;
        ++k(i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// TorusMap

TorusMap::TorusMap(int d, int n, int den, double radius)
    : d_(d), n_(n), den_(den), radius_(radius) {
    if (d < 1) throw std::invalid_argument("TorusMap: d must be >= 1");
    if (n < 0) throw std::invalid_argument("TorusMap: order must be >= 0");
    if (den < 1) throw std::invalid_argument("TorusMap: den must be >= 1");
    std::size_t sz = 1;
    for (int i = 0; i < d; ++i) sz *= static_cast<std::size_t>(2 * n + 1);
    coeffs_.assign(sz, Mat2c::Zero());
}

TorusMap TorusMap::constant(int d, const Mat2c& m, int den, double radius) {
    TorusMap f(d, 0, den, radius);
    f.coeffs_[0] = m;
    return f;
}

std::size_t TorusMap::flat_of(const VecXi& k) const {
    std::size_t idx = 0;
    const std::size_t w = static_cast<std::size_t>(2 * n_ + 1);
    for (int i = 0; i < d_; ++i) {
        idx = idx * w + static_cast<std::size_t>(k(i) + n_);
    }
    return idx;
}

VecXi TorusMap::index_of(std::size_t flat) const {
    VecXi k(d_);
    const std::size_t w = static_cast<std::size_t>(2 * n_ + 1);
    for (int i = d_ - 1; i >= 0; --i) {
        k(i) = static_cast<int>(flat % w) - n_;
        flat /= w;
    }
    return k;
}

bool TorusMap::in_box(const VecXi& k) const {
    return k.cwiseAbs().maxCoeff() <= n_;
}

const Mat2c& TorusMap::coeff(const VecXi& k) const {
    if (!in_box(k)) throw std::out_of_range("TorusMap::coeff: index outside box");
    return coeffs_[flat_of(k)];
}

Mat2c& TorusMap::coeff(const VecXi& k) {
    if (!in_box(k)) throw std::out_of_range("TorusMap::coeff: index outside box");
    return coeffs_[flat_of(k)];
}

Mat2c TorusMap::evaluate(const VecXd& theta) const {
    if (theta.size() != d_) throw std::invalid_argument("TorusMap::evaluate: dim mismatch");
    // per-dimension phasor tables e^{2 pi i k theta_i / den}, k = -N..N
    const int w = 2 * n_ + 1;
    std::vector<cplx> ph(static_cast<std::size_t>(d_) * w);
    for (int i = 0; i < d_; ++i) {
        const cplx step = std::polar(1.0, kTwoPi * theta(i) / den_);
        cplx v = std::pow(step, -n_);
        for (int k = 0; k < w; ++k) {
            ph[static_cast<std::size_t>(i) * w + k] = v;
            v *= step;
        }
    }
    Mat2c acc = Mat2c::Zero();
    for (std::size_t f = 0; f < coeffs_.size(); ++f) {
        if (coeffs_[f].isZero(0.0)) continue;
        std::size_t rest = f;
        cplx phase = 1.0;
        const std::size_t ww = static_cast<std::size_t>(w);
        for (int i = d_ - 1; i >= 0; --i) {
            phase *= ph[static_cast<std::size_t>(i) * w + rest % ww];
            rest /= ww;
        }
        acc += phase * coeffs_[f];
    }
    return acc;
}

Mat2 TorusMap::evaluate_real(const VecXd& theta) const {
    return evaluate(theta).real();
}

double TorusMap::weighted_norm(double r) const {
    if (r > radius_ + 1e-15)
        throw std::domain_error("TorusMap::weighted_norm: r exceeds nominal radius");
    double acc = 0.0;
    for (std::size_t f = 0; f < coeffs_.size(); ++f) {
        const double a = entry_norm(coeffs_[f]);
        if (a == 0.0) continue;
        const double l1 = index_of(f).cast<double>().cwiseAbs().sum();
        acc += a * std::exp(kTwoPi * (l1 / den_) * r);
    }
    return acc;
}

double TorusMap::tail_ratio() const {
    if (n_ == 0) return 0.0;
    double shell = 0.0, total = 0.0;
    for (std::size_t f = 0; f < coeffs_.size(); ++f) {
        const double a = entry_norm(coeffs_[f]);
        if (a == 0.0) continue;
        total += a;
        if (index_of(f).cwiseAbs().maxCoeff() == n_) shell += a;
    }
    return total > 0.0 ? shell / total : 0.0;
}

TorusMap TorusMap::truncated(int n_new) const {
    TorusMap out(d_, n_new, den_, radius_);
    const int nc = std::min(n_, n_new);
    VecXi k = VecXi::Constant(d_, -nc);
    while (true) {
        out.coeff(k) = coeff(k);
        int i = d_ - 1;
        while (i >= 0 && k(i) == nc) k(i--) = -nc;
        if (i < 0) break;
        ++k(i);
    }
    return out;
}

TorusMap TorusMap::with_den(int new_den) const {
    if (new_den % den_ != 0)
        throw std::invalid_argument("TorusMap::with_den: new_den must be a multiple of den");
    const int m = new_den / den_;
    TorusMap out(d_, n_ * m, new_den, radius_);
    for (std::size_t f = 0; f < coeffs_.size(); ++f) {
        if (coeffs_[f].isZero(0.0)) continue;
        out.coeff(index_of(f) * m) = coeffs_[f];
    }
    return out;
}

TorusMap& TorusMap::operator+=(const TorusMap& g) {
    if (g.d_ != d_ || g.den_ != den_)
        throw std::invalid_argument("TorusMap::+=: incompatible maps");
    if (g.n_ > n_) {
        TorusMap grown = truncated(g.n_);
        *this = std::move(grown);
    }
    for (std::size_t f = 0; f < g.coeffs_.size(); ++f) {
        if (g.coeffs_[f].isZero(0.0)) continue;
        coeff(g.index_of(f)) += g.coeffs_[f];
    }
    radius_ = std::min(radius_, g.radius_);
    return *this;
}

TorusMap& TorusMap::operator-=(const TorusMap& g) {
    TorusMap neg = g;
    neg *= -1.0;
    return (*this += neg);
}

TorusMap& TorusMap::operator*=(double s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
}

TorusMap& TorusMap::operator*=(const cplx& s) {
    for (auto& c : coeffs_) c *= s;
    return *this;
}

TorusMap TorusMap::derivative_along(const VecXd& omega) const {
    if (omega.size() != d_)
        throw std::invalid_argument("TorusMap::derivative_along: dim mismatch");
    TorusMap out = *this;
    for (std::size_t f = 0; f < coeffs_.size(); ++f) {
        if (coeffs_[f].isZero(0.0)) {
            out.coeffs_[f].setZero();
            continue;
        }
        const VecXi k = index_of(f);
        double kw = 0.0;
        for (int i = 0; i < d_; ++i) kw += k(i) * omega(i);
        out.coeffs_[f] = cplx(0.0, kTwoPi * kw / den_) * coeffs_[f];
    }
    return out;
}

bool TorusMap::is_real(double tol) const {
    for (std::size_t f = 0; f < coeffs_.size(); ++f) {
        const VecXi k = index_of(f);
        const Mat2c diff = coeffs_[f] - coeff(VecXi(-k)).conjugate();
        if (entry_norm(diff) > tol) return false;
    }
    return true;
}

void TorusMap::symmetrize_real() {
    for (std::size_t f = 0; f < coeffs_.size(); ++f) {
        const VecXi k = index_of(f);
        const std::size_t g = flat_of(VecXi(-k));
        if (g < f) continue;
        const Mat2c sym = 0.5 * (coeffs_[f] + coeffs_[g].conjugate());
        coeffs_[f] = sym;
        coeffs_[g] = sym.conjugate();
    }
}

bool TorusMap::is_sl2_valued(double tol) const {
    for (const auto& c : coeffs_) {
        if (std::abs(c(0, 0) + c(1, 1)) > tol) return false;
    }
    return true;
}

double TorusMap::max_abs() const {
    double m = 0.0;
    for (const auto& c : coeffs_) m = std::max(m, entry_norm(c));
    return m;
}

TorusMap operator+(TorusMap f, const TorusMap& g) { return f += g; }
TorusMap operator-(TorusMap f, const TorusMap& g) { return f -= g; }
TorusMap operator*(double s, TorusMap f) { return f *= s; }

// ---------------------------------------------------------------------------
// FFT grid machinery

namespace {

struct Grid {
    int d;
    int m;  // points per dimension
    std::vector<Mat2c> vals;

    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < d; ++i) s *= static_cast<std::size_t>(m);
        return s;
    }
};

// one complex FFT over the grid for each of the 4 matrix entries
void fft_inplace(Grid& g, int sign) {
    const std::size_t sz = g.size();
    std::vector<int> dims(static_cast<std::size_t>(g.d), g.m);
    fftw_complex* buf =
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * sz));
    fftw_plan plan = fftw_plan_dft(g.d, dims.data(), buf, buf, sign, FFTW_ESTIMATE);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            for (std::size_t i = 0; i < sz; ++i) {
                buf[i][0] = g.vals[i](r, c).real();
                buf[i][1] = g.vals[i](r, c).imag();
            }
            fftw_execute(plan);
            for (std::size_t i = 0; i < sz; ++i) {
                g.vals[i](r, c) = cplx(buf[i][0], buf[i][1]);
            }
        }
    }
    fftw_destroy_plan(plan);
    fftw_free(buf);
}

std::size_t grid_flat(const Grid& g, const VecXi& idx) {
    std::size_t f = 0;
    for (int i = 0; i < g.d; ++i) f = f * static_cast<std::size_t>(g.m) + idx(i);
    return f;
}

// place coefficients at wrapped frequency slots and synthesize values
Grid values_on_grid(const TorusMap& f, int m) {
    Grid g{f.dim(), m, {}};
    g.vals.assign(g.size(), Mat2c::Zero());
    for (std::size_t i = 0; i < f.table_size(); ++i) {
        const Mat2c& c = f.coeff_flat(i);
        if (c.isZero(0.0)) continue;
        VecXi k = f.index_of(i);
        VecXi slot(f.dim());
        for (int j = 0; j < f.dim(); ++j) slot(j) = ((k(j) % m) + m) % m;
        g.vals[grid_flat(g, slot)] += c;
    }
    fft_inplace(g, FFTW_BACKWARD);  // v_m = sum_k c_k e^{+2 pi i k m / M}
    return g;
}

// analyze grid values into a coefficient box
TorusMap fit_from_grid(Grid g, int n_out, int den, double radius, GridFitInfo* info) {
    const double scale = 1.0 / static_cast<double>(g.size());
    fft_inplace(g, FFTW_FORWARD);
    TorusMap out(g.d, n_out, den, radius);
    double kept = 0.0, total = 0.0;
    std::vector<bool> taken(g.size(), false);
    for (std::size_t i = 0; i < out.table_size(); ++i) {
        VecXi k = out.index_of(i);
        VecXi slot(g.d);
        for (int j = 0; j < g.d; ++j) slot(j) = ((k(j) % g.m) + g.m) % g.m;
        const std::size_t f = grid_flat(g, slot);
        out.coeff_flat(i) = scale * g.vals[f];
        kept += entry_norm(out.coeff_flat(i));
        taken[f] = true;
    }
    if (info) {
        for (std::size_t f = 0; f < g.vals.size(); ++f) {
            const double a = scale * entry_norm(g.vals[f]);
            total += a;
            if (!taken[f]) info->discarded_mass += a;
        }
        info->total_mass = total;
    }
    return out;
}

int fft_size_for(int n) {
    int m = std::max(2 * n + 1, 8);
    if (m % 2 == 1) ++m;  // even sizes factor nicely
    return m;
}

}  // namespace

TorusMap multiply(const TorusMap& f, const TorusMap& g, int n_out, GridFitInfo* info) {
    if (f.dim() != g.dim() || f.den() != g.den())
        throw std::invalid_argument("multiply: incompatible maps");
    const int m = fft_size_for(f.order() + g.order());
    Grid gf = values_on_grid(f, m);
    const Grid gg = values_on_grid(g, m);
    for (std::size_t i = 0; i < gf.vals.size(); ++i) gf.vals[i] = gf.vals[i] * gg.vals[i];
    return fit_from_grid(std::move(gf), n_out, f.den(),
                         std::min(f.radius(), g.radius()), info);
}

TorusMap matrix_exp_pointwise(const TorusMap& z, int n_out, double alias_tol,
                              int grid_factor) {
    const int m = fft_size_for(grid_factor * std::max(n_out, z.order()));
    Grid g = values_on_grid(z, m);
    for (auto& v : g.vals) {
        const Mat2 zr = v.real();
        if (v.imag().cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, entry_norm(v)))
            throw std::invalid_argument("matrix_exp_pointwise: Z must be real-valued");
        v = expm2(zr).cast<cplx>();
    }
    GridFitInfo info;
    TorusMap out = fit_from_grid(std::move(g), n_out, z.den(), z.radius(), &info);
    const double rel =
        info.total_mass > 0.0 ? info.discarded_mass / info.total_mass : 0.0;
    if (rel > alias_tol) {
        throw std::runtime_error("matrix_exp_pointwise: aliasing tail ratio " +
                                 std::to_string(rel) + " exceeds tolerance");
    }
    return out;
}

TorusMap fit_from_samples(int d, int n_out, int den, double radius,
                          const std::function<Mat2c(const VecXd&)>& fn, int grid_factor) {
    const int m = fft_size_for(grid_factor * n_out);
    Grid g{d, m, {}};
    g.vals.resize(g.size());
    VecXi idx = VecXi::Zero(d);
    for (std::size_t f = 0; f < g.vals.size(); ++f) {
        VecXd theta(d);
        for (int i = 0; i < d; ++i) theta(i) = static_cast<double>(idx(i)) * den / m;
        g.vals[f] = fn(theta);
        int i = d - 1;
        while (i >= 0 && idx(i) == m - 1) idx(i--) = 0;
        if (i >= 0) ++idx(i);
    }
    return fit_from_grid(std::move(g), n_out, den, radius, nullptr);
}

}  // namespace qpr
