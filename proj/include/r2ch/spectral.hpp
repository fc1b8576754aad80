#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "r2ch/core_model.hpp"

namespace r2ch {

using Complex = std::complex<double>;

/// Half-spectrum of a real field on a grid (modes m = 0..n/2). Conjugate
/// symmetry is implicit in the real-to-complex layout.
struct SpectralField {
    std::vector<Complex> coefficients;
};

/**
 * FFT workspace bound to one grid. Owns FFTW plans and scratch buffers, so a
 * Spectral instance must not be shared between threads; construct one per
 * worker (or use the thread-local instance returned by spectral_for()).
 *
 * Kernel convolutions use the Fourier multipliers of the periodized kernel
 * p(x) = exp(-|x|)/2:  p* <-> 1/(1+k^2),  d/dx p* <-> ik/(1+k^2).
 */
class Spectral {
public:
    explicit Spectral(const Grid& grid);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    const Grid& grid() const { return grid_; }

    /// Unnormalized forward transform into n/2+1 modes.
    void forward(std::span<const double> field, std::span<Complex> modes);
    /// Inverse transform including the 1/n normalization.
    void inverse(std::span<const Complex> modes, std::span<double> field);

    SpectralField transform(std::span<const double> field);

    std::vector<double> deriv(std::span<const double> field);
    std::vector<double> helmholtz_conv(std::span<const double> field);
    std::vector<double> helmholtz_conv_dx(std::span<const double> field);
    std::vector<double> dealias(std::span<const double> field);

    /// Highest retained mode index under the two-thirds rule.
    std::size_t dealias_cutoff() const { return grid_.n() / 3; }

    /// Zero modes above the two-thirds cutoff (and the Nyquist mode) in place.
    void truncate(std::span<Complex> modes) const;

    /// Spectral upsampling by an integer factor (zero padding); result has factor*n samples.
    std::vector<double> upsample(std::span<const double> field, std::size_t factor);

private:
    template <class Multiplier>
    std::vector<double> apply(std::span<const double> field, Multiplier mult);

    Grid grid_;
    void* r2c_ = nullptr;
    void* c2r_ = nullptr;
    std::vector<double> real_scratch_;
    std::vector<Complex> modes_scratch_;
};

/// Thread-local workspace for the given grid, created on first use.
Spectral& spectral_for(const Grid& grid);

std::vector<double> deriv(std::span<const double> field, const Grid& grid);
std::vector<double> helmholtz_conv(std::span<const double> field, const Grid& grid);
std::vector<double> helmholtz_conv_dx(std::span<const double> field, const Grid& grid);
std::vector<double> dealias(std::span<const double> field, const Grid& grid);

/**
 * Forcing term of the differentiated velocity equation,
 *
 *   f = -(mu-A) d_x p*(u_x) + (3-sigma)/2 u^2 - Omega rho^2 u
 *       - p*((3-sigma)/2 u^2 + sigma/2 u_x^2 + (1-2 Omega A)/2 rho^2 - Omega rho^2 u)
 *       + Omega d_x p*(rho^2 u_x),
 *
 * with rho = 1 + eta. The constant part of rho^2 is convolved analytically so
 * the rest state yields exactly -(1-2 Omega A)/2.
 */
std::vector<double> eval_f(const FieldState& state, const PhysParams& params, const Grid& grid);

enum class KernelTag { p, dxp };

/**
 * Direct O(n^2) quadrature of the convolution with the closed-form periodized
 * kernel, cosh(L-|x|)/(2 sinh L) or its derivative. The trapezoid sum is
 * corrected for the kink (p) or jump (dxp) of the kernel at the origin with
 * the Euler-Maclaurin terms through h^4; the field derivatives those terms
 * need come from eighth-order periodic finite differences. No transforms are
 * involved, which keeps it independent of the spectral path.
 */
std::vector<double> direct_conv_oracle(std::span<const double> field, const Grid& grid, KernelTag kernel);

/// Closed-form periodized kernels on |x| <= L.
double periodized_p(double x, double L);
double periodized_dxp(double x, double L);

/// Exact evaluation of the trigonometric interpolant of periodic samples at x.
double trig_interpolate(std::span<const double> field, const Grid& grid, double x);

}  // namespace r2ch
