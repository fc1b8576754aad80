#include "r2ch/spectral.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

namespace r2ch {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

fftw_complex* as_fftw(Complex* p) { return reinterpret_cast<fftw_complex*>(p); }

void require_length(std::span<const double> field, const Grid& grid) {
    if (field.size() != grid.n()) throw InvalidArgument("field length does not match the grid");
}

}  // namespace

Spectral::Spectral(const Grid& grid)
    : grid_(grid), real_scratch_(grid.n()), modes_scratch_(grid.modes()) {
    const int n = static_cast<int>(grid_.n());
    std::lock_guard lock(planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    r2c_ = fftw_plan_dft_r2c_1d(n, real_scratch_.data(), as_fftw(modes_scratch_.data()), flags);
    c2r_ = fftw_plan_dft_c2r_1d(n, as_fftw(modes_scratch_.data()), real_scratch_.data(), flags);
}

Spectral::~Spectral() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(r2c_));
    fftw_destroy_plan(static_cast<fftw_plan>(c2r_));
}

void Spectral::forward(std::span<const double> field, std::span<Complex> modes) {
    require_length(field, grid_);
    if (modes.size() != grid_.modes()) throw InvalidArgument("mode buffer has the wrong size");
    // Out-of-place r2c preserves its input.
    fftw_execute_dft_r2c(static_cast<fftw_plan>(r2c_), const_cast<double*>(field.data()),
                         as_fftw(modes.data()));
}

void Spectral::inverse(std::span<const Complex> modes, std::span<double> field) {
    if (modes.size() != grid_.modes()) throw InvalidArgument("mode buffer has the wrong size");
    if (field.size() != grid_.n()) throw InvalidArgument("field length does not match the grid");
    // c2r destroys its input, so work on a copy.
    std::copy(modes.begin(), modes.end(), modes_scratch_.begin());
    fftw_execute_dft_c2r(static_cast<fftw_plan>(c2r_), as_fftw(modes_scratch_.data()), field.data());
    const double scale = 1.0 / static_cast<double>(grid_.n());
    for (double& v : field) v *= scale;
}

SpectralField Spectral::transform(std::span<const double> field) {
    SpectralField out{std::vector<Complex>(grid_.modes())};
    forward(field, out.coefficients);
    return out;
}

template <class Multiplier>
std::vector<double> Spectral::apply(std::span<const double> field, Multiplier mult) {
    std::vector<Complex> modes(grid_.modes());
    forward(field, modes);
    const auto& k = grid_.wavenumbers();
    for (std::size_t m = 0; m < modes.size(); ++m) modes[m] *= mult(m, k[m]);
    std::vector<double> out(grid_.n());
    inverse(modes, out);
    return out;
}

std::vector<double> Spectral::deriv(std::span<const double> field) {
    const std::size_t nyquist = grid_.n() / 2;
    return apply(field, [nyquist](std::size_t m, double k) {
        return m == nyquist ? Complex(0.0) : Complex(0.0, k);
    });
}

std::vector<double> Spectral::helmholtz_conv(std::span<const double> field) {
    return apply(field, [](std::size_t, double k) { return Complex(1.0 / (1.0 + k * k)); });
}

std::vector<double> Spectral::helmholtz_conv_dx(std::span<const double> field) {
    const std::size_t nyquist = grid_.n() / 2;
    return apply(field, [nyquist](std::size_t m, double k) {
        return m == nyquist ? Complex(0.0) : Complex(0.0, k / (1.0 + k * k));
    });
}

std::vector<double> Spectral::dealias(std::span<const double> field) {
    const std::size_t cut = dealias_cutoff();
    return apply(field, [cut](std::size_t m, double) { return Complex(m <= cut ? 1.0 : 0.0); });
}

void Spectral::truncate(std::span<Complex> modes) const {
    for (std::size_t m = dealias_cutoff() + 1; m < modes.size(); ++m) modes[m] = 0.0;
}

std::vector<double> Spectral::upsample(std::span<const double> field, std::size_t factor) {
    if (factor == 0 || !std::has_single_bit(factor)) throw InvalidArgument("upsampling factor must be a power of two");
    std::vector<Complex> modes(grid_.modes());
    forward(field, modes);
    if (factor == 1) {
        std::vector<double> out(grid_.n());
        inverse(modes, out);
        return out;
    }
    Grid fine(grid_.half_length(), grid_.n() * factor);
    std::vector<Complex> padded(fine.modes(), Complex(0.0));
    const double scale = static_cast<double>(factor);
    const std::size_t nyquist = grid_.n() / 2;
    for (std::size_t m = 0; m < nyquist; ++m) padded[m] = scale * modes[m];
    // Split the coarse Nyquist mode evenly between +/- n/2 (the cosine interpolant).
    padded[nyquist] = 0.5 * scale * modes[nyquist].real();
    std::vector<double> out(fine.n());
    spectral_for(fine).inverse(padded, out);
    return out;
}

Spectral& spectral_for(const Grid& grid) {
    using Key = std::pair<std::size_t, std::uint64_t>;
    thread_local std::map<Key, std::unique_ptr<Spectral>> cache;
    const Key key{grid.n(), std::bit_cast<std::uint64_t>(grid.half_length())};
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, std::make_unique<Spectral>(grid)).first;
    return *it->second;
}

std::vector<double> deriv(std::span<const double> field, const Grid& grid) {
    return spectral_for(grid).deriv(field);
}

std::vector<double> helmholtz_conv(std::span<const double> field, const Grid& grid) {
    return spectral_for(grid).helmholtz_conv(field);
}

std::vector<double> helmholtz_conv_dx(std::span<const double> field, const Grid& grid) {
    return spectral_for(grid).helmholtz_conv_dx(field);
}

std::vector<double> dealias(std::span<const double> field, const Grid& grid) {
    return spectral_for(grid).dealias(field);
}

std::vector<double> eval_f(const FieldState& state, const PhysParams& params, const Grid& grid) {
    require_length(state.u, grid);
    require_length(state.eta, grid);
    auto& sp = spectral_for(grid);
    const std::size_t n = grid.n();
    const double sigma = params.sigma();
    const double Omega = params.Omega();
    const double stiff = params.stiffness();

    const auto ux = sp.deriv(state.u);
    std::vector<double> bracket(n), flux(n), local(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double u = state.u[j];
        const double eta = state.eta[j];
        const double rho2 = (1.0 + eta) * (1.0 + eta);
        local[j] = 0.5 * (3.0 - sigma) * u * u - Omega * rho2 * u;
        // rho^2/2 = 1/2 + eta + eta^2/2; the constant is convolved exactly below.
        bracket[j] = 0.5 * (3.0 - sigma) * u * u + 0.5 * sigma * ux[j] * ux[j] +
                     stiff * (eta + 0.5 * eta * eta) - Omega * rho2 * u;
        flux[j] = rho2 * ux[j];
    }
    const auto shear = sp.helmholtz_conv_dx(ux);
    const auto smooth = sp.helmholtz_conv(bracket);
    const auto rot = sp.helmholtz_conv_dx(flux);

    std::vector<double> f(n);
    for (std::size_t j = 0; j < n; ++j)
        f[j] = -(params.mu() - params.A()) * shear[j] + local[j] - 0.5 * stiff - smooth[j] +
               Omega * rot[j];
    return f;
}

double periodized_p(double x, double L) {
    return std::cosh(L - std::abs(x)) / (2.0 * std::sinh(L));
}

double periodized_dxp(double x, double L) {
    if (x == 0.0) return 0.0;
    const double s = x > 0.0 ? 1.0 : -1.0;
    return -s * std::sinh(L - std::abs(x)) / (2.0 * std::sinh(L));
}

namespace {

// Eighth-order (first, second) and sixth-order (third) periodic central differences.
std::vector<double> periodic_stencil(std::span<const double> f, const double (&c)[9], double scale) {
    const std::size_t n = f.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int o = -4; o <= 4; ++o) acc += c[o + 4] * f[(i + n + static_cast<std::size_t>(o + 4) - 4) % n];
        out[i] = acc * scale;
    }
    return out;
}

constexpr double kD1[9] = {1.0 / 280, -4.0 / 105, 1.0 / 5, -4.0 / 5, 0.0, 4.0 / 5, -1.0 / 5, 4.0 / 105, -1.0 / 280};
constexpr double kD2[9] = {-1.0 / 560, 8.0 / 315, -1.0 / 5, 8.0 / 5, -205.0 / 72, 8.0 / 5, -1.0 / 5, 8.0 / 315, -1.0 / 560};
constexpr double kD3[9] = {-7.0 / 240, 3.0 / 10, -169.0 / 120, 61.0 / 30, 0.0, -61.0 / 30, 169.0 / 120, -3.0 / 10, 7.0 / 240};

}  // namespace

std::vector<double> direct_conv_oracle(std::span<const double> field, const Grid& grid, KernelTag kernel) {
    require_length(field, grid);
    const std::size_t n = grid.n();
    const double h = grid.dx();
    const double L = grid.half_length();

    std::vector<double> table(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double d = m <= n / 2 ? static_cast<double>(m) * h : (static_cast<double>(m) - static_cast<double>(n)) * h;
        table[m] = kernel == KernelTag::p ? periodized_p(d, L) : periodized_dxp(d, L);
    }
    if (kernel == KernelTag::dxp) table[n / 2] = 0.0;  // odd kernel vanishes at +/-L

    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += table[(i + n - j) % n] * field[j];
        out[i] = h * acc;
    }

    const double h2 = h * h;
    const double h4 = h2 * h2;
    const auto d1 = periodic_stencil(field, kD1, 1.0 / h);
    if (kernel == KernelTag::p) {
        const auto d2 = periodic_stencil(field, kD2, 1.0 / h2);
        for (std::size_t i = 0; i < n; ++i)
            out[i] += -h2 / 12.0 * field[i] + h4 / 720.0 * (3.0 * d2[i] + field[i]);
    } else {
        const auto d3 = periodic_stencil(field, kD3, 1.0 / (h2 * h));
        for (std::size_t i = 0; i < n; ++i)
            out[i] += h2 / 12.0 * d1[i] - h4 / 720.0 * (d3[i] + 3.0 * d1[i]);
    }
    return out;
}

double trig_interpolate(std::span<const double> field, const Grid& grid, double x) {
    require_length(field, grid);
    auto& sp = spectral_for(grid);
    std::vector<Complex> modes(grid.modes());
    sp.forward(field, modes);
    const auto& k = grid.wavenumbers();
    const double s = x + grid.half_length();
    const std::size_t nyquist = grid.n() / 2;
    double acc = modes[0].real();
    for (std::size_t m = 1; m < nyquist; ++m)
        acc += 2.0 * (modes[m] * std::polar(1.0, k[m] * s)).real();
    acc += modes[nyquist].real() * std::cos(k[nyquist] * s);
    return acc / static_cast<double>(grid.n());
}

}  // namespace r2ch
