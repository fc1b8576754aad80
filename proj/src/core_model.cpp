#include "r2ch/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace r2ch {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

PhysParams::PhysParams(double A, double sigma, double mu, double Omega)
    : A_(A), sigma_(sigma), mu_(mu), Omega_(Omega) {
    if (!std::isfinite(A) || !std::isfinite(sigma) || !std::isfinite(mu) || !std::isfinite(Omega))
        throw InvalidArgument("parameters must be finite");
    if (Omega < 0.0) throw InvalidArgument("Omega must be nonnegative");
    if (!(1.0 - 2.0 * Omega * A > 0.0)) throw InvalidArgument("1-2*Omega*A must be positive");
}

RegimeFlags classify_regime(const PhysParams& params) {
    RegimeFlags flags;
    flags.scenario_sigma_pos = params.sigma() > 0.0;
    flags.blowup_sigma_neg = params.sigma() < 0.0;
    flags.blowup_sigma_one = params.sigma() == 1.0 && params.mu() == 0.0;
    return flags;
}

Grid::Grid(double half_length, std::size_t n) : L_(half_length), n_(n) {
    if (!(half_length > 0.0) || !std::isfinite(half_length))
        throw InvalidArgument("grid half-length must be positive and finite");
    if (n < 16 || !is_power_of_two(n))
        throw InvalidArgument("grid size must be a power of two and at least 16, got " +
                              std::to_string(n));
    dx_ = 2.0 * L_ / static_cast<double>(n_);
    k_.resize(modes());
    for (std::size_t m = 0; m < k_.size(); ++m)
        k_[m] = std::numbers::pi * static_cast<double>(m) / L_;
}

std::vector<double> Grid::nodes() const {
    std::vector<double> xs(n_);
    for (std::size_t j = 0; j < n_; ++j) xs[j] = x(j);
    return xs;
}

Grid build_grid(double half_length, std::size_t n) { return Grid(half_length, n); }

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

double boundary_magnitude(const FieldState& state, const Grid& grid) {
    const double edge = 0.95 * grid.half_length();
    double worst = 0.0;
    for (std::size_t j = 0; j < grid.n(); ++j) {
        if (std::abs(grid.x(j)) < edge) continue;
        worst = std::max({worst, std::abs(state.u[j]), std::abs(state.eta[j])});
    }
    return worst;
}

double ProfileTerm::value(double x) const {
    const double s = (x - center) / width;
    const double g = std::exp(-s * s);
    switch (kind) {
        case ProfileKind::slope_bump:
            return amplitude * (x - center) * g;
        case ProfileKind::gaussian_bump:
        case ProfileKind::eta_bump:
            break;
    }
    return amplitude * g;
}

double ProfileTerm::derivative(double x) const {
    const double s = (x - center) / width;
    const double g = std::exp(-s * s);
    switch (kind) {
        case ProfileKind::slope_bump:
            return amplitude * (1.0 - 2.0 * s * s) * g;
        case ProfileKind::gaussian_bump:
        case ProfileKind::eta_bump:
            break;
    }
    return -2.0 * amplitude * s / width * g;
}

double InitialDataSpec::u0(double x) const {
    double v = 0.0;
    for (const auto& term : u_terms) v += term.value(x);
    return v;
}

double InitialDataSpec::u0_x(double x) const {
    double v = 0.0;
    for (const auto& term : u_terms) v += term.derivative(x);
    return v;
}

double InitialDataSpec::eta0(double x) const {
    if (eta_zero) return -1.0;
    double v = 0.0;
    for (const auto& term : eta_terms) v += term.value(x);
    return v;
}

DecayViolation::DecayViolation(double magnitude, double tol)
    : InvalidArgument("initial data does not decay at the box edge: boundary magnitude " +
                      fmt_double(magnitude) + " exceeds decay_tol " + fmt_double(tol)),
      magnitude_(magnitude) {}

FieldState synthesize(const InitialDataSpec& spec, const Grid& grid) {
    for (const auto* terms : {&spec.u_terms, &spec.eta_terms})
        for (const auto& term : *terms)
            if (!(term.width > 0.0) || !std::isfinite(term.amplitude) || !std::isfinite(term.center))
                throw InvalidArgument("profile widths must be positive and parameters finite");
    for (const auto& term : spec.u_terms)
        if (term.kind == ProfileKind::eta_bump)
            throw InvalidArgument("eta_bump terms cannot seed the velocity");
    for (const auto& term : spec.eta_terms)
        if (term.kind != ProfileKind::eta_bump)
            throw InvalidArgument("only eta_bump terms can seed eta");

    FieldState state;
    state.t = 0.0;
    state.u.resize(grid.n());
    state.eta.resize(grid.n());
    for (std::size_t j = 0; j < grid.n(); ++j) {
        const double x = grid.x(j);
        state.u[j] = spec.u0(x);
        state.eta[j] = spec.eta0(x);
    }
    if (!all_finite(state.u) || !all_finite(state.eta))
        throw InvalidArgument("initial data produced non-finite samples");

    if (!spec.eta_zero) {
        const double leak = boundary_magnitude(state, grid);
        if (!(leak < spec.decay_tol)) throw DecayViolation(leak, spec.decay_tol);
    }
    return state;
}

Extremum refine_extremum(std::span<const double> samples, const Grid& grid, Branch branch) {
    const std::size_t n = samples.size();
    if (n != grid.n()) throw InvalidArgument("sample count does not match the grid");
    const double sign = branch == Branch::sup ? 1.0 : -1.0;

    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
        if (sign * samples[j] > sign * samples[best]) best = j;

    const double fm = samples[(best + n - 1) % n];
    const double f0 = samples[best];
    const double fp = samples[(best + 1) % n];
    const double curv = fm - 2.0 * f0 + fp;

    Extremum e{best, grid.x(best), f0};
    if (curv != 0.0) {
        const double shift = std::clamp(0.5 * (fm - fp) / curv, -0.5, 0.5);
        e.x += shift * grid.dx();
        e.value = f0 - 0.25 * (fm - fp) * shift;
    }
    return e;
}

std::pair<double, double> quartic_extremum(const std::array<double, 5>& x, const std::array<double, 5>& y,
                                           double x_start) {
    // Monomial coefficients in the scaled variable s = (x - x[2]) / h.
    const double h = 0.25 * (x[4] - x[0]);
    double a[5][6];
    for (int i = 0; i < 5; ++i) {
        const double s = (x[i] - x[2]) / h;
        double pw = 1.0;
        for (int j = 0; j < 5; ++j, pw *= s) a[i][j] = pw;
        a[i][5] = y[i];
    }
    for (int col = 0; col < 5; ++col) {
        int piv = col;
        for (int r = col + 1; r < 5; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[col], a[piv]);
        for (int r = 0; r < 5; ++r) {
            if (r == col) continue;
            const double m = a[r][col] / a[col][col];
            for (int j = col; j < 6; ++j) a[r][j] -= m * a[col][j];
        }
    }
    double c[5];
    for (int i = 0; i < 5; ++i) c[i] = a[i][5] / a[i][i];
    auto poly = [&](double s) { return c[0] + s * (c[1] + s * (c[2] + s * (c[3] + s * c[4]))); };
    auto d1 = [&](double s) { return c[1] + s * (2 * c[2] + s * (3 * c[3] + s * 4 * c[4])); };
    auto d2 = [&](double s) { return 2 * c[2] + s * (6 * c[3] + s * 12 * c[4]); };

    const double lo = (x[1] - x[2]) / h, hi = (x[3] - x[2]) / h;
    double s = std::clamp((x_start - x[2]) / h, lo, hi);
    bool ok = false;
    for (int it = 0; it < 50; ++it) {
        const double curv = d2(s);
        if (curv == 0.0 || !std::isfinite(curv)) break;
        const double step = d1(s) / curv;
        s = std::clamp(s - step, lo, hi);
        if (std::abs(step) < 1e-14) {
            ok = true;
            break;
        }
    }
    if (!ok || !std::isfinite(poly(s))) return {x[2], y[2]};
    return {x[2] + s * h, poly(s)};
}

Extremum refine_extremum_quartic(std::span<const double> samples, const Grid& grid, Branch branch) {
    const Extremum coarse = refine_extremum(samples, grid, branch);
    const std::size_t n = samples.size();
    std::array<double, 5> xs{}, ys{};
    for (int o = -2; o <= 2; ++o) {
        const std::size_t j = (coarse.index + n + static_cast<std::size_t>(o + 2) - 2) % n;
        xs[o + 2] = grid.x(coarse.index) + o * grid.dx();
        ys[o + 2] = samples[j];
    }
    const auto [x, v] = quartic_extremum(xs, ys, coarse.x);
    Extremum e = coarse;
    e.x = x;
    e.value = v;
    return e;
}

}  // namespace r2ch
