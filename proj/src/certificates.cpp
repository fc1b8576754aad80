#include "r2ch/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "r2ch/spectral.hpp"

namespace r2ch {

double energy(const FieldState& state, const PhysParams& params, const Grid& grid) {
    if (state.u.size() != grid.n() || state.eta.size() != grid.n())
        throw InvalidArgument("state length does not match the grid");
    const auto ux = spectral_for(grid).deriv(state.u);
    const double stiff = params.stiffness();
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.n(); ++j)
        acc += state.u[j] * state.u[j] + ux[j] * ux[j] + stiff * state.eta[j] * state.eta[j];
    return acc * grid.dx();
}

namespace detail {

double constant_C_scaled(double E0, double rho0_sup, const PhysParams& params, double leading_scale) {
    if (!(E0 >= 0.0)) throw InvalidArgument("E0 must be nonnegative");
    if (!(rho0_sup >= 0.0)) throw InvalidArgument("rho0_sup must be nonnegative");
    const double A = params.A(), s = params.sigma(), mu = params.mu(), W = params.Omega();
    const double k = params.stiffness();
    const double energy_coeff = (A - mu) * (A - mu) / 4.0 + std::abs(3.0 - s) / 2.0 + 0.75 + std::abs(s) / 4.0 +
                                W / 2.0 + 3.0 * W / (4.0 * k) + W * W / 2.0;
    const double half_c2 = leading_scale * 1.5 * (1.0 - W * A) + energy_coeff * E0 +
                           0.5 * W * W * std::pow(rho0_sup, 4) + (W / (4.0 * k) + W / 4.0) * rho0_sup * E0 +
                           std::sqrt(2.0) * W / (4.0 * k) * E0 * std::sqrt(E0);
    return std::sqrt(2.0 * half_c2);
}

}  // namespace detail

double constant_C(double E0, double rho0_sup, const PhysParams& params) {
    return detail::constant_C_scaled(E0, rho0_sup, params, 1.0);
}

double lemma31_ceiling(double u0x_sup_norm, double rho0_sup, double C, const PhysParams& params) {
    if (!(params.sigma() > 0.0)) throw InvalidArgument("the gradient ceiling requires sigma > 0");
    return u0x_sup_norm + std::sqrt((params.stiffness() * rho0_sup * rho0_sup + C * C) / params.sigma());
}

double thm41_T1_bound(double slope, double C, const PhysParams& params) {
    const double s = params.sigma();
    if (!(s < 0.0)) throw InvalidArgument("the sigma < 0 lifespan bound requires sigma < 0");
    if (!(slope > C / std::sqrt(-s))) throw InvalidArgument("witness slope does not exceed C/sqrt(-sigma)");
    return -2.0 / (s * slope - std::sqrt(C * std::pow(-s, 1.5) * slope));
}

Thm41Result thm41_certificate(std::span<const double> u0, const Grid& grid, double C, const PhysParams& params) {
    if (!(params.sigma() < 0.0)) throw InvalidArgument("the sigma < 0 certificate requires sigma < 0");
    const auto u0x = spectral_for(grid).deriv(u0);
    const Extremum e = refine_extremum(u0x, grid, Branch::sup);
    Thm41Result r;
    r.threshold = C / std::sqrt(-params.sigma());
    r.witness_x0 = e.x;
    r.u0x_at_witness = e.value;
    if (r.u0x_at_witness > r.threshold) r.T1_bound = thm41_T1_bound(r.u0x_at_witness, C, params);
    return r;
}

double thm42_constant_N(double E0, double M, const PhysParams& params) {
    if (params.sigma() != 1.0 || params.mu() != 0.0)
        throw InvalidArgument("the cubic-moment constant requires sigma = 1 and mu = 0");
    if (!(M >= 0.0)) throw InvalidArgument("M_assumed must be nonnegative");
    if (!(E0 >= 0.0)) throw InvalidArgument("E0 must be nonnegative");
    const double A = params.A(), W = params.Omega(), k = params.stiffness();
    const double r2 = std::sqrt(2.0);
    const double e15 = E0 * std::sqrt(E0);
    const double quad = (6.0 + 3.0 * A * A + 6.0 * W * W) / 4.0 + 3.0 * r2 * W / (2.0 * std::sqrt(k)) +
                        3.0 * W * (1.0 - W * A) * (M + 1.0) / (2.0 * k);
    return (1.5 * M * M * k + 2.25) * E0 + 1.5 * r2 * W * M * M * e15 + 3.0 * r2 * W / (4.0 * k) * e15 * E0 +
           quad * E0 * E0;
}

double thm42_T_bound(double m0, double E0, double N) {
    if (!(E0 > 0.0)) throw InvalidArgument("the lifespan bound needs E0 > 0");
    if (!(N >= 0.0)) throw InvalidArgument("N must be nonnegative");
    const double s = std::sqrt(2.0 * E0 * N);
    if (!(m0 < -s)) throw InvalidArgument("the cubic-moment condition does not hold strictly");
    if (N == 0.0) return -2.0 * E0 / m0;
    // ln((m0 - s)/(m0 + s)) written to stay accurate when s << |m0|.
    return std::sqrt(E0 / (2.0 * N)) * std::log1p(-2.0 * s / (m0 + s));
}

Thm42Result thm42_certificate(std::span<const double> u0, const Grid& grid, double N, double E0) {
    if (!(E0 > 0.0)) throw InvalidArgument("the cubic-moment certificate needs E0 > 0");
    if (!(N >= 0.0)) throw InvalidArgument("N must be nonnegative");
    const auto u0x = spectral_for(grid).deriv(u0);
    double m0 = 0.0;
    for (double v : u0x) m0 += v * v * v;
    m0 *= grid.dx();
    Thm42Result r;
    r.N = N;
    r.m0 = m0;
    const double s = std::sqrt(2.0 * E0 * N);
    r.condition_met = m0 <= -s;
    if (m0 < -s) r.T_bound = thm42_T_bound(m0, E0, N);
    return r;
}

double k2_bound(double C, double rho0_sup, const PhysParams& params) {
    if (!(C >= 0.0) || !(rho0_sup >= 0.0)) throw InvalidArgument("K2 inputs must be nonnegative");
    return 0.5 * params.stiffness() * rho0_sup * rho0_sup + 0.5 * C * C;
}

Certificate build_certificate(const FieldState& initial, const PhysParams& params, const Grid& grid,
                              std::optional<double> M_assumed) {
    Certificate c;
    c.regime = classify_regime(params);
    c.E0 = energy(initial, params, grid);

    std::vector<double> rho(grid.n()), neg_rho(grid.n());
    for (std::size_t j = 0; j < grid.n(); ++j) {
        rho[j] = 1.0 + initial.eta[j];
        neg_rho[j] = -rho[j];
    }
    c.rho0_sup = std::max({0.0, refine_extremum(rho, grid, Branch::sup).value,
                           refine_extremum(neg_rho, grid, Branch::sup).value});
    const auto u0x = spectral_for(grid).deriv(initial.u);
    c.u0x_sup_norm = std::max({0.0, refine_extremum(u0x, grid, Branch::sup).value,
                               -refine_extremum(u0x, grid, Branch::inf).value});

    const double rho_in = c.rho0_sup * (1.0 + kSupInflation);
    const double ux_in = c.u0x_sup_norm * (1.0 + kSupInflation);
    c.C = constant_C(c.E0, rho_in, params);
    c.K2 = k2_bound(c.C, rho_in, params);
    if (c.regime.scenario_sigma_pos) c.lemma31_ceiling = lemma31_ceiling(ux_in, rho_in, c.C, params);
    if (c.regime.blowup_sigma_neg) {
        c.thm41 = thm41_certificate(initial.u, grid, c.C, params);
        c.rate_target = -2.0 / params.sigma();
    }
    if (M_assumed && c.regime.blowup_sigma_one && c.E0 > 0.0) {
        const double N = thm42_constant_N(c.E0, *M_assumed, params);
        c.thm42 = thm42_certificate(initial.u, grid, N, c.E0);
        c.thm42->M_assumed = *M_assumed;
    }
    return c;
}

std::size_t MonitorReport::count(const std::string& check) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [&](const Violation& v) { return v.check == check; }));
}

MonitorReport monitor_bounds(std::span<const DiagnosticRow> samples, const Certificate& cert,
                             const ExtremumTrack* track, const PhysParams& params) {
    MonitorReport rep;
    const double half_c2 = 0.5 * cert.C * cert.C;

    if (params.sigma() > 0.0 && cert.lemma31_ceiling) {
        rep.checks_run.push_back("ceiling");
        const double bound = *cert.lemma31_ceiling;
        for (const auto& r : samples)
            if (r.sup_ux > bound + monitor_tolerance(bound)) rep.violations.push_back({"ceiling", r.t, r.sup_ux, bound});
    }

    rep.checks_run.push_back("forcing");
    for (const auto& r : samples)
        if (r.f_sup_abs > half_c2 + monitor_tolerance(half_c2))
            rep.violations.push_back({"forcing", r.t, r.f_sup_abs, half_c2});

    if (track && track->branch == Branch::sup) {
        rep.checks_run.push_back("density");
        const double bound = cert.rho0_sup;
        for (std::size_t i = 0; i < track->t.size(); ++i) {
            if (track->M[i] < 0.0) break;
            const double g = std::abs(track->gamma[i]);
            if (g > bound + monitor_tolerance(bound)) rep.violations.push_back({"density", track->t[i], g, bound});
        }
    }

    if (params.sigma() < 0.0) {
        rep.checks_run.push_back("monotone");
        const double threshold = cert.C / std::sqrt(-params.sigma());
        std::vector<std::pair<double, double>> series;
        if (track && track->branch == Branch::sup) {
            for (std::size_t i = 0; i < track->t.size(); ++i) series.emplace_back(track->t[i], track->M[i]);
        } else {
            for (const auto& r : samples) series.emplace_back(r.t, r.sup_ux);
        }
        bool crossed = false;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (crossed) {
                const double prev = series[i - 1].second;
                if (series[i].second < prev - monitor_tolerance(prev))
                    rep.violations.push_back({"monotone", series[i].first, series[i].second, prev});
            }
            if (series[i].second > threshold) crossed = true;
        }
    }
    return rep;
}

namespace {

RateReport rate_product(const ExtremumTrack& track, double T_est, FitWindow window) {
    RateReport rep;
    std::vector<double> in_window;
    std::size_t end = track.t.size();
    for (std::size_t i = 0; i < track.t.size(); ++i) {
        if (std::abs(track.M[i]) > window.M_hi) {
            end = i;
            break;
        }
    }
    for (std::size_t i = 0; i < end; ++i) {
        const double mag = std::abs(track.M[i]);
        const bool inside = mag >= window.M_lo;
        if (inside && !(track.t[i] < T_est))
            throw InvalidArgument("T_est does not lie beyond the fit-window samples");
        if (!(track.t[i] < T_est)) continue;
        const double p = (T_est - track.t[i]) * track.M[i];
        rep.t.push_back(track.t[i]);
        rep.product.push_back(p);
        if (inside) in_window.push_back(p);
    }
    if (in_window.empty()) throw InvalidArgument("no track samples inside the fit window");
    rep.window_samples = in_window.size();
    const std::size_t tail = std::max<std::size_t>(1, in_window.size() / 4);
    double acc = 0.0;
    for (std::size_t i = in_window.size() - tail; i < in_window.size(); ++i) acc += in_window[i];
    rep.final_value = acc / static_cast<double>(tail);
    return rep;
}

}  // namespace

RateReport rate_check(const ExtremumTrack& track, double T_est, const PhysParams& params, FitWindow window) {
    if (!(params.sigma() < 0.0)) throw InvalidArgument("the blow-up rate is established only for sigma < 0");
    if (track.branch != Branch::sup) throw InvalidArgument("the rate check reads the sup branch");
    RateReport rep = rate_product(track, T_est, window);
    rep.target = -2.0 / params.sigma();
    rep.rel_error = std::abs(rep.final_value - rep.target) / std::abs(rep.target);
    rep.validated = true;
    return rep;
}

RateReport rate_check_unvalidated(const ExtremumTrack& track, double T_est, const PhysParams& params,
                                  FitWindow window) {
    if (!(params.sigma() > 0.0)) throw InvalidArgument("the unvalidated rate product is for sigma > 0");
    if (track.branch != Branch::inf) throw InvalidArgument("the unvalidated rate product reads the inf branch");
    RateReport rep = rate_product(track, T_est, window);
    rep.target = std::numeric_limits<double>::quiet_NaN();
    rep.rel_error = std::numeric_limits<double>::quiet_NaN();
    rep.validated = false;
    return rep;
}

}  // namespace r2ch
