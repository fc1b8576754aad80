#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "r2ch/commands.hpp"
#include "r2ch/report.hpp"
#include "r2ch/spectral.hpp"

namespace r2ch {

namespace {

using Status = SelftestCheck::Status;

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

PhysParams random_params(std::mt19937_64& rng, bool sigma_one = false) {
    std::uniform_real_distribution<double> A(-1.0, 1.0), s(-3.0, 3.0), mu(-1.0, 1.0), W(0.0, 1.0);
    for (;;) {
        const double a = A(rng), w = W(rng);
        if (1.0 - 2.0 * w * a <= 0.05) continue;
        double sigma = sigma_one ? 1.0 : s(rng);
        if (sigma == 0.0) continue;
        return PhysParams(a, sigma, sigma_one ? 0.0 : mu(rng), w);
    }
}

// Second transcriptions of the closed-form constants, grouped by parameter
// rather than by power of E0.
double C_transcribed(double E, double r, double A, double s, double mu, double W) {
    const double k = 1.0 - 2.0 * W * A;
    double half = 3.0 * (1.0 - W * A) / 2.0;
    half += E * (A - mu) * (A - mu) / 4.0;
    half += E * (std::abs(3.0 - s) / 2.0 + 3.0 / 4.0 + std::abs(s) / 4.0);
    half += W * (E / 2.0 + 3.0 * E / (4.0 * k)) + W * W * (E / 2.0 + r * r * r * r / 2.0);
    half += W * r * E * (1.0 / (4.0 * k) + 1.0 / 4.0);
    half += W * std::sqrt(2.0) * std::pow(E, 1.5) / (4.0 * k);
    return std::sqrt(2.0 * half);
}

double N_transcribed(double E, double M, double A, double W) {
    const double k = 1.0 - 2.0 * W * A;
    const double r2 = std::sqrt(2.0);
    return E * (3.0 * M * M * k / 2.0 + 9.0 / 4.0) + std::pow(E, 1.5) * (3.0 * r2 * W * M * M / 2.0) +
           std::pow(E, 2.5) * (3.0 * r2 * W / (4.0 * k)) +
           E * E * ((6.0 + 3.0 * A * A + 6.0 * W * W) / 4.0 + 3.0 * r2 * W / (2.0 * std::sqrt(k)) +
                    3.0 * W * (1.0 - W * A) * (M + 1.0) / (2.0 * k));
}

double T1_transcribed(double slope, double C, double s) {
    const double a = -s;
    return 2.0 / (a * slope + std::sqrt(C) * std::pow(a, 0.75) * std::sqrt(slope));
}

double Tbound_transcribed(double m0, double E, double N) {
    const double r = std::sqrt(2.0 * E * N);
    return std::sqrt(E / (2.0 * N)) * std::log((m0 - r) / (m0 + r));
}

SelftestCheck kernel_oracle() {
    const Grid grid(20.0, 4096);
    std::vector<double> f(grid.n());
    for (std::size_t j = 0; j < grid.n(); ++j) f[j] = std::exp(-grid.x(j) * grid.x(j));
    double worst = 0.0;
    for (auto [tag, spectral] : {std::pair{KernelTag::p, helmholtz_conv(f, grid)},
                                 std::pair{KernelTag::dxp, helmholtz_conv_dx(f, grid)}}) {
        const auto ref = direct_conv_oracle(f, grid, tag);
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < grid.n(); ++j) {
            num = std::max(num, std::abs(spectral[j] - ref[j]));
            den = std::max(den, std::abs(ref[j]));
        }
        worst = std::max(worst, num / den);
    }
    return {"kernel oracle", worst <= 1e-8 ? Status::pass : Status::fail, "max rel error " + sci(worst)};
}

SelftestCheck rest_state() {
    std::mt19937_64 rng(20240101);
    const Grid grid(20.0, 256);
    FieldState rest{0.0, std::vector<double>(grid.n(), 0.0), std::vector<double>(grid.n(), 0.0)};
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const auto tend = rhs(rest, random_params(rng), grid);
        for (std::size_t j = 0; j < grid.n(); ++j)
            worst = std::max({worst, std::abs(tend.du_dt[j]), std::abs(tend.deta_dt[j])});
    }
    return {"rest-state equilibrium", worst <= 1e-12 ? Status::pass : Status::fail, "max |rhs| " + sci(worst)};
}

SelftestCheck double_entry(bool mutate) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> E(0.0, 20.0), r(0.0, 3.0), M(0.0, 4.0), unit(0.0, 1.0);
    const double scale = mutate ? 1.0 + 1e-3 : 1.0;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const PhysParams p = random_params(rng);
        const double e = E(rng), rho = r(rng);
        const double C = detail::constant_C_scaled(e, rho, p, scale);
        worst = std::max(worst, rel_diff(C, C_transcribed(e, rho, p.A(), p.sigma(), p.mu(), p.Omega())));
        worst = std::max(worst, rel_diff(k2_bound(C, rho, p), p.stiffness() * rho * rho / 2.0 + C * C / 2.0));
        if (p.sigma() > 0.0) {
            const double u0x = 5.0 * unit(rng);
            const double ref = u0x + std::sqrt((p.stiffness() * rho * rho + C * C) / p.sigma());
            worst = std::max(worst, rel_diff(lemma31_ceiling(u0x, rho, C, p), ref));
        } else {
            const double slope = C / std::sqrt(-p.sigma()) * (1.0 + 0.01 + 3.0 * unit(rng));
            worst = std::max(worst, rel_diff(thm41_T1_bound(slope, C, p), T1_transcribed(slope, C, p.sigma())));
        }
        const PhysParams p1 = random_params(rng, true);
        const double e1 = 0.01 + E(rng), m = M(rng);
        const double N = thm42_constant_N(e1, m, p1);
        worst = std::max(worst, rel_diff(N, N_transcribed(e1, m, p1.A(), p1.Omega())));
        const double m0 = -std::sqrt(2.0 * e1 * N) * (1.0 + 0.01 + 5.0 * unit(rng));
        worst = std::max(worst, rel_diff(thm42_T_bound(m0, e1, N), Tbound_transcribed(m0, e1, N)));
    }
    return {"double-entry formulas", worst <= 1e-12 ? Status::pass : Status::fail, "max rel gap " + sci(worst)};
}

SelftestCheck synthetic_rate() {
    const PhysParams p(0.0, -1.0, 0.0, 0.0);
    const double T = 3.0;
    ExtremumTrack track;
    track.branch = Branch::sup;
    for (int i = 0; i < 400; ++i) {
        const double t = T * (1.0 - std::pow(0.97, i));
        const double M = -2.0 / (p.sigma() * (T - t));
        if (M > 300.0) break;
        track.t.push_back(t);
        track.M.push_back(M);
    }
    const BlowupFit fit = fit_reciprocal(track.t, track.M, p, Branch::sup, FitWindow{});
    const RateReport rate = rate_check(track, fit.T_est, p);
    const double err = std::max({std::abs(fit.T_est - T), std::abs(fit.slope_est + 0.5), rate.rel_error});
    return {"synthetic rate profile", err <= 1e-8 ? Status::pass : Status::fail, "max error " + sci(err)};
}

std::vector<SelftestCheck> characteristics_checks(std::size_t snapshot_every) {
    if (snapshot_every == 0)
        return {{"jacobian consistency", Status::skipped, "no snapshot cadence"},
                {"flow-map sup transport", Status::skipped, "no snapshot cadence"}};
    RunConfig c;
    c.params = PhysParams(0.5, 1.0, 0.2, 0.1);
    c.L = 20.0;
    c.n = 1024;
    c.initial.u_terms.push_back({ProfileKind::gaussian_bump, 0.3, 2.0, 0.0});
    c.initial.eta_terms.push_back({ProfileKind::eta_bump, 0.1, 2.0, 0.0});
    c.t_end = 1.0;
    c.snapshot_every = snapshot_every;
    c.characteristic_seeds = c.n;
    const Analysis a = analyze(c);
    const auto& audit = *a.characteristics;
    const double jac = audit.jacobian_consistency;
    const double sup = audit.sup_transport_error.value_or(INFINITY);
    return {{"jacobian consistency", jac <= 1e-6 && audit.min_seed_gap > 0.0 ? Status::pass : Status::fail,
             "max rel residual " + sci(jac)},
            {"flow-map sup transport", sup <= 1e-6 ? Status::pass : Status::fail, "max error " + sci(sup)}};
}

}  // namespace

std::vector<SelftestCheck> run_selftest(const SelftestOptions& options) {
    std::vector<SelftestCheck> out;
    const auto guarded = [&out](const char* name, auto&& fn) {
        try {
            out.push_back(fn());
        } catch (const std::exception& ex) {
            out.push_back({name, Status::fail, std::string("threw: ") + ex.what()});
        }
    };
    guarded("kernel oracle", kernel_oracle);
    guarded("rest-state equilibrium", rest_state);
    guarded("double-entry formulas", [&] { return double_entry(options.mutate); });
    guarded("synthetic rate profile", synthetic_rate);
    try {
        for (auto& c : characteristics_checks(options.snapshot_every)) out.push_back(std::move(c));
    } catch (const std::exception& ex) {
        out.push_back({"characteristics", Status::fail, std::string("threw: ") + ex.what()});
    }
    return out;
}

int cmd_selftest(const SelftestOptions& options, std::ostream& log) {
    const auto checks = run_selftest(options);
    bool ok = true;
    for (const auto& c : checks) {
        const char* tag = c.status == Status::pass ? "PASS" : c.status == Status::fail ? "FAIL" : "SKIP";
        char line[160];
        std::snprintf(line, sizeof line, "%-4s  %-26s %s\n", tag, c.name.c_str(), c.detail.c_str());
        log << line;
        ok = ok && c.status != Status::fail;
    }
    return ok ? 0 : 1;
}

}  // namespace r2ch
