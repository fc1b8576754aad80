#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "r2ch/commands.hpp"
#include "r2ch/spectral.hpp"

using namespace r2ch;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path out_root() {
    static const fs::path root = [] {
        const fs::path p = fs::current_path() / "acceptance_out";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Shared run configurations

RunConfig smooth_config() {
    RunConfig c;
    c.params = PhysParams(0.5, 1.0, 0.2, 0.1);
    c.L = 20.0;
    c.n = 4096;
    c.initial.u_terms.push_back({ProfileKind::gaussian_bump, 0.3, 2.0, 0.0});
    c.initial.eta_terms.push_back({ProfileKind::eta_bump, 0.1, 2.0, 0.0});
    c.t_end = 5.0;
    return c;
}

RunConfig matrix_config(double sigma, double amplitude) {
    RunConfig c = smooth_config();
    c.params = PhysParams(0.5, sigma, 0.2, 0.1);
    c.initial.u_terms[0].amplitude = amplitude;
    return c;
}

constexpr double kMatrixSigma[] = {0.5, 1.0, 2.0};
constexpr double kMatrixAmplitude[] = {0.25, 0.5, 0.75, 1.0};

RunConfig sigma_neg_config() {
    RunConfig c;
    c.params = PhysParams(0.5, -1.0, 0.0, 0.1);
    c.L = 3.0;
    c.n = 16384;
    c.initial.u_terms.push_back({ProfileKind::slope_bump, 40.0, 0.05, 0.0});
    c.t_end = 0.1;
    return c;
}

RunConfig sigma_one_config(double amplitude) {
    RunConfig c;
    c.params = PhysParams(0.0, 1.0, 0.0, 0.0);
    c.L = 3.0;
    c.n = 16384;
    c.initial.u_terms.push_back({ProfileKind::slope_bump, amplitude, 0.05, 0.0});
    c.initial.eta_terms.push_back({ProfileKind::eta_bump, -1.0, 0.05, 0.0});
    c.t_end = 0.05;
    c.M_assumed = 2.0;
    c.window = {400.0, 900.0};
    return c;
}

struct Timed {
    Analysis analysis;
    double seconds = 0.0;
};

Timed timed_analyze(const RunConfig& c) {
    const auto t0 = Clock::now();
    Timed t{analyze(c), 0.0};
    t.seconds = seconds_since(t0);
    return t;
}

const Timed& smooth_run() {
    static const Timed t = timed_analyze(smooth_config());
    return t;
}

const Timed& smooth_audit_run() {
    static const Timed t = [] {
        RunConfig c = smooth_config();
        c.snapshot_every = 1;
        c.characteristic_seeds = c.n;
        return timed_analyze(c);
    }();
    return t;
}

struct Matrix {
    std::vector<std::pair<RunConfig, Analysis>> runs;
    double seconds = 0.0;
};

const Matrix& matrix_runs() {
    static const Matrix m = [] {
        Matrix out;
        const auto t0 = Clock::now();
        for (double s : kMatrixSigma)
            for (double a : kMatrixAmplitude) {
                RunConfig c = matrix_config(s, a);
                out.runs.emplace_back(c, analyze(c));
            }
        out.seconds = seconds_since(t0);
        return out;
    }();
    return m;
}

const Timed& sigma_neg_run() {
    static const Timed t = timed_analyze(sigma_neg_config());
    return t;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// ---------------------------------------------------------------------------
// Independent transcriptions for the formula audit

double C_ref(double E, double r, const PhysParams& p) {
    const double A = p.A(), s = p.sigma(), mu = p.mu(), W = p.Omega(), k = p.stiffness();
    const double e0 = 3.0 * (1.0 - W * A) + W * W * r * r * r * r;
    const double e1 = (A - mu) * (A - mu) / 2.0 + std::abs(3.0 - s) + 1.5 + std::abs(s) / 2.0 + W + 1.5 * W / k +
                      W * W + W * r * (0.5 / k + 0.5);
    const double e15 = W * std::numbers::sqrt2 / (2.0 * k);
    return std::sqrt(e0 + e1 * E + e15 * E * std::sqrt(E));
}

double N_ref(double E, double M, const PhysParams& p) {
    const double A = p.A(), W = p.Omega(), k = p.stiffness(), r2 = std::numbers::sqrt2;
    const double m2 = 1.5 * E * k + 1.5 * r2 * W * E * std::sqrt(E);
    const double m1 = 1.5 * W * E * E * (1.0 - W * A) / k;
    const double m0 = 2.25 * E + 0.75 * r2 * W * E * E * std::sqrt(E) / k +
                      E * E * ((6.0 + 3.0 * A * A + 6.0 * W * W) / 4.0 + 1.5 * r2 * W / std::sqrt(k) +
                               1.5 * W * (1.0 - W * A) / k);
    return m2 * M * M + m1 * M + m0;
}

double K2_ref(double C, double r, const PhysParams& p) { return 0.5 * (p.stiffness() * r * r + C * C); }

double ceiling_ref(double u0x, double r, double C, const PhysParams& p) {
    return u0x + std::sqrt(2.0 * K2_ref(C, r, p) / p.sigma());
}

double T1_ref(double s0, double C, const PhysParams& p) {
    const double ns = -p.sigma();
    return 2.0 / (ns * s0 + std::sqrt(C * s0) * std::pow(ns, 0.75));
}

double Tbound_ref(double m0, double E, double N) {
    const double root = std::sqrt(2.0 * E * N);
    return std::sqrt(E / (2.0 * N)) * std::log((m0 - root) / (m0 + root));
}

// ---------------------------------------------------------------------------
// Criteria

Outcome c1_kernel() {
    const auto t0 = Clock::now();
    const Grid g(20.0, 4096);
    double worst = 0.0;
    for (auto [w, xc] : {std::pair{1.0, 0.0}, std::pair{2.0, 1.5}, std::pair{0.5, -3.0}}) {
        std::vector<double> f(g.n());
        for (std::size_t j = 0; j < g.n(); ++j) f[j] = std::exp(-(g.x(j) - xc) * (g.x(j) - xc) / (w * w));
        for (auto tag : {KernelTag::p, KernelTag::dxp}) {
            const auto ref = direct_conv_oracle(f, g, tag);
            const auto got = tag == KernelTag::p ? helmholtz_conv(f, g) : helmholtz_conv_dx(f, g);
            double num = 0.0;
            for (std::size_t j = 0; j < g.n(); ++j) num = std::max(num, std::abs(got[j] - ref[j]));
            worst = std::max(worst, num / max_abs(ref));
        }
    }
    const double secs = seconds_since(t0);
    const double per_input = secs / 3.0;
    return {worst <= 1e-8 && per_input < 1.0,
            fmt("max rel error %.3e (limit 1e-8), %.2f s per Gaussian input", worst, per_input)};
}

Outcome c2_rest() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(2718);
    std::uniform_real_distribution<double> A(-1, 1), s(-3, 3), mu(-1, 1), W(0, 1);
    const Grid g(20.0, 4096);
    const FieldState rest{0.0, std::vector<double>(g.n(), 0.0), std::vector<double>(g.n(), 0.0)};
    double worst = 0.0;
    int done = 0;
    while (done < 20) {
        const double a = A(rng), w = W(rng);
        if (1.0 - 2.0 * w * a <= 0.0) continue;
        const auto t = rhs(rest, PhysParams(a, s(rng), mu(rng), w), g);
        worst = std::max({worst, max_abs(t.du_dt), max_abs(t.deta_dt)});
        ++done;
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 1.0, fmt("max |rhs| %.3e over 20 tuples (limit 1e-12), %.2f s", worst, secs)};
}

Outcome c3_energy() {
    const auto& r = smooth_run();
    const bool ended = r.analysis.record.termination.kind == Termination::reached_t_end;
    return {ended && r.analysis.max_abs_drift <= 1e-6 && r.seconds < 60.0,
            fmt("max relative drift %.3e to t=5 (limit 1e-6), %s, %.1f s", r.analysis.max_abs_drift,
                to_string(r.analysis.record.termination.kind).c_str(), r.seconds)};
}

Outcome c4_order() {
    const auto t0 = Clock::now();
    const RunConfig base = smooth_config();
    const Grid g = base.grid();
    const FieldState init = synthesize(base.initial, g);
    auto final_state = [&](double dt) {
        IntegratorConfig ic = base.integrator();
        ic.fixed_dt = dt;
        ic.diag_every = 1000000;
        return run(init, base.params, g, ic).final_state;
    };
    const double dts[] = {0.04, 0.02, 0.01};
    const FieldState ref = final_state(0.0025);
    std::vector<double> errs;
    for (double dt : dts) {
        const FieldState s = final_state(dt);
        double e = 0.0;
        for (std::size_t j = 0; j < g.n(); ++j)
            e = std::max({e, std::abs(s.u[j] - ref.u[j]), std::abs(s.eta[j] - ref.eta[j])});
        errs.push_back(e);
    }
    double order = INFINITY;
    std::string orders;
    for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
        const double o = std::log2(errs[i] / errs[i + 1]);
        order = std::min(order, o);
        orders += fmt("%s%.2f", orders.empty() ? "" : ", ", o);
    }
    const double secs = seconds_since(t0);
    return {order >= 3.8 && secs < 120.0,
            fmt("errors %.2e %.2e %.2e at dt 0.04/0.02/0.01, observed orders %s (limit 3.8), %.1f s", errs[0],
                errs[1], errs[2], orders.c_str(), secs)};
}

Outcome c5_ceiling() {
    const auto& m = matrix_runs();
    std::size_t bad = 0, rows = 0;
    double worst = -INFINITY;
    for (const auto& [cfg, a] : m.runs) {
        const double bound = *a.certificate.lemma31_ceiling;
        for (const auto& r : a.record.samples) {
            ++rows;
            worst = std::max(worst, r.sup_ux - bound);
            if (r.sup_ux > bound + 1e-6) ++bad;
        }
    }
    return {bad == 0 && m.seconds < 600.0,
            fmt("%zu runs, %zu rows, %zu above ceiling + 1e-6, max(sup_ux - ceiling) = %.3f, %.1f s", m.runs.size(),
                rows, bad, worst, m.seconds)};
}

Outcome c6_forcing() {
    std::size_t bad = 0, rows = 0;
    double worst = -INFINITY;
    auto scan = [&](const Analysis& a) {
        const double bound = 0.5 * a.certificate.C * a.certificate.C;
        for (const auto& r : a.record.samples) {
            ++rows;
            worst = std::max(worst, r.f_sup_abs / bound);
            if (r.f_sup_abs > bound + 1e-6) ++bad;
        }
    };
    scan(smooth_run().analysis);
    for (const auto& [cfg, a] : matrix_runs().runs) scan(a);
    return {bad == 0, fmt("%zu rows over 13 runs, %zu above C^2/2 + 1e-6, max f_sup_abs/(C^2/2) = %.4f", rows, bad,
                          worst)};
}

Outcome c7_density() {
    std::size_t bad = 0, runs_bad = 0, samples = 0;
    double worst = 0.0;
    for (const auto& [cfg, a] : matrix_runs().runs) {
        const auto& tr = a.sup_track;
        const double bound = a.certificate.rho0_sup;
        std::size_t here = 0;
        for (std::size_t i = 0; i < tr.t.size(); ++i) {
            if (tr.M[i] < 0.0) break;
            ++samples;
            worst = std::max(worst, std::abs(tr.gamma[i]) - bound);
            if (std::abs(tr.gamma[i]) > bound + 1e-6) ++here;
        }
        bad += here;
        runs_bad += here > 0;
    }
    return {bad == 0, fmt("%zu track samples, %zu above |rho0|_inf + 1e-6 in %zu of 12 runs, max excess %.3e", samples,
                          bad, runs_bad, worst)};
}

Outcome c8_characteristics() {
    const auto& r = smooth_audit_run();
    if (!r.analysis.characteristics) return {false, "characteristics audit did not run"};
    const auto& c = *r.analysis.characteristics;
    const double sup = c.sup_transport_error.value_or(INFINITY);
    return {c.jacobian_consistency <= 1e-6 && sup <= 1e-6 && c.min_seed_gap > 0.0 && r.seconds < 120.0,
            fmt("jacobian residual %.3e, sup transport error %.3e (limits 1e-6), %zu seeds, min gap %.2e, %.1f s",
                c.jacobian_consistency, sup, c.seeds, c.min_seed_gap, r.seconds)};
}

Outcome c9_residuals() {
    const auto t0 = Clock::now();
    const auto& a = smooth_audit_run().analysis;
    const auto res = ode_residuals(a.sup_track, a.config.params);
    double rM = 0.0, rG = 0.0;
    for (std::size_t i = 0; i < res.t.size(); ++i) {
        if (res.excluded[i]) continue;
        rM = std::max(rM, std::abs(res.res_M[i]));
        rG = std::max(rG, std::abs(res.res_gamma[i]));
    }
    const double decay = gamma_decay_error(a.sup_track);
    const double secs = seconds_since(t0) + smooth_audit_run().seconds;
    return {rM <= 1e-3 && rG <= 1e-3 && decay <= 1e-5 && secs < 120.0,
            fmt("max |res_M| %.3e, max |res_gamma| %.3e (limit 1e-3, %zu jump samples excluded), "
                "gamma vs gamma0*exp(-int M) %.3e (limit 1e-5)",
                rM, rG, res.excluded_count(), decay)};
}

Outcome c10_thm41() {
    const auto& r = sigma_neg_run();
    const auto& a = r.analysis;
    const auto& th = *a.certificate.thm41;
    const double ratio = th.u0x_at_witness / th.threshold;
    const bool seeded = ratio >= 1.2 && th.T1_bound.has_value();
    const bool exit2 = a.exit_code == kExitBlowup;
    const bool fit_ok = a.fit && a.fit->reliable;
    const bool below = fit_ok && th.T1_bound && a.fit->T_est <= *th.T1_bound;
    const std::size_t mono = a.monitors.count("monotone");
    double peak = 0.0;
    for (const auto& row : a.record.samples) peak = std::max(peak, row.sup_ux);
    return {seeded && exit2 && below && mono == 0 && r.seconds < 300.0,
            fmt("witness/threshold %.3f, exit %d (%s, peak sup_ux %.1f vs G %.0f), T_est %.6f vs T1_bound %.6f, "
                "monotone violations %zu, %.1f s",
                ratio, a.exit_code, to_string(a.record.termination.kind).c_str(), peak, a.config.G,
                fit_ok ? a.fit->T_est : NAN, th.T1_bound.value_or(NAN), mono, r.seconds)};
}

Outcome c11_thm42() {
    const auto t0 = Clock::now();
    std::optional<RunConfig> chosen;
    std::string scan;
    for (double amp : {-10.0, -30.0, -100.0, -300.0}) {
        RunConfig c = sigma_one_config(amp);
        const Grid g = c.grid();
        const Certificate cert = build_certificate(synthesize(c.initial, g), c.params, g, c.M_assumed);
        const double resolvable = std::sqrt(cert.E0 * static_cast<double>(c.n) / (8.0 * c.L));
        const bool met = cert.thm42 && cert.thm42->condition_met;
        scan += fmt("%sa=%g:%s/%s", scan.empty() ? "" : " ", amp, met ? "met" : "unmet",
                    resolvable >= 1.5 * c.G ? "resolvable" : "underresolved");
        if (met && resolvable >= 1.5 * c.G) {
            chosen = c;
            break;
        }
    }
    if (!chosen) return {false, "no scanned amplitude meets the condition at a resolvable gradient: " + scan};

    const Analysis a = analyze(*chosen);
    const auto& t = *a.certificate.thm42;
    const double E0 = a.certificate.E0, N = t.N;
    const bool validated = t.validated.value_or(false);
    const bool exit2 = a.exit_code == kExitBlowup;
    const bool below = a.fit && a.fit->reliable && t.T_bound && a.fit->T_est <= *t.T_bound;

    const auto& rows = a.record.samples;
    std::size_t checked = 0, bad = 0;
    double worst = -INFINITY;
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
        const double h1 = rows[i].t - rows[i - 1].t, h2 = rows[i + 1].t - rows[i].t;
        const double d = -h2 / (h1 * (h1 + h2)) * rows[i - 1].m3 + (h2 - h1) / (h1 * h2) * rows[i].m3 +
                         h1 / (h2 * (h1 + h2)) * rows[i + 1].m3;
        const double q = rows[i].m3 * rows[i].m3 / (2.0 * E0);
        const double tol = 1e-3 * (N + q);
        ++checked;
        worst = std::max(worst, (d - (-q + N)) / tol);
        if (d > -q + N + tol) ++bad;
    }
    const double secs = seconds_since(t0);
    return {t.condition_met && validated && exit2 && below && bad == 0 && secs < 900.0,
            fmt("scan [%s]; m0 %.4g vs -sqrt(2 E0 N) %.4g, sup rho %.4f <= M_assumed %.1f: %s, exit %d, "
                "T_est %.6f vs T_bound %.6f, Riccati violations %zu of %zu (worst excess/tol %.3g), %.1f s",
                scan.c_str(), t.m0, -std::sqrt(2.0 * E0 * N), t.observed_rho_sup.value_or(NAN), t.M_assumed,
                validated ? "validated" : "not validated", a.exit_code, a.fit ? a.fit->T_est : NAN,
                t.T_bound.value_or(NAN), bad, checked, worst, secs)};
}

Outcome c12_rate() {
    const auto& r = sigma_neg_run();
    const auto& a = r.analysis;
    if (!a.fit) return {false, "no blow-up fit: " + a.fit_error};
    if (!a.rate) return {false, "no rate product: " + a.rate_error};
    const double slope_err = std::abs(a.fit->slope_est - (-0.5)) / 0.5;
    return {a.rate->rel_error <= 0.10 && slope_err <= 0.15 && r.seconds < 600.0,
            fmt("final-window mean %.4f vs 2 (rel error %.2f%%, limit 10%%), slope %.5f vs -0.5 (rel error %.2f%%, "
                "limit 15%%), window [%g, %g] with %zu samples",
                a.rate->final_value, 100.0 * a.rate->rel_error, a.fit->slope_est, 100.0 * slope_err,
                a.fit->window.M_lo, a.fit->window.M_hi, a.fit->samples_used)};
}

Outcome c13_formulas() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1618);
    std::uniform_real_distribution<double> A(-1, 1), s(-3, 3), mu(-1, 1), W(0, 1), E(0, 20), r(0, 3), M(0, 4),
        u(0, 1);
    auto draw = [&](bool one) {
        for (;;) {
            const double a = A(rng), w = W(rng);
            if (1.0 - 2.0 * w * a <= 0.05) continue;
            double sg = one ? 1.0 : s(rng);
            if (sg == 0.0) continue;
            return PhysParams(a, sg, one ? 0.0 : mu(rng), w);
        }
    };
    auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); };
    std::map<std::string, double> worst{{"C", 0}, {"N", 0}, {"K2", 0}, {"ceiling", 0}, {"T1", 0}, {"T_bound", 0}};
    for (int i = 0; i < 1000; ++i) {
        const PhysParams p = draw(false);
        const double e = E(rng), rho = r(rng);
        const double C = constant_C(e, rho, p);
        worst["C"] = std::max(worst["C"], rel(C, C_ref(e, rho, p)));
        worst["K2"] = std::max(worst["K2"], rel(k2_bound(C, rho, p), K2_ref(C, rho, p)));
        if (p.sigma() > 0.0) {
            const double u0x = 5.0 * u(rng);
            worst["ceiling"] = std::max(worst["ceiling"], rel(lemma31_ceiling(u0x, rho, C, p), ceiling_ref(u0x, rho, C, p)));
        } else {
            const double s0 = C / std::sqrt(-p.sigma()) * (1.01 + 3.0 * u(rng));
            worst["T1"] = std::max(worst["T1"], rel(thm41_T1_bound(s0, C, p), T1_ref(s0, C, p)));
        }
        const PhysParams q = draw(true);
        const double e1 = 0.01 + E(rng), m = M(rng);
        const double N = thm42_constant_N(e1, m, q);
        worst["N"] = std::max(worst["N"], rel(N, N_ref(e1, m, q)));
        const double m0 = -std::sqrt(2.0 * e1 * N) * (1.01 + 5.0 * u(rng));
        worst["T_bound"] = std::max(worst["T_bound"], rel(thm42_T_bound(m0, e1, N), Tbound_ref(m0, e1, N)));
    }
    double all = 0.0;
    std::string parts;
    for (const auto& [k, v] : worst) {
        all = std::max(all, v);
        parts += fmt("%s%s %.1e", parts.empty() ? "" : ", ", k.c_str(), v);
    }
    const double secs = seconds_since(t0);
    return {all <= 1e-12 && secs < 5.0, fmt("max rel gap %s (limit 1e-12), %.2f s", parts.c_str(), secs)};
}

Outcome c14_determinism() {
    const fs::path a = out_root() / "determinism_a", b = out_root() / "determinism_b";
    std::ostringstream log;
    RunConfig c = smooth_config();
    c.out_dir = a.string();
    const int ea = cmd_run(c, log);
    c.out_dir = b.string();
    const int eb = cmd_run(c, log);
    bool same = true;
    std::string detail;
    for (const char* f : {"diagnostics.csv", "verdict.json"}) {
        const std::string x = slurp(a / f), y = slurp(b / f);
        const bool eq = !x.empty() && x == y;
        same = same && eq;
        detail += fmt("%s%s %s (%zu bytes)", detail.empty() ? "" : ", ", f, eq ? "identical" : "DIFFERENT", x.size());
    }
    return {same && ea == 0 && eb == 0, detail};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "kernel oracle", c1_kernel},
        {2, "rest-state equilibrium", c2_rest},
        {3, "energy conservation", c3_energy},
        {4, "integrator order", c4_order},
        {5, "gradient ceiling matrix", c5_ceiling},
        {6, "forcing bound", c6_forcing},
        {7, "density bound on the sup branch", c7_density},
        {8, "characteristics consistency", c8_characteristics},
        {9, "extremum ODE residuals", c9_residuals},
        {10, "sigma<0 threshold blow-up", c10_thm41},
        {11, "cubic-moment blow-up", c11_thm42},
        {12, "blow-up rate", c12_rate},
        {13, "double-entry formula audit", c13_formulas},
        {14, "determinism", c14_determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.contains(c.id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s  [%2d] %-32s %s  (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, only.empty() ? all.size() : only.size());
    return failures == 0 ? 0 : 1;
}
