#include "r2ch/commands.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "r2ch/report.hpp"

namespace r2ch {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

int exit_code_for(Termination t) {
    switch (t) {
        case Termination::reached_t_end:
            return kExitReachedEnd;
        case Termination::blowup_detected:
            return kExitBlowup;
        case Termination::invariant_violation:
        case Termination::step_floor:
            return kExitInvariant;
    }
    return kExitInvariant;
}

namespace {

CharacteristicsAudit audit_characteristics(const RunRecord& rec, const PhysParams& params, const Grid& grid,
                                           std::size_t requested) {
    CharacteristicsAudit audit;
    const std::size_t n = grid.n();
    const std::size_t count = std::min(requested, n);
    const std::size_t stride = n / count;
    std::vector<double> seeds;
    for (std::size_t j = 0; j < n; j += stride) seeds.push_back(grid.x(j));
    audit.seeds = seeds.size();

    SnapshotFlow flow(rec.snapshots, params, grid);
    const Trajectory traj = advect(seeds, flow);
    audit.jacobian_consistency = jacobian_consistency(traj);
    audit.min_seed_gap = min_seed_gap(traj);
    audit.coarse_intervals = traj.coarse_intervals;
    if (stride == 1) {
        std::vector<double> reference;
        for (const auto& s : rec.snapshots) {
            const auto ux = deriv(s.u, grid);
            reference.push_back(refine_extremum_quartic(ux, grid, Branch::sup).value);
        }
        audit.sup_transport_error = sup_transport_error(traj, reference);
    }
    return audit;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json profile_json(const ProfileTerm& t) {
    const char* kind = t.kind == ProfileKind::gaussian_bump ? "gaussian_bump"
                       : t.kind == ProfileKind::slope_bump  ? "slope_bump"
                                                            : "eta_bump";
    return json{{"kind", kind}, {"amplitude", t.amplitude}, {"width", t.width}, {"center", t.center}};
}

json event_json(const std::optional<BlowupEvent>& e) {
    if (!e) return nullptr;
    return json{{"row", e->row}, {"t", e->t}, {"criterion", to_string(e->criterion)}};
}

const char* first_detector(const std::optional<BlowupEvent>& regime, const std::optional<BlowupEvent>& gradient) {
    if (!regime && !gradient) return "none";
    if (regime && !gradient) return "regime";
    if (!regime) return "gradient";
    if (regime->row < gradient->row) return "regime";
    if (gradient->row < regime->row) return "gradient";
    return "both";
}

}  // namespace

Analysis analyze(const RunConfig& config) {
    Analysis a;
    a.config = config;
    const Grid grid = config.grid();
    const PhysParams& params = config.params;
    const FieldState initial = synthesize(config.initial, grid);

    a.certificate = build_certificate(initial, params, grid, config.M_assumed);
    IntegratorConfig ic = config.integrator();
    ic.lemma31_ceiling = a.certificate.lemma31_ceiling;

    ExtremumTracker sup_tracker(params, grid, Branch::sup);
    ExtremumTracker inf_tracker(params, grid, Branch::inf);
    double rho_sup = 0.0;
    const auto observer = [&](const FieldState& s, std::size_t step) {
        sup_tracker(s, step);
        inf_tracker(s, step);
        for (double e : s.eta) rho_sup = std::max(rho_sup, std::abs(1.0 + e));
    };
    a.record = run(initial, params, grid, ic, observer);
    a.sup_track = sup_tracker.take();
    a.inf_track = inf_tracker.take();
    a.observed_rho_sup = rho_sup;
    a.exit_code = exit_code_for(a.record.termination.kind);

    for (const auto& r : a.record.samples) {
        if (std::max(std::abs(r.sup_ux), std::abs(r.inf_ux)) <= 10.0)
            a.max_abs_drift = std::max(a.max_abs_drift, std::abs(r.E_drift_rel));
        a.max_boundary_leak = std::max(a.max_boundary_leak, r.boundary_leak);
    }

    const RegimeFlags regime = classify_regime(params);
    a.regime_event = detect_blowup(a.record.samples, regime, config.G);
    a.gradient_event = detect_gradient_blowup(a.record.samples, config.G);
    a.monitors = monitor_bounds(a.record.samples, a.certificate, &a.sup_track, params);

    if (params.sigma() < 0.0) {
        a.fit_branch = Branch::sup;
    } else if (params.sigma() > 0.0) {
        a.fit_branch = Branch::inf;
    } else {
        const auto& last = a.record.samples.back();
        a.fit_branch = std::abs(last.inf_ux) > std::abs(last.sup_ux) ? Branch::inf : Branch::sup;
    }
    try {
        a.fit = estimate_T(a.record.samples, params, a.fit_branch, config.window);
    } catch (const InvalidArgument& ex) {
        a.fit_error = ex.what();
    }

    if (!a.fit) {
        a.rate_error = "no blow-up time estimate";
    } else if (!a.fit->reliable) {
        a.rate_error = "blow-up time fit is unreliable";
    } else {
        try {
            if (params.sigma() < 0.0)
                a.rate = rate_check(a.sup_track, a.fit->T_est, params, config.window);
            else if (params.sigma() > 0.0)
                a.rate = rate_check_unvalidated(a.inf_track, a.fit->T_est, params, config.window);
            else
                a.rate_error = "no rate law for sigma = 0";
        } catch (const InvalidArgument& ex) {
            a.rate_error = ex.what();
        }
    }

    if (a.certificate.thm42) {
        a.certificate.thm42->observed_rho_sup = rho_sup;
        a.certificate.thm42->validated = rho_sup <= a.certificate.thm42->M_assumed;
    }

    if (config.characteristic_seeds > 0 && config.snapshot_every > 0 && a.record.snapshots.size() >= 2)
        a.characteristics = audit_characteristics(a.record, params, grid, config.characteristic_seeds);
    return a;
}

std::string certificate_json(const Certificate& c, const RunConfig& config) {
    json inputs;
    inputs["params"] = {{"A", config.params.A()},
                        {"sigma", config.params.sigma()},
                        {"mu", config.params.mu()},
                        {"Omega", config.params.Omega()}};
    inputs["grid"] = {{"L", config.L}, {"n", config.n}, {"dx", config.grid().dx()}};
    json u_terms = json::array(), eta_terms = json::array();
    for (const auto& t : config.initial.u_terms) u_terms.push_back(profile_json(t));
    for (const auto& t : config.initial.eta_terms) eta_terms.push_back(profile_json(t));
    inputs["initial"] = {{"u_terms", u_terms}, {"eta_terms", eta_terms}, {"eta_zero", config.initial.eta_zero}};
    inputs["M_assumed"] = optional_number(config.M_assumed);

    json j;
    j["inputs"] = inputs;
    j["regime"] = {{"scenario_sigma_pos", c.regime.scenario_sigma_pos},
                   {"blowup_sigma_neg", c.regime.blowup_sigma_neg},
                   {"blowup_sigma_one", c.regime.blowup_sigma_one}};
    j["E0"] = c.E0;
    j["rho0_sup"] = c.rho0_sup;
    j["u0x_sup_norm"] = c.u0x_sup_norm;
    j["sup_inflation"] = kSupInflation;
    j["C"] = c.C;
    j["forcing_bound"] = 0.5 * c.C * c.C;
    j["lemma31_ceiling"] = optional_number(c.lemma31_ceiling);
    if (c.thm41) {
        j["thm41"] = {{"threshold", c.thm41->threshold},
                      {"witness_x0", c.thm41->witness_x0},
                      {"u0x_at_witness", c.thm41->u0x_at_witness},
                      {"certified", c.thm41->T1_bound.has_value()},
                      {"T1_bound", optional_number(c.thm41->T1_bound)}};
    } else {
        j["thm41"] = nullptr;
    }
    if (c.thm42) {
        j["thm42"] = {{"M_assumed", c.thm42->M_assumed},
                      {"N", c.thm42->N},
                      {"m0", c.thm42->m0},
                      {"condition_met", c.thm42->condition_met},
                      {"T_bound", optional_number(c.thm42->T_bound)},
                      {"observed_rho_sup", optional_number(c.thm42->observed_rho_sup)},
                      {"validated", c.thm42->validated ? json(*c.thm42->validated) : json(nullptr)}};
    } else {
        j["thm42"] = nullptr;
    }
    j["K2"] = c.K2;
    j["rate_target"] = optional_number(c.rate_target);
    return j.dump(2) + "\n";
}

std::string verdict_json(const Analysis& a) {
    json j;
    j["exit_code"] = a.exit_code;
    j["termination"] = {{"kind", to_string(a.record.termination.kind)},
                        {"t", a.record.termination.t},
                        {"detail", a.record.termination.detail}};
    j["steps"] = {{"accepted", a.record.accepted_steps}, {"rejected", a.record.rejected_steps}};
    j["diagnostic_rows"] = a.record.samples.size();
    j["energy"] = {{"E0", a.certificate.E0},
                   {"max_abs_drift_rel_smooth", a.max_abs_drift},
                   {"final_drift_rel", a.record.samples.back().E_drift_rel}};
    j["max_boundary_leak"] = a.max_boundary_leak;
    j["detectors"] = {{"threshold", a.config.G},
                      {"regime", event_json(a.regime_event)},
                      {"gradient", event_json(a.gradient_event)},
                      {"first", first_detector(a.regime_event, a.gradient_event)}};

    json counts = json::object();
    for (const auto& check : a.monitors.checks_run) counts[check] = a.monitors.count(check);
    json violations = json::array();
    constexpr std::size_t kListed = 50;
    for (std::size_t i = 0; i < a.monitors.violations.size() && i < kListed; ++i) {
        const auto& v = a.monitors.violations[i];
        violations.push_back({{"check", v.check}, {"t", v.t}, {"value", v.value}, {"bound", v.bound}});
    }
    j["monitors"] = {{"checks_run", a.monitors.checks_run},
                     {"violation_counts", counts},
                     {"clean", a.monitors.clean()},
                     {"violations", violations},
                     {"violations_listed", violations.size()}};

    const char* branch = a.fit_branch == Branch::sup ? "sup" : "inf";
    if (a.fit) {
        j["fit"] = {{"branch", branch},
                    {"M_lo", a.fit->window.M_lo},
                    {"M_hi", a.fit->window.M_hi},
                    {"samples_used", a.fit->samples_used},
                    {"T_est", a.fit->T_est},
                    {"slope_est", a.fit->slope_est},
                    {"expected_slope", a.fit->expected_slope},
                    {"reliable", a.fit->reliable}};
    } else {
        j["fit"] = {{"branch", branch}, {"error", a.fit_error}};
    }
    if (a.rate) {
        j["rate"] = {{"validated", a.rate->validated},
                     {"final_value", a.rate->final_value},
                     {"target", a.rate->validated ? json(a.rate->target) : json(nullptr)},
                     {"rel_error", a.rate->validated ? json(a.rate->rel_error) : json(nullptr)},
                     {"window_samples", a.rate->window_samples}};
    } else {
        j["rate"] = {{"error", a.rate_error}};
    }

    const bool usable_fit = a.fit && a.fit->reliable;
    if (a.certificate.thm41 && a.certificate.thm41->T1_bound) {
        const double T1 = *a.certificate.thm41->T1_bound;
        j["thm41"] = {{"T1_bound", T1},
                      {"T_est_le_T1_bound", usable_fit ? json(a.fit->T_est <= T1) : json(nullptr)}};
    } else {
        j["thm41"] = nullptr;
    }
    if (a.certificate.thm42) {
        const auto& t = *a.certificate.thm42;
        j["thm42"] = {{"M_assumed", t.M_assumed},
                      {"observed_rho_sup", a.observed_rho_sup},
                      {"validated", t.validated.value_or(false)},
                      {"condition_met", t.condition_met},
                      {"T_bound", optional_number(t.T_bound)},
                      {"T_est_le_T_bound",
                       usable_fit && t.T_bound ? json(a.fit->T_est <= *t.T_bound) : json(nullptr)}};
    } else {
        j["thm42"] = nullptr;
    }
    if (a.characteristics) {
        const auto& c = *a.characteristics;
        j["characteristics"] = {{"seeds", c.seeds},
                                {"jacobian_consistency", c.jacobian_consistency},
                                {"min_seed_gap", c.min_seed_gap},
                                {"sup_transport_error", optional_number(c.sup_transport_error)},
                                {"coarse_intervals", c.coarse_intervals}};
    } else {
        j["characteristics"] = nullptr;
    }
    return j.dump(2) + "\n";
}

void write_run_artifacts(const Analysis& a, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path base(dir);
    write_file((base / "diagnostics.csv").string(), diagnostics_csv(a.record.samples));
    write_file((base / "certificate.json").string(), certificate_json(a.certificate, a.config));
    write_file((base / "verdict.json").string(), verdict_json(a));
    write_file((base / "track_sup.csv").string(), track_csv(a.sup_track));
    write_file((base / "track_inf.csv").string(), track_csv(a.inf_track));
    if (a.config.snapshot_every > 0) {
        const auto bytes = encode_snapshots(a.record.snapshots, a.config.n);
        write_file((base / "snapshots.bin").string(), std::span<const unsigned char>(bytes));
    }
}

namespace {

void log_summary(const Analysis& a, std::ostream& log) {
    log << "termination: " << to_string(a.record.termination.kind) << " at t = " << format_double(a.record.termination.t)
        << " (" << a.record.accepted_steps << " steps)\n";
    log << "E0 = " << format_double(a.certificate.E0) << ", C = " << format_double(a.certificate.C) << "\n";
    if (a.fit)
        log << "T_est = " << format_double(a.fit->T_est) << " (slope " << format_double(a.fit->slope_est)
            << (a.fit->reliable ? ")" : ", unreliable)") << "\n";
    log << "monitor violations: " << a.monitors.violations.size() << "\n";
}

}  // namespace

int cmd_run(const RunConfig& config, std::ostream& log) {
    Analysis a;
    try {
        a = analyze(config);
    } catch (const InvalidArgument& ex) {
        log << "error: " << ex.what() << "\n";
        return kExitConfig;
    }
    write_run_artifacts(a, config.out_dir);
    log_summary(a, log);
    return a.exit_code;
}

int cmd_rate(const RunConfig& config, std::ostream& log) {
    Analysis a;
    try {
        a = analyze(config);
    } catch (const InvalidArgument& ex) {
        log << "error: " << ex.what() << "\n";
        return kExitConfig;
    }
    write_run_artifacts(a, config.out_dir);
    if (a.rate) {
        write_file((fs::path(config.out_dir) / "rate.csv").string(),
                   series_csv("t", a.rate->t, "product", a.rate->product));
        log << "rate product final-window mean = " << format_double(a.rate->final_value);
        if (a.rate->validated) log << " (target " << format_double(a.rate->target) << ")";
        log << "\n";
    } else {
        log << "rate: " << a.rate_error << "\n";
    }
    log_summary(a, log);
    return a.exit_code;
}

int cmd_certify(const RunConfig& config, std::ostream& log) {
    try {
        const Grid grid = config.grid();
        const FieldState initial = synthesize(config.initial, grid);
        const Certificate cert = build_certificate(initial, config.params, grid, config.M_assumed);
        fs::create_directories(config.out_dir);
        write_file((fs::path(config.out_dir) / "certificate.json").string(), certificate_json(cert, config));
        log << "E0 = " << format_double(cert.E0) << ", C = " << format_double(cert.C) << "\n";
        if (cert.thm41)
            log << "thm41: " << (cert.thm41->T1_bound ? "certified" : "not certified") << "\n";
        if (cert.thm42) log << "thm42: condition " << (cert.thm42->condition_met ? "met" : "not met") << "\n";
    } catch (const InvalidArgument& ex) {
        log << "error: " << ex.what() << "\n";
        return kExitConfig;
    }
    return kExitReachedEnd;
}

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

Overrides parse_override_line(const std::string& line, std::size_t lineno) {
    Overrides out;
    std::istringstream in(line);
    std::string item;
    while (std::getline(in, item, ';')) {
        const auto b = item.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        item = item.substr(b, item.find_last_not_of(" \t\r") - b + 1);
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("seed list: expected key=value, got '" + item + "'", lineno);
        auto key = item.substr(0, eq), value = item.substr(eq + 1);
        key.erase(key.find_last_not_of(" \t") + 1);
        value.erase(0, value.find_first_not_of(" \t"));
        out.emplace_back(key, value);
    }
    return out;
}

std::string csv_cell(std::string s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

std::string num_or_empty(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

int cmd_sweep(const SweepOptions& opt, std::ostream& log) {
    RunConfig base;
    std::vector<Overrides> rows;
    try {
        base = parse_config(opt.template_text);
        if (opt.seed_list_text) {
            std::istringstream in(*opt.seed_list_text);
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                const auto hash = line.find('#');
                if (hash != std::string::npos) line.resize(hash);
                if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
                rows.push_back(parse_override_line(line, lineno));
            }
        }
    } catch (const ConfigError& ex) {
        log << "error: " << ex.what() << "\n";
        return kExitConfig;
    }
    if (rows.empty()) rows.emplace_back();

    std::vector<Overrides> runs;
    for (const auto& row : rows) {
        std::vector<Overrides> partial{row};
        for (const auto& [key, values] : base.sweep_axes) {
            std::vector<Overrides> next;
            for (const auto& p : partial)
                for (const auto& v : values) {
                    auto o = p;
                    o.emplace_back(key, v);
                    next.push_back(std::move(o));
                }
            partial = std::move(next);
        }
        runs.insert(runs.end(), partial.begin(), partial.end());
    }

    const std::string header =
        "run,status,overrides,A,sigma,mu,Omega,E0,C,thm41_certified,T1_bound,thm42_condition_met,T_bound,"
        "termination,exit_code,t_final,T_est,fit_reliable,rate_final,monitor_violations,error";
    std::vector<std::string> lines(runs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;

    const auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < runs.size(); i = next.fetch_add(1)) {
            char name[32];
            std::snprintf(name, sizeof name, "run_%04zu", i);
            std::string joined;
            for (const auto& [k, v] : runs[i]) joined += (joined.empty() ? "" : ";") + k + "=" + v;
            std::string line = std::string(name) + ",";
            try {
                RunConfig cfg = parse_config_with_overrides(opt.template_text, runs[i]);
                cfg.out_dir = (fs::path(opt.out_dir) / name).string();
                Analysis a = analyze(cfg);
                write_run_artifacts(a, cfg.out_dir);
                const auto& c = a.certificate;
                line += "ok," + csv_cell(joined) + "," + format_double(cfg.params.A()) + "," +
                        format_double(cfg.params.sigma()) + "," + format_double(cfg.params.mu()) + "," +
                        format_double(cfg.params.Omega()) + "," + format_double(c.E0) + "," + format_double(c.C) +
                        "," + (c.thm41 ? (c.thm41->T1_bound ? "true" : "false") : "") + "," +
                        (c.thm41 ? num_or_empty(c.thm41->T1_bound) : "") + "," +
                        (c.thm42 ? (c.thm42->condition_met ? "true" : "false") : "") + "," +
                        (c.thm42 ? num_or_empty(c.thm42->T_bound) : "") + "," +
                        to_string(a.record.termination.kind) + "," + std::to_string(a.exit_code) + "," +
                        format_double(a.record.termination.t) + "," +
                        (a.fit ? format_double(a.fit->T_est) : "") + "," +
                        (a.fit ? (a.fit->reliable ? "true" : "false") : "") + "," +
                        (a.rate ? format_double(a.rate->final_value) : "") + "," +
                        std::to_string(a.monitors.violations.size()) + ",";
            } catch (const std::exception& ex) {
                const bool config_error = dynamic_cast<const ConfigError*>(&ex) != nullptr ||
                                          dynamic_cast<const InvalidArgument*>(&ex) != nullptr;
                line += std::string(config_error ? "config_error" : "error") + "," + csv_cell(joined) +
                        ",,,,,,,,,,,,,,,,,," + csv_cell(ex.what());
                std::lock_guard lock(log_mutex);
                log << name << ": " << ex.what() << "\n";
            }
            lines[i] = std::move(line);
        }
    };

    const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, static_cast<unsigned>(runs.size())));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    fs::create_directories(opt.out_dir);
    std::string summary = header + "\n";
    for (const auto& l : lines) summary += l + "\n";
    write_file((fs::path(opt.out_dir) / "summary.csv").string(), summary);
    log << "sweep: " << runs.size() << " runs, summary in " << (fs::path(opt.out_dir) / "summary.csv").string()
        << "\n";
    return kExitReachedEnd;
}

}  // namespace r2ch
