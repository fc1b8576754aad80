#include "r2ch/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "r2ch/certificates.hpp"

namespace r2ch {

RhsEvaluator::RhsEvaluator(const Grid& grid, const PhysParams& params)
    : grid_(grid),
      params_(params),
      spectral_(grid),
      uk_(grid.modes()),
      etak_(grid.modes()),
      work_k_(grid.modes()),
      acc_u_(grid.modes()),
      acc_eta_(grid.modes()),
      uf_(grid.n()),
      etaf_(grid.n()),
      uxf_(grid.n()),
      prod_(grid.n()) {}

void RhsEvaluator::operator()(std::span<const double> u, std::span<const double> eta,
                              std::span<double> du_dt, std::span<double> deta_dt) {
    const std::size_t n = grid_.n();
    const std::size_t nm = grid_.modes();
    const std::size_t nyquist = n / 2;
    const auto& k = grid_.wavenumbers();
    const double sigma = params_.sigma();
    const double mu = params_.mu();
    const double A = params_.A();
    const double Omega = params_.Omega();
    const double stiff = params_.stiffness();

    spectral_.forward(u, uk_);
    spectral_.forward(eta, etak_);

    // Truncated fields for the products.
    work_k_ = uk_;
    spectral_.truncate(work_k_);
    spectral_.inverse(work_k_, uf_);
    for (std::size_t m = 0; m < nm; ++m) work_k_[m] *= Complex(0.0, m == nyquist ? 0.0 : k[m]);
    spectral_.inverse(work_k_, uxf_);
    work_k_ = etak_;
    spectral_.truncate(work_k_);
    spectral_.inverse(work_k_, etaf_);

    // Linear terms: mu u_x - d_x p*((mu - A) u).
    for (std::size_t m = 0; m < nm; ++m) {
        const double km = m == nyquist ? 0.0 : k[m];
        const double inv = 1.0 / (1.0 + k[m] * k[m]);
        acc_u_[m] = Complex(0.0, mu * km) * uk_[m] - Complex(0.0, km * inv) * ((mu - A) * uk_[m]);
        acc_eta_[m] = 0.0;
    }

    auto add_product = [&](auto&& fill, auto&& multiplier, std::vector<Complex>& acc) {
        for (std::size_t j = 0; j < n; ++j) prod_[j] = fill(j);
        spectral_.forward(prod_, work_k_);
        spectral_.truncate(work_k_);
        for (std::size_t m = 0; m < nm; ++m) acc[m] += multiplier(m) * work_k_[m];
    };

    // -sigma u u_x
    add_product([&](std::size_t j) { return -sigma * uf_[j] * uxf_[j]; },
                [](std::size_t) { return Complex(1.0); }, acc_u_);
    // -d_x p*[(3-sigma)/2 u^2 + sigma/2 u_x^2 + stiff (eta + eta^2/2) - Omega rho^2 u]
    add_product(
        [&](std::size_t j) {
            const double rho = 1.0 + etaf_[j];
            return 0.5 * (3.0 - sigma) * uf_[j] * uf_[j] + 0.5 * sigma * uxf_[j] * uxf_[j] +
                   stiff * (etaf_[j] + 0.5 * etaf_[j] * etaf_[j]) - Omega * rho * rho * uf_[j];
        },
        [&](std::size_t m) {
            const double km = m == nyquist ? 0.0 : k[m];
            return Complex(0.0, -km / (1.0 + k[m] * k[m]));
        },
        acc_u_);
    // Omega p*(rho^2 u_x)
    if (Omega != 0.0)
        add_product(
            [&](std::size_t j) {
                const double rho = 1.0 + etaf_[j];
                return rho * rho * uxf_[j];
            },
            [&](std::size_t m) { return Complex(Omega / (1.0 + k[m] * k[m])); }, acc_u_);
    // eta_t = -(u rho)_x
    add_product([&](std::size_t j) { return uf_[j] * (1.0 + etaf_[j]); },
                [&](std::size_t m) { return Complex(0.0, m == nyquist ? 0.0 : -k[m]); }, acc_eta_);

    // Modes above the cutoff never enter a product, so they are passive; holding
    // them fixed keeps the explicit stepper from amplifying them along the
    // imaginary axis.
    spectral_.truncate(acc_u_);
    spectral_.inverse(acc_u_, du_dt);
    spectral_.inverse(acc_eta_, deta_dt);
    if (!all_finite(du_dt) || !all_finite(deta_dt))
        throw NonFiniteState("right-hand side produced non-finite values");
}

Tendency rhs(const FieldState& state, const PhysParams& params, const Grid& grid) {
    if (state.u.size() != grid.n() || state.eta.size() != grid.n())
        throw InvalidArgument("state length does not match the grid");
    RhsEvaluator eval(grid, params);
    Tendency out{std::vector<double>(grid.n()), std::vector<double>(grid.n())};
    eval(state.u, state.eta, out.du_dt, out.deta_dt);
    return out;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b_hat (fifth minus fourth order weights).
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

DormandPrince::DormandPrince(const Grid& grid, const PhysParams& params, StepTolerance tol)
    : rhs_(grid, params), tol_(tol), k_(7) {
    for (auto& kk : k_) {
        kk.du_dt.assign(grid.n(), 0.0);
        kk.deta_dt.assign(grid.n(), 0.0);
    }
    stage_.u.assign(grid.n(), 0.0);
    stage_.eta.assign(grid.n(), 0.0);
}

Tendency DormandPrince::tendency(const FieldState& state) {
    Tendency out{std::vector<double>(state.u.size()), std::vector<double>(state.u.size())};
    rhs_(state.u, state.eta, out.du_dt, out.deta_dt);
    return out;
}

StepResult DormandPrince::advance(const FieldState& state, double dt, Tendency& k1) {
    const std::size_t n = state.u.size();
    auto stage = [&](std::initializer_list<std::pair<std::size_t, double>> terms, double c, std::size_t dest) {
        for (std::size_t j = 0; j < n; ++j) {
            double su = state.u[j], se = state.eta[j];
            for (auto [idx, a] : terms) {
                const Tendency& kk = idx == 0 ? k1 : k_[idx];
                su += dt * a * kk.du_dt[j];
                se += dt * a * kk.deta_dt[j];
            }
            stage_.u[j] = su;
            stage_.eta[j] = se;
        }
        stage_.t = state.t + c * dt;
        rhs_(stage_.u, stage_.eta, k_[dest].du_dt, k_[dest].deta_dt);
    };

    stage({{0, a21}}, c2, 1);
    stage({{0, a31}, {1, a32}}, c3, 2);
    stage({{0, a41}, {1, a42}, {2, a43}}, c4, 3);
    stage({{0, a51}, {1, a52}, {2, a53}, {3, a54}}, c5, 4);
    stage({{0, a61}, {1, a62}, {2, a63}, {3, a64}, {4, a65}}, 1.0, 5);

    StepResult out;
    out.state.t = state.t + dt;
    out.state.u.resize(n);
    out.state.eta.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.state.u[j] = state.u[j] + dt * (b1 * k1.du_dt[j] + b3 * k_[2].du_dt[j] + b4 * k_[3].du_dt[j] +
                                            b5 * k_[4].du_dt[j] + b6 * k_[5].du_dt[j]);
        out.state.eta[j] = state.eta[j] + dt * (b1 * k1.deta_dt[j] + b3 * k_[2].deta_dt[j] +
                                                b4 * k_[3].deta_dt[j] + b5 * k_[4].deta_dt[j] +
                                                b6 * k_[5].deta_dt[j]);
    }
    if (!all_finite(out.state.u) || !all_finite(out.state.eta))
        throw NonFiniteState("integrator produced a non-finite state");
    rhs_(out.state.u, out.state.eta, k_[6].du_dt, k_[6].deta_dt);

    double err = 0.0;
    auto accumulate = [&](const std::vector<double>& y0, const std::vector<double>& y1,
                          auto member) {
        for (std::size_t j = 0; j < n; ++j) {
            const double e = dt * (e1 * (k1.*member)[j] + e3 * (k_[2].*member)[j] + e4 * (k_[3].*member)[j] +
                                   e5 * (k_[4].*member)[j] + e6 * (k_[5].*member)[j] + e7 * (k_[6].*member)[j]);
            const double scale = tol_.atol + tol_.rtol * std::max(std::abs(y0[j]), std::abs(y1[j]));
            err = std::max(err, std::abs(e) / scale);
        }
    };
    accumulate(state.u, out.state.u, &Tendency::du_dt);
    accumulate(state.eta, out.state.eta, &Tendency::deta_dt);
    out.err_estimate = err;

    std::swap(k1.du_dt, k_[6].du_dt);
    std::swap(k1.deta_dt, k_[6].deta_dt);
    return out;
}

StepResult step(const FieldState& state, double dt, const PhysParams& params, const Grid& grid, StepTolerance tol) {
    if (!(dt > 0.0)) throw InvalidArgument("step size must be positive");
    DormandPrince dp(grid, params, tol);
    Tendency k1 = dp.tendency(state);
    return dp.advance(state, dt, k1);
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::reached_t_end: return "reached_t_end";
        case Termination::blowup_detected: return "blowup_detected";
        case Termination::invariant_violation: return "invariant_violation";
        case Termination::step_floor: return "step_floor";
    }
    return "unknown";
}

std::string to_string(BlowupCriterion c) {
    switch (c) {
        case BlowupCriterion::inf_branch: return "inf_branch";
        case BlowupCriterion::sup_branch: return "sup_branch";
        case BlowupCriterion::gradient_norm: return "gradient_norm";
    }
    return "unknown";
}

DiagnosticRow diagnose(const FieldState& state, const PhysParams& params, const Grid& grid, double E0) {
    auto& sp = spectral_for(grid);
    const auto ux = sp.deriv(state.u);
    DiagnosticRow row;
    row.t = state.t;
    row.E = energy(state, params, grid);
    row.E_drift_rel = (row.E - E0) / std::max(E0, 1e-14);
    const auto hi = refine_extremum_quartic(ux, grid, Branch::sup);
    const auto lo = refine_extremum_quartic(ux, grid, Branch::inf);
    row.sup_ux = hi.value;
    row.x_at_sup_ux = hi.x;
    row.inf_ux = lo.value;
    row.x_at_inf_ux = lo.x;
    double sup_eta = 0.0, min_rho = 1.0 + state.eta[0], sup_rho = 0.0, m3 = 0.0;
    for (std::size_t j = 0; j < grid.n(); ++j) {
        sup_eta = std::max(sup_eta, std::abs(state.eta[j]));
        min_rho = std::min(min_rho, 1.0 + state.eta[j]);
        sup_rho = std::max(sup_rho, std::abs(1.0 + state.eta[j]));
        m3 += ux[j] * ux[j] * ux[j];
    }
    row.sup_abs_eta = sup_eta;
    row.min_rho = min_rho;
    row.sup_abs_rho = sup_rho;
    row.m3 = m3 * grid.dx();
    const auto f = eval_f(state, params, grid);
    row.f_sup_abs = std::accumulate(f.begin(), f.end(), 0.0,
                                    [](double acc, double v) { return std::max(acc, std::abs(v)); });
    row.boundary_leak = boundary_magnitude(state, grid);
    return row;
}

RunRecord run(const FieldState& initial, const PhysParams& params, const Grid& grid,
              const IntegratorConfig& config, const StepObserver& observer) {
    if (initial.u.size() != grid.n() || initial.eta.size() != grid.n())
        throw InvalidArgument("initial state length does not match the grid");
    if (!(config.t_end > initial.t)) throw InvalidArgument("t_end must exceed the initial time");

    RunRecord record;
    const double E0 = energy(initial, params, grid);
    DormandPrince dp(grid, params, {config.rtol, config.atol});
    auto& sp = spectral_for(grid);

    auto push_row = [&](const FieldState& s, double dt) {
        DiagnosticRow row = diagnose(s, params, grid, E0);
        row.dt = dt;
        row.lemma31_ceiling = config.lemma31_ceiling;
        record.samples.push_back(row);
    };
    auto max_abs_ux = [&](const FieldState& s) {
        const auto ux = sp.deriv(s.u);
        const auto hi = refine_extremum_quartic(ux, grid, Branch::sup);
        const auto lo = refine_extremum_quartic(ux, grid, Branch::inf);
        return std::max(std::abs(hi.value), std::abs(lo.value));
    };

    FieldState state = initial;
    push_row(state, 0.0);
    if (config.snapshot_every > 0) record.snapshots.push_back(state);
    if (observer) observer(state, 0);

    Tendency k1;
    try {
        k1 = dp.tendency(state);
    } catch (const NonFiniteState& e) {
        record.termination = {Termination::invariant_violation, state.t, e.what()};
        record.final_state = state;
        return record;
    }

    const bool fixed = config.fixed_dt > 0.0;
    double dt = fixed ? config.fixed_dt : config.dt_initial;
    std::size_t since_row = 0;
    bool row_current = true;
    record.termination = {Termination::reached_t_end, config.t_end, ""};

    while (state.t < config.t_end) {
        const double remaining = config.t_end - state.t;
        // Land exactly on t_end instead of leaving a sliver.
        const double h = dt >= remaining * (1.0 - 1e-12) ? remaining : dt;
        StepResult res;
        Tendency k1_trial = k1;
        try {
            res = dp.advance(state, h, k1_trial);
        } catch (const NonFiniteState& e) {
            record.termination = {Termination::invariant_violation, state.t, e.what()};
            break;
        }

        if (!fixed && res.err_estimate > 1.0) {
            ++record.rejected_steps;
            dt = h * std::clamp(0.9 * std::pow(res.err_estimate, -0.2), 0.2, 1.0);
            if (dt < config.dt_floor) {
                record.termination = {Termination::step_floor, state.t,
                                      "step size fell below the configured floor"};
                break;
            }
            continue;
        }

        ++record.accepted_steps;
        if (h == remaining) res.state.t = config.t_end;
        state = std::move(res.state);
        k1 = std::move(k1_trial);
        if (!fixed) {
            const double grow = res.err_estimate > 0.0 ? 0.9 * std::pow(res.err_estimate, -0.2) : 5.0;
            dt = h * std::clamp(grow, 0.2, 5.0);
            if (h == remaining) dt = std::max(dt, h);
        }

        const double grad = max_abs_ux(state);
        ++since_row;
        row_current = false;
        const bool blowup = grad >= config.blowup_threshold;
        if (blowup || grad > config.dense_threshold || since_row >= config.diag_every) {
            push_row(state, h);
            since_row = 0;
            row_current = true;
        }
        if (config.snapshot_every > 0 && record.accepted_steps % config.snapshot_every == 0)
            record.snapshots.push_back(state);
        if (observer) observer(state, record.accepted_steps);

        if (blowup) {
            record.termination = {Termination::blowup_detected, state.t,
                                  "max |u_x| reached the blow-up threshold"};
            break;
        }
        if (!fixed && dt < config.dt_floor) {
            record.termination = {Termination::step_floor, state.t, "step size fell below the configured floor"};
            break;
        }
    }

    if (!row_current) push_row(state, record.samples.empty() ? 0.0 : state.t - record.samples.back().t);
    if (record.termination.kind == Termination::reached_t_end) record.termination.t = state.t;
    record.final_state = std::move(state);
    return record;
}

std::optional<BlowupEvent> detect_blowup(std::span<const DiagnosticRow> samples, const RegimeFlags& regime,
                                         double threshold) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& r = samples[i];
        if (regime.scenario_sigma_pos) {
            if (r.inf_ux <= -threshold) return BlowupEvent{i, r.t, BlowupCriterion::inf_branch};
        } else if (regime.blowup_sigma_neg) {
            if (r.sup_ux >= threshold) return BlowupEvent{i, r.t, BlowupCriterion::sup_branch};
        } else if (std::max(std::abs(r.sup_ux), std::abs(r.inf_ux)) >= threshold) {
            return BlowupEvent{i, r.t, BlowupCriterion::gradient_norm};
        }
    }
    return std::nullopt;
}

std::optional<BlowupEvent> detect_gradient_blowup(std::span<const DiagnosticRow> samples, double threshold) {
    return detect_blowup(samples, RegimeFlags{}, threshold);
}

BlowupFit fit_reciprocal(std::span<const double> t, std::span<const double> M, const PhysParams& params,
                         Branch branch, FitWindow window) {
    if (t.size() != M.size()) throw InvalidArgument("time and extremum series differ in length");
    std::vector<double> ts, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double mag = std::abs(M[i]);
        const bool right_sign = branch == Branch::sup ? M[i] > 0.0 : M[i] < 0.0;
        if (right_sign && mag > window.M_hi) break;
        if (right_sign && mag >= window.M_lo) {
            ts.push_back(t[i]);
            ys.push_back(1.0 / M[i]);
        }
    }
    if (ts.size() < 8)
        throw InvalidArgument("too few samples in the fit window: " + std::to_string(ts.size()) + " < 8");

    const double count = static_cast<double>(ts.size());
    const double tm = std::accumulate(ts.begin(), ts.end(), 0.0) / count;
    const double ym = std::accumulate(ys.begin(), ys.end(), 0.0) / count;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        sxx += (ts[i] - tm) * (ts[i] - tm);
        sxy += (ts[i] - tm) * (ys[i] - ym);
    }
    if (sxx == 0.0) throw InvalidArgument("fit window samples share a single time stamp");

    BlowupFit fit;
    fit.slope_est = sxy / sxx;
    fit.intercept = ym - fit.slope_est * tm;
    fit.T_est = tm - ym / fit.slope_est;
    fit.expected_slope = 0.5 * params.sigma();
    fit.samples_used = ts.size();
    fit.window = window;
    fit.branch = branch;
    fit.reliable = branch == Branch::sup ? fit.slope_est < 0.0 : fit.slope_est > 0.0;
    if (!std::isfinite(fit.T_est)) fit.reliable = false;
    return fit;
}

BlowupFit estimate_T(std::span<const DiagnosticRow> samples, const PhysParams& params, Branch branch,
                     FitWindow window) {
    std::vector<double> t, M;
    t.reserve(samples.size());
    M.reserve(samples.size());
    for (const auto& r : samples) {
        t.push_back(r.t);
        M.push_back(branch == Branch::sup ? r.sup_ux : r.inf_ux);
    }
    return fit_reciprocal(t, M, params, branch, window);
}

}  // namespace r2ch
