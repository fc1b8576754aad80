#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "r2ch/core_model.hpp"
#include "r2ch/spectral.hpp"

namespace r2ch {

/// Raised when a right-hand side or step produces NaN/Inf.
class NonFiniteState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Tendency {
    std::vector<double> du_dt;
    std::vector<double> deta_dt;
};

/**
 * Pseudospectral right-hand side of the nonlocal system in (u, eta) form:
 *
 *   u_t   = -(sigma u - mu) u_x
 *           - d_x p*[(mu-A) u + (3-sigma)/2 u^2 + sigma/2 u_x^2
 *                    + (1-2 Omega A)(eta + eta^2/2) - Omega (1+eta)^2 u]
 *           + Omega p*((1+eta)^2 u_x)
 *   eta_t = -(u eta)_x - u_x
 *
 * with eta_t evaluated as -(u rho)_x so that rho = 0 is preserved exactly.
 * Products are formed from two-thirds-truncated fields and truncated again.
 * The tendency is zero above the cutoff, so those modes keep their initial
 * values. Holds its own FFT workspace, so one evaluator per thread.
 */
class RhsEvaluator {
public:
    RhsEvaluator(const Grid& grid, const PhysParams& params);

    void operator()(std::span<const double> u, std::span<const double> eta,
                    std::span<double> du_dt, std::span<double> deta_dt);

    const Grid& grid() const { return grid_; }
    const PhysParams& params() const { return params_; }

private:
    Grid grid_;
    PhysParams params_;
    Spectral spectral_;
    std::vector<Complex> uk_, etak_, work_k_, acc_u_, acc_eta_;
    std::vector<double> uf_, etaf_, uxf_, prod_;
};

Tendency rhs(const FieldState& state, const PhysParams& params, const Grid& grid);

struct StepTolerance {
    double rtol = 1e-10;
    double atol = 1e-10;
};

struct StepResult {
    FieldState state;
    double err_estimate = 0.0;  ///< weighted max norm; > 1 means reject
};

/**
 * Dormand-Prince 5(4) stepper with first-same-as-last reuse. The error norm
 * is max_j |e_j| / (atol + rtol * max(|y_j|, |y_new_j|)) taken jointly over
 * u and eta.
 */
class DormandPrince {
public:
    DormandPrince(const Grid& grid, const PhysParams& params, StepTolerance tol = {});

    /// Advance by dt. k1 must hold the tendency at `state`; on return it holds
    /// the tendency at the new state (valid for the next step if accepted).
    StepResult advance(const FieldState& state, double dt, Tendency& k1);

    Tendency tendency(const FieldState& state);

private:
    RhsEvaluator rhs_;
    StepTolerance tol_;
    std::vector<Tendency> k_;
    FieldState stage_;
};

StepResult step(const FieldState& state, double dt, const PhysParams& params, const Grid& grid,
                StepTolerance tol = {});

struct DiagnosticRow {
    double t = 0.0;
    double dt = 0.0;
    double E = 0.0;
    double E_drift_rel = 0.0;
    double sup_ux = 0.0;
    double inf_ux = 0.0;
    double x_at_sup_ux = 0.0;
    double x_at_inf_ux = 0.0;
    double sup_abs_eta = 0.0;
    double min_rho = 0.0;
    double m3 = 0.0;
    double f_sup_abs = 0.0;
    std::optional<double> lemma31_ceiling;
    double boundary_leak = 0.0;
    /// Not part of the CSV; feeds the a posteriori check of M_assumed.
    double sup_abs_rho = 0.0;
};

enum class Termination { reached_t_end, blowup_detected, invariant_violation, step_floor };

std::string to_string(Termination t);

struct TerminationEvent {
    Termination kind = Termination::reached_t_end;
    double t = 0.0;
    std::string detail;
};

struct IntegratorConfig {
    double t_end = 1.0;
    double rtol = 1e-10;
    double atol = 1e-10;
    double blowup_threshold = 1e3;
    double dt_floor = 1e-12;
    double dt_initial = 1e-3;
    double fixed_dt = 0.0;          ///< > 0 disables step control (convergence studies)
    std::size_t diag_every = 10;    ///< row cadence while max|u_x| <= dense_threshold
    double dense_threshold = 20.0;  ///< above this, a row per accepted step
    std::size_t snapshot_every = 0; ///< keep every k-th accepted state (0 = none)
    std::optional<double> lemma31_ceiling;
};

struct RunRecord {
    std::vector<DiagnosticRow> samples;
    TerminationEvent termination;
    FieldState final_state;
    std::vector<FieldState> snapshots;  ///< includes t = 0 when snapshot_every > 0
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
};

/// Called with the initial state (step 0) and after every accepted step.
using StepObserver = std::function<void(const FieldState& state, std::size_t step)>;

DiagnosticRow diagnose(const FieldState& state, const PhysParams& params, const Grid& grid, double E0);

RunRecord run(const FieldState& initial, const PhysParams& params, const Grid& grid,
              const IntegratorConfig& config, const StepObserver& observer = {});

enum class BlowupCriterion {
    inf_branch,      ///< sigma > 0: inf u_x <= -threshold
    sup_branch,      ///< sigma < 0: sup u_x >= threshold
    gradient_norm,   ///< max(|sup u_x|, |inf u_x|) >= threshold
};

std::string to_string(BlowupCriterion c);

struct BlowupEvent {
    std::size_t row = 0;
    double t = 0.0;
    BlowupCriterion criterion = BlowupCriterion::gradient_norm;
};

/// Regime-specific detector: first row crossing the threshold on the branch
/// the regime predicts to diverge.
std::optional<BlowupEvent> detect_blowup(std::span<const DiagnosticRow> samples, const RegimeFlags& regime,
                                         double threshold);

/// Regime-free detector on max |u_x|.
std::optional<BlowupEvent> detect_gradient_blowup(std::span<const DiagnosticRow> samples, double threshold);

struct FitWindow {
    double M_lo = 20.0;
    double M_hi = 200.0;
};

struct BlowupFit {
    double T_est = 0.0;
    double slope_est = 0.0;
    double intercept = 0.0;
    double expected_slope = 0.0;  ///< sigma/2
    std::size_t samples_used = 0;
    FitWindow window;
    Branch branch = Branch::sup;
    bool reliable = true;
};

/**
 * Least-squares line through (t, 1/M) over the rows whose tracked extremum
 * magnitude lies in the window, up to the first row that leaves it through
 * M_hi; T_est is the root of the line. A slope of the
 * wrong sign for the branch (sup: negative, inf: positive) marks the fit
 * unreliable. Throws InvalidArgument with fewer than 8 window samples.
 */
BlowupFit estimate_T(std::span<const DiagnosticRow> samples, const PhysParams& params, Branch branch,
                     FitWindow window = {});

/// Least-squares fit on raw (t, M) pairs; shared by estimate_T and the track-based tools.
BlowupFit fit_reciprocal(std::span<const double> t, std::span<const double> M, const PhysParams& params,
                         Branch branch, FitWindow window);

}  // namespace r2ch
