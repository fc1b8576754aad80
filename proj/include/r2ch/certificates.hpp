#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "r2ch/characteristics.hpp"
#include "r2ch/core_model.hpp"
#include "r2ch/evolution.hpp"

namespace r2ch {

/// Trapezoid quadrature of u^2 + u_x^2 + (1-2 Omega A) eta^2 over the box (spectrally accurate for periodic data).
double energy(const FieldState& state, const PhysParams& params, const Grid& grid);

/// Bound on the forcing: |f| <= C^2/2. Throws for negative E0 or rho0_sup.
double constant_C(double E0, double rho0_sup, const PhysParams& params);

/// Upper bound on sup u_x for sigma > 0.
double lemma31_ceiling(double u0x_sup_norm, double rho0_sup, double C, const PhysParams& params);

struct Thm41Result {
    double threshold = 0.0;       ///< C / sqrt(-sigma)
    double witness_x0 = 0.0;
    double u0x_at_witness = 0.0;
    std::optional<double> T1_bound;  ///< present exactly when the witness slope exceeds the threshold
};

/// sigma < 0 only. The witness is the refined argmax of the spectral derivative of u0.
Thm41Result thm41_certificate(std::span<const double> u0, const Grid& grid, double C, const PhysParams& params);

/// Closed-form lifespan bound for a given witness slope (requires slope > C/sqrt(-sigma)).
double thm41_T1_bound(double slope, double C, const PhysParams& params);

/// sigma = 1, mu = 0 only; M_assumed bounds |rho| uniformly in time.
double thm42_constant_N(double E0, double M_assumed, const PhysParams& params);

struct Thm42Result {
    double M_assumed = 0.0;
    double N = 0.0;
    double m0 = 0.0;
    bool condition_met = false;
    std::optional<double> T_bound;
    /// Filled after a run: whether the observed sup |rho| stayed within M_assumed.
    std::optional<bool> validated;
    std::optional<double> observed_rho_sup;
};

Thm42Result thm42_certificate(std::span<const double> u0, const Grid& grid, double N, double E0);

/// Logarithmic lifespan bound from m0 < -sqrt(2 E0 N); at N = 0 this is -2 E0 / m0.
double thm42_T_bound(double m0, double E0, double N);

double k2_bound(double C, double rho0_sup, const PhysParams& params);

/// Relative inflation applied to grid suprema before they enter C and the ceiling.
inline constexpr double kSupInflation = 1e-6;

struct Certificate {
    double E0 = 0.0;
    double rho0_sup = 0.0;
    double u0x_sup_norm = 0.0;
    double C = 0.0;
    std::optional<double> lemma31_ceiling;
    std::optional<Thm41Result> thm41;
    std::optional<Thm42Result> thm42;
    double K2 = 0.0;
    std::optional<double> rate_target;  ///< -2/sigma for sigma < 0
    RegimeFlags regime;
};

/// thm42 is filled only when M_assumed is given and the regime is sigma = 1, mu = 0.
Certificate build_certificate(const FieldState& initial, const PhysParams& params, const Grid& grid,
                              std::optional<double> M_assumed = std::nullopt);

struct Violation {
    std::string check;  ///< "ceiling", "forcing", "density", "monotone"
    double t = 0.0;
    double value = 0.0;
    double bound = 0.0;
};

struct MonitorReport {
    std::vector<std::string> checks_run;
    std::vector<Violation> violations;
    bool clean() const { return violations.empty(); }
    std::size_t count(const std::string& check) const;
};

inline double monitor_tolerance(double bound) { return 1e-6 * std::max(1.0, std::abs(bound)); }

/**
 * (a) sigma > 0: sup u_x <= ceiling; (b) max|f| <= C^2/2; (c) |gamma| <= |rho0|_inf
 * along a sup-branch track while M has stayed nonnegative; (d) sigma < 0: after
 * M first exceeds C/sqrt(-sigma) it never decreases. (c) and (d) read the track
 * when given; (d) falls back to the sup_ux column otherwise.
 */
MonitorReport monitor_bounds(std::span<const DiagnosticRow> samples, const Certificate& cert,
                             const ExtremumTrack* track, const PhysParams& params);

struct RateReport {
    std::vector<double> t;
    std::vector<double> product;  ///< (T_est - t) M(t)
    double final_value = 0.0;     ///< mean over the last quarter of the in-window samples
    double target = 0.0;          ///< -2/sigma, NaN when unvalidated
    double rel_error = 0.0;
    std::size_t window_samples = 0;
    bool validated = true;
};

/// sigma < 0, sup-branch track, T_est beyond every in-window sample. The track is read up to the first
/// sample whose magnitude exceeds M_hi.
RateReport rate_check(const ExtremumTrack& track, double T_est, const PhysParams& params, FitWindow window = {});

/// Same product on the inf branch for sigma > 0, with no target asserted.
RateReport rate_check_unvalidated(const ExtremumTrack& track, double T_est, const PhysParams& params,
                                  FitWindow window = {});

namespace detail {
/// constant_C with the leading 3(1-Omega A)/2 term scaled; scale != 1 is used only by the mutation self-test.
double constant_C_scaled(double E0, double rho0_sup, const PhysParams& params, double leading_scale);
}  // namespace detail

}  // namespace r2ch
