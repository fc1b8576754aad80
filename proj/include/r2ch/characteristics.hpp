#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "r2ch/core_model.hpp"
#include "r2ch/evolution.hpp"

namespace r2ch {

/// Velocity and the derivatives the path integrators need, at one (t, x).
struct FlowSample {
    double u = 0.0;
    double ux = 0.0;
    double uxx = 0.0;
    double ut = 0.0;
    double uxt = 0.0;
};

/**
 * A velocity field u(t, x) on a time span partitioned into intervals. The
 * path integrator takes one RK4 step per interval, so the knots also set the
 * recording cadence of trajectories.
 */
class FlowField {
public:
    virtual ~FlowField() = default;
    virtual const std::vector<double>& knots() const = 0;
    /// t must lie in [knots()[interval], knots()[interval + 1]].
    virtual FlowSample sample(std::size_t interval, double t, double x) = 0;
    virtual double half_length() const = 0;
};

/**
 * Flow reconstructed from stored solver snapshots. In space: 8x spectral
 * upsampling followed by 8-point Lagrange interpolation on the fine grid. In
 * time: cubic Hermite between snapshots, with the time derivative taken from
 * the right-hand side at each snapshot. Fine-grid data is cached for the two
 * ends of the most recently used interval, so sampling interval by interval
 * is cheap.
 */
class SnapshotFlow final : public FlowField {
public:
    SnapshotFlow(std::span<const FieldState> snapshots, const PhysParams& params, const Grid& grid);

    const std::vector<double>& knots() const override { return knots_; }
    FlowSample sample(std::size_t interval, double t, double x) override;
    double half_length() const override { return grid_.half_length(); }

    /// Max over snapshots of dt_interval * max|u_x|; large values mean the cadence is too coarse.
    double cadence_number(std::size_t interval) const { return cadence_[interval]; }

private:
    struct Fine {
        std::size_t index = static_cast<std::size_t>(-1);
        std::vector<double> u, ux, uxx, ut, uxt, uxxt;
    };
    const Fine& fine(std::size_t snapshot);

    std::span<const FieldState> snaps_;
    PhysParams params_;
    Grid grid_;
    Grid fine_grid_;
    std::vector<double> knots_;
    std::vector<double> cadence_;
    Fine cache_[2];
    std::size_t next_slot_ = 0;
};

/**
 * Closed-form flows u = c + a x with no time dependence; the exact flow map is
 * q = (x + c/a) e^{a t} - c/a (or x + c t when a = 0).
 */
class AffineFlow final : public FlowField {
public:
    AffineFlow(double c, double a, std::vector<double> knots, double half_length = 1e6)
        : c_(c), a_(a), knots_(std::move(knots)), L_(half_length) {}

    const std::vector<double>& knots() const override { return knots_; }
    FlowSample sample(std::size_t, double, double x) override { return {c_ + a_ * x, a_, 0.0, 0.0, 0.0}; }
    double half_length() const override { return L_; }

private:
    double c_, a_;
    std::vector<double> knots_;
    double L_;
};

struct Trajectory {
    std::vector<double> seeds;
    std::vector<double> times;
    /// Indexed [seed][time].
    std::vector<std::vector<double>> path;
    std::vector<std::vector<double>> jac_ode;
    std::vector<std::vector<double>> u_x_along;
    /// d/dt of u_x along the path, u_xt + u u_xx.
    std::vector<std::vector<double>> u_x_rate_along;
    /// Intervals whose dt * max|u_x| exceeded the cadence limit.
    std::size_t coarse_intervals = 0;
};

inline constexpr double kCadenceLimit = 0.25;

/// Throws InvalidArgument when a seed lies outside [-L, L).
Trajectory advect(std::span<const double> seeds, FlowField& flow);

/**
 * Max relative discrepancy between the variational q_x and the exponential
 * of the path integral of u_x, where the integral is the end-corrected
 * trapezoid rule on the recorded samples.
 */
double jacobian_consistency(const Trajectory& traj);

/// Smallest gap q_{i+1} - q_i over all recorded times; positive means the map stays increasing.
double min_seed_gap(const Trajectory& traj);

/**
 * Max over recorded times of |sup over seeds of u_x(t, q) - reference(t)|,
 * where the per-seed maximum is polished by the quartic through it and its
 * four nearest seed neighbours. reference has one entry per recorded time.
 */
double sup_transport_error(const Trajectory& traj, std::span<const double> reference);

struct ExtremumTrack {
    Branch branch = Branch::sup;
    double dx = 0.0;
    std::vector<double> t;
    std::vector<double> xi;
    std::vector<double> M;
    std::vector<double> gamma;
    std::vector<double> f_along;
    std::vector<double> u_sup_abs;
    std::vector<double> u_along;      ///< u(t, xi)
    std::vector<double> rho_x_along;  ///< rho_x(t, xi)
};

/// Online tracker that can be passed to run() as a StepObserver.
class ExtremumTracker {
public:
    ExtremumTracker(const PhysParams& params, const Grid& grid, Branch branch);
    void operator()(const FieldState& state, std::size_t step);
    const ExtremumTrack& track() const { return track_; }
    ExtremumTrack take() { return std::move(track_); }

private:
    PhysParams params_;
    Grid grid_;
    ExtremumTrack track_;
};

ExtremumTrack track_extremum(std::span<const FieldState> snapshots, const PhysParams& params, const Grid& grid,
                             Branch branch);

struct OdeResiduals {
    std::vector<double> t;
    std::vector<double> res_M;
    std::vector<double> res_gamma;
    /// res_gamma minus rho_x(xi) (xi' - u(xi)), the term a moving extremizer adds.
    std::vector<double> res_gamma_transport;
    /// True where the extremizer jumped; such samples are left out of max_abs().
    std::vector<bool> excluded;

    double max_abs_M() const;
    double max_abs_gamma() const;
    double max_abs_gamma_transport() const;
    std::size_t excluded_count() const;
};

/**
 * Centered (non-uniform) differences at interior samples. A step of xi counts
 * as an argmax jump when it exceeds 10 dx + 2 dt max|u| and is more than four
 * times faster than the neighbouring steps; samples whose stencil spans a jump
 * are excluded.
 */
OdeResiduals ode_residuals(const ExtremumTrack& track, const PhysParams& params);

/// Max relative gap between gamma(t) and gamma(0) exp(-int_0^t M).
double gamma_decay_error(const ExtremumTrack& track);

/// Cumulative integral of samples y(t) using the cubic through four neighbouring points per interval.
std::vector<double> cumulative_integral(std::span<const double> t, std::span<const double> y);

/// 8-point Lagrange interpolation of periodic samples with spacing h starting at x0.
double lagrange_periodic(std::span<const double> samples, double x0, double h, double x);

}  // namespace r2ch
