#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "r2ch/core_model.hpp"
#include "r2ch/evolution.hpp"

namespace r2ch {

/// Parse or validation failure. line() is 0 when the problem is not tied to one line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& message, std::size_t line = 0);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/**
 * Everything one invocation needs. Defaults (keys in parentheses):
 *
 *   grid.L = 20, grid.n = 4096
 *   run.t_end = 1, run.rtol = 1e-10, run.atol = 1e-10, run.G = 1e3,
 *   run.dt_floor = 1e-12, run.dt_initial = 1e-3, run.fixed_dt = 0 (adaptive),
 *   run.diag_every = 10, run.dense_threshold = 20
 *   output.dir = "out", output.snapshot_every = 0 (no snapshots)
 *   fit.M_lo = 20, fit.M_hi = 200
 *   thm42.M_assumed (absent)
 *   characteristics.seeds = 0 (no flow-map audit)
 *
 * params.A, params.sigma, params.mu, params.Omega are required, as is at least
 * one initial-data line (u.<tag>, eta.<tag>) or initial.eta_zero = true.
 */
struct RunConfig {
    PhysParams params{0.0, 0.0, 0.0, 0.0};
    double L = 20.0;
    std::size_t n = 4096;
    InitialDataSpec initial;
    double t_end = 1.0;
    double rtol = 1e-10;
    double atol = 1e-10;
    double G = 1e3;
    double dt_floor = 1e-12;
    double dt_initial = 1e-3;
    double fixed_dt = 0.0;
    std::size_t diag_every = 10;
    double dense_threshold = 20.0;
    std::size_t snapshot_every = 0;
    std::string out_dir = "out";
    FitWindow window{};
    std::optional<double> M_assumed;
    std::size_t characteristic_seeds = 0;

    /// Ordered "sweep.<key> = v1, v2, ..." axes; each key is itself a valid config key.
    std::vector<std::pair<std::string, std::vector<std::string>>> sweep_axes;

    Grid grid() const { return Grid(L, n); }
    IntegratorConfig integrator() const;
};

/**
 * Flat "key = value" text, one entry per line, '#' starts a comment. Profile
 * lines take the form
 *
 *   u.bump   = gaussian_bump a=0.3 w=2 xc=0
 *   u.kink   = slope_bump a=-4 w=0.5
 *   eta.lift = eta_bump b=0.1 w=2
 *
 * where the part after "u." or "eta." is a free tag. Terms are summed in
 * file order. Duplicate and unknown keys are errors.
 */
RunConfig parse_config(const std::string& text);

/// Reads the file, then parse_config. I/O failures surface as ConfigError.
RunConfig load_config(const std::string& path);

/// Re-parses text with "key = value" overrides appended in order (later entries replace earlier ones).
RunConfig parse_config_with_overrides(const std::string& text,
                                      const std::vector<std::pair<std::string, std::string>>& overrides);

/// Throws ConfigError naming the first violated rule.
void validate(const RunConfig& config);

}  // namespace r2ch
