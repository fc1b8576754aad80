#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "r2ch/certificates.hpp"
#include "r2ch/characteristics.hpp"
#include "r2ch/config.hpp"
#include "r2ch/evolution.hpp"

namespace r2ch {

enum ExitCode : int {
    kExitReachedEnd = 0,
    kExitBlowup = 2,
    kExitInvariant = 3,
    kExitConfig = 4,
};

/// reached_t_end -> 0, blowup_detected -> 2, invariant_violation and step_floor -> 3.
int exit_code_for(Termination t);

struct CharacteristicsAudit {
    std::size_t seeds = 0;
    double jacobian_consistency = 0.0;
    double min_seed_gap = 0.0;
    std::optional<double> sup_transport_error;  ///< only when every grid node is a seed
    std::size_t coarse_intervals = 0;
};

/// Everything cmd_run derives from one configuration, before any file is written.
struct Analysis {
    RunConfig config;
    Certificate certificate;
    RunRecord record;
    ExtremumTrack sup_track;
    ExtremumTrack inf_track;
    std::optional<BlowupEvent> regime_event;
    std::optional<BlowupEvent> gradient_event;
    MonitorReport monitors;
    Branch fit_branch = Branch::sup;
    std::optional<BlowupFit> fit;
    std::string fit_error;
    std::optional<RateReport> rate;
    std::string rate_error;
    double observed_rho_sup = 0.0;
    double max_abs_drift = 0.0;
    double max_boundary_leak = 0.0;
    std::optional<CharacteristicsAudit> characteristics;
    int exit_code = kExitReachedEnd;
};

/// Runs the simulation plus every post-processing step. Throws InvalidArgument on bad initial data.
Analysis analyze(const RunConfig& config);

/// Stable-key-order JSON documents; numbers round-trip, NaN and absent values are null.
std::string certificate_json(const Certificate& cert, const RunConfig& config);
std::string verdict_json(const Analysis& analysis);

/// diagnostics.csv, certificate.json, verdict.json, track_sup.csv, track_inf.csv and, with a snapshot cadence, snapshots.bin.
void write_run_artifacts(const Analysis& analysis, const std::string& dir);

struct SweepOptions {
    std::string template_text;
    std::optional<std::string> seed_list_text;
    std::string out_dir;
    unsigned jobs = 1;
};

/**
 * Cross product of the seed-list rows (one line of ';'-separated key=value
 * overrides each, e.g. "params.sigma=2; u.b=gaussian_bump a=1 w=2") and the
 * template's sweep.* axes. Every run writes
 * into <out>/run_NNNN; summary.csv holds one row per run. Failures are recorded
 * in the row and never abort the sweep.
 */
int cmd_sweep(const SweepOptions& options, std::ostream& log);

int cmd_run(const RunConfig& config, std::ostream& log);
int cmd_certify(const RunConfig& config, std::ostream& log);
/// cmd_run plus rate.csv holding the (T_est - t) M(t) series.
int cmd_rate(const RunConfig& config, std::ostream& log);

struct SelftestOptions {
    bool mutate = false;                 ///< perturb the C coefficient; the double-entry check must then fail
    std::size_t snapshot_every = 1;      ///< 0 skips the characteristics checks
};

struct SelftestCheck {
    std::string name;
    enum class Status { pass, fail, skipped } status = Status::pass;
    std::string detail;
};

std::vector<SelftestCheck> run_selftest(const SelftestOptions& options);
int cmd_selftest(const SelftestOptions& options, std::ostream& log);

}  // namespace r2ch
