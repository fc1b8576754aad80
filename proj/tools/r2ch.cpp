#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "r2ch/commands.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw r2ch::ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator and bound checker for the rotating two-component Camassa-Holm system"};
    app.require_subcommand(1);

    std::string config_path, out_dir, seed_list;
    unsigned jobs = 1;
    r2ch::SelftestOptions selftest;
    std::size_t selftest_snapshots = 1;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Config file (key = value lines)")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides output.dir)");
    };
    auto* run = app.add_subcommand("run", "Simulate and write diagnostics, certificate and verdict");
    add_common(run);
    auto* certify = app.add_subcommand("certify", "Evaluate the closed-form bounds for the initial data only");
    add_common(certify);
    auto* rate = app.add_subcommand("rate", "Run, then write the blow-up rate product series");
    add_common(rate);
    auto* sweep = app.add_subcommand("sweep", "Run the cross product of sweep axes and seed-list rows");
    add_common(sweep);
    sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    sweep->add_option("--seed-list", seed_list, "File of override rows (key=value; key=value ...)");
    auto* self = app.add_subcommand("selftest", "Run the built-in oracle suite");
    self->add_flag("--mutate", selftest.mutate, "Perturb the C coefficient; the double-entry check must fail");
    self->add_option("--snapshot-every", selftest_snapshots, "Snapshot cadence for the characteristics checks (0 skips)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return r2ch::kExitConfig;
    }

    try {
        if (*self) {
            selftest.snapshot_every = selftest_snapshots;
            return r2ch::cmd_selftest(selftest, std::cout);
        }
        if (*sweep) {
            r2ch::SweepOptions opt;
            opt.template_text = slurp(config_path);
            if (!seed_list.empty()) opt.seed_list_text = slurp(seed_list);
            opt.jobs = jobs;
            opt.out_dir = out_dir.empty() ? r2ch::parse_config(opt.template_text).out_dir : out_dir;
            return r2ch::cmd_sweep(opt, std::cout);
        }
        r2ch::RunConfig config = r2ch::load_config(config_path);
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (*run) return r2ch::cmd_run(config, std::cout);
        if (*certify) return r2ch::cmd_certify(config, std::cout);
        return r2ch::cmd_rate(config, std::cout);
    } catch (const r2ch::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return r2ch::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return r2ch::kExitInvariant;
    }
}
