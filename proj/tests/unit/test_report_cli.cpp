#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "r2ch/commands.hpp"
#include "r2ch/report.hpp"

using namespace r2ch;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const char* env = std::getenv("R2CH_TEST_TMP");
    const fs::path base = env ? fs::path(env) : fs::temp_directory_path() / "r2ch_unit";
    const fs::path dir = base / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        bool quoted = false;
        for (char c : line) {
            if (c == '"') {
                quoted = !quoted;
            } else if (c == ',' && !quoted) {
                cells.push_back(cell);
                cell.clear();
            } else {
                cell += c;
            }
        }
        cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

const std::string kSmooth =
    "params.A = 0.5\nparams.sigma = 1\nparams.mu = 0.2\nparams.Omega = 0.1\n"
    "u.bump = gaussian_bump a=0.3 w=2\neta.lift = eta_bump b=0.1 w=2\n"
    "grid.n = 256\nrun.t_end = 0.5\n";

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("number formatting") {
        CHECK(format_double(0.1) == "0.10000000000000001");
        CHECK(format_double(-2.0) == "-2");
        CHECK(format_double(std::nan("")) == "nan");
        CHECK(format_double(INFINITY) == "inf");
        CHECK(format_double(-INFINITY) == "-inf");
        CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    }

    TEST_CASE("diagnostics CSV layout") {
        DiagnosticRow a;
        a.t = 0.5;
        a.E = 1.25;
        a.lemma31_ceiling = 3.0;
        DiagnosticRow b = a;
        b.lemma31_ceiling.reset();
        const auto rows = read_csv(diagnostics_csv(std::vector{a, b}));
        REQUIRE(rows.size() == 3);
        CHECK(rows[0] == std::vector<std::string>{"t", "dt", "E", "E_drift_rel", "sup_ux", "inf_ux", "x_at_sup_ux",
                                                  "x_at_inf_ux", "sup_abs_eta", "min_rho", "m3", "f_sup_abs",
                                                  "lemma31_ceiling", "boundary_leak"});
        CHECK(rows[1].size() == 14);
        CHECK(rows[1][0] == "0.5");
        CHECK(rows[1][2] == "1.25");
        CHECK(rows[1][12] == "3");
        CHECK(rows[2][12] == "nan");
        CHECK_THROWS_AS(series_csv("a", std::vector<double>{1.0}, "b", std::vector<double>{}), InvalidArgument);
    }

    TEST_CASE("snapshot stream round trip") {
        std::vector<FieldState> snaps;
        for (int k = 0; k < 3; ++k) {
            FieldState s{0.25 * k, std::vector<double>(16), std::vector<double>(16)};
            for (int j = 0; j < 16; ++j) {
                s.u[j] = std::sin(0.1 * j + k) * 1e-3;
                s.eta[j] = std::cos(0.7 * j - k) / 3.0;
            }
            snaps.push_back(s);
        }
        const auto bytes = encode_snapshots(snaps, 16);
        CHECK(bytes.size() == 16 + 3 * 8 * (1 + 32));
        CHECK(std::equal(std::begin(kSnapshotMagic), std::end(kSnapshotMagic), bytes.begin()));
        const auto back = decode_snapshots(bytes);
        REQUIRE(back.size() == 3);
        for (int k = 0; k < 3; ++k) {
            CHECK(back[k].t == snaps[k].t);
            CHECK(back[k].u == snaps[k].u);
            CHECK(back[k].eta == snaps[k].eta);
        }
        auto truncated = bytes;
        truncated.resize(truncated.size() - 5);
        CHECK_THROWS(decode_snapshots(truncated));
        auto corrupt = bytes;
        corrupt[0] = 'X';
        CHECK_THROWS(decode_snapshots(corrupt));
    }

    TEST_CASE("rest-state run exits 0 with zero energy") {
        RunConfig c = parse_config(
            "params.A = 0\nparams.sigma = 1\nparams.mu = 0\nparams.Omega = 0\n"
            "u.zero = gaussian_bump a=0 w=1\ngrid.n = 64\nrun.t_end = 1\n");
        c.out_dir = scratch("rest").string();
        std::ostringstream log;
        CHECK(cmd_run(c, log) == kExitReachedEnd);
        const auto rows = read_csv(slurp(fs::path(c.out_dir) / "diagnostics.csv"));
        REQUIRE(rows.size() >= 3);
        for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][2] == "0");
        const auto verdict = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "verdict.json"));
        CHECK(verdict["exit_code"] == 0);
        CHECK(verdict["termination"]["kind"] == "reached_t_end");
        for (const char* f : {"certificate.json", "track_sup.csv", "track_inf.csv"})
            CHECK(fs::exists(fs::path(c.out_dir) / f));
    }

    TEST_CASE("exit codes partition outcomes") {
        CHECK(exit_code_for(Termination::reached_t_end) == 0);
        CHECK(exit_code_for(Termination::blowup_detected) == 2);
        CHECK(exit_code_for(Termination::invariant_violation) == 3);
        CHECK(exit_code_for(Termination::step_floor) == 3);

        RunConfig c = parse_config(kSmooth);
        c.out_dir = scratch("decay").string();
        c.L = 4.0;
        std::ostringstream log;
        CHECK(cmd_run(c, log) == kExitConfig);
    }

    TEST_CASE("repeated runs are byte-identical") {
        RunConfig c = parse_config(kSmooth);
        std::ostringstream log;
        const fs::path a = scratch("det_a"), b = scratch("det_b");
        c.out_dir = a.string();
        REQUIRE(cmd_run(c, log) == 0);
        c.out_dir = b.string();
        REQUIRE(cmd_run(c, log) == 0);
        for (const char* f : {"diagnostics.csv", "verdict.json", "certificate.json", "track_sup.csv", "snapshots.bin"})
            CHECK(slurp(a / f) == slurp(b / f));
    }

    TEST_CASE("single-point sweep reproduces a plain run") {
        RunConfig c = parse_config(kSmooth);
        c.out_dir = scratch("plain").string();
        std::ostringstream log;
        REQUIRE(cmd_run(c, log) == 0);
        SweepOptions opt;
        opt.template_text = kSmooth;
        opt.out_dir = scratch("sweep1").string();
        REQUIRE(cmd_sweep(opt, log) == 0);
        for (const char* f : {"diagnostics.csv", "verdict.json", "certificate.json"})
            CHECK(slurp(fs::path(opt.out_dir) / "run_0000" / f) == slurp(fs::path(c.out_dir) / f));
        const auto rows = read_csv(slurp(fs::path(opt.out_dir) / "summary.csv"));
        REQUIRE(rows.size() == 2);
        CHECK(rows[1][1] == "ok");
    }

    TEST_CASE("an invalid sweep row is flagged and the rest complete") {
        SweepOptions opt;
        opt.template_text = kSmooth + "sweep.params.A = 0.5, 6, 0.25\n";
        opt.out_dir = scratch("sweep_bad").string();
        opt.jobs = 2;
        std::ostringstream log;
        REQUIRE(cmd_sweep(opt, log) == 0);
        const auto rows = read_csv(slurp(fs::path(opt.out_dir) / "summary.csv"));
        REQUIRE(rows.size() == 4);
        CHECK(rows[1][1] == "ok");
        CHECK(rows[2][1] == "config_error");
        CHECK(rows[2].back().find("1-2*Omega*A") != std::string::npos);
        CHECK(rows[3][1] == "ok");
        CHECK(fs::exists(fs::path(opt.out_dir) / "run_0002" / "verdict.json"));
    }

    TEST_CASE("seed-list rows combine with sweep axes") {
        SweepOptions opt;
        opt.template_text = kSmooth + "sweep.params.mu = 0.1, 0.3\n";
        opt.seed_list_text = "# amplitudes\nu.bump = gaussian_bump a=0.1 w=2; run.t_end=0.25\n\nu.bump=gaussian_bump a=0.2 w=2\n";
        opt.out_dir = scratch("seeded").string();
        std::ostringstream log;
        REQUIRE(cmd_sweep(opt, log) == 0);
        const auto rows = read_csv(slurp(fs::path(opt.out_dir) / "summary.csv"));
        REQUIRE(rows.size() == 5);
        CHECK(rows[1][2] == "u.bump=gaussian_bump a=0.1 w=2;run.t_end=0.25;params.mu=0.1");
        CHECK(rows[1][1] == "ok");
        CHECK(rows[4][2] == "u.bump=gaussian_bump a=0.2 w=2;params.mu=0.3");
    }

    TEST_CASE("slope amplitude scan finds a cubic-moment certificate") {
        SweepOptions opt;
        opt.template_text =
            "params.A = 0\nparams.sigma = 1\nparams.mu = 0\nparams.Omega = 0\n"
            "u.s = slope_bump a=-1 w=0.05\ngrid.L = 3\ngrid.n = 1024\nrun.t_end = 1e-4\nthm42.M_assumed = 2\n"
            "sweep.u.s = slope_bump a=-1 w=0.05, slope_bump a=-10 w=0.05, slope_bump a=-300 w=0.05\n";
        opt.out_dir = scratch("thm42_scan").string();
        std::ostringstream log;
        REQUIRE(cmd_sweep(opt, log) == 0);
        const auto rows = read_csv(slurp(fs::path(opt.out_dir) / "summary.csv"));
        REQUIRE(rows.size() == 4);
        const auto& header = rows[0];
        const auto col = std::find(header.begin(), header.end(), "thm42_condition_met") - header.begin();
        bool any = false;
        for (std::size_t i = 1; i < rows.size(); ++i) any = any || rows[i][col] == "true";
        CHECK(any);
        CHECK(rows[1][col] == "false");
    }

    TEST_CASE("certify writes only the certificate") {
        RunConfig c = parse_config(kSmooth);
        c.out_dir = scratch("certify").string();
        std::ostringstream log;
        CHECK(cmd_certify(c, log) == 0);
        const auto cert = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "certificate.json"));
        CHECK(cert.contains("C"));
        CHECK_FALSE(fs::exists(fs::path(c.out_dir) / "diagnostics.csv"));
    }

    TEST_CASE("selftest contract") {
        SelftestOptions pristine;
        pristine.snapshot_every = 0;
        for (const auto& c : run_selftest(pristine)) {
            CAPTURE(c.name);
            CHECK(c.status != SelftestCheck::Status::fail);
        }
        const auto skipped = run_selftest(pristine);
        CHECK(std::count_if(skipped.begin(), skipped.end(), [](const SelftestCheck& c) {
                  return c.status == SelftestCheck::Status::skipped;
              }) == 2);

        SelftestOptions mutated = pristine;
        mutated.mutate = true;
        const auto m = run_selftest(mutated);
        const auto de = std::find_if(m.begin(), m.end(), [](const SelftestCheck& c) { return c.name == "double-entry formulas"; });
        REQUIRE(de != m.end());
        CHECK(de->status == SelftestCheck::Status::fail);
        std::ostringstream log;
        CHECK(cmd_selftest(mutated, log) == 1);
        CHECK(log.str().find("FAIL") != std::string::npos);
    }
}
