#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "r2ch/certificates.hpp"
#include "r2ch/commands.hpp"
#include "r2ch/report.hpp"
#include "r2ch/spectral.hpp"

namespace py = pybind11;
using namespace r2ch;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw InvalidArgument("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

Array to_array(const std::vector<double>& v) {
    Array out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

FieldState make_state(const Array& u, const Array& eta, double t = 0.0) {
    return {t, to_vector(u), to_vector(eta)};
}

template <class Fn>
auto field_op(Fn fn) {
    return [fn](const Array& f, const Grid& g) { return to_array(fn(to_vector(f), g)); };
}

py::dict samples_dict(const std::vector<DiagnosticRow>& rows) {
    auto column = [&](auto get) {
        Array a(static_cast<py::ssize_t>(rows.size()));
        auto* p = a.mutable_data();
        for (std::size_t i = 0; i < rows.size(); ++i) p[i] = get(rows[i]);
        return a;
    };
    py::dict d;
    d["t"] = column([](const DiagnosticRow& r) { return r.t; });
    d["dt"] = column([](const DiagnosticRow& r) { return r.dt; });
    d["E"] = column([](const DiagnosticRow& r) { return r.E; });
    d["E_drift_rel"] = column([](const DiagnosticRow& r) { return r.E_drift_rel; });
    d["sup_ux"] = column([](const DiagnosticRow& r) { return r.sup_ux; });
    d["inf_ux"] = column([](const DiagnosticRow& r) { return r.inf_ux; });
    d["sup_abs_eta"] = column([](const DiagnosticRow& r) { return r.sup_abs_eta; });
    d["min_rho"] = column([](const DiagnosticRow& r) { return r.min_rho; });
    d["m3"] = column([](const DiagnosticRow& r) { return r.m3; });
    d["f_sup_abs"] = column([](const DiagnosticRow& r) { return r.f_sup_abs; });
    d["boundary_leak"] = column([](const DiagnosticRow& r) { return r.boundary_leak; });
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral simulator and bound checker for the rotating two-component Camassa-Holm system";

    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Grid>(m, "Grid")
        .def(py::init<double, std::size_t>(), py::arg("half_length"), py::arg("n"))
        .def_property_readonly("half_length", &Grid::half_length)
        .def_property_readonly("n", &Grid::n)
        .def_property_readonly("dx", &Grid::dx)
        .def("nodes", [](const Grid& g) { return to_array(g.nodes()); })
        .def("__repr__", [](const Grid& g) {
            return "Grid(half_length=" + format_double(g.half_length()) + ", n=" + std::to_string(g.n()) + ")";
        });

    py::class_<PhysParams>(m, "PhysParams")
        .def(py::init<double, double, double, double>(), py::arg("A"), py::arg("sigma"), py::arg("mu"),
             py::arg("Omega"))
        .def_property_readonly("A", &PhysParams::A)
        .def_property_readonly("sigma", &PhysParams::sigma)
        .def_property_readonly("mu", &PhysParams::mu)
        .def_property_readonly("Omega", &PhysParams::Omega)
        .def_property_readonly("stiffness", &PhysParams::stiffness);

    m.def("classify_regime", [](const PhysParams& p) {
        const auto f = classify_regime(p);
        py::dict d;
        d["scenario_sigma_pos"] = f.scenario_sigma_pos;
        d["blowup_sigma_neg"] = f.blowup_sigma_neg;
        d["blowup_sigma_one"] = f.blowup_sigma_one;
        return d;
    });

    m.def("deriv", field_op([](const std::vector<double>& f, const Grid& g) { return deriv(f, g); }));
    m.def("helmholtz_conv",
          field_op([](const std::vector<double>& f, const Grid& g) { return helmholtz_conv(f, g); }));
    m.def("helmholtz_conv_dx",
          field_op([](const std::vector<double>& f, const Grid& g) { return helmholtz_conv_dx(f, g); }));
    m.def("dealias", field_op([](const std::vector<double>& f, const Grid& g) { return dealias(f, g); }));
    m.def(
        "direct_conv_oracle",
        [](const Array& f, const Grid& g, const std::string& kernel) {
            if (kernel != "p" && kernel != "dxp") throw InvalidArgument("kernel must be 'p' or 'dxp'");
            return to_array(direct_conv_oracle(to_vector(f), g, kernel == "p" ? KernelTag::p : KernelTag::dxp));
        },
        py::arg("field"), py::arg("grid"), py::arg("kernel") = "p");

    m.def(
        "rhs",
        [](const Array& u, const Array& eta, const PhysParams& p, const Grid& g) {
            const auto t = rhs(make_state(u, eta), p, g);
            return py::make_tuple(to_array(t.du_dt), to_array(t.deta_dt));
        },
        py::arg("u"), py::arg("eta"), py::arg("params"), py::arg("grid"));
    m.def(
        "eval_f",
        [](const Array& u, const Array& eta, const PhysParams& p, const Grid& g) {
            return to_array(eval_f(make_state(u, eta), p, g));
        },
        py::arg("u"), py::arg("eta"), py::arg("params"), py::arg("grid"));
    m.def(
        "energy",
        [](const Array& u, const Array& eta, const PhysParams& p, const Grid& g) {
            return energy(make_state(u, eta), p, g);
        },
        py::arg("u"), py::arg("eta"), py::arg("params"), py::arg("grid"));

    m.def("constant_C", &constant_C, py::arg("E0"), py::arg("rho0_sup"), py::arg("params"));
    m.def("lemma31_ceiling", &lemma31_ceiling, py::arg("u0x_sup_norm"), py::arg("rho0_sup"), py::arg("C"),
          py::arg("params"));
    m.def("k2_bound", &k2_bound, py::arg("C"), py::arg("rho0_sup"), py::arg("params"));
    m.def("thm41_T1_bound", &thm41_T1_bound, py::arg("slope"), py::arg("C"), py::arg("params"));
    m.def("thm42_constant_N", &thm42_constant_N, py::arg("E0"), py::arg("M_assumed"), py::arg("params"));
    m.def("thm42_T_bound", &thm42_T_bound, py::arg("m0"), py::arg("E0"), py::arg("N"));

    py::class_<RunConfig>(m, "RunConfig")
        .def_property_readonly("params", [](const RunConfig& c) { return c.params; })
        .def_property_readonly("grid", &RunConfig::grid)
        .def_readwrite("t_end", &RunConfig::t_end)
        .def_readwrite("G", &RunConfig::G)
        .def_readwrite("out_dir", &RunConfig::out_dir)
        .def_readwrite("snapshot_every", &RunConfig::snapshot_every);
    m.def("parse_config", &parse_config, py::arg("text"));

    m.def(
        "initial_state",
        [](const RunConfig& c) {
            const Grid g = c.grid();
            const FieldState s = synthesize(c.initial, g);
            return py::make_tuple(to_array(g.nodes()), to_array(s.u), to_array(s.eta));
        },
        py::arg("config"));

    m.def(
        "certify",
        [](const RunConfig& c) {
            const Grid g = c.grid();
            return certificate_json(build_certificate(synthesize(c.initial, g), c.params, g, c.M_assumed), c);
        },
        py::arg("config"), "Certificate for the initial data as a JSON string");

    m.def(
        "simulate",
        [](const RunConfig& c) {
            std::optional<Analysis> run_result;
            {
                py::gil_scoped_release release;
                run_result.emplace(analyze(c));
            }
            const Analysis& a = *run_result;
            py::dict d;
            d["exit_code"] = a.exit_code;
            d["termination"] = to_string(a.record.termination.kind);
            d["t_final"] = a.record.termination.t;
            d["samples"] = samples_dict(a.record.samples);
            d["u"] = to_array(a.record.final_state.u);
            d["eta"] = to_array(a.record.final_state.eta);
            d["certificate"] = certificate_json(a.certificate, c);
            d["verdict"] = verdict_json(a);
            return d;
        },
        py::arg("config"), "Run the analysis pipeline and return diagnostics, final fields and JSON reports");

    m.def(
        "selftest",
        [](bool mutate, std::size_t snapshot_every) {
            SelftestOptions o;
            o.mutate = mutate;
            o.snapshot_every = snapshot_every;
            py::list out;
            for (const auto& c : run_selftest(o)) {
                const char* s = c.status == SelftestCheck::Status::pass   ? "pass"
                                : c.status == SelftestCheck::Status::fail ? "fail"
                                                                          : "skipped";
                out.append(py::make_tuple(c.name, s, c.detail));
            }
            return out;
        },
        py::arg("mutate") = false, py::arg("snapshot_every") = 1);
}
