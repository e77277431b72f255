#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qdarwin/branch_model.hpp"
#include "qdarwin/envariance.hpp"
#include "qdarwin/errors.hpp"
#include "qdarwin/experiment.hpp"
#include "qdarwin/info_metrics.hpp"
#include "qdarwin/qbm_analytic.hpp"

namespace py = pybind11;
using namespace qdarwin;

namespace {

EntropyUnit unit_of(const std::string& unit) {
    if (unit == "bits") return EntropyUnit::bits;
    if (unit == "nats") return EntropyUnit::nats;
    throw InvalidArgument("unit must be 'bits' or 'nats'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Core routines of the qdarwin C++ library";
    m.attr("__version__") = std::string(experiment::version());

    py::register_exception<NumericalGuard>(m, "NumericalGuard", PyExc_RuntimeError);
    py::register_exception<experiment::ConfigError>(m, "ConfigError", PyExc_ValueError);
    // InvalidArgument derives from std::invalid_argument, which pybind11 maps to ValueError

    py::class_<CouplingSet>(m, "CouplingSet")
        .def(py::init([](std::vector<double> g, double t) {
                 CouplingSet c{std::move(g), t};
                 c.validate();
                 return c;
             }),
             py::arg("g"), py::arg("t") = 0.0)
        .def_readonly("g", &CouplingSet::g)
        .def_readonly("t", &CouplingSet::t)
        .def("mean_coupling", &CouplingSet::mean_coupling)
        .def("action", &CouplingSet::action)
        .def("with_action", &CouplingSet::with_action, py::arg("a"))
        .def("__repr__", [](const CouplingSet& c) {
            return "CouplingSet(n_env=" + std::to_string(c.g.size()) + ", t=" + experiment::format_number(c.t) + ")";
        });

    py::class_<BranchState>(m, "BranchState")
        .def_property_readonly("n_branches", &BranchState::n_branches)
        .def_property_readonly("n_env", &BranchState::n_env)
        .def_property_readonly("amplitudes", &BranchState::amplitudes);

    py::class_<PipPoint>(m, "PipPoint")
        .def_readonly("m", &PipPoint::m)
        .def_readonly("f", &PipPoint::f)
        .def_readonly("mean", &PipPoint::mean)
        .def_readonly("stddev", &PipPoint::stddev);

    py::class_<PipCurve>(m, "PipCurve")
        .def_readonly("points", &PipCurve::points)
        .def_readonly("plateau", &PipCurve::plateau)
        .def_readonly("n_samples", &PipCurve::n_samples)
        .def_readonly("seed", &PipCurve::seed)
        .def_property_readonly("means", [](const PipCurve& c) {
            std::vector<double> out;
            for (const auto& p : c.points) out.push_back(p.mean);
            return out;
        });

    py::class_<RedundancyResult>(m, "RedundancyResult")
        .def_readonly("delta", &RedundancyResult::delta)
        .def_readonly("m_delta", &RedundancyResult::m_delta)
        .def_readonly("f_delta", &RedundancyResult::f_delta)
        .def_readonly("R_delta", &RedundancyResult::R_delta)
        .def_readonly("interpolated", &RedundancyResult::interpolated);

    m.def("sample_couplings", &sample_couplings, py::arg("n_env"), py::arg("seed"));
    m.def(
        "ising_evolve",
        [](const CouplingSet& c, std::optional<std::pair<Complex, Complex>> initial) {
            const Eigen::Vector2cd psi = initial ? Eigen::Vector2cd(initial->first, initial->second) : plus_state();
            return ising_evolve(c, psi);
        },
        py::arg("couplings"), py::arg("initial_system") = py::none(),
        "Evolve initial_system (x) |0...0>; default initial state is |+>.");

    m.def(
        "mutual_information",
        [](const BranchState& s, std::vector<std::size_t> fragment) {
            return mutual_information(s, FragmentSpec(SubsystemSet(std::move(fragment)), s.n_env()));
        },
        py::arg("state"), py::arg("fragment"), "I(S:F) in bits for the listed environment qubits.");
    m.def(
        "system_entropy",
        [](const BranchState& s) { return reduced_entropy(s, true, FragmentSpec::empty(s.n_env())); },
        py::arg("state"));

    m.def("pip_curve", &pip_curve, py::arg("state"), py::arg("n_samples"), py::arg("seed"), py::arg("threads") = 1,
          py::call_guard<py::gil_scoped_release>());
    m.def("redundancy", &redundancy, py::arg("state"), py::arg("delta"), py::arg("n_samples"), py::arg("seed"),
          py::arg("threads") = 1, py::call_guard<py::gil_scoped_release>());
    m.def("haar_pip", &haar_pip, py::arg("n_system"), py::arg("n_env"), py::arg("n_states"),
          py::arg("n_fragment_samples"), py::arg("seed"), py::arg("threads") = 1,
          py::call_guard<py::gil_scoped_release>());

    m.def(
        "born_via_envariance",
        [](const std::vector<Complex>& amplitudes, std::uint64_t max_denominator) {
            const auto r = born_via_envariance(amplitudes, max_denominator);
            std::vector<std::pair<std::uint64_t, std::uint64_t>> exact;
            for (const auto& q : r.exact) exact.emplace_back(q.num, q.den);
            return py::make_tuple(r.probabilities, exact);
        },
        py::arg("amplitudes"), py::arg("max_denominator") = 10000,
        "Returns (probabilities, [(numerator, denominator), ...]).");

    m.def(
        "qbm_mutual_information",
        [](const std::vector<double>& f, double h_s, const std::string& unit) {
            const auto c = qbm_mutual_information(QbmParams{h_s, unit_of(unit), 1.0, 1.0}, f);
            std::vector<double> out;
            for (const auto& p : c.points) out.push_back(p.value);
            return out;
        },
        py::arg("f"), py::arg("h_s") = 1.0, py::arg("unit") = "bits");
    m.def(
        "qbm_redundancy",
        [](double squeeze, double delta) { return qbm_redundancy(QbmParams{1.0, EntropyUnit::bits, squeeze, delta}); },
        py::arg("squeeze"), py::arg("delta") = 0.1);

    m.def(
        "run_experiment",
        [](const std::string& name, const std::map<std::string, std::string>& settings) {
            experiment::ExperimentConfig config;
            experiment::KeyValues pairs{{"experiment", name}};
            for (const auto& [k, v] : settings) pairs.emplace_back(k, v);
            auto diagnostics = experiment::apply_key_values(pairs, config);
            if (!diagnostics.empty()) throw experiment::ConfigError(std::move(diagnostics));
            py::gil_scoped_release release;
            const auto r = experiment::run(config);
            return std::make_pair(r.output_path, r.manifest_path);
        },
        py::arg("experiment"), py::arg("settings") = std::map<std::string, std::string>{},
        "Run a named experiment with key=value settings; returns (output_path, manifest_path).");
}
