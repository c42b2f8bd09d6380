#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "adatm/error.hpp"
#include "adatm/kernel.hpp"
#include "adatm/report.hpp"
#include "adatm/scenario.hpp"
#include "adatm/simulation.hpp"

namespace py = pybind11;
using namespace adatm;

namespace {

using EventTuple = std::tuple<std::uint64_t, std::string, std::string, std::string>;

std::vector<EventTuple> to_tuples(const std::vector<RuntimeEvent>& events) {
    std::vector<EventTuple> out;
    out.reserve(events.size());
    for (const auto& e : events) out.emplace_back(e.seq, std::string(to_string(e.type)), e.datum_id, e.detail);
    return out;
}

} // namespace

PYBIND11_MODULE(_adatm, m) {
    m.doc() = "Active Data airspace congestion simulator";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<UsageError>(m, "UsageError", base.ptr());

    m.def(
        "normalize_scenario",
        [](const std::string& text) { return scenario::dump_scenario(scenario::load_scenario(text)); },
        py::arg("text"), "Parse and validate a scenario; returns its canonical JSON.");

    m.def(
        "simulate",
        [](const std::string& text, std::size_t max_steps, bool full, double storm_threshold) {
            const auto s = scenario::load_scenario(text);
            scenario::SimulationResult result;
            {
                py::gil_scoped_release release;
                result = scenario::simulate(s, {max_steps, storm_threshold, full});
            }
            return py::make_tuple(scenario::render_report(result.report, scenario::ReportFormat::Json),
                                  to_tuples(result.events));
        },
        py::arg("text"), py::arg("max_steps") = scenario::SimulationOptions{}.max_steps, py::arg("full") = false,
        py::arg("storm_threshold") = scenario::SimulationOptions{}.storm_threshold,
        "Run the simulation; returns (report JSON, events).");

    m.def(
        "oracle",
        [](const std::string& text, bool full, double storm_threshold) {
            const auto s = scenario::load_scenario(text);
            py::gil_scoped_release release;
            return scenario::render_report(scenario::run_oracle(s, full, storm_threshold), scenario::ReportFormat::Json);
        },
        py::arg("text"), py::arg("full") = false, py::arg("storm_threshold") = 0.75,
        "Centralised recomputation; returns report JSON.");

    m.def(
        "render",
        [](const std::string& report, const std::string& format) {
            return scenario::render_report(scenario::parse_report(report), scenario::parse_report_format(format));
        },
        py::arg("report"), py::arg("format"), "Re-render a JSON or CSV report as csv, json or text.");

    m.def(
        "diff",
        [](const std::string& a, const std::string& b) {
            const auto d = scenario::diff_reports(scenario::parse_report(a), scenario::parse_report(b));
            std::vector<std::tuple<std::string, int, int, std::int64_t, std::string>> out;
            for (const auto& e : d.entries)
                out.emplace_back(std::string(scenario::to_string(e.kind)), e.cell.col, e.cell.row, e.bucket_start,
                                 e.detail);
            return out;
        },
        py::arg("a"), py::arg("b"), "Differences between the record sections of two reports.");

    m.def("noisy_or", &kernel::noisy_or, py::arg("a"), py::arg("b"));
}
