#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "adatm/error.hpp"
#include "adatm/report.hpp"
#include "adatm/scenario.hpp"
#include "adatm/simulation.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kNonQuiescent = 3 };

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw adatm::UsageError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw adatm::UsageError("cannot write " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active Data airspace congestion simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_path, format = "csv", events_path;
    std::size_t max_steps = adatm::scenario::SimulationOptions{}.max_steps;
    bool full = false;

    auto* simulate_cmd = app.add_subcommand("simulate", "run the Active Data simulation");
    simulate_cmd->add_option("scenario", scenario_path, "scenario JSON file")->required();
    simulate_cmd->add_option("--out", out_path, "report destination (default stdout)");
    simulate_cmd->add_option("--format", format, "csv, json or text")->check(CLI::IsMember({"csv", "json", "text"}));
    simulate_cmd->add_option("--max-steps", max_steps, "scheduler step budget")->check(CLI::PositiveNumber);
    simulate_cmd->add_flag("--full", full, "report every subsector and bucket");
    simulate_cmd->add_option("--events", events_path, "write the event log here");

    auto* oracle = app.add_subcommand("oracle", "centralised brute-force recomputation");
    oracle->add_option("scenario", scenario_path, "scenario JSON file")->required();
    oracle->add_option("--out", out_path, "report destination (default stdout)");
    oracle->add_option("--format", format, "csv, json or text")->check(CLI::IsMember({"csv", "json", "text"}));
    oracle->add_flag("--full", full, "report every subsector and bucket");

    std::string a_path, b_path;
    auto* diff = app.add_subcommand("diff", "compare two reports (csv or json)");
    diff->add_option("a", a_path, "first report")->required();
    diff->add_option("b", b_path, "second report")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    using namespace adatm::scenario;
    try {
        if (*diff) {
            const auto result = diff_reports(parse_report(read_file(a_path)), parse_report(read_file(b_path)));
            std::cout << (result.empty() ? "no differences\n" : result.text());
            return kOk;
        }

        const auto scenario = load_scenario(read_file(scenario_path));
        const auto fmt = parse_report_format(format);
        if (*oracle) {
            write_output(out_path, render_report(run_oracle(scenario, full), fmt));
            return kOk;
        }

        SimulationOptions options;
        options.max_steps = max_steps;
        options.full = full;
        const auto result = simulate(scenario, options);
        write_output(out_path, render_report(result.report, fmt));
        if (!events_path.empty()) write_output(events_path, result.log_text());
        if (!result.report.complete) {
            std::cerr << "adatm: step budget exhausted before quiescence\n";
            return kNonQuiescent;
        }
        return kOk;
    } catch (const adatm::UsageError& e) {
        std::cerr << "adatm: " << e.what() << "\n";
        return kUsage;
    } catch (const adatm::ParseError& e) {
        std::cerr << "adatm: invalid input " << e.what() << "\n";
        return kValidation;
    } catch (const adatm::Error& e) {
        std::cerr << "adatm: " << e.what() << "\n";
        return kValidation;
    }
}
