// Command-line front end: run, batch and export scenarios.

#include "marvin/marvin.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

const char* kEnvHelp = R"(
Environment (UDP transport only; overrides scenario 'network' settings):
  MARVIN_DETECTION_ADDR      host:port of the detection topic  (default 127.0.0.1:47001)
  MARVIN_TRACKER_ADDR        host:port of the tracker topic    (default 127.0.0.1:47002)
  MARVIN_COMMAND_HOST        host of the per-chaser command ports (default 127.0.0.1)
  MARVIN_COMMAND_BASE_PORT   first command port; chaser i listens on base+i (default 48001)

Exit status is 0 when every requested run completed, whatever the mission
outcome; nonzero on configuration or I/O errors.
)";

struct Common {
    std::optional<std::uint64_t> seed;
    std::string transport;
    std::string out;
};

marvin::RunOptions options(const Common& c) {
    marvin::RunOptions o;
    o.seed = c.seed;
    if (c.transport == "udp") o.transport = marvin::TransportKind::Udp;
    if (c.transport == "inproc") o.transport = marvin::TransportKind::InProcess;
    return o;
}

void print_outcomes(const marvin::RunReport& r) {
    std::printf("%s", marvin::batch_table({marvin::summarize(r)}).c_str());
    const auto& m = r.metrics;
    std::printf("sim time %.2f s, %d cycles, min inter-chaser %.3f m, min panel clearance %.3f m, "
                "keep-out penetrations %d\n",
                m.sim_time_s, m.cycles, m.min_inter_chaser_m, m.min_panel_clearance_m, m.keepout_penetrations);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chaser swarm docking simulator"};
    app.footer(kEnvHelp);
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", common.seed, "Override the scenario RNG seed");
        sub->add_option("--transport", common.transport, "Message transport")
            ->check(CLI::IsMember({"inproc", "udp"}));
        sub->add_option("--out", common.out, "Output directory");
    };

    std::string scenario_path;
    auto* run_cmd = app.add_subcommand("run", "Run one scenario and print its outcome");
    run_cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    add_common(run_cmd);

    std::string batch_dir;
    std::string batch_format = "text";
    auto* batch_cmd = app.add_subcommand("batch", "Run every *.json scenario in a directory and print a results table");
    batch_cmd->add_option("dir", batch_dir, "Scenario directory")->required();
    batch_cmd->add_option("--format", batch_format, "Summary format")->check(CLI::IsMember({"text", "csv"}));
    add_common(batch_cmd);

    std::string export_path;
    std::string export_format = "csv";
    auto* export_cmd = app.add_subcommand("export", "Run a scenario and write its trajectory CSV or JSON report");
    export_cmd->add_option("scenario", export_path, "Scenario JSON file")->required();
    export_cmd->add_option("--format", export_format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    add_common(export_cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto opt = options(common);
        if (*run_cmd) {
            const auto report = marvin::run(marvin::load_scenario(scenario_path), opt);
            print_outcomes(report);
            if (!common.out.empty()) {
                marvin::export_report(report, marvin::ExportFormat::Json, common.out);
                marvin::export_report(report, marvin::ExportFormat::Csv, common.out);
            }
            return report.completed ? 0 : 1;
        }
        if (*batch_cmd) {
            const auto result = marvin::batch(batch_dir, opt);
            const std::string summary =
                batch_format == "csv" ? marvin::batch_csv(result.rows) : marvin::batch_table(result.rows);
            std::cout << summary;
            if (!common.out.empty()) {
                std::filesystem::create_directories(common.out);
                marvin::write_file(std::filesystem::path(common.out) / "summary.csv", marvin::batch_csv(result.rows));
                marvin::write_file(std::filesystem::path(common.out) / "summary.txt", marvin::batch_table(result.rows));
                for (const auto& r : result.reports) marvin::export_report(r, marvin::ExportFormat::Json, common.out);
            }
            const bool all = std::all_of(result.reports.begin(), result.reports.end(),
                                         [](const auto& r) { return r.completed; });
            return all ? 0 : 1;
        }
        if (*export_cmd) {
            const auto report = marvin::run(marvin::load_scenario(export_path), opt);
            const auto fmt = export_format == "json" ? marvin::ExportFormat::Json : marvin::ExportFormat::Csv;
            if (common.out.empty()) {
                std::cout << (fmt == marvin::ExportFormat::Json ? marvin::report_to_json_text(report)
                                                                : marvin::trajectory_csv(report));
            } else {
                std::cerr << "wrote " << marvin::export_report(report, fmt, common.out).string() << "\n";
            }
            return report.completed ? 0 : 1;
        }
    } catch (const marvin::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const marvin::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
