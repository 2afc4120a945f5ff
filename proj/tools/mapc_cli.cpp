// Scenario runner and comparison harness for the mapc library.
//
//   mapc run <scenario> [--methods ...] [--seed N] [--out DIR]
//            [--cube FILE] [--dump-intermediates]
//   mapc ingest <raw> --config <cfg> [--frame J] [--subtract-frame K] [--out FILE]
//   mapc report <results-dir>
//
// Exit codes: 0 success, 2 config error, 3 numerical error, 4 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mapc/mapc.hpp"

namespace {

int cmd_run(const std::string& scenario, const std::vector<std::string>& methods,
            std::optional<std::uint64_t> seed, const std::string& out_dir,
            std::optional<std::string> cube, bool dump) {
    mapc::RunSpec spec;
    spec.scenario_path = scenario;
    if (!methods.empty()) spec.methods = methods;
    spec.seed = seed;
    spec.out_dir = out_dir;
    spec.cube_path = std::move(cube);
    spec.dump_intermediates = dump;

    const mapc::RunOutcome outcome = mapc::run_scenario(spec);
    for (const mapc::MethodOutcome& m : outcome.methods) {
        if (m.ok)
            std::cout << m.name << ": wrote " << (outcome.out_dir / (m.name + ".csv")).string()
                      << "\n";
        else
            std::cerr << m.name << ": FAILED: " << m.error << "\n";
    }
    std::cout << "report: " << (outcome.out_dir / "report.json").string() << "\n";
    return outcome.all_ok() ? mapc::kExitOk : mapc::kExitNumerical;
}

int cmd_ingest(const std::string& raw, const std::string& config_path, std::size_t frame,
               std::optional<std::size_t> subtract, const std::string& out_path) {
    const mapc::Scenario sc = mapc::load_scenario(config_path);
    const mapc::DataCube cube = mapc::ingest_raw(raw, sc.config, frame, subtract);
    mapc::write_cube(out_path, cube);
    std::cout << "wrote " << out_path << " (" << cube.fast_time_samples() << " x "
              << cube.total_chirps() << " x " << cube.num_rx() << ")\n";
    return mapc::kExitOk;
}

int cmd_report(const std::string& dir) {
    const std::filesystem::path path = std::filesystem::path(dir) / "report.json";
    std::ifstream is(path);
    if (!is) throw mapc::io_error("cannot open " + path.string());
    nlohmann::json j;
    is >> j;

    std::cout << "seed: " << j.value("seed", 0ULL) << "\n";
    for (const auto& m : j["methods"]) {
        std::cout << m.value("name", "?") << ":";
        if (!m.value("ok", false)) {
            std::cout << " FAILED (" << m.value("error", "") << ")\n";
            continue;
        }
        std::cout << " psl_db=" << m.value("psl_db", 0.0) << " sinr_db=[";
        bool first = true;
        for (const auto& s : m["sinr_db"]) {
            std::cout << (first ? "" : ", ") << s.get<double>();
            first = false;
        }
        std::cout << "]\n";
    }
    for (const auto& p : j["pairs"])
        std::cout << p.value("reference", "?") << " - " << p.value("other", "?")
                  << ": mu_delta targets=" << p.value("mu_delta_targets", 0.0)
                  << " other=" << p.value("mu_delta_other", 0.0) << "\n";
    return mapc::kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"slow-time coded FMCW MIMO radar simulation and APC comparison"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a scenario and write profiles plus report");
    std::string scenario, run_out = "out";
    std::vector<std::string> methods;
    std::uint64_t seed_value = 0;
    std::string cube_file;
    bool dump = false;
    run->add_option("scenario", scenario, "scenario config file")->required();
    run->add_option("--methods", methods,
                    "subset of: hann_mf apc_baseline apc_proposed (default all)");
    auto* seed_opt = run->add_option("--seed", seed_value, "noise seed override");
    run->add_option("--out", run_out, "output directory");
    auto* cube_opt = run->add_option("--cube", cube_file, "raw frame file instead of synthesis");
    run->add_flag("--dump-intermediates", dump, "write pulse-doppler/angle grids and cells");

    auto* ingest = app.add_subcommand("ingest", "validate and convert a raw frame file");
    std::string raw_path, ingest_cfg, ingest_out = "cube.mapc";
    std::size_t frame = 0;
    std::size_t subtract_value = 0;
    ingest->add_option("raw", raw_path, "raw frame file")->required();
    ingest->add_option("--config", ingest_cfg, "scenario config for validation")->required();
    ingest->add_option("--frame", frame, "frame index (default 0)");
    auto* subtract_opt =
        ingest->add_option("--subtract-frame", subtract_value, "background frame to subtract");
    ingest->add_option("--out", ingest_out, "output cube path");

    auto* report = app.add_subcommand("report", "print the summary of a results directory");
    std::string report_dir;
    report->add_option("dir", report_dir, "results directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            std::optional<std::uint64_t> seed;
            if (seed_opt->count()) seed = seed_value;
            std::optional<std::string> cube;
            if (cube_opt->count()) cube = cube_file;
            return cmd_run(scenario, methods, seed, run_out, cube, dump);
        }
        if (ingest->parsed()) {
            std::optional<std::size_t> subtract;
            if (subtract_opt->count()) subtract = subtract_value;
            return cmd_ingest(raw_path, ingest_cfg, frame, subtract, ingest_out);
        }
        return cmd_report(report_dir);
    } catch (const mapc::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return mapc::kExitConfig;
    } catch (const mapc::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return mapc::kExitNumerical;
    } catch (const mapc::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return mapc::kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return mapc::kExitNumerical;
    }
}
