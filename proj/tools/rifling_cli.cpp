// rifling: run experiments from JSON configs, list and emit presets.

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rifling/cli.hpp"

namespace {

using namespace rifling;
using namespace rifling::cli;

int report(const std::string& kind, const std::string& message, const std::string& path, int code) {
    std::cerr << error_report(kind, message, path).dump() << "\n";
    return code;
}

// Maps library exceptions to exit codes with a one-line JSON report on stderr.
template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        return report("config", e.what(), e.path(), kExitParse);
    } catch (const InvalidArgument& e) {
        return report("invalid-argument", e.what(), "", kExitParse);
    } catch (const CapacityError& e) {
        return report("capacity", e.what(), "", kExitSolver);
    } catch (const SolverError& e) {
        return report("solver", e.what(), "", kExitSolver);
    } catch (const std::exception& e) {
        return report("internal", e.what(), "", kExitFailure);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Driven qubit-resonator simulations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", RIFLING_VERSION);

    std::string config_path, output_dir, preset_name;
    long workers = -1;

    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("config", config_path, "JSON config")->required();
    run->add_option("-o,--output", output_dir, "output directory (overrides the config)");
    run->add_option("-j,--workers", workers, "worker threads (0 = available parallelism)")->check(CLI::NonNegativeNumber);

    auto* validate = app.add_subcommand("validate", "parse and check a config without running it");
    validate->add_option("config", config_path, "JSON config")->required();

    auto* presets = app.add_subcommand("presets", "built-in configurations");
    presets->require_subcommand(1);
    auto* list = presets->add_subcommand("list", "list preset names");
    auto* emit = presets->add_subcommand("emit", "print a preset config");
    emit->add_option("name", preset_name, "preset name")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParse;
    }

    if (*run)
        return guarded([&] {
            RunConfig c = load_config(config_path);
            if (workers >= 0) c.workers = static_cast<std::size_t>(workers);
            if (auto* rc = std::get_if<RabiCurveConfig>(&c.protocol)) rc->options.workers = c.workers;
            const std::filesystem::path dir = output_dir.empty() ? std::filesystem::path(c.output) : std::filesystem::path(output_dir);
            const RunOutcome o = cli::run(c, dir);
            std::cout << "{\"status\":\"" << (o.exit_code == kExitOk ? "ok" : "partial") << "\",\"config_hash\":\"" << c.hash
                      << "\",\"output\":" << json(dir.string()).dump() << ",\"failures\":" << o.failures << "}\n";
            return o.exit_code;
        });
    if (*validate)
        return guarded([&] {
            const RunConfig c = load_config(config_path);
            std::cout << "{\"status\":\"ok\",\"experiment\":\"" << experiment_name(c.experiment) << "\",\"config_hash\":\"" << c.hash
                      << "\"}\n";
            return kExitOk;
        });
    if (*list) {
        for (const auto& p : all_presets()) std::cout << p.name << "\t" << p.description << "\n";
        return kExitOk;
    }
    if (*emit)
        return guarded([&] {
            std::cout << find_preset(preset_name).config.dump(2) << "\n";
            return kExitOk;
        });
    return kExitFailure;
}
