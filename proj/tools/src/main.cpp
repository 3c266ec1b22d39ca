#include "lobexec_tools/pipeline.hpp"

#include <lobexec/error.hpp>

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

namespace {

int exit_code(const std::string& code) {
    static const std::map<std::string, int> codes{{"usage", 2}, {"config", 3}, {"parse", 4},
                                                   {"io", 5},    {"numeric", 6}, {"sim", 7}};
    const auto it = codes.find(code);
    return it == codes.end() ? 1 : it->second;
}

int fail(const std::string& code, std::string message) {
    for (auto& c : message) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    std::cerr << "error code=" << code << " message=\"" << message << "\"\n";
    return exit_code(code);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace lobexec::pipeline;

    CLI::App app{"Limit order book execution: simulation, risk-sensitive Q-learning and policy trees"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override every seed in the configuration");
    app.add_option("--out", out_dir, "Output directory")->capture_default_str();

    const std::vector<std::pair<std::string, std::function<std::string(const Context&)>>> commands{
        {"synth", cmd_synth},
        {"ingest", cmd_ingest},
        {"calibrate", cmd_calibrate},
        {"select", cmd_select},
        {"train", cmd_train},
        {"sweep-beta", cmd_sweep_beta},
        {"extract-tree", cmd_extract_tree},
        {"evaluate", cmd_evaluate},
    };
    const std::map<std::string, std::string> help{
        {"synth", "Generate a synthetic tick file"},
        {"ingest", "Validate and normalize a tick CSV"},
        {"calibrate", "Grid-search simulator parameters by KL divergence"},
        {"select", "Select state variables with Dantzig-LSTD and LSPI"},
        {"train", "Train a risk-sensitive Q table"},
        {"sweep-beta", "Train and evaluate one policy per risk parameter"},
        {"extract-tree", "Convert the trained table into a decision tree"},
        {"evaluate", "Compare the tree policy with benchmark strategies"},
    };
    for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name))->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what());
    }

    try {
        const auto ctx = make_context(config_path, seed, out_dir);
        for (const auto& [name, fn] : commands) {
            if (app.got_subcommand(name)) {
                std::cout << fn(ctx) << '\n';
                return 0;
            }
        }
        return fail("usage", "no subcommand");
    } catch (const lobexec::Error& e) {
        return fail(e.code(), e.what());
    } catch (const std::exception& e) {
        return fail("internal", e.what());
    }
}
