#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "holonomy/runner.hpp"

// Command-line front end. Exit codes: 0 all checks pass, 1 a check failed,
// 2 bad config or arguments, 3 numerical failure.

int main(int argc, char** argv) {
    CLI::App app{"action-angle holonomy engine: gauge generators, curvature and loop angles"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    int jobs = 0;
    int seed = 0;

    const std::pair<const char*, const char*> subs[] = {
        {"curvature", "curvature two-form entries along the configured loop"},
        {"hannay", "loop angle by the line and surface routes"},
        {"agp", "generator, direct and time-averaged matrix elements at the base point"},
        {"verify", "slow-drive extrapolation against the line route, plus identity checks"},
        {"genosc-table", "oscillator family numeric vs closed-form reference table"},
    };
    for (const auto& [name, help] : subs) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_override, "output directory, overrides the config");
        sub->add_option("--jobs", jobs, "worker threads, overrides the config");
        sub->add_option("--seed", seed, "reserved for stochastic extensions, currently unused");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // --help exits cleanly, real argument errors are config errors
    }
    const std::string subname = app.get_subcommands().front()->get_name();

    try {
        std::ifstream f(config_path);
        if (!f) {
            std::fprintf(stderr, "cannot read config file: %s\n", config_path.c_str());
            return 2;
        }
        std::stringstream ss;
        ss << f.rdbuf();
        holonomy::RunConfig cfg = holonomy::parse_config(ss.str());
        if (!out_override.empty()) cfg.out_dir = out_override;
        if (jobs > 0) cfg.opts.jobs = jobs;
        (void)seed;
        return holonomy::run_subcommand(cfg, subname);
    } catch (const holonomy::ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const holonomy::ValidationError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const holonomy::Error& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected failure: %s\n", e.what());
        return 3;
    }
}
