// Command-line front end: verify | orbit | linearize | darboux | report,
// each driven by a config file. Exit codes: 0 pass, 2 residual violations
// (artifacts still written), 1 errors.

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "liouville/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"numerical toolkit for integrable systems and symplectic normal forms"};
    app.require_subcommand(1);

    struct sub_options {
        std::string config;
        std::string out;
        long long seed = -1;
    };
    std::map<std::string, sub_options> opts;
    const char* descriptions[][2] = {
        {"verify", "closedness, nondegeneracy, and commutation/cocycle report"},
        {"orbit", "period lattice and orbit topology at a point"},
        {"linearize", "canonical (f, theta) coordinates near a regular orbit"},
        {"darboux", "full pipeline: commuting family + Darboux chart near a point"},
        {"report", "bundle prior outputs into one report"},
    };
    for (auto& [name, blurb] : descriptions) {
        auto* sub = app.add_subcommand(name, blurb);
        auto& o = opts[name];
        sub->add_option("--config", o.config, "config file path")->required();
        sub->add_option("--out", o.out, "output directory (overrides [output] dir)");
        sub->add_option("--seed", o.seed, "seed override for sampled diagnostics");
    }

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    const auto& o = opts[command];
    try {
        std::optional<std::uint64_t> seed;
        if (o.seed >= 0) seed = static_cast<std::uint64_t>(o.seed);
        return liouville::cli::run(command, o.config, o.out, seed, std::cout);
    } catch (const liouville::parse_error& e) {
        std::cerr << o.config << ":" << e.line << ":" << e.column << ": error: "
                  << e.what() << "\n";
        return 1;
    } catch (const liouville::pipeline_stage_error& e) {
        std::cerr << "error in " << command << " " << e.what() << "\n";
        return 1;
    } catch (const liouville::toolkit_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
}
