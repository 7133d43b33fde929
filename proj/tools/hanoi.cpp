#include "hanoi/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Spectral and resistance experiments on graph approximations of the Hanoi attractor"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    bool quiet = false;
    std::optional<std::size_t> level, subdivisions, threads;
    std::optional<double> beta;
    std::optional<std::string> backend;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (overrides outputs.directory)");
        sub->add_flag("--quiet", quiet, "suppress the summary on stdout");
        sub->add_option("--level", level, "graph level m");
        sub->add_option("--subdivisions", subdivisions, "segments per line edge s");
        sub->add_option("--beta", beta, "line-mass ratio beta in (0, 1/3)");
        sub->add_option("--backend", backend, "counting backend")->check(CLI::IsMember({"dense", "inertia"}));
        sub->add_option("--threads", threads, "worker threads for grid sweeps (0 = all cores)");
    };
    auto* validate = app.add_subcommand("validate", "check sequence conditions and graph invariants");
    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues and multiplicities");
    auto* counting = app.add_subcommand("counting", "counting function, exponent fit, Weyl ratio");
    auto* resistance = app.add_subcommand("resistance", "compatibility, cell diameters, dimension fit");
    for (auto* s : {validate, spectrum, counting, resistance}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : hanoi::kExitConfig;
    }

    try {
        hanoi::RunConfig cfg = hanoi::load_config(config_path);
        if (!out_dir.empty()) cfg.outputs.directory = out_dir;
        if (level) cfg.level = *level;
        if (subdivisions) cfg.subdivisions = *subdivisions;
        if (beta) cfg.beta = *beta;
        if (backend) cfg.solver.backend = *backend;
        if (threads) cfg.solver.threads = *threads;
        hanoi::validate_config(cfg);

        hanoi::CommandOutcome res;
        if (validate->parsed())
            res = hanoi::cmd_validate(cfg);
        else if (spectrum->parsed())
            res = hanoi::cmd_spectrum(cfg);
        else if (counting->parsed())
            res = hanoi::cmd_counting(cfg);
        else
            res = hanoi::cmd_resistance(cfg);

        if (!quiet) {
            for (const auto& l : res.lines) std::cout << l << '\n';
            for (const auto& f : res.files) std::cout << "wrote " << f << '\n';
        }
        return res.exit_code;
    } catch (const hanoi::Error& e) {
        std::cerr << "error [" << e.kind() << "]: " << e.what() << '\n';
        return hanoi::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return hanoi::kExitNumerical;
    }
}
