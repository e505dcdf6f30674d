#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "cvqrng/config.hpp"
#include "cvqrng/error.hpp"
#include "cvqrng/pipeline.hpp"

namespace {

struct Flags {
    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::string> seed_file;
    std::optional<std::uint64_t> rng_seed;
    std::optional<unsigned> threads;
    std::optional<std::string> input;
};

cvqrng::config::RunConfig resolve(const Flags& flags) {
    auto config = flags.config_path.empty() ? cvqrng::config::RunConfig{}
                                            : cvqrng::config::load_config(flags.config_path);
    if (flags.out) config.output_dir = *flags.out;
    if (flags.seed_file) config.seed_file = *flags.seed_file;
    if (flags.rng_seed) config.rng_seed = *flags.rng_seed;
    if (flags.threads) config.threads = *flags.threads;
    config.validate();
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vacuum-fluctuation QRNG simulator: simulate, calibrate, extract, test, attack, verify"};
    app.fallthrough();
    app.require_subcommand(1);

    Flags flags;
    app.add_option("--config", flags.config_path, "Run configuration file")->check(CLI::ExistingFile);
    app.add_option("--out", flags.out, "Output directory (overrides [run] output_dir)");
    app.add_option("--seed-file", flags.seed_file, "Toeplitz seed file (overrides [extractor] seed_file)");
    app.add_option("--rng-seed", flags.rng_seed, "Global simulation seed (overrides [run] rng_seed)");
    app.add_option("--threads", flags.threads, "Worker threads (overrides [run] threads)")
        ->check(CLI::Range(1u, 256u));

    auto* simulate = app.add_subcommand("simulate", "Simulate detector output; write raw.bin and diagnostics");
    auto* calibrate = app.add_subcommand("calibrate", "Run a power sweep, fit the calibration line, log it");
    auto* extract = app.add_subcommand("extract", "Hash raw.bin into output.bin with the latest calibration");
    auto* test = app.add_subcommand("test", "Run the statistical battery on the extracted bits");
    test->add_option("--input", flags.input, "Bitstream to test (default: output.bin in the output directory)")
        ->check(CLI::ExistingFile);
    auto* attack = app.add_subcommand("attack", "Simulate the squeezed-state attack with fixed and random LO");
    auto* verify = app.add_subcommand("verify", "Run the security property checks; nonzero exit on violation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    namespace p = cvqrng::pipeline;
    try {
        const auto config = resolve(flags);
        p::CommandResult result;
        if (simulate->parsed()) result = p::cmd_simulate(config);
        else if (calibrate->parsed()) result = p::cmd_calibrate(config);
        else if (extract->parsed()) result = p::cmd_extract(config);
        else if (test->parsed())
            result = p::cmd_test(config, flags.input ? std::optional<std::filesystem::path>(*flags.input)
                                                     : std::nullopt);
        else if (attack->parsed()) result = p::cmd_attack(config);
        else if (verify->parsed()) result = p::cmd_verify(config);
        std::cout << result.summary;
        for (const auto& a : result.artifacts) std::cout << "wrote " << a.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return p::exit_code_for(e);
    }
}
