#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"oat-lab: train and compare conventional vs anchor-relative classifiers"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::uint32_t seed = 0;
    bool seed_set = false;

    auto* train = app.add_subcommand("train", "run one experiment from a JSON config");
    train->add_option("--config", config, "JSON config file")->required();
    train->add_option("--out", out, "output directory (overrides config)");
    train->add_option("--seed", seed, "seed override")->each([&](const std::string&) {
        seed_set = true;
    });

    std::string axis;
    std::string values;
    auto* sweep = app.add_subcommand("sweep", "run both modes across one axis of values");
    sweep->add_option("--config", config, "JSON config file")->required();
    sweep->add_option("--axis", axis, "lr | batch_size | pretrain_epochs")->required();
    sweep->add_option("--values", values, "comma-separated axis values")->required();
    sweep->add_option("--out", out, "output directory (overrides config)");

    app.add_subcommand("verify", "run the library property suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? oatlab::cli::kExitOk : oatlab::cli::kExitConfigError;
    }

    const std::optional<std::filesystem::path> out_override =
        out.empty() ? std::nullopt : std::optional<std::filesystem::path>(out);

    if (train->parsed()) {
        const std::optional<std::uint32_t> seed_override =
            seed_set ? std::optional<std::uint32_t>(seed) : std::nullopt;
        return oatlab::cli::cmd_train(config, out_override, seed_override, std::cout);
    }
    if (sweep->parsed()) {
        return oatlab::cli::cmd_sweep(config, axis, values, out_override, std::cout);
    }
    return oatlab::cli::cmd_verify(std::cout);
}
