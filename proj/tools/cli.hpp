#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oatlab/data.hpp"
#include "oatlab/trainer.hpp"

namespace oatlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;

/// Config problem: malformed JSON, bad field, missing path, invalid knob.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct DatasetSpec {
    enum class Kind { Blobs, Mnist, Cifar10 };
    Kind kind = Kind::Blobs;
    // blobs
    std::size_t classes = 3;
    std::size_t per_class = 100;
    std::size_t dim = 2;
    float spread = 1.0f;
    std::uint32_t seed = 0;
    // mnist
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    // cifar10
    std::filesystem::path dir;
};

struct ModelSpec {
    enum class Kind { Mlp, LightweightCifar };
    Kind kind = Kind::Mlp;
    std::vector<std::size_t> hidden{16}; // mlp only
};

/// One experiment: data source, model, and training knobs.
struct RunSpec {
    DatasetSpec dataset;
    ModelSpec model;
    TrainConfig train;
    bool eval_mode_explicit = false; // false: eval mode follows the training mode
    std::filesystem::path output_dir = "oat_run";
};

RunSpec parse_run_spec_file(const std::filesystem::path& config_file);
RunSpec parse_run_spec_json(const std::string& text);

std::pair<Dataset, Dataset> load_datasets(const DatasetSpec& spec);
Network<float> build_network(const ModelSpec& model, const Dataset& train,
                             std::uint32_t seed);

/// Runs one experiment from a JSON config and writes metrics.csv plus
/// summary.json into the output directory.
int cmd_train(const std::filesystem::path& config_file,
              const std::optional<std::filesystem::path>& out_override,
              const std::optional<std::uint32_t>& seed_override, std::ostream& log);

/// Runs conventional-vs-oat cells along one axis (lr, batch_size or
/// pretrain_epochs) and writes sweep.csv; failed cells are recorded and do
/// not abort the rest.
int cmd_sweep(const std::filesystem::path& config_file, const std::string& axis,
              const std::string& values_csv,
              const std::optional<std::filesystem::path>& out_override, std::ostream& log);

/// Runs the library property suite; prints one PASS/FAIL line per property.
int cmd_verify(std::ostream& out);

} // namespace oatlab::cli
