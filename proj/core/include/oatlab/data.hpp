#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "oatlab/tensor.hpp"

namespace oatlab {

enum class Split { Train, Test };

/// Per-channel statistics used to standardize inputs. Always computed on the
/// train split; the test split reuses them.
struct NormStats {
    std::vector<float> mean;
    std::vector<float> stddev;
};

struct Dataset {
    Tensor<float> inputs; // [N x D] or [N x ch x h x w], standardized
    Tensor<float> labels; // one-hot [N x C]
    std::size_t class_count = 0;
    Split split = Split::Train;
    NormStats norm;

    std::size_t size() const { return inputs.rank() == 0 ? 0 : inputs.dim(0); }
};

struct Batch {
    Tensor<float> inputs;
    Tensor<float> labels;
    std::vector<std::size_t> indices; // source positions in the dataset

    std::size_t size() const { return indices.size(); }
};

/// Loads the six-file binary CIFAR-10 layout (data_batch_1..5.bin plus
/// test_batch.bin): 3073-byte records of one label byte and 3072 channel-major
/// pixels. Pixels are scaled to [0,1] and standardized with train-split
/// per-channel statistics.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir);

/// Loads an IDX image/label pair (big-endian magics 2051/2049, 28x28 images,
/// labels 0-9). Pixels scaled to [0,1] and standardized with statistics
/// computed from this data; the result is marked as the train split.
/// Files ending in .gz are decompressed transparently.
Dataset load_mnist_idx(const std::filesystem::path& image_path,
                       const std::filesystem::path& label_path);

/// Same, but standardizes with the provided train-split statistics and marks
/// the result as the test split.
Dataset load_mnist_idx(const std::filesystem::path& image_path,
                       const std::filesystem::path& label_path, const NormStats& train_stats);

/// Seed-determined Gaussian blobs: class centers equally spaced on a circle
/// of radius 6*spread in the first two coordinates (zero elsewhere), points
/// drawn as center + N(0, spread^2) per coordinate. Each class splits 80/20
/// into train/test.
std::pair<Dataset, Dataset> synth_blobs(std::size_t class_count, std::size_t per_class,
                                        std::size_t dim, float spread, std::uint32_t seed);

/// Row order for one epoch: dataset order, or a permutation that is a pure
/// function of (seed, epoch) when shuffling.
std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle, std::uint32_t seed,
                                     std::size_t epoch);

/// Copies the given dataset rows into one batch.
Batch gather_batch(const Dataset& ds, const std::size_t* indices, std::size_t count);

/// Splits a dataset into consecutive batches, keeping the final partial
/// batch. With shuffle the permutation is a pure function of (seed, epoch);
/// without it, dataset order. Large loops that should not hold a whole
/// epoch's copies at once can compose epoch_order and gather_batch instead;
/// both paths produce identical batches.
std::vector<Batch> epoch_batches(const Dataset& ds, std::size_t batch_size, bool shuffle,
                                 std::uint32_t seed, std::size_t epoch);

} // namespace oatlab
