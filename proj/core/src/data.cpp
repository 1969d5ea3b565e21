#include "oatlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include <zlib.h>

#include "oatlab/errors.hpp"

namespace oatlab {

namespace {

std::vector<unsigned char> read_binary_file(const std::filesystem::path& path) {
    if (path.extension() == ".gz") {
        gzFile gz = gzopen(path.string().c_str(), "rb");
        if (gz == nullptr) {
            throw FormatError("cannot open " + path.string());
        }
        std::vector<unsigned char> out;
        unsigned char chunk[1 << 16];
        int n = 0;
        while ((n = gzread(gz, chunk, sizeof(chunk))) > 0) {
            out.insert(out.end(), chunk, chunk + n);
        }
        const bool ok = n == 0;
        gzclose(gz);
        if (!ok) {
            throw FormatError("gzip read failed for " + path.string());
        }
        return out;
    }
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw FormatError("cannot open " + path.string());
    }
    std::vector<unsigned char> out((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
    return out;
}

std::uint32_t be_u32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

Tensor<float> one_hot(const std::vector<std::uint8_t>& labels, std::size_t class_count) {
    Tensor<float> out({labels.size(), class_count});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out.at(i, labels[i]) = 1.0f;
    }
    return out;
}

/// Per-channel mean/std over [N x ch x h x w] (population std, clamped away
/// from zero so constant channels stay finite).
NormStats channel_stats(const Tensor<float>& inputs) {
    const std::size_t n = inputs.dim(0);
    const std::size_t ch = inputs.dim(1);
    const std::size_t plane = inputs.dim(2) * inputs.dim(3);
    NormStats stats;
    stats.mean.resize(ch);
    stats.stddev.resize(ch);
    const float* p = inputs.data();
    for (std::size_t c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* base = p + (i * ch + c) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                acc += base[k];
            }
        }
        const double mean = acc / double(n * plane);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* base = p + (i * ch + c) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                const double d = base[k] - mean;
                var += d * d;
            }
        }
        stats.mean[c] = float(mean);
        stats.stddev[c] = float(std::max(std::sqrt(var / double(n * plane)), 1e-8));
    }
    return stats;
}

void standardize(Tensor<float>& inputs, const NormStats& stats) {
    const std::size_t n = inputs.dim(0);
    const std::size_t ch = inputs.dim(1);
    const std::size_t plane = inputs.dim(2) * inputs.dim(3);
    float* p = inputs.data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < ch; ++c) {
            float* base = p + (i * ch + c) * plane;
            for (std::size_t k = 0; k < plane; ++k) {
                base[k] = (base[k] - stats.mean[c]) / stats.stddev[c];
            }
        }
    }
}

constexpr std::size_t kCifarRecordBytes = 3073;
constexpr std::size_t kCifarPixels = 3072;

/// Appends one file's records as [0,1]-scaled pixels and raw labels.
void parse_cifar_file(const std::filesystem::path& path, std::vector<float>& pixels,
                      std::vector<std::uint8_t>& labels) {
    const auto bytes = read_binary_file(path);
    if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
        throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                          " is not a multiple of " + std::to_string(kCifarRecordBytes));
    }
    const std::size_t records = bytes.size() / kCifarRecordBytes;
    pixels.reserve(pixels.size() + records * kCifarPixels);
    labels.reserve(labels.size() + records);
    for (std::size_t r = 0; r < records; ++r) {
        const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
        if (rec[0] > 9) {
            throw FormatError(path.string() + ": record " + std::to_string(r) +
                              " has label byte " + std::to_string(rec[0]));
        }
        labels.push_back(rec[0]);
        for (std::size_t k = 0; k < kCifarPixels; ++k) {
            pixels.push_back(float(rec[1 + k]) / 255.0f);
        }
    }
}

Dataset assemble_images(std::vector<float> pixels, std::vector<std::uint8_t> labels,
                        std::vector<std::size_t> sample_shape, std::size_t class_count,
                        Split split, const NormStats* train_stats) {
    std::vector<std::size_t> shape{labels.size()};
    shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
    Dataset ds;
    ds.inputs = Tensor<float>(std::move(shape), std::move(pixels));
    ds.labels = one_hot(labels, class_count);
    ds.class_count = class_count;
    ds.split = split;
    ds.norm = train_stats != nullptr ? *train_stats : channel_stats(ds.inputs);
    standardize(ds.inputs, ds.norm);
    return ds;
}

} // namespace

std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& dir) {
    std::vector<float> train_pixels;
    std::vector<std::uint8_t> train_labels;
    for (int i = 1; i <= 5; ++i) {
        parse_cifar_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), train_pixels,
                         train_labels);
    }
    std::vector<float> test_pixels;
    std::vector<std::uint8_t> test_labels;
    parse_cifar_file(dir / "test_batch.bin", test_pixels, test_labels);

    Dataset train = assemble_images(std::move(train_pixels), std::move(train_labels),
                                    {3, 32, 32}, 10, Split::Train, nullptr);
    Dataset test = assemble_images(std::move(test_pixels), std::move(test_labels), {3, 32, 32},
                                   10, Split::Test, &train.norm);
    return {std::move(train), std::move(test)};
}

namespace {

constexpr std::uint32_t kIdxImageMagic = 2051;
constexpr std::uint32_t kIdxLabelMagic = 2049;

Dataset load_idx_pair(const std::filesystem::path& image_path,
                      const std::filesystem::path& label_path, Split split,
                      const NormStats* train_stats) {
    const auto img = read_binary_file(image_path);
    const auto lab = read_binary_file(label_path);
    if (img.size() < 16 || be_u32(img.data()) != kIdxImageMagic) {
        throw FormatError(image_path.string() + ": bad IDX image magic");
    }
    if (lab.size() < 8 || be_u32(lab.data()) != kIdxLabelMagic) {
        throw FormatError(label_path.string() + ": bad IDX label magic");
    }
    const std::size_t n_img = be_u32(img.data() + 4);
    const std::size_t rows = be_u32(img.data() + 8);
    const std::size_t cols = be_u32(img.data() + 12);
    const std::size_t n_lab = be_u32(lab.data() + 4);
    if (n_img != n_lab) {
        throw FormatError("IDX count mismatch: " + std::to_string(n_img) + " images vs " +
                          std::to_string(n_lab) + " labels");
    }
    if (n_img == 0) {
        throw FormatError(image_path.string() + ": IDX file contains no images");
    }
    if (rows != 28 || cols != 28) {
        throw FormatError(image_path.string() + ": expected 28x28 images, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (img.size() != 16 + n_img * rows * cols || lab.size() != 8 + n_lab) {
        throw FormatError(image_path.string() + ": IDX payload size does not match header");
    }
    std::vector<float> pixels;
    pixels.reserve(n_img * rows * cols);
    for (std::size_t k = 0; k < n_img * rows * cols; ++k) {
        pixels.push_back(float(img[16 + k]) / 255.0f);
    }
    std::vector<std::uint8_t> labels(lab.begin() + 8, lab.end());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] > 9) {
            throw FormatError(label_path.string() + ": record " + std::to_string(i) +
                              " has label byte " + std::to_string(labels[i]));
        }
    }
    return assemble_images(std::move(pixels), std::move(labels), {1, rows, cols}, 10, split,
                           train_stats);
}

} // namespace

Dataset load_mnist_idx(const std::filesystem::path& image_path,
                       const std::filesystem::path& label_path) {
    return load_idx_pair(image_path, label_path, Split::Train, nullptr);
}

Dataset load_mnist_idx(const std::filesystem::path& image_path,
                       const std::filesystem::path& label_path, const NormStats& train_stats) {
    return load_idx_pair(image_path, label_path, Split::Test, &train_stats);
}

namespace {

/// [0,1) with 53 bits, pinned to the engine stream.
double unit_uniform(std::mt19937& gen) {
    const std::uint64_t hi = gen() >> 5;
    const std::uint64_t lo = gen() >> 6;
    return double((hi << 26) | lo) * (1.0 / 9007199254740992.0);
}

/// Box-Muller standard normal; two engine draws per sample.
double gaussian(std::mt19937& gen) {
    const double u1 = 1.0 - unit_uniform(gen); // (0, 1]
    const double u2 = unit_uniform(gen);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

} // namespace

std::pair<Dataset, Dataset> synth_blobs(std::size_t class_count, std::size_t per_class,
                                        std::size_t dim, float spread, std::uint32_t seed) {
    if (class_count < 2 || dim < 2) {
        throw ContractError("synth_blobs: need class_count >= 2 and dim >= 2");
    }
    if (per_class < 2) {
        throw ContractError("synth_blobs: need per_class >= 2 so both splits are non-empty");
    }
    if (spread < 0.0f) {
        throw ContractError("synth_blobs: spread must be non-negative");
    }
    const double radius = 6.0 * double(spread);
    const std::size_t train_per_class = std::max<std::size_t>(1, per_class * 4 / 5);
    const std::size_t test_per_class = per_class - train_per_class;

    std::mt19937 gen(seed);
    std::vector<float> train_vals;
    std::vector<float> test_vals;
    std::vector<std::uint8_t> train_labels;
    std::vector<std::uint8_t> test_labels;
    train_vals.reserve(class_count * train_per_class * dim);
    test_vals.reserve(class_count * test_per_class * dim);

    for (std::size_t cls = 0; cls < class_count; ++cls) {
        const double angle = 2.0 * 3.14159265358979323846 * double(cls) / double(class_count);
        std::vector<double> center(dim, 0.0);
        center[0] = radius * std::cos(angle);
        center[1] = radius * std::sin(angle);
        for (std::size_t p = 0; p < per_class; ++p) {
            const bool is_train = p < train_per_class;
            auto& vals = is_train ? train_vals : test_vals;
            auto& labels = is_train ? train_labels : test_labels;
            for (std::size_t d = 0; d < dim; ++d) {
                vals.push_back(float(center[d] + double(spread) * gaussian(gen)));
            }
            labels.push_back(std::uint8_t(cls));
        }
    }

    auto make = [&](std::vector<float> vals, std::vector<std::uint8_t> labels, Split split) {
        Dataset ds;
        ds.inputs = Tensor<float>({labels.size(), dim}, std::move(vals));
        ds.labels = one_hot(labels, class_count);
        ds.class_count = class_count;
        ds.split = split;
        ds.norm.mean.assign(1, 0.0f); // blob coordinates are used as-is
        ds.norm.stddev.assign(1, 1.0f);
        return ds;
    };
    return {make(std::move(train_vals), std::move(train_labels), Split::Train),
            make(std::move(test_vals), std::move(test_labels), Split::Test)};
}

std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle, std::uint32_t seed,
                                     std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle && n > 1) {
        std::seed_seq seq{seed, std::uint32_t(epoch & 0xffffffffu),
                          std::uint32_t(epoch >> 32)};
        std::mt19937 gen(seq);
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = gen() % (i + 1);
            std::swap(order[i], order[j]);
        }
    }
    return order;
}

Batch gather_batch(const Dataset& ds, const std::size_t* indices, std::size_t count) {
    const std::size_t n = ds.size();
    const std::size_t sample_elems = n == 0 ? 0 : ds.inputs.size() / n;
    const std::size_t c = ds.class_count;
    Batch batch;
    batch.indices.assign(indices, indices + count);
    std::vector<std::size_t> in_shape{count};
    in_shape.insert(in_shape.end(), ds.inputs.shape().begin() + 1, ds.inputs.shape().end());
    batch.inputs = Tensor<float>(std::move(in_shape));
    batch.labels = Tensor<float>({count, c});
    for (std::size_t r = 0; r < count; ++r) {
        const std::size_t src = batch.indices[r];
        std::memcpy(batch.inputs.data() + r * sample_elems,
                    ds.inputs.data() + src * sample_elems, sample_elems * sizeof(float));
        std::memcpy(batch.labels.data() + r * c, ds.labels.data() + src * c,
                    c * sizeof(float));
    }
    return batch;
}

std::vector<Batch> epoch_batches(const Dataset& ds, std::size_t batch_size, bool shuffle,
                                 std::uint32_t seed, std::size_t epoch) {
    if (batch_size < 1) {
        throw ContractError("epoch_batches: batch_size must be >= 1");
    }
    const std::size_t n = ds.size();
    const std::vector<std::size_t> order = epoch_order(n, shuffle, seed, epoch);
    std::vector<Batch> batches;
    batches.reserve((n + batch_size - 1) / batch_size);
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t b = std::min(batch_size, n - start);
        batches.push_back(gather_batch(ds, order.data() + start, b));
    }
    return batches;
}

} // namespace oatlab
