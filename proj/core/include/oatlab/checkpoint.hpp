#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "oatlab/errors.hpp"
#include "oatlab/nnet.hpp"

namespace oatlab {

// Checkpoint container: "OATNET" + version byte, scalar width, class count,
// input shape, layer specs, then raw parameter bytes per layer. Parameters
// round-trip bitwise on the writing machine.

namespace detail {

inline constexpr char kCheckpointMagic[6] = {'O', 'A', 'T', 'N', 'E', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& is, const char* what) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
    return v;
}

} // namespace detail

template <typename T>
void save_network(const Network<T>& net, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw FormatError("cannot open checkpoint for writing: " + path.string());
    }
    os.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    const std::uint8_t version = detail::kCheckpointVersion;
    const std::uint8_t scalar_bytes = sizeof(T);
    os.write(reinterpret_cast<const char*>(&version), 1);
    os.write(reinterpret_cast<const char*>(&scalar_bytes), 1);
    detail::write_u64(os, net.class_count);
    detail::write_u64(os, net.input_shape.size());
    for (std::size_t d : net.input_shape) {
        detail::write_u64(os, d);
    }
    detail::write_u64(os, net.layers.size());
    for (const LayerSpec& layer : net.layers) {
        const std::uint8_t kind = static_cast<std::uint8_t>(layer.kind);
        os.write(reinterpret_cast<const char*>(&kind), 1);
        detail::write_u64(os, layer.in);
        detail::write_u64(os, layer.out);
        detail::write_u64(os, layer.in_channels);
        detail::write_u64(os, layer.out_channels);
        detail::write_u64(os, layer.kernel);
    }
    auto write_tensor = [&](const Tensor<T>& t) {
        detail::write_u64(os, t.rank());
        for (std::size_t d : t.shape()) {
            detail::write_u64(os, d);
        }
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(T)));
    };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        write_tensor(net.weights[i]);
        write_tensor(net.biases[i]);
    }
    if (!os) {
        throw FormatError("write failed for checkpoint: " + path.string());
    }
}

template <typename T>
Network<T> load_network(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw FormatError("cannot open checkpoint: " + path.string());
    }
    char magic[sizeof(detail::kCheckpointMagic)] = {};
    if (!is.read(magic, sizeof(magic)) ||
        std::memcmp(magic, detail::kCheckpointMagic, sizeof(magic)) != 0) {
        throw FormatError("not a network checkpoint: " + path.string());
    }
    std::uint8_t version = 0;
    std::uint8_t scalar_bytes = 0;
    is.read(reinterpret_cast<char*>(&version), 1);
    is.read(reinterpret_cast<char*>(&scalar_bytes), 1);
    if (!is || version != detail::kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version in " + path.string());
    }
    if (scalar_bytes != sizeof(T)) {
        throw FormatError("checkpoint scalar width " + std::to_string(scalar_bytes) +
                          " does not match requested width " + std::to_string(sizeof(T)));
    }
    Network<T> net;
    net.class_count = detail::read_u64(is, "class count");
    const std::uint64_t in_rank = detail::read_u64(is, "input rank");
    net.input_shape.resize(in_rank);
    for (auto& d : net.input_shape) {
        d = detail::read_u64(is, "input shape");
    }
    const std::uint64_t layer_count = detail::read_u64(is, "layer count");
    net.layers.resize(layer_count);
    for (auto& layer : net.layers) {
        std::uint8_t kind = 0;
        if (!is.read(reinterpret_cast<char*>(&kind), 1) || kind > 4) {
            throw FormatError("bad layer kind in " + path.string());
        }
        layer.kind = static_cast<LayerSpec::Kind>(kind);
        layer.in = detail::read_u64(is, "layer in");
        layer.out = detail::read_u64(is, "layer out");
        layer.in_channels = detail::read_u64(is, "layer in_channels");
        layer.out_channels = detail::read_u64(is, "layer out_channels");
        layer.kernel = detail::read_u64(is, "layer kernel");
    }
    auto read_tensor = [&]() {
        const std::uint64_t rank = detail::read_u64(is, "tensor rank");
        std::vector<std::size_t> shape(rank);
        std::size_t n = rank == 0 ? 0 : 1;
        for (auto& d : shape) {
            d = detail::read_u64(is, "tensor shape");
            n *= d;
        }
        std::vector<T> vals(n);
        if (n > 0 &&
            !is.read(reinterpret_cast<char*>(vals.data()),
                     static_cast<std::streamsize>(n * sizeof(T)))) {
            throw FormatError("checkpoint truncated while reading parameters");
        }
        return Tensor<T>(std::move(shape), std::move(vals));
    };
    net.weights.reserve(layer_count);
    net.biases.reserve(layer_count);
    for (std::uint64_t i = 0; i < layer_count; ++i) {
        net.weights.push_back(read_tensor());
        net.biases.push_back(read_tensor());
    }
    net.net_id = detail::next_network_id();
    net.revision = 0;
    return net;
}

} // namespace oatlab
