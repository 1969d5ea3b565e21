#pragma once

// Deterministic stand-in for the MNIST IDX pair when the real files are not
// on disk: 5x7 font digits scaled to 3x, randomly placed in a 28x28 frame
// with brightness jitter and background speckle, written in genuine IDX byte
// format so the production loader parses them unchanged.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

namespace oatlab::testsupport {

struct IdxPair {
    std::filesystem::path images;
    std::filesystem::path labels;
};

namespace detail {

inline constexpr std::uint8_t kDigitFont[10][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}, // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}, // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}, // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}, // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}, // 9
};

inline void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

inline void render_digit(std::vector<std::uint8_t>& image, std::uint8_t digit,
                         std::mt19937& gen) {
    const std::size_t x0 = gen() % 13; // glyph is 15 wide after 3x scaling
    const std::size_t y0 = gen() % 7;  // and 21 tall
    const std::uint8_t base = std::uint8_t(110 + gen() % 120);
    for (std::size_t gy = 0; gy < 7; ++gy) {
        for (std::size_t gx = 0; gx < 5; ++gx) {
            if ((kDigitFont[digit][gy] >> (4 - gx)) & 1u) {
                for (std::size_t dy = 0; dy < 3; ++dy) {
                    for (std::size_t dx = 0; dx < 3; ++dx) {
                        if (gen() % 6 == 0) {
                            continue; // eroded stroke pixel
                        }
                        const std::size_t x = x0 + 3 * gx + dx;
                        const std::size_t y = y0 + 3 * gy + dy;
                        const int jitter = int(gen() % 81) - 40;
                        int v = int(base) + jitter;
                        v = v < 0 ? 0 : (v > 255 ? 255 : v);
                        image[y * 28 + x] = std::uint8_t(v);
                    }
                }
            }
        }
    }
    // background speckle bright enough to distract
    for (int s = 0; s < 40; ++s) {
        const std::size_t at = gen() % (28 * 28);
        image[at] = std::max(image[at], std::uint8_t(gen() % 100));
    }
}

} // namespace detail

/// Writes one IDX image/label pair of `count` digit images into `dir`.
inline IdxPair write_digit_idx_pair(const std::filesystem::path& dir,
                                    const std::string& stem, std::size_t count,
                                    std::uint32_t seed) {
    std::filesystem::create_directories(dir);
    std::mt19937 gen(seed);
    std::vector<std::uint8_t> images;
    detail::append_be32(images, 2051);
    detail::append_be32(images, std::uint32_t(count));
    detail::append_be32(images, 28);
    detail::append_be32(images, 28);
    std::vector<std::uint8_t> labels;
    detail::append_be32(labels, 2049);
    detail::append_be32(labels, std::uint32_t(count));

    for (std::size_t i = 0; i < count; ++i) {
        const std::uint8_t digit = std::uint8_t(i % 10); // balanced classes
        std::vector<std::uint8_t> image(28 * 28, 0);
        detail::render_digit(image, digit, gen);
        images.insert(images.end(), image.begin(), image.end());
        labels.push_back(digit);
    }

    IdxPair pair{dir / (stem + "-images-idx3-ubyte"), dir / (stem + "-labels-idx1-ubyte")};
    std::ofstream(pair.images, std::ios::binary)
        .write(reinterpret_cast<const char*>(images.data()), std::streamsize(images.size()));
    std::ofstream(pair.labels, std::ios::binary)
        .write(reinterpret_cast<const char*>(labels.data()), std::streamsize(labels.size()));
    return pair;
}

} // namespace oatlab::testsupport
