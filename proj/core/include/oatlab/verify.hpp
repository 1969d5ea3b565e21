#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oatlab/tensor.hpp"

namespace oatlab::verify {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail; // deterministic; no timing or addresses
};

/// Runs every property check. Deterministic: repeated calls produce
/// identical results and detail strings.
std::vector<PropertyResult> run_all();

/// Inverse transform under test: (anchor probs [1xC], preds [BxC]) -> scores.
using InverseFn =
    std::function<Tensor<float>(const Tensor<float>&, const Tensor<float>&)>;

/// Max per-element error of inverse(anchor, targets(label, anchor)) against
/// the one-hot label over `pairs` random cases. Exposed with a pluggable
/// inverse so tests can confirm a broken transform is caught.
double roundtrip_max_error(std::uint32_t seed, std::size_t pairs, std::size_t class_count,
                           const InverseFn& inverse);

} // namespace oatlab::verify
