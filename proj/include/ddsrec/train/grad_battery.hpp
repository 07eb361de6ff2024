#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ddsrec/numerics/grad_check.hpp"
#include "ddsrec/numerics/parameters.hpp"
#include "ddsrec/train/model.hpp"

namespace ddsrec::train {

/// One randomized instance of a differentiable operation. Inputs live in
/// `store`; `apply` builds the output from them. The checked loss is
/// sum(output * R) for a fixed random R, so every output entry matters.
struct OpTrial {
    ParameterStore store;
    std::function<DiffMatrix(ForwardContext&)> apply;
    double backward_factor = 1.0;  // analytic = factor * numeric (gradient reversal)
};

struct OpCase {
    std::string name;
    std::function<OpTrial(std::mt19937_64&)> make;
};

/// Every tape operation plus the encoder/disentanglement building blocks.
std::vector<OpCase> op_cases();

struct BatteryEntry {
    std::string name;
    std::size_t trials = 0;
    GradCheckReport report;
};

struct BatteryReport {
    std::vector<BatteryEntry> entries;
    double seconds = 0.0;
    bool passed() const;
};

/// Runs `trials` randomized instances of each case.
BatteryReport run_op_battery(const std::vector<OpCase>& cases, std::size_t trials, std::uint64_t seed,
                             const GradCheckOptions& options = {1e-5, 1e-4});

/// End-to-end check of one variant on a micro model (d=8, one block, two
/// heads, 12 items, 4 categories, input length 6). Reversal makes the
/// backward signal differ from the derivative of any single scalar, so the
/// expected gradient is d(CE + l1*related)/dp + s * l2 * d(independent)/dp,
/// with s = +1 for discriminator weights and -1 for everything upstream.
GradCheckReport micro_model_check(Variant variant, std::uint64_t seed, const GradCheckOptions& options = {1e-5, 1e-3});

/// Op battery (100 trials each at 1e-4) plus the micro model for all variants
/// (1e-3).
BatteryReport run_grad_battery(std::uint64_t seed = 1, std::size_t trials = 100);

}  // namespace ddsrec::train
