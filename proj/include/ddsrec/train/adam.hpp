#pragma once

#include <cstddef>
#include <vector>

#include "ddsrec/numerics/parameters.hpp"

namespace ddsrec::train {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First and second moment estimates per parameter plus the step counter.
struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::size_t step = 0;

    AdamState() = default;
    explicit AdamState(const ParameterStore& params);
};

/// One bias-corrected Adam update. Throws NumericalError naming the parameter
/// if any gradient entry is non-finite, and std::invalid_argument on a state
/// shape mismatch. Parameters are left untouched when it throws.
void adam_step(ParameterStore& params, const GradientSet& grads, AdamState& state, const AdamOptions& options);

}  // namespace ddsrec::train
