#pragma once

#include <cstddef>
#include <vector>

namespace ddsrec::repdis {

struct ProbeResult {
    double accuracy = 0.0;  // on the held-out rows
    double chance = 0.0;    // majority-class rate on the held-out rows
    double excess() const noexcept { return accuracy - chance; }
};

/// Fits a fresh softmax-regression probe on standardized features of the first
/// `train_rows` rows and scores it on the rest. Deterministic: zero init,
/// full-batch gradient descent.
ProbeResult probe_accuracy(const std::vector<std::vector<double>>& features, const std::vector<std::size_t>& labels,
                           std::size_t classes, std::size_t train_rows, std::size_t iterations = 300,
                           double learning_rate = 0.5);

}  // namespace ddsrec::repdis
