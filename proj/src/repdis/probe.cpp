#include "ddsrec/repdis/probe.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddsrec::repdis {

ProbeResult probe_accuracy(const std::vector<std::vector<double>>& features, const std::vector<std::size_t>& labels,
                           std::size_t classes, std::size_t train_rows, std::size_t iterations,
                           double learning_rate) {
    const std::size_t n = features.size();
    if (n != labels.size() || train_rows == 0 || train_rows >= n || classes == 0) {
        throw std::invalid_argument("probe_accuracy: need matching rows and a non-empty train/test split");
    }
    const std::size_t dim = features.front().size();

    std::vector<double> mean(dim, 0.0), inv_sd(dim, 1.0);
    for (std::size_t r = 0; r < train_rows; ++r) {
        for (std::size_t j = 0; j < dim; ++j) mean[j] += features[r][j];
    }
    for (double& m : mean) m /= static_cast<double>(train_rows);
    for (std::size_t j = 0; j < dim; ++j) {
        double var = 0.0;
        for (std::size_t r = 0; r < train_rows; ++r) var += (features[r][j] - mean[j]) * (features[r][j] - mean[j]);
        var /= static_cast<double>(train_rows);
        inv_sd[j] = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
    }
    std::vector<std::vector<double>> x(n, std::vector<double>(dim + 1, 1.0));  // last column: bias
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < dim; ++j) x[r][j] = (features[r][j] - mean[j]) * inv_sd[j];
    }

    std::vector<double> w((dim + 1) * classes, 0.0), grad(w.size()), probs(classes);
    auto logits_of = [&](std::size_t r) {
        for (std::size_t c = 0; c < classes; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j <= dim; ++j) s += x[r][j] * w[j * classes + c];
            probs[c] = s;
        }
    };
    for (std::size_t it = 0; it < iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t r = 0; r < train_rows; ++r) {
            logits_of(r);
            const double mx = *std::max_element(probs.begin(), probs.end());
            double z = 0.0;
            for (double& p : probs) z += (p = std::exp(p - mx));
            for (std::size_t c = 0; c < classes; ++c) {
                const double g = probs[c] / z - (labels[r] == c ? 1.0 : 0.0);
                for (std::size_t j = 0; j <= dim; ++j) grad[j * classes + c] += g * x[r][j];
            }
        }
        const double step = learning_rate / static_cast<double>(train_rows);
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= step * grad[k];
    }

    std::vector<std::size_t> counts(classes, 0);
    std::size_t correct = 0;
    for (std::size_t r = train_rows; r < n; ++r) {
        logits_of(r);
        const auto pred = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        correct += pred == labels[r];
        ++counts.at(labels[r]);
    }
    const double held_out = static_cast<double>(n - train_rows);
    return {static_cast<double>(correct) / held_out,
            static_cast<double>(*std::max_element(counts.begin(), counts.end())) / held_out};
}

}  // namespace ddsrec::repdis
