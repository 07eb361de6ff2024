#include "ddsrec/train/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "ddsrec/errors.hpp"

namespace ddsrec::train {

AdamState::AdamState(const ParameterStore& params) {
    for (const auto& p : params.all()) {
        m.emplace_back(p.value.rows(), p.value.cols());
        v.emplace_back(p.value.rows(), p.value.cols());
    }
}

void adam_step(ParameterStore& params, const GradientSet& grads, AdamState& state, const AdamOptions& o) {
    if (state.m.size() != params.size() || state.v.size() != params.size() || grads.size() != params.size()) {
        throw std::invalid_argument("adam_step: optimizer state does not match parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].same_shape(params[i].value) || !state.m[i].same_shape(params[i].value)) {
            throw std::invalid_argument("adam_step: shape mismatch for " + params[i].name);
        }
        if (!grads[i].all_finite()) throw NumericalError("non-finite gradient for parameter " + params[i].name);
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].value.flat();
        auto g = grads[i].flat();
        auto m = state.m[i].flat();
        auto v = state.v[i].flat();
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
            v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            w[k] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
        }
    }
}

}  // namespace ddsrec::train
