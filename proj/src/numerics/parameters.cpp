#include "ddsrec/numerics/parameters.hpp"

#include <cmath>

#include "ddsrec/numerics/ops.hpp"

namespace ddsrec {

ParamId ParameterStore::add(std::string name, Matrix value) {
    params_.push_back(Parameter{std::move(name), std::move(value), {}});
    return params_.size() - 1;
}

ParamId ParameterStore::add_glorot(std::string name, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> u(-limit, limit);
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = u(rng);
    return add(std::move(name), std::move(m));
}

ParamId ParameterStore::add_normal(std::string name, std::size_t rows, std::size_t cols, double stddev,
                                   std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, stddev);
    Matrix m(rows, cols);
    for (double& v : m.flat()) v = n(rng);
    return add(std::move(name), std::move(m));
}

std::optional<ParamId> ParameterStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t ParameterStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::vector<Parameter*> ParameterStore::pointers() {
    std::vector<Parameter*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
}

GradientSet::GradientSet(const ParameterStore& store) {
    grads_.reserve(store.size());
    for (const auto& p : store.all()) grads_.emplace_back(p.value.rows(), p.value.cols());
}

void GradientSet::zero() {
    for (auto& g : grads_) g.fill(0.0);
}

void GradientSet::accumulate(const GradientSet& other) {
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        auto dst = grads_[i].flat();
        auto src = other.grads_[i].flat();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
}

void GradientSet::scale(double c) {
    for (auto& g : grads_) {
        for (double& v : g.flat()) v *= c;
    }
}

ForwardContext::ForwardContext(Tape& tape, const ParameterStore& params, GradientSet* sink, ParameterStore* own)
    : tape_(&tape), params_(&params), sink_(sink), own_(own), bound_(params.size()) {}

ForwardContext::ForwardContext(Tape& tape, const ParameterStore& params) : ForwardContext(tape, params, nullptr, nullptr) {}

ForwardContext::ForwardContext(Tape& tape, const ParameterStore& params, GradientSet& sink)
    : ForwardContext(tape, params, &sink, nullptr) {}

ForwardContext ForwardContext::with_own_gradients(Tape& tape, ParameterStore& params) {
    return ForwardContext(tape, params, nullptr, &params);
}

DiffMatrix ForwardContext::param(ParamId id) {
    auto& slot = bound_.at(id);
    if (!slot) {
        const Matrix& v = (*params_)[id].value;
        if (sink_) slot = tape_->bind(v, (*sink_)[id]);
        else if (own_) slot = tape_->bind(v, (*own_)[id].grad);
        else slot = tape_->bind_constant(v);
    }
    return *slot;
}

DiffMatrix ForwardContext::dropout(DiffMatrix x, double rate) {
    if (!rng_ || rate <= 0.0) return x;
    return ops::dropout(x, rate, *rng_);
}

DiffMatrix affine(ForwardContext& ctx, DiffMatrix x, ParamId weight, ParamId bias) {
    return ops::add_row(ops::matmul(x, ctx.param(weight)), ctx.param(bias));
}

}  // namespace ddsrec
