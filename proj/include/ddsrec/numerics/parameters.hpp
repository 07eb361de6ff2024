#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ddsrec/numerics/grad_check.hpp"
#include "ddsrec/numerics/tape.hpp"

namespace ddsrec {

using ParamId = std::size_t;

/// Ordered collection of named parameters. Ids are insertion indices and stay
/// stable for the lifetime of the store.
class ParameterStore {
public:
    ParamId add(std::string name, Matrix value);
    /// Glorot-uniform weight matrix.
    ParamId add_glorot(std::string name, std::size_t rows, std::size_t cols, std::mt19937_64& rng);
    ParamId add_normal(std::string name, std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

    std::size_t size() const noexcept { return params_.size(); }
    Parameter& operator[](ParamId id) { return params_[id]; }
    const Parameter& operator[](ParamId id) const { return params_[id]; }
    std::vector<Parameter>& all() noexcept { return params_; }
    const std::vector<Parameter>& all() const noexcept { return params_; }
    std::optional<ParamId> find(const std::string& name) const;
    std::size_t scalar_count() const noexcept;
    std::vector<Parameter*> pointers();

private:
    std::vector<Parameter> params_;
};

/// Gradient buffers aligned with a ParameterStore.
class GradientSet {
public:
    GradientSet() = default;
    explicit GradientSet(const ParameterStore& store);
    void zero();
    /// this += other, parameter by parameter in id order.
    void accumulate(const GradientSet& other);
    void scale(double c);
    Matrix& operator[](ParamId id) { return grads_[id]; }
    const Matrix& operator[](ParamId id) const { return grads_[id]; }
    std::size_t size() const noexcept { return grads_.size(); }

private:
    std::vector<Matrix> grads_;
};

/// Binds parameters onto a tape for one forward pass. Each parameter gets a
/// single leaf per tape. Gradients go to a GradientSet, to the parameters' own
/// `grad` members (gradient checking), or nowhere (evaluation).
class ForwardContext {
public:
    /// Evaluation: parameters are constants.
    ForwardContext(Tape& tape, const ParameterStore& params);
    /// Training: gradients accumulate into `sink`.
    ForwardContext(Tape& tape, const ParameterStore& params, GradientSet& sink);
    /// Gradient checking: gradients accumulate into each Parameter::grad.
    static ForwardContext with_own_gradients(Tape& tape, ParameterStore& params);

    Tape& tape() const noexcept { return *tape_; }
    DiffMatrix param(ParamId id);
    const Matrix& value(ParamId id) const { return (*params_)[id].value; }

    bool training() const noexcept { return rng_ != nullptr; }
    /// Enables dropout with the given stream.
    void enable_training(std::mt19937_64& rng) noexcept { rng_ = &rng; }
    /// Dropout in training mode, identity otherwise.
    DiffMatrix dropout(DiffMatrix x, double rate);

private:
    ForwardContext(Tape& tape, const ParameterStore& params, GradientSet* sink, ParameterStore* own);

    Tape* tape_;
    const ParameterStore* params_;
    GradientSet* sink_ = nullptr;
    ParameterStore* own_ = nullptr;
    std::mt19937_64* rng_ = nullptr;
    std::vector<std::optional<DiffMatrix>> bound_;
};

/// x * W + b for row-vector inputs.
DiffMatrix affine(ForwardContext& ctx, DiffMatrix x, ParamId weight, ParamId bias);

}  // namespace ddsrec
