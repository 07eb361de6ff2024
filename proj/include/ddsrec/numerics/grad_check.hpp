#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ddsrec/numerics/tape.hpp"

namespace ddsrec {

/// A named learnable tensor with its gradient accumulator.
struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;
};

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
};

struct GradCheckFailure {
    std::string parameter;
    std::size_t row = 0;
    std::size_t col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double error = 0.0;
};

struct GradCheckReport {
    std::size_t entries_checked = 0;
    double max_error = 0.0;
    std::vector<GradCheckFailure> failures;

    bool passed() const noexcept { return failures.empty(); }
    void merge(const GradCheckReport& other);
    std::string summary() const;
};

/// Builds a scalar loss on the given tape, binding parameters via `Tape::bind`.
using LossBuilder = std::function<DiffMatrix(Tape&)>;

/// |analytic - numeric| / max(1, |numeric|)
double gradient_error(double analytic, double numeric) noexcept;

/// Central-difference gradient of `objective` with respect to every entry of
/// `param.value`. The value is restored exactly after each probe.
Matrix numeric_gradient(const std::function<double()>& objective, Parameter& param, double step);

/// Compares two same-shape gradients entry by entry and records failures.
void compare_gradients(const std::string& name, const Matrix& analytic, const Matrix& numeric,
                       double tolerance, GradCheckReport& report);

/// Runs `build` once with backward to collect analytic gradients, then probes
/// every entry of every parameter with central differences. The builder must
/// be deterministic (dropout off).
GradCheckReport grad_check(const LossBuilder& build, const std::vector<Parameter*>& params,
                           const GradCheckOptions& options = {});

}  // namespace ddsrec
