#include "ddsrec/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ddsrec/errors.hpp"

namespace ddsrec {

void GradCheckReport::merge(const GradCheckReport& other) {
    entries_checked += other.entries_checked;
    max_error = std::max(max_error, other.max_error);
    failures.insert(failures.end(), other.failures.begin(), other.failures.end());
}

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    os << (passed() ? "PASS" : "FAIL") << " entries=" << entries_checked << " max_err=" << max_error;
    if (!failures.empty()) {
        const auto& f = failures.front();
        os << " first_failure=" << f.parameter << "[" << f.row << "," << f.col << "] analytic=" << f.analytic
           << " numeric=" << f.numeric;
    }
    return os.str();
}

double gradient_error(double analytic, double numeric) noexcept {
    return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

Matrix numeric_gradient(const std::function<double()>& objective, Parameter& param, double step) {
    Matrix out(param.value.rows(), param.value.cols());
    for (std::size_t i = 0; i < param.value.size(); ++i) {
        const double saved = param.value[i];
        param.value[i] = saved + step;
        const double up = objective();
        param.value[i] = saved - step;
        const double down = objective();
        param.value[i] = saved;
        out[i] = (up - down) / (2.0 * step);
    }
    return out;
}

void compare_gradients(const std::string& name, const Matrix& analytic, const Matrix& numeric,
                       double tolerance, GradCheckReport& report) {
    if (!analytic.same_shape(numeric)) {
        throw ShapeError("compare_gradients: " + name + " analytic " + shape_string(analytic) + " vs numeric " +
                         shape_string(numeric));
    }
    for (std::size_t r = 0; r < analytic.rows(); ++r) {
        for (std::size_t c = 0; c < analytic.cols(); ++c) {
            const double err = gradient_error(analytic(r, c), numeric(r, c));
            ++report.entries_checked;
            report.max_error = std::max(report.max_error, err);
            if (!(err <= tolerance)) {
                report.failures.push_back({name, r, c, analytic(r, c), numeric(r, c), err});
            }
        }
    }
}

GradCheckReport grad_check(const LossBuilder& build, const std::vector<Parameter*>& params,
                           const GradCheckOptions& options) {
    for (Parameter* p : params) p->grad = Matrix(p->value.rows(), p->value.cols());
    {
        Tape tape;
        DiffMatrix loss = build(tape);
        tape.backward(loss);
    }
    const auto objective = [&build] {
        Tape tape;
        return build(tape).scalar();
    };
    GradCheckReport report;
    for (Parameter* p : params) {
        const Matrix analytic = p->grad;
        const Matrix numeric = numeric_gradient(objective, *p, options.step);
        compare_gradients(p->name, analytic, numeric, options.tolerance, report);
    }
    return report;
}

}  // namespace ddsrec
