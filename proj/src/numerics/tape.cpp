#include "ddsrec/numerics/tape.hpp"

#include <stdexcept>

#include "ddsrec/errors.hpp"

namespace ddsrec {

std::size_t DiffMatrix::rows() const { return value().rows(); }
std::size_t DiffMatrix::cols() const { return value().cols(); }
const Matrix& DiffMatrix::value() const { return tape_->value(id_); }
const Matrix& DiffMatrix::grad() const { return tape_->grad_view(id_); }
bool DiffMatrix::requires_grad() const { return tape_->requires_grad(id_); }

double DiffMatrix::scalar() const {
    const Matrix& v = value();
    if (v.size() != 1) throw ShapeError("scalar() on " + shape_string(v) + " node");
    return v[0];
}

DiffMatrix Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return DiffMatrix(this, nodes_.size() - 1);
}

DiffMatrix Tape::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

DiffMatrix Tape::variable(Matrix value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

DiffMatrix Tape::bind(const Matrix& value, Matrix& grad_sink) {
    if (grad_sink.empty()) grad_sink = Matrix(value.rows(), value.cols());
    if (!grad_sink.same_shape(value)) {
        throw ShapeError("gradient sink " + shape_string(grad_sink) + " does not match value " +
                         shape_string(value));
    }
    Node n;
    n.external_value = &value;
    n.external_grad = &grad_sink;
    n.requires_grad = true;
    return push(std::move(n));
}

DiffMatrix Tape::bind_constant(const Matrix& value) {
    Node n;
    n.external_value = &value;
    return push(std::move(n));
}

DiffMatrix Tape::record(Matrix value, bool requires_grad, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    return push(std::move(n));
}

const Matrix& Tape::value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external_value ? *n.external_value : n.value;
}

Matrix& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    n.touched = true;
    if (n.external_grad) return *n.external_grad;
    if (n.grad.empty()) {
        const Matrix& v = value(id);
        n.grad = Matrix(v.rows(), v.cols());
    }
    return n.grad;
}

const Matrix& Tape::grad_view(std::size_t id) {
    Node& n = nodes_[id];
    if (n.external_grad) return *n.external_grad;
    if (n.grad.empty()) {
        const Matrix& v = value(id);
        n.grad = Matrix(v.rows(), v.cols());
    }
    return n.grad;
}

void Tape::backward(DiffMatrix loss) {
    if (&loss.tape() != this) throw std::logic_error("backward: loss node belongs to another tape");
    if (backward_done_) throw std::logic_error("backward: tape already differentiated");
    const Matrix& lv = value(loss.id());
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ShapeError("backward: loss must be 1x1, got " + shape_string(lv));
    }
    backward_done_ = true;
    if (!nodes_[loss.id()].requires_grad) return;
    grad(loss.id())[0] += 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.touched || !n.backward) continue;
        n.backward(*this, i);
    }
}

}  // namespace ddsrec
