#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <vector>

#include "ddsrec/numerics/matrix.hpp"

namespace ddsrec {

class Tape;

/// Handle to one node of a Tape: a value matrix plus its gradient buffer.
/// Cheap to copy; only valid while the owning Tape is alive.
class DiffMatrix {
public:
    DiffMatrix() = default;
    DiffMatrix(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    std::size_t rows() const;
    std::size_t cols() const;
    const Matrix& value() const;
    /// Gradient of the last backward pass; zero-filled if the node was never reached.
    const Matrix& grad() const;
    bool requires_grad() const;

    /// Convenience for 1x1 nodes.
    double scalar() const;

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Records operations in execution order and replays their backward rules in
/// reverse. Parent ids always precede child ids, so a single reverse sweep
/// visits every node after all of its consumers.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives gradient.
    DiffMatrix constant(Matrix value);
    /// Leaf owning its value; gradient readable through the handle after backward.
    DiffMatrix variable(Matrix value);
    /// Leaf aliasing an external value; gradient is accumulated into `grad_sink`
    /// (resized to the value's shape if empty). Both must outlive the tape.
    DiffMatrix bind(const Matrix& value, Matrix& grad_sink);
    /// Leaf aliasing an external value without gradient.
    DiffMatrix bind_constant(const Matrix& value);

    /// Records an op result. `backward` runs only if some parent requires grad
    /// and the node's gradient was touched.
    DiffMatrix record(Matrix value, bool requires_grad, BackwardFn backward);

    /// Seeds d(loss)/d(loss) = 1 and propagates. Throws ShapeError for a
    /// non-scalar loss and std::logic_error if called twice on the same tape.
    void backward(DiffMatrix loss);

    std::size_t size() const noexcept { return nodes_.size(); }
    const Matrix& value(std::size_t id) const;
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    /// Gradient accumulator for node `id`, zero-allocated on first access.
    Matrix& grad(std::size_t id);
    const Matrix& grad_view(std::size_t id);
    bool backward_done() const noexcept { return backward_done_; }

private:
    struct Node {
        Matrix value;
        const Matrix* external_value = nullptr;
        Matrix grad;
        Matrix* external_grad = nullptr;
        bool requires_grad = false;
        bool touched = false;
        BackwardFn backward;
    };

    DiffMatrix push(Node node);

    std::deque<Node> nodes_;  // deque: value()/grad() references survive new nodes
    bool backward_done_ = false;
};

}  // namespace ddsrec
