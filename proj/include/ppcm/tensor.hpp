#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ppcm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. The shape is fixed at construction.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double& operator[](std::size_t i) { return data_[i]; }
    const double& operator[](std::size_t i) const { return data_[i]; }

    /// Same data, different shape with equal element count.
    Tensor reshaped(Shape shape) const;

    void fill(double v);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// A named trainable tensor with its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

    void zero_grad() { grad.fill(0.0); }
};

/// Handle to a value recorded on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Records operations in execution order and replays them backwards.
/// Gradients accumulate additively when a value feeds several consumers.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

    Var constant(Tensor value);
    Var leaf(Tensor value, bool requires_grad = true);
    /// References p.value without copying; backward adds into p.grad when p.trainable.
    Var parameter(Parameter& p);

    Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
        return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
    }

    const Tensor& value(Var v) const;
    bool requires_grad(Var v) const;
    /// Gradient of v after backward(); zeros if v did not contribute.
    Tensor grad(Var v) const;

    /// Adds g into the gradient buffer of v (no-op if v does not require grad).
    void accumulate(Var v, const Tensor& g);
    /// Direct access to v's gradient buffer, allocated as zeros on first use.
    Tensor& grad_buffer(Var v);

    void backward(Var loss);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor owned;
        const Tensor* external = nullptr;
        Parameter* param = nullptr;
        Tensor grad;
        bool has_grad = false;
        bool requires_grad = false;
        BackwardFn backward;

        const Tensor& value() const { return external ? *external : owned; }
    };

    Node& node(Var v);
    const Node& node(Var v) const;

    std::deque<Node> nodes_;
};

} // namespace ppcm
