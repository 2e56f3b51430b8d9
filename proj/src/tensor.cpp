#include "ppcm/tensor.hpp"

#include "ppcm/error.hpp"

#include <algorithm>

namespace ppcm {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_)) {
        throw ShapeError("Tensor: " + std::to_string(data_.size()) + " values for shape " + shape_str(shape_));
    }
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != numel()) throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Var Tape::constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
    Node n;
    n.external = &p.value;
    n.param = &p;
    n.requires_grad = p.trainable;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    Node n;
    n.owned = std::move(value);
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [this](Var v) { return node(v).requires_grad; });
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
}

Tape::Node& Tape::node(Var v) {
    if (v.id >= nodes_.size()) throw InvalidArgument("Var does not belong to this tape");
    return nodes_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
    if (v.id >= nodes_.size()) throw InvalidArgument("Var does not belong to this tape");
    return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value(); }

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.has_grad) return n.grad;
    return Tensor(n.value().shape());
}

Tensor& Tape::grad_buffer(Var v) {
    Node& n = node(v);
    if (!n.has_grad) {
        n.grad = Tensor(n.value().shape());
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
    if (!node(v).requires_grad) return;
    Tensor& buf = grad_buffer(v);
    if (buf.shape() != g.shape()) throw ShapeError("gradient shape mismatch");
    auto dst = buf.data();
    auto src = g.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
    Node& l = node(loss);
    if (l.value().numel() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(l.value().shape()));
    }
    if (!l.requires_grad) return;
    grad_buffer(loss).fill(1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.has_grad) continue;
        if (n.backward) n.backward(*this, n.grad);
        if (n.param && n.param->trainable) {
            auto dst = n.param->grad.data();
            auto src = n.grad.data();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }
}

} // namespace ppcm
