#include "ppcm/gradcheck.hpp"

#include "ppcm/error.hpp"

#include <algorithm>
#include <cmath>

namespace ppcm {

namespace {

double relative_error(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

double scalar_of(const Tape& tape, Var v) {
    const Tensor& t = tape.value(v);
    if (t.numel() != 1) throw ShapeError("grad_check: function must return a scalar");
    return t[0];
}

} // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
    Tensor analytic;
    {
        Tape tape;
        const Var in = tape.leaf(x);
        const Var out = f(tape, in);
        scalar_of(tape, out);
        tape.backward(out);
        analytic = tape.grad(in);
    }
    auto eval = [&](const Tensor& probe) {
        Tape tape;
        const Var in = tape.leaf(probe, false);
        return scalar_of(tape, f(tape, in));
    };
    double worst = 0.0;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        probe[i] = x[i] + eps;
        const double up = eval(probe);
        probe[i] = x[i] - eps;
        const double down = eval(probe);
        probe[i] = x[i];
        worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
    }
    return worst;
}

double grad_check_parameters(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                             double eps) {
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        const Var out = loss(tape);
        scalar_of(tape, out);
        tape.backward(out);
    }
    auto eval = [&] {
        Tape tape;
        return scalar_of(tape, loss(tape));
    };
    double worst = 0.0;
    for (Parameter* p : params) {
        if (!p->trainable) continue;
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + eps;
            const double up = eval();
            p->value[i] = orig - eps;
            const double down = eval();
            p->value[i] = orig;
            worst = std::max(worst, relative_error(p->grad[i], (up - down) / (2.0 * eps)));
        }
    }
    return worst;
}

} // namespace ppcm
