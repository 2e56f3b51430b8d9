#pragma once

#include "ppcm/tensor.hpp"

#include <functional>

namespace ppcm {

/// Scalar-valued function of one tensor, built on a fresh tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Largest |analytic - numeric| / max(1, |analytic|, |numeric|) over all
/// entries of x, numeric gradients by central differences with step eps.
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

/// Same check for a set of parameters driven by a closure that records the
/// loss on the given tape. Parameters are perturbed in place and restored.
double grad_check_parameters(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                             double eps = 1e-5);

} // namespace ppcm
