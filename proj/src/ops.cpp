#include "ppcm/ops.hpp"

#include "ppcm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ppcm {

namespace {

void expect_shape(const Tensor& t, const Shape& shape, const char* what) {
    if (t.shape() != shape) {
        throw ShapeError(std::string(what) + ": expected " + shape_str(shape) + ", got " + shape_str(t.shape()));
    }
}

void expect_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
    }
}

} // namespace

Var add(Tape& tape, Var a, Var b) {
    const Tensor& av = tape.value(a);
    const Tensor& bv = tape.value(b);
    expect_shape(bv, av.shape(), "add");
    Tensor out = av;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
    return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

Var scale(Tape& tape, Var a, double factor) {
    Tensor out = tape.value(a);
    for (auto& v : out.data()) v *= factor;
    return tape.record(std::move(out), {a}, [a, factor](Tape& t, const Tensor& g) {
        if (!t.requires_grad(a)) return;
        Tensor& da = t.grad_buffer(a);
        for (std::size_t i = 0; i < g.numel(); ++i) da[i] += factor * g[i];
    });
}

Var sum(Tape& tape, Var a) {
    double s = 0.0;
    for (double v : tape.value(a).data()) s += v;
    return tape.record(Tensor(Shape{1}, s), {a}, [a](Tape& t, const Tensor& g) {
        if (!t.requires_grad(a)) return;
        for (auto& v : t.grad_buffer(a).data()) v += g[0];
    });
}

Var patch_embed(Tape& tape, Var x, Var w, Var b) {
    const Tensor& xv = tape.value(x);
    const Tensor& wv = tape.value(w);
    const Tensor& bv = tape.value(b);
    expect_rank(xv, 4, "patch_embed input");
    expect_rank(wv, 4, "patch_embed weight");
    const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const std::size_t h = wv.dim(0), M = wv.dim(2);
    if (M == 0 || wv.dim(1) != C || wv.dim(3) != M) throw ShapeError("patch_embed: weight must be h x C x M x M");
    expect_shape(bv, {h}, "patch_embed bias");
    if (H % M != 0 || W % M != 0) throw ShapeError("patch_embed: input size not divisible by patch size");
    const std::size_t gh = H / M, gw = W / M, K = C * M * M;

    Tensor out(Shape{B, h, gh, gw});
    std::vector<double> patch(K);
    for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t u = 0; u < gh; ++u) {
            for (std::size_t v = 0; v < gw; ++v) {
                for (std::size_t c = 0, k = 0; c < C; ++c)
                    for (std::size_t i = 0; i < M; ++i)
                        for (std::size_t j = 0; j < M; ++j, ++k)
                            patch[k] = xv[((n * C + c) * H + u * M + i) * W + v * M + j];
                for (std::size_t o = 0; o < h; ++o) {
                    double acc = bv[o];
                    const double* wr = &wv[o * K];
                    for (std::size_t k = 0; k < K; ++k) acc += wr[k] * patch[k];
                    out[((n * h + o) * gh + u) * gw + v] = acc;
                }
            }
        }
    }
    return tape.record(std::move(out), {x, w, b}, [=](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(w);
        const bool need_x = t.requires_grad(x), need_w = t.requires_grad(w), need_b = t.requires_grad(b);
        Tensor* dx = need_x ? &t.grad_buffer(x) : nullptr;
        Tensor* dw = need_w ? &t.grad_buffer(w) : nullptr;
        Tensor* db = need_b ? &t.grad_buffer(b) : nullptr;
        std::vector<double> patch(K), dpatch(K);
        for (std::size_t n = 0; n < B; ++n) {
            for (std::size_t u = 0; u < gh; ++u) {
                for (std::size_t v = 0; v < gw; ++v) {
                    auto index = [&](std::size_t c, std::size_t i, std::size_t j) {
                        return ((n * C + c) * H + u * M + i) * W + v * M + j;
                    };
                    for (std::size_t c = 0, k = 0; c < C; ++c)
                        for (std::size_t i = 0; i < M; ++i)
                            for (std::size_t j = 0; j < M; ++j, ++k) patch[k] = xv[index(c, i, j)];
                    std::fill(dpatch.begin(), dpatch.end(), 0.0);
                    for (std::size_t o = 0; o < h; ++o) {
                        const double go = g[((n * h + o) * gh + u) * gw + v];
                        if (db) (*db)[o] += go;
                        if (dw) {
                            double* dwr = &(*dw)[o * K];
                            for (std::size_t k = 0; k < K; ++k) dwr[k] += go * patch[k];
                        }
                        if (dx) {
                            const double* wr = &wv[o * K];
                            for (std::size_t k = 0; k < K; ++k) dpatch[k] += go * wr[k];
                        }
                    }
                    if (dx) {
                        for (std::size_t c = 0, k = 0; c < C; ++c)
                            for (std::size_t i = 0; i < M; ++i)
                                for (std::size_t j = 0; j < M; ++j, ++k) (*dx)[index(c, i, j)] += dpatch[k];
                    }
                }
            }
        }
    });
}

Var depthwise_conv(Tape& tape, Var x, Var w, Var b) {
    const Tensor& xv = tape.value(x);
    const Tensor& wv = tape.value(w);
    const Tensor& bv = tape.value(b);
    expect_rank(xv, 4, "depthwise_conv input");
    expect_rank(wv, 3, "depthwise_conv weight");
    const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const std::size_t k = wv.dim(1);
    if (k % 2 == 0) throw InvalidArgument("depthwise_conv: kernel size must be odd");
    if (wv.dim(0) != C || wv.dim(2) != k) throw ShapeError("depthwise_conv: weight must be h x k x k");
    expect_shape(bv, {C}, "depthwise_conv bias");
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto iH = static_cast<std::ptrdiff_t>(H), iW = static_cast<std::ptrdiff_t>(W);

    Tensor out(xv.shape());
    for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const double* xp = &xv[(n * C + c) * H * W];
            const double* wp = &wv[c * k * k];
            double* op = &out[(n * C + c) * H * W];
            for (std::ptrdiff_t i = 0; i < iH; ++i) {
                for (std::ptrdiff_t j = 0; j < iW; ++j) {
                    double acc = bv[c];
                    for (std::ptrdiff_t di = 0; di < static_cast<std::ptrdiff_t>(k); ++di) {
                        const std::ptrdiff_t ii = i + di - pad;
                        if (ii < 0 || ii >= iH) continue;
                        for (std::ptrdiff_t dj = 0; dj < static_cast<std::ptrdiff_t>(k); ++dj) {
                            const std::ptrdiff_t jj = j + dj - pad;
                            if (jj < 0 || jj >= iW) continue;
                            acc += wp[di * static_cast<std::ptrdiff_t>(k) + dj] * xp[ii * iW + jj];
                        }
                    }
                    op[i * iW + j] = acc;
                }
            }
        }
    }
    return tape.record(std::move(out), {x, w, b}, [=](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(w);
        Tensor* dx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
        Tensor* dw = t.requires_grad(w) ? &t.grad_buffer(w) : nullptr;
        Tensor* db = t.requires_grad(b) ? &t.grad_buffer(b) : nullptr;
        const auto kk = static_cast<std::ptrdiff_t>(k);
        for (std::size_t n = 0; n < B; ++n) {
            for (std::size_t c = 0; c < C; ++c) {
                const double* xp = &xv[(n * C + c) * H * W];
                const double* wp = &wv[c * k * k];
                const double* gp = &g[(n * C + c) * H * W];
                double* dxp = dx ? &(*dx)[(n * C + c) * H * W] : nullptr;
                double* dwp = dw ? &(*dw)[c * k * k] : nullptr;
                for (std::ptrdiff_t i = 0; i < iH; ++i) {
                    for (std::ptrdiff_t j = 0; j < iW; ++j) {
                        const double go = gp[i * iW + j];
                        if (db) (*db)[c] += go;
                        for (std::ptrdiff_t di = 0; di < kk; ++di) {
                            const std::ptrdiff_t ii = i + di - pad;
                            if (ii < 0 || ii >= iH) continue;
                            for (std::ptrdiff_t dj = 0; dj < kk; ++dj) {
                                const std::ptrdiff_t jj = j + dj - pad;
                                if (jj < 0 || jj >= iW) continue;
                                if (dwp) dwp[di * kk + dj] += go * xp[ii * iW + jj];
                                if (dxp) dxp[ii * iW + jj] += go * wp[di * kk + dj];
                            }
                        }
                    }
                }
            }
        }
    });
}

Var channel_affine(Tape& tape, Var x, Var w, Var b) {
    const Tensor& xv = tape.value(x);
    const Tensor& wv = tape.value(w);
    const Tensor& bv = tape.value(b);
    if (xv.rank() != 2 && xv.rank() != 4) throw ShapeError("channel_affine: input must be B x h or B x h x s x s");
    expect_rank(wv, 2, "channel_affine weight");
    const std::size_t B = xv.dim(0), hin = xv.dim(1), hout = wv.dim(0);
    if (wv.dim(1) != hin) {
        throw ShapeError("channel_affine: weight " + shape_str(wv.shape()) + " does not match input " +
                         shape_str(xv.shape()));
    }
    expect_shape(bv, {hout}, "channel_affine bias");
    const std::size_t P = xv.rank() == 4 ? xv.dim(2) * xv.dim(3) : 1;

    Shape out_shape = xv.shape();
    out_shape[1] = hout;
    Tensor out(out_shape);
    for (std::size_t n = 0; n < B; ++n) {
        for (std::size_t o = 0; o < hout; ++o) {
            double* orow = &out[(n * hout + o) * P];
            std::fill(orow, orow + P, bv[o]);
            for (std::size_t k = 0; k < hin; ++k) {
                const double wk = wv[o * hin + k];
                const double* xrow = &xv[(n * hin + k) * P];
                for (std::size_t p = 0; p < P; ++p) orow[p] += wk * xrow[p];
            }
        }
    }
    return tape.record(std::move(out), {x, w, b}, [=](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(w);
        Tensor* dx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
        Tensor* dw = t.requires_grad(w) ? &t.grad_buffer(w) : nullptr;
        Tensor* db = t.requires_grad(b) ? &t.grad_buffer(b) : nullptr;
        for (std::size_t n = 0; n < B; ++n) {
            for (std::size_t o = 0; o < hout; ++o) {
                const double* grow = &g[(n * hout + o) * P];
                if (db) {
                    double s = 0.0;
                    for (std::size_t p = 0; p < P; ++p) s += grow[p];
                    (*db)[o] += s;
                }
                for (std::size_t k = 0; k < hin; ++k) {
                    const double* xrow = &xv[(n * hin + k) * P];
                    if (dw) {
                        double s = 0.0;
                        for (std::size_t p = 0; p < P; ++p) s += grow[p] * xrow[p];
                        (*dw)[o * hin + k] += s;
                    }
                    if (dx) {
                        const double wk = wv[o * hin + k];
                        double* dxrow = &(*dx)[(n * hin + k) * P];
                        for (std::size_t p = 0; p < P; ++p) dxrow[p] += wk * grow[p];
                    }
                }
            }
        }
    });
}

Var batchnorm(Tape& tape, Var x, Var gamma, Var beta, BatchNormState& state, NormMode mode) {
    const Tensor& xv = tape.value(x);
    const Tensor& gv = tape.value(gamma);
    const Tensor& bv = tape.value(beta);
    expect_rank(xv, 4, "batchnorm input");
    const std::size_t B = xv.dim(0), C = xv.dim(1), P = xv.dim(2) * xv.dim(3);
    expect_shape(gv, {C}, "batchnorm gamma");
    expect_shape(bv, {C}, "batchnorm beta");
    expect_shape(state.running_mean, {C}, "batchnorm running mean");
    expect_shape(state.running_var, {C}, "batchnorm running var");
    const std::size_t N = B * P;

    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    std::vector<double> invstd(C);
    for (std::size_t c = 0; c < C; ++c) {
        double mean = 0.0, var = 0.0;
        if (mode == NormMode::train) {
            if (N < 2) throw InvalidArgument("batchnorm: train mode needs at least 2 values per channel");
            for (std::size_t n = 0; n < B; ++n)
                for (std::size_t p = 0; p < P; ++p) mean += xv[(n * C + c) * P + p];
            mean /= static_cast<double>(N);
            for (std::size_t n = 0; n < B; ++n) {
                for (std::size_t p = 0; p < P; ++p) {
                    const double d = xv[(n * C + c) * P + p] - mean;
                    var += d * d;
                }
            }
            var /= static_cast<double>(N);
            const double unbiased = var * static_cast<double>(N) / static_cast<double>(N - 1);
            state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean;
            state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
        } else {
            mean = state.running_mean[c];
            var = state.running_var[c];
        }
        invstd[c] = 1.0 / std::sqrt(var + state.eps);
        for (std::size_t n = 0; n < B; ++n) {
            for (std::size_t p = 0; p < P; ++p) {
                const std::size_t i = (n * C + c) * P + p;
                xhat[i] = (xv[i] - mean) * invstd[c];
                out[i] = gv[c] * xhat[i] + bv[c];
            }
        }
    }
    const bool batch_stats = mode == NormMode::train;
    return tape.record(std::move(out), {x, gamma, beta},
                       [=, xhat = std::move(xhat), invstd = std::move(invstd)](Tape& t, const Tensor& g) {
        const Tensor& gv = t.value(gamma);
        Tensor* dx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
        Tensor* dg = t.requires_grad(gamma) ? &t.grad_buffer(gamma) : nullptr;
        Tensor* db = t.requires_grad(beta) ? &t.grad_buffer(beta) : nullptr;
        for (std::size_t c = 0; c < C; ++c) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t n = 0; n < B; ++n) {
                for (std::size_t p = 0; p < P; ++p) {
                    const std::size_t i = (n * C + c) * P + p;
                    sum_g += g[i];
                    sum_gx += g[i] * xhat[i];
                }
            }
            if (db) (*db)[c] += sum_g;
            if (dg) (*dg)[c] += sum_gx;
            if (!dx) continue;
            const double k = gv[c] * invstd[c];
            if (batch_stats) {
                const double inv_n = 1.0 / static_cast<double>(N);
                for (std::size_t n = 0; n < B; ++n) {
                    for (std::size_t p = 0; p < P; ++p) {
                        const std::size_t i = (n * C + c) * P + p;
                        (*dx)[i] += k * (g[i] - inv_n * sum_g - xhat[i] * inv_n * sum_gx);
                    }
                }
            } else {
                for (std::size_t n = 0; n < B; ++n)
                    for (std::size_t p = 0; p < P; ++p) (*dx)[(n * C + c) * P + p] += k * g[(n * C + c) * P + p];
            }
        }
    });
}

double gelu_value(double x) { return x * 0.5 * std::erfc(-x / std::numbers::sqrt2); }

Var gelu(Tape& tape, Var x) {
    Tensor out = tape.value(x);
    for (auto& v : out.data()) v = gelu_value(v);
    return tape.record(std::move(out), {x}, [x](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        Tensor& dx = t.grad_buffer(x);
        const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            const double v = xv[i];
            const double cdf = 0.5 * std::erfc(-v / std::numbers::sqrt2);
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            dx[i] += g[i] * (cdf + v * pdf);
        }
    });
}

Var global_avg_pool(Tape& tape, Var x) {
    const Tensor& xv = tape.value(x);
    expect_rank(xv, 4, "global_avg_pool input");
    const std::size_t B = xv.dim(0), C = xv.dim(1), P = xv.dim(2) * xv.dim(3);
    Tensor out(Shape{B, C});
    for (std::size_t i = 0; i < B * C; ++i) {
        double s = 0.0;
        for (std::size_t p = 0; p < P; ++p) s += xv[i * P + p];
        out[i] = s / static_cast<double>(P);
    }
    return tape.record(std::move(out), {x}, [x, B, C, P](Tape& t, const Tensor& g) {
        Tensor& dx = t.grad_buffer(x);
        const double inv = 1.0 / static_cast<double>(P);
        for (std::size_t i = 0; i < B * C; ++i)
            for (std::size_t p = 0; p < P; ++p) dx[i * P + p] += g[i] * inv;
    });
}

Var softmax_xent(Tape& tape, Var logits, std::span<const int> labels) {
    const Tensor& lv = tape.value(logits);
    expect_rank(lv, 2, "softmax_xent logits");
    const std::size_t B = lv.dim(0), K = lv.dim(1);
    if (labels.size() != B) throw ShapeError("softmax_xent: label count does not match batch");
    if (B == 0) throw ShapeError("softmax_xent: empty batch");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= K) {
            throw InvalidArgument("softmax_xent: label " + std::to_string(y) + " out of range");
        }
    }
    Tensor probs(lv.shape());
    double loss = 0.0;
    for (std::size_t n = 0; n < B; ++n) {
        const double* row = &lv[n * K];
        const double mx = *std::max_element(row, row + K);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - mx);
        const double lse = mx + std::log(z);
        loss += lse - row[static_cast<std::size_t>(labels[n])];
        for (std::size_t k = 0; k < K; ++k) probs[n * K + k] = std::exp(row[k] - lse);
    }
    loss /= static_cast<double>(B);
    std::vector<int> ys(labels.begin(), labels.end());
    return tape.record(Tensor(Shape{1}, loss), {logits},
                       [logits, B, K, probs = std::move(probs), ys = std::move(ys)](Tape& t, const Tensor& g) {
        Tensor& dl = t.grad_buffer(logits);
        const double s = g[0] / static_cast<double>(B);
        for (std::size_t n = 0; n < B; ++n) {
            for (std::size_t k = 0; k < K; ++k) {
                const double onehot = static_cast<std::size_t>(ys[n]) == k ? 1.0 : 0.0;
                dl[n * K + k] += s * (probs[n * K + k] - onehot);
            }
        }
    });
}

Var token_mix(Tape& tape, Var x, Var u) {
    const Tensor& xv = tape.value(x);
    const Tensor& uv = tape.value(u);
    expect_rank(xv, 4, "token_mix input");
    const std::size_t B = xv.dim(0), C = xv.dim(1), n = xv.dim(2) * xv.dim(3);
    expect_shape(uv, {n, n}, "token_mix matrix");
    Tensor out(xv.shape());
    for (std::size_t r = 0; r < B * C; ++r) {
        const double* xr = &xv[r * n];
        double* orow = &out[r * n];
        for (std::size_t t = 0; t < n; ++t) {
            double acc = 0.0;
            const double* ur = &uv[t * n];
            for (std::size_t s = 0; s < n; ++s) acc += ur[s] * xr[s];
            orow[t] = acc;
        }
    }
    return tape.record(std::move(out), {x, u}, [x, u, B, C, n](Tape& t, const Tensor& g) {
        const Tensor& xv = t.value(x);
        const Tensor& uv = t.value(u);
        Tensor* dx = t.requires_grad(x) ? &t.grad_buffer(x) : nullptr;
        Tensor* du = t.requires_grad(u) ? &t.grad_buffer(u) : nullptr;
        for (std::size_t r = 0; r < B * C; ++r) {
            const double* xr = &xv[r * n];
            const double* gr = &g[r * n];
            for (std::size_t tt = 0; tt < n; ++tt) {
                const double gt = gr[tt];
                if (du) {
                    double* dur = &(*du)[tt * n];
                    for (std::size_t s = 0; s < n; ++s) dur[s] += gt * xr[s];
                }
                if (dx) {
                    const double* ur = &uv[tt * n];
                    double* dxr = &(*dx)[r * n];
                    for (std::size_t s = 0; s < n; ++s) dxr[s] += gt * ur[s];
                }
            }
        }
    });
}

namespace {

// G = U^T U - I for an n x n matrix.
std::vector<double> gram_minus_identity(const Tensor& u, std::size_t n) {
    std::vector<double> gm(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += u[r * n + i] * u[r * n + j];
            gm[i * n + j] = s - (i == j ? 1.0 : 0.0);
        }
    }
    return gm;
}

std::size_t square_side(const Tensor& u, const char* what) {
    if (u.rank() != 2 || u.dim(0) != u.dim(1)) throw ShapeError(std::string(what) + ": matrix must be square");
    return u.dim(0);
}

} // namespace

double permutation_penalty(const Tensor& u) {
    const std::size_t n = square_side(u, "permutation_penalty");
    const auto gm = gram_minus_identity(u, n);
    double orth = 0.0, neg = 0.0;
    for (double v : gm) orth += v * v;
    for (double v : u.data()) {
        const double m = std::min(v, 0.0);
        neg += m * m;
    }
    return orth + neg;
}

Var permutation_penalty(Tape& tape, Var u) {
    const Tensor& uv = tape.value(u);
    const std::size_t n = square_side(uv, "permutation_penalty");
    auto gm = gram_minus_identity(uv, n);
    return tape.record(Tensor(Shape{1}, permutation_penalty(uv)), {u},
                       [u, n, gm = std::move(gm)](Tape& t, const Tensor& g) {
        // d/dU ||U^T U - I||^2 = 4 U G (G symmetric); d/dU ||min(U,0)||^2 = 2 min(U,0)
        const Tensor& uv = t.value(u);
        Tensor& du = t.grad_buffer(u);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k) s += uv[r * n + k] * gm[k * n + c];
                du[r * n + c] += g[0] * (4.0 * s + 2.0 * std::min(uv[r * n + c], 0.0));
            }
        }
    });
}

} // namespace ppcm
