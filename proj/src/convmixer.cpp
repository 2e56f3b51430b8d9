#include "ppcm/convmixer.hpp"

#include "ppcm/error.hpp"

#include <cmath>

namespace ppcm {

void ModelConfig::validate() const {
    if (hidden == 0 || depth == 0 || kernel == 0 || patch == 0 || n_classes == 0 || image_size == 0) {
        throw InvalidArgument("model config: all sizes must be >= 1");
    }
    if (kernel % 2 == 0) throw InvalidArgument("model config: kernel size must be odd");
    if (image_size % patch != 0) throw InvalidArgument("model config: image_size must be divisible by patch size");
    if (!(lambda >= 0.0)) throw InvalidArgument("model config: lambda must be >= 0");
}

namespace {

class Init {
public:
    explicit Init(std::uint64_t seed) : gen_(seed) {}

    // Uniform in [-bound, bound).
    double uniform(double bound) {
        const double unit = static_cast<double>(gen_.next() >> 11) * 0x1.0p-53;
        return (2.0 * unit - 1.0) * bound;
    }

    Tensor weights(Shape shape, std::size_t fan_in) {
        Tensor t(std::move(shape));
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.data()) v = uniform(bound);
        return t;
    }

private:
    SplitMix64 gen_;
};

NormLayer make_norm(const std::string& prefix, std::size_t h) {
    return NormLayer{Parameter(prefix + ".gamma", Tensor(Shape{h}, 1.0)), Parameter(prefix + ".beta", Tensor(Shape{h})),
                     BatchNormState(h)};
}

Var norm(Tape& tape, Var x, NormLayer& layer, NormMode mode) {
    return batchnorm(tape, x, tape.parameter(layer.gamma), tape.parameter(layer.beta), layer.state, mode);
}

} // namespace

Model Model::build(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Init init(seed);
    const std::size_t h = cfg.hidden, k = cfg.kernel, M = cfg.patch;
    Model m;
    m.cfg_ = cfg;
    m.stem_weight_ = Parameter("stem.weight", init.weights({h, 3, M, M}, 3 * M * M));
    m.stem_bias_ = Parameter("stem.bias", Tensor(Shape{h}));
    m.stem_norm_ = make_norm("stem.norm", h);
    m.layers_.reserve(cfg.depth);
    for (std::size_t l = 0; l < cfg.depth; ++l) {
        const std::string p = "layer" + std::to_string(l);
        MixerLayer layer;
        layer.dw_weight = Parameter(p + ".depthwise.weight", init.weights({h, k, k}, k * k));
        layer.dw_bias = Parameter(p + ".depthwise.bias", Tensor(Shape{h}));
        layer.norm1 = make_norm(p + ".norm1", h);
        layer.pw_weight = Parameter(p + ".pointwise.weight", init.weights({h, h}, h));
        layer.pw_bias = Parameter(p + ".pointwise.bias", Tensor(Shape{h}));
        layer.norm2 = make_norm(p + ".norm2", h);
        m.layers_.push_back(std::move(layer));
    }
    m.head_weight_ = Parameter("head.weight", init.weights({cfg.n_classes, h}, h));
    m.head_bias_ = Parameter("head.bias", Tensor(Shape{cfg.n_classes}));
    if (cfg.use_adaptive_matrix) {
        const std::size_t n = cfg.tokens();
        Tensor u(Shape{n, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) u[i * n + j] = (i == j ? 1.0 : 0.0) + init.uniform(0.01);
        m.adaptive_.emplace("adaptive.U", std::move(u));
    }
    return m;
}

Var Model::forward(Tape& tape, Var images, NormMode mode) {
    const Tensor& x = tape.value(images);
    if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != cfg_.image_size || x.dim(3) != cfg_.image_size) {
        throw ShapeError("model input must be B x 3 x " + std::to_string(cfg_.image_size) + " x " +
                         std::to_string(cfg_.image_size) + ", got " + shape_str(x.shape()));
    }
    Var z = patch_embed(tape, images, tape.parameter(stem_weight_), tape.parameter(stem_bias_));
    z = norm(tape, gelu(tape, z), stem_norm_, mode);
    if (adaptive_) z = apply_adaptive_matrix(tape, z, tape.parameter(*adaptive_));
    for (auto& layer : layers_) {
        Var r = depthwise_conv(tape, z, tape.parameter(layer.dw_weight), tape.parameter(layer.dw_bias));
        r = norm(tape, gelu(tape, r), layer.norm1, mode);
        z = add(tape, r, z);
        z = channel_affine(tape, z, tape.parameter(layer.pw_weight), tape.parameter(layer.pw_bias));
        z = norm(tape, gelu(tape, z), layer.norm2, mode);
    }
    const Var pooled = global_avg_pool(tape, z);
    return channel_affine(tape, pooled, tape.parameter(head_weight_), tape.parameter(head_bias_));
}

std::vector<Parameter*> Model::parameters() {
    std::vector<Parameter*> out{&stem_weight_, &stem_bias_, &stem_norm_.gamma, &stem_norm_.beta};
    for (auto& l : layers_) {
        for (Parameter* p : {&l.dw_weight, &l.dw_bias, &l.norm1.gamma, &l.norm1.beta, &l.pw_weight, &l.pw_bias,
                             &l.norm2.gamma, &l.norm2.beta}) {
            out.push_back(p);
        }
    }
    out.push_back(&head_weight_);
    out.push_back(&head_bias_);
    if (adaptive_) out.push_back(&*adaptive_);
    return out;
}

std::vector<const Parameter*> Model::parameters() const {
    auto mut = const_cast<Model*>(this)->parameters();
    return {mut.begin(), mut.end()};
}

std::vector<std::pair<std::string, Tensor*>> Model::buffers() {
    std::vector<std::pair<std::string, Tensor*>> out;
    auto add_norm = [&](const std::string& prefix, NormLayer& n) {
        out.emplace_back(prefix + ".running_mean", &n.state.running_mean);
        out.emplace_back(prefix + ".running_var", &n.state.running_var);
    };
    add_norm("stem.norm", stem_norm_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const std::string p = "layer" + std::to_string(l);
        add_norm(p + ".norm1", layers_[l].norm1);
        add_norm(p + ".norm2", layers_[l].norm2);
    }
    return out;
}

std::size_t Model::count_params() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) n += p->value.numel();
    return n;
}

void Model::freeze_backbone(bool frozen) {
    for (Parameter* p : parameters()) p->trainable = !frozen || p == adaptive_matrix();
}

Var apply_adaptive_matrix(Tape& tape, Var tokens, Var u) { return token_mix(tape, tokens, u); }

double penalty_LU(const Tensor& u) { return permutation_penalty(u); }

Var penalty_LU(Tape& tape, Var u) { return permutation_penalty(tape, u); }

Var loss_total(Tape& tape, Var logits, std::span<const int> labels, std::optional<Var> u, double lambda) {
    const Var ce = softmax_xent(tape, logits, labels);
    if (!u) return ce;
    return add(tape, ce, scale(tape, penalty_LU(tape, *u), lambda));
}

ExtractedPermutation extract_permutation(const Tensor& u) {
    if (u.rank() != 2 || u.dim(0) != u.dim(1)) throw ShapeError("extract_permutation: matrix must be square");
    const std::size_t n = u.dim(0);
    ExtractedPermutation out;
    out.row_argmax.resize(n);
    std::vector<bool> seen(n, false);
    out.valid = true;
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < n; ++c)
            if (u[r * n + c] > u[r * n + best]) best = c;
        out.row_argmax[r] = best;
        if (seen[best]) out.valid = false;
        seen[best] = true;
    }
    return out;
}

Tensor permutation_matrix(const PermutationVec& perm) {
    const std::size_t n = perm.size();
    Tensor p(Shape{n, n});
    for (std::size_t i = 0; i < n; ++i) p[perm.map[i] * n + i] = 1.0;
    return p;
}

} // namespace ppcm
