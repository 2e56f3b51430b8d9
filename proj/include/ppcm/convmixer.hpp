#pragma once

#include "ppcm/keystream.hpp"
#include "ppcm/ops.hpp"
#include "ppcm/tensor.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ppcm {

struct ModelConfig {
    std::size_t hidden = 512;     // h
    std::size_t depth = 16;       // d
    std::size_t kernel = 9;       // k, odd
    std::size_t patch = 16;       // M, equal to the cipher block size
    std::size_t n_classes = 10;
    std::size_t image_size = 224;
    bool use_adaptive_matrix = false;
    double lambda = 1e-4;

    /// Throws InvalidArgument on a violated invariant.
    void validate() const;
    std::size_t grid() const { return image_size / patch; }
    std::size_t tokens() const { return grid() * grid(); }
};

struct NormLayer {
    Parameter gamma;
    Parameter beta;
    BatchNormState state;
};

struct MixerLayer {
    Parameter dw_weight; // h x k x k
    Parameter dw_bias;
    NormLayer norm1;
    Parameter pw_weight; // h x h
    Parameter pw_bias;
    NormLayer norm2;
};

/// ConvMixer with an optional trainable token-mixing matrix U placed after
/// the stem (patch embedding, GELU, batch norm).
class Model {
public:
    /// Weights uniform in +-fan_in^-1/2, biases 0, gamma 1, beta 0,
    /// U = I + uniform(+-0.01).
    static Model build(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return cfg_; }

    /// images: B x 3 x S x S. Returns B x n_classes logits.
    Var forward(Tape& tape, Var images, NormMode mode);

    /// The token-mixing matrix, or nullptr when the model has none.
    Parameter* adaptive_matrix() noexcept { return adaptive_ ? &*adaptive_ : nullptr; }
    const Parameter* adaptive_matrix() const noexcept { return adaptive_ ? &*adaptive_ : nullptr; }

    /// Trainable tensors in a fixed order (stem, layers, head, U).
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

    /// Running statistics, named, in a fixed order.
    std::vector<std::pair<std::string, Tensor*>> buffers();

    /// Exact number of trainable scalars.
    std::size_t count_params() const;

    /// Marks every parameter except U as frozen (or unfreezes all).
    void freeze_backbone(bool frozen);

private:
    ModelConfig cfg_;
    Parameter stem_weight_; // h x 3 x M x M
    Parameter stem_bias_;
    NormLayer stem_norm_;
    std::vector<MixerLayer> layers_;
    Parameter head_weight_; // n_classes x h
    Parameter head_bias_;
    std::optional<Parameter> adaptive_;
};

/// Output token t = sum_s U[t, s] * token s, identical for every channel.
Var apply_adaptive_matrix(Tape& tape, Var tokens, Var u);

/// ||U^T U - I||_F^2 + ||min(U, 0)||_F^2.
double penalty_LU(const Tensor& u);
Var penalty_LU(Tape& tape, Var u);

/// Cross-entropy plus lambda * penalty_LU(U); plain cross-entropy when u is absent.
Var loss_total(Tape& tape, Var logits, std::span<const int> labels, std::optional<Var> u, double lambda);

struct ExtractedPermutation {
    std::vector<std::size_t> row_argmax;
    bool valid = false; // argmaxes pairwise distinct

    std::optional<PermutationVec> permutation() const {
        if (!valid) return std::nullopt;
        return PermutationVec{row_argmax};
    }
};

/// Row-wise argmax of a square matrix (first maximum wins on ties).
ExtractedPermutation extract_permutation(const Tensor& u);

/// Matrix P with P[perm(i), i] = 1, so (P x)[perm(i)] = x[i]: the action of a
/// block permutation on the flattened token axis.
Tensor permutation_matrix(const PermutationVec& perm);

} // namespace ppcm
