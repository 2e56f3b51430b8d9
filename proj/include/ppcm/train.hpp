#pragma once

#include "ppcm/blockcipher.hpp"
#include "ppcm/convmixer.hpp"
#include "ppcm/image.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace ppcm {

/// Images as N x 3 x S x S doubles, sample p mapped to p / 127.5 - 1 so that
/// the negative-positive transform becomes exact negation.
struct Dataset {
    Tensor images;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    Tensor batch_images(std::span<const std::size_t> indices) const;
    std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
};

double normalize_sample(std::uint8_t p);
Dataset to_dataset(std::span<const LabeledImage> images);

enum class EncryptionMode { off, on, perm_only };

EncryptionMode parse_encryption_mode(std::string_view s);
const char* to_string(EncryptionMode m);
CipherOptions cipher_options(EncryptionMode m);

/// Encrypts every image with one key (the schedule is shared).
std::vector<LabeledImage> encrypt_all(std::span<const LabeledImage> images, const CipherParams& params);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    /// One update of every trainable parameter from its accumulated gradient.
    void step(std::span<Parameter* const> params, double lr);

private:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };
    AdamConfig cfg_;
    std::vector<Moments> state_;
    std::size_t t_ = 0;
};

struct StepResult {
    double loss = 0.0;
    double penalty = 0.0;
    std::size_t correct = 0;
};

/// Forward, total loss, backward, Adam update. A frozen backbone runs its
/// normalisation in eval mode.
StepResult train_step(Model& model, const Tensor& images, std::span<const int> labels, Adam& opt, double lr);

/// Logits in eval mode, computed in batches.
Tensor predict(Model& model, const Tensor& images, std::size_t batch_size = 256);

/// Top-1 accuracy in eval mode.
double evaluate(Model& model, const Dataset& data, std::size_t batch_size = 256);

std::size_t argmax_row(const Tensor& logits, std::size_t row);

struct TrainSettings {
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    bool cosine = true;
    std::uint64_t seed = 0;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0; // NaN without a test set
    double penalty_LU = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Mini-batch training with per-epoch shuffling (SplitMix64 Fisher-Yates) and
/// cosine learning-rate decay over all steps.
std::vector<EpochMetrics> fit(Model& model, const Dataset& train, const Dataset* test, const TrainSettings& settings,
                              const EpochCallback& on_epoch = {});

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> metrics);

} // namespace ppcm
