#include "ppcm/train.hpp"

#include "ppcm/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

namespace ppcm {

// (2p - 255) / 255 rather than p / 127.5 - 1 so that 255 - p maps to the exact negation.
double normalize_sample(std::uint8_t p) { return (2.0 * p - 255.0) / 255.0; }

Dataset to_dataset(std::span<const LabeledImage> images) {
    Dataset d;
    if (images.empty()) {
        d.images = Tensor(Shape{0, 3, 0, 0});
        return d;
    }
    const std::size_t W = images.front().image.width(), H = images.front().image.height();
    d.images = Tensor(Shape{images.size(), 3, H, W});
    d.labels.reserve(images.size());
    for (std::size_t n = 0; n < images.size(); ++n) {
        const auto& img = images[n].image;
        if (img.width() != W || img.height() != H) throw ShapeError("dataset images must share one size");
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                    d.images[((n * 3 + c) * H + y) * W + x] = normalize_sample(img.at(x, y, c));
        d.labels.push_back(images[n].label);
    }
    return d;
}

Tensor Dataset::batch_images(std::span<const std::size_t> indices) const {
    Shape shape = images.shape();
    const std::size_t per = shape_numel(shape) / std::max<std::size_t>(shape[0], 1);
    shape[0] = indices.size();
    Tensor out(shape);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = images.data().subspan(indices[i] * per, per);
        std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return out;
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(labels[i]);
    return out;
}

EncryptionMode parse_encryption_mode(std::string_view s) {
    if (s == "off") return EncryptionMode::off;
    if (s == "on") return EncryptionMode::on;
    if (s == "perm_only") return EncryptionMode::perm_only;
    throw ParseError("encryption must be on, off or perm_only, got '" + std::string(s) + "'");
}

const char* to_string(EncryptionMode m) {
    switch (m) {
    case EncryptionMode::off: return "off";
    case EncryptionMode::on: return "on";
    case EncryptionMode::perm_only: return "perm_only";
    }
    return "?";
}

CipherOptions cipher_options(EncryptionMode m) {
    switch (m) {
    case EncryptionMode::off: return CipherOptions::identity();
    case EncryptionMode::perm_only: return CipherOptions::permutation_only();
    case EncryptionMode::on: break;
    }
    return CipherOptions{};
}

std::vector<LabeledImage> encrypt_all(std::span<const LabeledImage> images, const CipherParams& params) {
    std::vector<LabeledImage> out;
    out.reserve(images.size());
    if (images.empty()) return out;
    const auto schedule = make_schedule(params, images.front().image.width(), images.front().image.height());
    for (const auto& li : images) out.push_back({encrypt(li.image, schedule), li.label});
    return out;
}

void Adam::step(std::span<Parameter* const> params, double lr) {
    if (state_.empty()) {
        state_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state_[i].m.assign(params[i]->value.numel(), 0.0);
            state_[i].v.assign(params[i]->value.numel(), 0.0);
        }
    }
    if (state_.size() != params.size()) throw InvalidArgument("Adam: parameter set changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Parameter& p = *params[i];
        if (!p.trainable) continue;
        auto& st = state_[i];
        for (std::size_t j = 0; j < p.value.numel(); ++j) {
            const double g = p.grad[j];
            st.m[j] = cfg_.beta1 * st.m[j] + (1.0 - cfg_.beta1) * g;
            st.v[j] = cfg_.beta2 * st.v[j] + (1.0 - cfg_.beta2) * g * g;
            p.value[j] -= lr * (st.m[j] / bc1) / (std::sqrt(st.v[j] / bc2) + cfg_.eps);
        }
    }
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t K = logits.dim(1);
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
        if (logits[row * K + k] > logits[row * K + best]) best = k;
    return best;
}

StepResult train_step(Model& model, const Tensor& images, std::span<const int> labels, Adam& opt, double lr) {
    if (labels.empty()) throw InvalidArgument("train_step: empty batch");
    auto params = model.parameters();
    for (Parameter* p : params) p->zero_grad();
    Parameter* u = model.adaptive_matrix();
    const bool frozen = u && u->trainable &&
                        std::none_of(params.begin(), params.end(), [u](Parameter* p) { return p != u && p->trainable; });

    Tape tape;
    const Var x = tape.constant(images);
    const Var logits = model.forward(tape, x, frozen ? NormMode::eval : NormMode::train);
    std::optional<Var> uvar;
    if (u) uvar = tape.parameter(*u);
    const Var loss = loss_total(tape, logits, labels, uvar, model.config().lambda);
    tape.backward(loss);

    StepResult r;
    r.loss = tape.value(loss)[0];
    if (u) r.penalty = penalty_LU(u->value);
    opt.step(params, lr);
    const Tensor& lv = tape.value(logits);
    for (std::size_t n = 0; n < labels.size(); ++n)
        if (argmax_row(lv, n) == static_cast<std::size_t>(labels[n])) ++r.correct;
    return r;
}

Tensor predict(Model& model, const Tensor& images, std::size_t batch_size) {
    const std::size_t N = images.dim(0);
    const std::size_t K = model.config().n_classes;
    const std::size_t per = N ? images.numel() / N : 0;
    Tensor out(Shape{N, K});
    for (std::size_t start = 0; start < N; start += batch_size) {
        const std::size_t count = std::min(batch_size, N - start);
        Shape bs = images.shape();
        bs[0] = count;
        std::vector<double> chunk(images.data().begin() + static_cast<std::ptrdiff_t>(start * per),
                                  images.data().begin() + static_cast<std::ptrdiff_t>((start + count) * per));
        Tape tape;
        const Var x = tape.constant(Tensor(bs, std::move(chunk)));
        const Tensor& lv = tape.value(model.forward(tape, x, NormMode::eval));
        std::copy(lv.data().begin(), lv.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * K));
    }
    return out;
}

double evaluate(Model& model, const Dataset& data, std::size_t batch_size) {
    if (data.size() == 0) throw InvalidArgument("evaluate: empty dataset");
    const Tensor logits = predict(model, data.images, batch_size);
    std::size_t correct = 0;
    for (std::size_t n = 0; n < data.size(); ++n)
        if (argmax_row(logits, n) == static_cast<std::size_t>(data.labels[n])) ++correct;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<EpochMetrics> fit(Model& model, const Dataset& train, const Dataset* test, const TrainSettings& settings,
                              const EpochCallback& on_epoch) {
    if (train.size() == 0) throw InvalidArgument("fit: empty training set");
    if (settings.batch_size == 0) throw InvalidArgument("fit: batch_size must be >= 1");
    Adam opt;
    const std::size_t N = train.size();
    const std::size_t steps_per_epoch = (N + settings.batch_size - 1) / settings.batch_size;
    const std::size_t total_steps = steps_per_epoch * settings.epochs;
    std::size_t step = 0;
    std::vector<EpochMetrics> history;
    for (std::size_t epoch = 0; epoch < settings.epochs; ++epoch) {
        const auto order = gen_permutation(settings.seed ^ (0xA5A5A5A5ULL + epoch), N);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < N; start += settings.batch_size) {
            const std::size_t count = std::min(settings.batch_size, N - start);
            const std::span<const std::size_t> idx(order.map.data() + start, count);
            const double lr = settings.cosine
                                  ? settings.lr * 0.5 *
                                        (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) /
                                                        static_cast<double>(total_steps)))
                                  : settings.lr;
            const auto labels = train.batch_labels(idx);
            const auto r = train_step(model, train.batch_images(idx), labels, opt, lr);
            loss_sum += r.loss * static_cast<double>(count);
            correct += r.correct;
            ++step;
        }
        EpochMetrics m;
        m.epoch = epoch + 1;
        m.train_loss = loss_sum / static_cast<double>(N);
        m.train_acc = static_cast<double>(correct) / static_cast<double>(N);
        m.test_acc = test && test->size() ? evaluate(model, *test) : std::numeric_limits<double>::quiet_NaN();
        const Parameter* u = model.adaptive_matrix();
        m.penalty_LU = u ? penalty_LU(u->value) : 0.0;
        history.push_back(m);
        if (on_epoch) on_epoch(m);
    }
    return history;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> metrics) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write metrics " + path.string());
    out.precision(17);
    out << "epoch,train_loss,train_acc,test_acc,penalty_LU\n";
    for (const auto& m : metrics) {
        out << m.epoch << ',' << m.train_loss << ',' << m.train_acc << ',';
        if (!std::isnan(m.test_acc)) out << m.test_acc;
        out << ',' << m.penalty_LU << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace ppcm
