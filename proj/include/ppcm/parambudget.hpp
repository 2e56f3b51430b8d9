#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace ppcm {

enum class BudgetMode { ele_same, ele_different, proposed, convmixer_plain };

BudgetMode parse_budget_mode(std::string_view s);
const char* to_string(BudgetMode m);

/// ShakeDrop classifier size used for ELE when none is given (approximate).
inline constexpr std::int64_t default_ele_classifier = 28'490'000;

/// Base hidden size of ELE's adaptation network at 32x32.
inline constexpr std::int64_t default_ele_hidden = 256;

struct BudgetQuery {
    std::int64_t image_size = 224;
    std::int64_t block = 16; // M
    std::int64_t hidden = 512;                  // ConvMixer h
    std::int64_t ele_hidden = default_ele_hidden; // adaptation-network h at 32x32
    std::int64_t depth = 16;
    std::int64_t kernel = 9;
    std::int64_t n_classes = 10;
    std::int64_t classifier = default_ele_classifier;
    BudgetMode mode = BudgetMode::proposed;

    /// n = (image_size / M)^2. Throws InvalidArgument on bad divisibility.
    std::int64_t blocks() const;
    void validate() const;
};

/// n (3 h M^2 + 2 h) + n^2 + N_classifier with h = ele_hidden. ele_different
/// first scales h by image_size / 32 (rounded to nearest).
std::int64_t n_ele(const BudgetQuery& q);

/// Adaptation-network share of n_ele (classifier excluded).
std::int64_t n_ele_adaptation(const BudgetQuery& q);

/// h [d (k^2 + h + 6) + 3 M^2 + n_classes + 3] + n_classes.
std::int64_t n_convmixer(const BudgetQuery& q);

/// n_convmixer + n^2.
std::int64_t n_proposed(const BudgetQuery& q);

/// Dispatches on q.mode.
std::int64_t n_params(const BudgetQuery& q);

std::int64_t ele_hidden_for(const BudgetQuery& q);

struct SweepRow {
    std::int64_t image_size;
    BudgetMode policy;
    std::int64_t params;
};

/// One row per (size, policy), sizes outermost. `base` supplies every field
/// except image_size and mode.
std::vector<SweepRow> sweep_image_sizes(std::span<const std::int64_t> sizes, std::span<const BudgetMode> policies,
                                        const BudgetQuery& base);

/// Header `image_size,policy,params`, integers unformatted.
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);

} // namespace ppcm
