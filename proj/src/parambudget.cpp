#include "ppcm/parambudget.hpp"

#include "ppcm/error.hpp"

#include <fstream>
#include <string>

namespace ppcm {

BudgetMode parse_budget_mode(std::string_view s) {
    if (s == "ele_same") return BudgetMode::ele_same;
    if (s == "ele_different") return BudgetMode::ele_different;
    if (s == "proposed") return BudgetMode::proposed;
    if (s == "convmixer_plain") return BudgetMode::convmixer_plain;
    throw InvalidArgument("unknown budget mode '" + std::string(s) + "'");
}

const char* to_string(BudgetMode m) {
    switch (m) {
    case BudgetMode::ele_same: return "ele_same";
    case BudgetMode::ele_different: return "ele_different";
    case BudgetMode::proposed: return "proposed";
    case BudgetMode::convmixer_plain: return "convmixer_plain";
    }
    return "?";
}

void BudgetQuery::validate() const {
    if (image_size < 1 || block < 1 || hidden < 1 || ele_hidden < 1 || depth < 1 || kernel < 1 || n_classes < 1 || classifier < 0) {
        throw InvalidArgument("budget query: sizes must be >= 1");
    }
    if (image_size % block != 0) {
        throw InvalidArgument("budget query: image size " + std::to_string(image_size) +
                              " is not divisible by block size " + std::to_string(block));
    }
}

std::int64_t BudgetQuery::blocks() const {
    validate();
    const std::int64_t g = image_size / block;
    return g * g;
}

std::int64_t ele_hidden_for(const BudgetQuery& q) {
    if (q.mode != BudgetMode::ele_different) return q.ele_hidden;
    return (q.ele_hidden * q.image_size + 16) / 32;
}

std::int64_t n_ele_adaptation(const BudgetQuery& q) {
    if (q.mode != BudgetMode::ele_same && q.mode != BudgetMode::ele_different) {
        throw InvalidArgument("n_ele: mode must be ele_same or ele_different");
    }
    const std::int64_t n = q.blocks();
    const std::int64_t h = ele_hidden_for(q);
    const std::int64_t M = q.block;
    return n * (3 * h * M * M + 2 * h) + n * n;
}

std::int64_t n_ele(const BudgetQuery& q) { return n_ele_adaptation(q) + q.classifier; }

std::int64_t n_convmixer(const BudgetQuery& q) {
    q.validate();
    const std::int64_t h = q.hidden, d = q.depth, k = q.kernel, M = q.block, c = q.n_classes;
    return h * (d * (k * k + h + 6) + 3 * M * M + c + 3) + c;
}

std::int64_t n_proposed(const BudgetQuery& q) {
    const std::int64_t n = q.blocks();
    return n_convmixer(q) + n * n;
}

std::int64_t n_params(const BudgetQuery& q) {
    switch (q.mode) {
    case BudgetMode::ele_same:
    case BudgetMode::ele_different: return n_ele(q);
    case BudgetMode::proposed: return n_proposed(q);
    case BudgetMode::convmixer_plain: return n_convmixer(q);
    }
    throw InvalidArgument("unknown budget mode");
}

std::vector<SweepRow> sweep_image_sizes(std::span<const std::int64_t> sizes, std::span<const BudgetMode> policies,
                                        const BudgetQuery& base) {
    std::vector<SweepRow> rows;
    rows.reserve(sizes.size() * policies.size());
    for (auto size : sizes) {
        for (auto policy : policies) {
            BudgetQuery q = base;
            q.image_size = size;
            q.mode = policy;
            rows.push_back({size, policy, n_params(q)});
        }
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "image_size,policy,params\n";
    for (const auto& r : rows) out << r.image_size << ',' << to_string(r.policy) << ',' << r.params << '\n';
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    write_sweep_csv(out, rows);
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace ppcm
