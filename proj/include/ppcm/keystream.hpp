#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ppcm {

/// SplitMix64 generator. The state is a plain value; copies produce
/// independent identical streams.
class SplitMix64 {
public:
    explicit constexpr SplitMix64(std::uint64_t state = 0) noexcept : state_(state) {}

    constexpr std::uint64_t next() noexcept {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    constexpr std::uint64_t state() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

struct NextResult {
    std::uint64_t value;
    std::uint64_t state;
};

/// Functional form of one SplitMix64 step.
NextResult next_u64(std::uint64_t state) noexcept;

/// 256-bit master key. words[0] holds the least significant 64 bits.
struct MasterKey {
    std::array<std::uint64_t, 4> words{};

    std::uint64_t low64() const noexcept { return words[0]; }

    /// Parses exactly 64 hex digits, most significant digit first.
    static MasterKey from_hex(std::string_view hex);
    std::string to_hex() const;

    friend bool operator==(const MasterKey&, const MasterKey&) = default;
};

struct SubKeys {
    std::uint64_t k1; // block permutation
    std::uint64_t k2; // pixel shuffle
    std::uint64_t k3; // negative-positive mask

    friend bool operator==(const SubKeys&, const SubKeys&) = default;
};

/// k_i = SplitMix64 output for state (low64(master) ^ i), i = 1, 2, 3.
SubKeys derive_subkeys(const MasterKey& master) noexcept;

/// Master key plus its derived subkeys. Subkeys are never stored on their own.
class SecretKey {
public:
    SecretKey() : SecretKey(MasterKey{}) {}
    explicit SecretKey(const MasterKey& master) : master_(master), sub_(derive_subkeys(master)) {}

    const MasterKey& master() const noexcept { return master_; }
    const SubKeys& subkeys() const noexcept { return sub_; }

    /// Flips one bit of the master (bit 0 = LSB of words[0]) and re-derives.
    SecretKey with_flipped_bit(unsigned bit) const;

    friend bool operator==(const SecretKey& a, const SecretKey& b) { return a.master_ == b.master_; }

private:
    MasterKey master_;
    SubKeys sub_;
};

/// map[i] is the destination index of element i.
struct PermutationVec {
    std::vector<std::size_t> map;

    std::size_t size() const noexcept { return map.size(); }
    bool is_bijection() const;
    PermutationVec inverse() const;
    static PermutationVec identity(std::size_t n);

    friend bool operator==(const PermutationVec&, const PermutationVec&) = default;
};

struct BitMask {
    std::vector<bool> bits;

    std::size_t size() const noexcept { return bits.size(); }
    static BitMask zeros(std::size_t n) { return BitMask{std::vector<bool>(n, false)}; }
    static BitMask ones(std::size_t n) { return BitMask{std::vector<bool>(n, true)}; }

    friend bool operator==(const BitMask&, const BitMask&) = default;
};

/// Descending Fisher-Yates over the identity: for i = n-1 .. 1 swap(i, next() % (i + 1)).
PermutationVec gen_permutation(std::uint64_t seed, std::size_t n);

/// One u64 draw per 64 bits, bits consumed LSB-first.
BitMask gen_mask(std::uint64_t seed, std::size_t n);

/// Key file: `master=<64 hex>`, `block_size=<int>`, `version=1`.
struct KeyFile {
    MasterKey master;
    int block_size = 0;
};

KeyFile read_key_file(const std::string& path);
void write_key_file(const std::string& path, const KeyFile& key);
KeyFile parse_key_file(std::string_view text);
std::string format_key_file(const KeyFile& key);

/// Deterministic master key from a seed, expanded with SplitMix64.
MasterKey master_from_seed(std::uint64_t seed);

} // namespace ppcm
