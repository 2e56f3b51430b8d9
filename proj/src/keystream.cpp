#include "ppcm/keystream.hpp"

#include "ppcm/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <utility>

namespace ppcm {

NextResult next_u64(std::uint64_t state) noexcept {
    SplitMix64 gen(state);
    const std::uint64_t value = gen.next();
    return {value, gen.state()};
}

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

} // namespace

MasterKey MasterKey::from_hex(std::string_view hex) {
    hex = trim(hex);
    if (hex.size() != 64) {
        throw ParseError("master key must be 64 hex digits, got " + std::to_string(hex.size()));
    }
    MasterKey key;
    for (std::size_t i = 0; i < 64; ++i) {
        const int d = hex_digit(hex[i]);
        if (d < 0) throw ParseError("invalid hex digit in master key");
        // digit i (from the left) belongs to word 3 - i / 16
        auto& word = key.words[3 - i / 16];
        word = (word << 4) | static_cast<std::uint64_t>(d);
    }
    return key;
}

std::string MasterKey::to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (int w = 3; w >= 0; --w) {
        for (int shift = 60; shift >= 0; shift -= 4) {
            out.push_back(digits[(words[static_cast<std::size_t>(w)] >> shift) & 0xF]);
        }
    }
    return out;
}

SubKeys derive_subkeys(const MasterKey& master) noexcept {
    const std::uint64_t low = master.low64();
    return {next_u64(low ^ 1U).value, next_u64(low ^ 2U).value, next_u64(low ^ 3U).value};
}

SecretKey SecretKey::with_flipped_bit(unsigned bit) const {
    if (bit >= 256) throw InvalidArgument("bit index out of range");
    MasterKey m = master_;
    m.words[bit / 64] ^= (std::uint64_t{1} << (bit % 64));
    return SecretKey(m);
}

bool PermutationVec::is_bijection() const {
    std::vector<bool> seen(map.size(), false);
    for (auto v : map) {
        if (v >= map.size() || seen[v]) return false;
        seen[v] = true;
    }
    return true;
}

PermutationVec PermutationVec::inverse() const {
    PermutationVec inv;
    inv.map.resize(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) inv.map[map[i]] = i;
    return inv;
}

PermutationVec PermutationVec::identity(std::size_t n) {
    PermutationVec p;
    p.map.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.map[i] = i;
    return p;
}

PermutationVec gen_permutation(std::uint64_t seed, std::size_t n) {
    if (n == 0) throw InvalidArgument("gen_permutation: n must be >= 1");
    PermutationVec p = PermutationVec::identity(n);
    SplitMix64 gen(seed);
    for (std::size_t i = n - 1; i >= 1; --i) {
        const auto j = static_cast<std::size_t>(gen.next() % (static_cast<std::uint64_t>(i) + 1));
        std::swap(p.map[i], p.map[j]);
    }
    return p;
}

BitMask gen_mask(std::uint64_t seed, std::size_t n) {
    if (n == 0) throw InvalidArgument("gen_mask: n must be >= 1");
    BitMask mask{std::vector<bool>(n)};
    SplitMix64 gen(seed);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) word = gen.next();
        mask.bits[i] = ((word >> (i % 64)) & 1U) != 0;
    }
    return mask;
}

MasterKey master_from_seed(std::uint64_t seed) {
    SplitMix64 gen(seed);
    MasterKey key;
    for (auto& w : key.words) w = gen.next();
    return key;
}

KeyFile parse_key_file(std::string_view text) {
    KeyFile key;
    bool have_master = false;
    bool have_block = false;
    bool have_version = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ParseError("key file: expected key=value, got '" + std::string(t) + "'");
        const auto name = trim(t.substr(0, eq));
        const auto value = trim(t.substr(eq + 1));
        if (name == "master") {
            key.master = MasterKey::from_hex(value);
            have_master = true;
        } else if (name == "block_size") {
            int v = 0;
            auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
            if (ec != std::errc{} || p != value.data() + value.size() || v < 1) {
                throw ParseError("key file: invalid block_size");
            }
            key.block_size = v;
            have_block = true;
        } else if (name == "version") {
            if (value != "1") throw ParseError("key file: unsupported version " + std::string(value));
            have_version = true;
        } else {
            throw ParseError("key file: unknown field '" + std::string(name) + "'");
        }
    }
    if (!have_master || !have_block || !have_version) {
        throw ParseError("key file: missing master, block_size or version");
    }
    return key;
}

std::string format_key_file(const KeyFile& key) {
    return "master=" + key.master.to_hex() + "\nblock_size=" + std::to_string(key.block_size) + "\nversion=1\n";
}

KeyFile read_key_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read key file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_key_file(ss.str());
}

void write_key_file(const std::string& path, const KeyFile& key) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write key file " + path);
    out << format_key_file(key);
    if (!out) throw IoError("write failed for " + path);
}

} // namespace ppcm
