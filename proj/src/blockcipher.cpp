#include "ppcm/blockcipher.hpp"

#include "ppcm/error.hpp"

namespace ppcm {

namespace {

void check_geometry(std::size_t block, std::size_t width, std::size_t height) {
    if (block == 0) throw InvalidArgument("block size must be >= 1");
    if (width == 0 || height == 0) throw InvalidArgument("image is empty");
    if (width % block != 0 || height % block != 0) {
        throw InvalidArgument("image " + std::to_string(width) + "x" + std::to_string(height) +
                              " is not divisible by block size " + std::to_string(block));
    }
}

std::size_t in_block_domain(std::size_t block, bool per_sample) {
    return per_sample ? block * block * RasterImage::channels : block * block;
}

// Copies block src_b of `in` into block dst_b of `out`, applying the in-block
// shuffle and mask. Sample s of the source lands at position dst(s).
void transform_block(const RasterImage& in, RasterImage& out, const CipherSchedule& s, std::size_t src_b,
                     std::size_t dst_b) {
    const std::size_t M = s.block;
    const std::size_t C = RasterImage::channels;
    const std::size_t sx = (src_b % s.blocks_x) * M, sy = (src_b / s.blocks_x) * M;
    const std::size_t dx = (dst_b % s.blocks_x) * M, dy = (dst_b / s.blocks_x) * M;
    for (std::size_t p = 0; p < M * M; ++p) {
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t src = p * C + c;
            const std::size_t dst = s.shuffle_channels ? s.shuffle.map[src] : s.shuffle.map[p] * C + c;
            const bool flip = s.per_sample_mask ? s.mask.bits[dst] : s.mask.bits[dst / C];
            const std::uint8_t v = in.at(sx + p % M, sy + p / M, c);
            const std::size_t q = dst / C;
            out.at(dx + q % M, dy + q / M, dst % C) = flip ? static_cast<std::uint8_t>(255 - v) : v;
        }
    }
}

} // namespace

CipherSchedule make_schedule(const CipherParams& params, std::size_t width, std::size_t height) {
    check_geometry(params.block, width, height);
    const auto& opt = params.options;
    const auto& keys = params.key.subkeys();
    CipherSchedule s;
    s.block = params.block;
    s.blocks_x = width / params.block;
    s.blocks_y = height / params.block;
    s.shuffle_channels = opt.shuffle_channels;
    s.per_sample_mask = opt.per_sample_mask;
    const std::size_t n = s.block_count();
    const std::size_t shuffle_n = in_block_domain(params.block, opt.shuffle_channels);
    const std::size_t mask_n = in_block_domain(params.block, opt.per_sample_mask);
    s.block_perm = opt.block_permutation ? gen_permutation(keys.k1, n) : PermutationVec::identity(n);
    s.shuffle = opt.pixel_shuffle ? gen_permutation(keys.k2, shuffle_n) : PermutationVec::identity(shuffle_n);
    s.mask = opt.negative_positive ? gen_mask(keys.k3, mask_n) : BitMask::zeros(mask_n);
    return s;
}

RasterImage encrypt(const RasterImage& img, const CipherSchedule& s) {
    check_geometry(s.block, img.width(), img.height());
    if (img.width() / s.block != s.blocks_x || img.height() / s.block != s.blocks_y) {
        throw InvalidArgument("encrypt: schedule was built for a different geometry");
    }
    RasterImage out(img.width(), img.height());
    for (std::size_t b = 0; b < s.block_count(); ++b) transform_block(img, out, s, b, s.block_perm.map[b]);
    return out;
}

RasterImage decrypt(const RasterImage& img, const CipherSchedule& s) {
    // Every plain sample is read back from the position encrypt wrote it to;
    // the negative-positive step is its own inverse.
    check_geometry(s.block, img.width(), img.height());
    if (img.width() / s.block != s.blocks_x || img.height() / s.block != s.blocks_y) {
        throw InvalidArgument("decrypt: schedule was built for a different geometry");
    }
    const std::size_t M = s.block;
    const std::size_t C = RasterImage::channels;
    RasterImage out(img.width(), img.height());
    for (std::size_t b = 0; b < s.block_count(); ++b) {
        const std::size_t eb = s.block_perm.map[b];
        const std::size_t ex = (eb % s.blocks_x) * M, ey = (eb / s.blocks_x) * M;
        const std::size_t ox = (b % s.blocks_x) * M, oy = (b / s.blocks_x) * M;
        for (std::size_t p = 0; p < M * M; ++p) {
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t src = p * C + c;
                const std::size_t dst = s.shuffle_channels ? s.shuffle.map[src] : s.shuffle.map[p] * C + c;
                const bool flip = s.per_sample_mask ? s.mask.bits[dst] : s.mask.bits[dst / C];
                const std::size_t q = dst / C;
                const std::uint8_t v = img.at(ex + q % M, ey + q / M, dst % C);
                out.at(ox + p % M, oy + p / M, c) = flip ? static_cast<std::uint8_t>(255 - v) : v;
            }
        }
    }
    return out;
}

RasterImage encrypt(const RasterImage& img, const CipherParams& params) {
    return encrypt(img, make_schedule(params, img.width(), img.height()));
}

RasterImage decrypt(const RasterImage& img, const CipherParams& params) {
    return decrypt(img, make_schedule(params, img.width(), img.height()));
}

std::vector<std::uint8_t> extract_block(const RasterImage& img, std::size_t block, std::size_t b) {
    check_geometry(block, img.width(), img.height());
    const std::size_t bx = img.width() / block;
    if (b >= bx * (img.height() / block)) throw InvalidArgument("extract_block: block index out of range");
    const std::size_t x0 = (b % bx) * block, y0 = (b / bx) * block;
    std::vector<std::uint8_t> out;
    out.reserve(block * block * RasterImage::channels);
    for (std::size_t y = 0; y < block; ++y) {
        for (std::size_t x = 0; x < block; ++x) {
            for (std::size_t c = 0; c < RasterImage::channels; ++c) out.push_back(img.at(x0 + x, y0 + y, c));
        }
    }
    return out;
}

BlockAffineMap block_affine_map(const CipherParams& params, std::size_t blocks) {
    if (params.block == 0) throw InvalidArgument("block size must be >= 1");
    if (blocks == 0) throw InvalidArgument("block count must be >= 1");
    // Geometry 1 x blocks suffices: the in-block schedule is geometry independent.
    return block_affine_map(make_schedule(params, params.block * blocks, params.block));
}

BlockAffineMap block_affine_map(const CipherSchedule& s) {
    const std::size_t C = RasterImage::channels;
    BlockAffineMap m;
    m.dim = s.block * s.block * C;
    m.matrix.assign(m.dim * m.dim, 0);
    m.offset.assign(m.dim, 0);
    m.block_perm = s.block_perm;
    for (std::size_t src = 0; src < m.dim; ++src) {
        const std::size_t dst = s.shuffle_channels ? s.shuffle.map[src] : s.shuffle.map[src / C] * C + src % C;
        const bool flip = s.per_sample_mask ? s.mask.bits[dst] : s.mask.bits[dst / C];
        m.matrix[dst * m.dim + src] = flip ? -1 : 1;
        m.offset[dst] = flip ? 255 : 0;
    }
    return m;
}

} // namespace ppcm
