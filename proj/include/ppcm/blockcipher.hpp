#pragma once

#include "ppcm/image.hpp"
#include "ppcm/keystream.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ppcm {

/// Step switches and scrambling variants. The defaults are the full
/// block-permute / pixel-shuffle / negative-positive cipher with channels
/// moving together and a per-pixel mask.
struct CipherOptions {
    bool block_permutation = true;
    bool pixel_shuffle = true;
    bool negative_positive = true;
    /// Shuffle all 3*M*M samples of a block instead of M*M pixel positions.
    bool shuffle_channels = false;
    /// One mask bit per sample (3*M*M) instead of one per pixel.
    bool per_sample_mask = false;

    static CipherOptions identity() { return {false, false, false, false, false}; }
    static CipherOptions permutation_only() { return {true, false, false, false, false}; }
};

struct CipherParams {
    std::size_t block = 0; // M
    SecretKey key;
    CipherOptions options;
};

/// Key material expanded for one image geometry.
struct CipherSchedule {
    std::size_t block = 0;
    std::size_t blocks_x = 0;
    std::size_t blocks_y = 0;
    PermutationVec block_perm;    // over n blocks, row-major
    PermutationVec shuffle;       // over M*M pixels or 3*M*M samples
    BitMask mask;                 // over M*M pixels or 3*M*M samples
    bool shuffle_channels = false;
    bool per_sample_mask = false;

    std::size_t block_count() const noexcept { return blocks_x * blocks_y; }
};

CipherSchedule make_schedule(const CipherParams& params, std::size_t width, std::size_t height);

/// Block split, keyed block permutation, in-block pixel shuffle, in-block
/// negative-positive transform, reassembly.
RasterImage encrypt(const RasterImage& img, const CipherParams& params);
RasterImage decrypt(const RasterImage& img, const CipherParams& params);

RasterImage encrypt(const RasterImage& img, const CipherSchedule& schedule);
RasterImage decrypt(const RasterImage& img, const CipherSchedule& schedule);

/// Row-major, pixel-interleaved flattening of block b (row-major block index).
std::vector<std::uint8_t> extract_block(const RasterImage& img, std::size_t block, std::size_t b);

/// flatten(block t of encrypt(img)) == A * flatten(block perm^-1(t) of img) + offset.
struct BlockAffineMap {
    std::size_t dim = 0;              // 3*M*M
    std::vector<int> matrix;          // dim x dim, row-major, entries in {-1, 0, 1}
    std::vector<int> offset;          // entries in {0, 255}
    PermutationVec block_perm;

    int a(std::size_t row, std::size_t col) const { return matrix[row * dim + col]; }
};

/// `blocks` is the number of blocks of the target geometry (needed for the
/// block permutation; the in-block map does not depend on it).
BlockAffineMap block_affine_map(const CipherParams& params, std::size_t blocks);
BlockAffineMap block_affine_map(const CipherSchedule& schedule);

} // namespace ppcm
