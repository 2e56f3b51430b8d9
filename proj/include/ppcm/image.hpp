#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ppcm {

/// 8-bit RGB raster, row-major, pixel-interleaved (R, G, B per pixel).
class RasterImage {
public:
    static constexpr std::size_t channels = 3;

    RasterImage() = default;
    RasterImage(std::size_t width, std::size_t height);
    RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> data);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return data_[(y * width_ + x) * channels + c]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const { return data_[(y * width_ + x) * channels + c]; }

    std::span<std::uint8_t> data() noexcept { return data_; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }

    friend bool operator==(const RasterImage&, const RasterImage&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::uint8_t> data_;
};

// Binary PPM (P6, maxval 255).
RasterImage read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const RasterImage& img);
RasterImage decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const RasterImage& img);

/// Nearest-neighbour resize; output samples are a subset of input samples.
RasterImage resize_nearest(const RasterImage& img, std::size_t width, std::size_t height);

struct LabeledImage {
    RasterImage image;
    int label = 0;
};

struct ManifestEntry {
    std::string path; // relative to the manifest's directory
    int label = 0;
};

/// Manifest: one `relative/path label` per line. Stored as `manifest.txt`.
struct Manifest {
    std::vector<ManifestEntry> entries;
};

inline constexpr const char* manifest_name = "manifest.txt";

Manifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const Manifest& manifest);

/// Loads every entry of `dir/manifest.txt`. Labels must lie in [0, n_classes)
/// when n_classes > 0.
std::vector<LabeledImage> load_image_dir(const std::filesystem::path& dir, int n_classes = 0);

/// Writes images as `img_000000.ppm` ... plus the manifest.
void save_image_dir(const std::filesystem::path& dir, const std::vector<LabeledImage>& images);

// CIFAR-10 binary archive: records of 1 label byte + 3072 channel-planar bytes.
inline constexpr std::size_t cifar_record_bytes = 3073;

std::vector<LabeledImage> decode_cifar10(std::span<const std::uint8_t> bytes);
std::vector<LabeledImage> load_cifar10(const std::filesystem::path& archive);

} // namespace ppcm
