#include "ppcm/image.hpp"

#include "ppcm/error.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace ppcm {

namespace fs = std::filesystem;

RasterImage::RasterImage(std::size_t width, std::size_t height)
    : width_(width), height_(height), data_(width * height * channels, 0) {}

RasterImage::RasterImage(std::size_t width, std::size_t height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != width_ * height_ * channels) {
        throw ShapeError("RasterImage: data length does not match dimensions");
    }
}

namespace {

std::vector<std::uint8_t> read_all(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed for " + path.string());
    return bytes;
}

void write_all(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

// Header tokenizer: whitespace separated, '#' comments to end of line.
class PpmHeader {
public:
    explicit PpmHeader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::string token() {
        skip();
        std::string out;
        while (pos_ < bytes_.size() && !is_space(bytes_[pos_]) && bytes_[pos_] != '#') {
            out.push_back(static_cast<char>(bytes_[pos_++]));
        }
        if (out.empty()) throw ParseError("PPM: truncated header");
        return out;
    }

    std::size_t number() {
        const auto t = token();
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc{} || p != t.data() + t.size()) throw ParseError("PPM: bad header integer '" + t + "'");
        return v;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !is_space(bytes_[pos_])) throw ParseError("PPM: missing raster separator");
        return pos_ + 1;
    }

private:
    static bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

    void skip() {
        while (pos_ < bytes_.size()) {
            if (is_space(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

RasterImage decode_ppm(std::span<const std::uint8_t> bytes) {
    PpmHeader header(bytes);
    if (header.token() != "P6") throw ParseError("PPM: only binary P6 is supported");
    const auto width = header.number();
    const auto height = header.number();
    const auto maxval = header.number();
    if (maxval != 255) throw ParseError("PPM: maxval must be 255");
    const auto offset = header.raster_offset();
    const auto n = width * height * RasterImage::channels;
    if (bytes.size() < offset + n) throw ParseError("PPM: truncated raster");
    return RasterImage(width, height, std::vector<std::uint8_t>(bytes.begin() + offset, bytes.begin() + offset + n));
}

std::vector<std::uint8_t> encode_ppm(const RasterImage& img) {
    const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data().begin(), img.data().end());
    return out;
}

RasterImage read_ppm(const fs::path& path) {
    const auto bytes = read_all(path);
    try {
        return decode_ppm(bytes);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_ppm(const fs::path& path, const RasterImage& img) { write_all(path, encode_ppm(img)); }

RasterImage resize_nearest(const RasterImage& img, std::size_t width, std::size_t height) {
    if (width == 0 || height == 0 || img.width() == 0 || img.height() == 0) {
        throw InvalidArgument("resize_nearest: empty dimensions");
    }
    RasterImage out(width, height);
    for (std::size_t y = 0; y < height; ++y) {
        const std::size_t sy = y * img.height() / height;
        for (std::size_t x = 0; x < width; ++x) {
            const std::size_t sx = x * img.width() / width;
            for (std::size_t c = 0; c < RasterImage::channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
        }
    }
    return out;
}

Manifest read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read manifest " + file.string());
    Manifest m;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        const auto sep = line.find_last_of(" \t");
        if (sep == std::string::npos) {
            throw ParseError(file.string() + ":" + std::to_string(lineno) + ": expected '<path> <label>'");
        }
        ManifestEntry e;
        e.path = line.substr(0, line.find_last_not_of(" \t", sep) + 1);
        const auto lab = line.substr(sep + 1);
        auto [p, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), e.label);
        if (ec != std::errc{} || p != lab.data() + lab.size() || e.path.empty()) {
            throw ParseError(file.string() + ":" + std::to_string(lineno) + ": bad label '" + lab + "'");
        }
        m.entries.push_back(std::move(e));
    }
    return m;
}

void write_manifest(const fs::path& file, const Manifest& manifest) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + file.string());
    for (const auto& e : manifest.entries) out << e.path << ' ' << e.label << '\n';
    if (!out) throw IoError("write failed for " + file.string());
}

std::vector<LabeledImage> load_image_dir(const fs::path& dir, int n_classes) {
    const auto manifest = read_manifest(dir / manifest_name);
    std::vector<LabeledImage> out;
    out.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        if (e.label < 0 || (n_classes > 0 && e.label >= n_classes)) {
            throw InvalidArgument("label " + std::to_string(e.label) + " out of range for " + e.path);
        }
        out.push_back({read_ppm(dir / e.path), e.label});
    }
    return out;
}

void save_image_dir(const fs::path& dir, const std::vector<LabeledImage>& images) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    Manifest m;
    m.entries.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        std::ostringstream name;
        name << "img_" << std::setw(6) << std::setfill('0') << i << ".ppm";
        write_ppm(dir / name.str(), images[i].image);
        m.entries.push_back({name.str(), images[i].label});
    }
    write_manifest(dir / manifest_name, m);
}

std::vector<LabeledImage> decode_cifar10(std::span<const std::uint8_t> bytes) {
    if (bytes.size() % cifar_record_bytes != 0) {
        throw ParseError("CIFAR-10 archive: size " + std::to_string(bytes.size()) + " is not a multiple of 3073");
    }
    constexpr std::size_t side = 32;
    constexpr std::size_t plane = side * side;
    const std::size_t count = bytes.size() / cifar_record_bytes;
    std::vector<LabeledImage> out;
    out.reserve(count);
    for (std::size_t r = 0; r < count; ++r) {
        const auto rec = bytes.subspan(r * cifar_record_bytes, cifar_record_bytes);
        std::vector<std::uint8_t> px(plane * 3);
        for (std::size_t i = 0; i < plane; ++i) {
            for (std::size_t c = 0; c < 3; ++c) px[i * 3 + c] = rec[1 + c * plane + i];
        }
        out.push_back({RasterImage(side, side, std::move(px)), static_cast<int>(rec[0])});
    }
    return out;
}

std::vector<LabeledImage> load_cifar10(const fs::path& archive) {
    const auto bytes = read_all(archive);
    try {
        return decode_cifar10(bytes);
    } catch (const ParseError& e) {
        throw ParseError(archive.string() + ": " + e.what());
    }
}

} // namespace ppcm
