#include "ppcm/run_config.hpp"

#include "ppcm/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ppcm {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) {
        throw ParseError("run config: invalid value '" + std::string(v) + "' for " + std::string(key));
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw ParseError("run config: invalid boolean '" + std::string(v) + "' for " + std::string(key));
}

} // namespace

RunConfig parse_run_config(std::string_view text) {
    RunConfig rc;
    rc.model.hidden = 64;
    rc.model.depth = 4;
    rc.model.kernel = 5;
    rc.model.patch = 4;
    rc.model.image_size = 32;
    std::istringstream in{std::string(text)};
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("run config line " + std::to_string(lineno) + ": expected key=value");
        }
        const auto key = trim(line.substr(0, eq));
        const auto v = trim(line.substr(eq + 1));
        if (key == "h") rc.model.hidden = parse_number<std::size_t>(key, v);
        else if (key == "d") rc.model.depth = parse_number<std::size_t>(key, v);
        else if (key == "k") rc.model.kernel = parse_number<std::size_t>(key, v);
        else if (key == "M") rc.model.patch = parse_number<std::size_t>(key, v);
        else if (key == "image_size") rc.model.image_size = parse_number<std::size_t>(key, v);
        else if (key == "n_classes") rc.model.n_classes = parse_number<std::size_t>(key, v);
        else if (key == "lambda") rc.model.lambda = parse_number<double>(key, v);
        else if (key == "use_adaptive_matrix") rc.model.use_adaptive_matrix = parse_bool(key, v);
        else if (key == "epochs") rc.train.epochs = parse_number<std::size_t>(key, v);
        else if (key == "lr") rc.train.lr = parse_number<double>(key, v);
        else if (key == "batch_size") rc.train.batch_size = parse_number<std::size_t>(key, v);
        else if (key == "seed") rc.train.seed = parse_number<std::uint64_t>(key, v);
        else if (key == "encryption") rc.encryption = parse_encryption_mode(v);
        else throw ParseError("run config: unknown key '" + std::string(key) + "'");
    }
    rc.model.validate();
    if (rc.train.batch_size == 0) throw InvalidArgument("run config: batch_size must be >= 1");
    return rc;
}

RunConfig read_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read run config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str());
}

} // namespace ppcm
