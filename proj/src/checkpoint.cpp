#include "ppcm/checkpoint.hpp"

#include "ppcm/error.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace ppcm {

namespace {

void put_f64(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(buf, 8);
}

double get_f64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
    return std::bit_cast<double>(bits);
}

std::string shape_field(const Shape& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += 'x';
        out += std::to_string(s[i]);
    }
    return out;
}

Shape parse_shape(const std::string& field) {
    Shape s;
    std::istringstream in(field);
    std::string part;
    while (std::getline(in, part, 'x')) {
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (ec != std::errc{} || p != part.data() + part.size()) throw ParseError("checkpoint: bad shape " + field);
        s.push_back(v);
    }
    return s;
}

std::size_t parse_size(const std::string& v, const std::string& key) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size()) throw ParseError("checkpoint: bad value for " + key);
    return out;
}

ModelConfig parse_model_config(const std::string& line) {
    std::istringstream in(line);
    std::string word;
    in >> word; // "config"
    std::map<std::string, std::string> kv;
    while (in >> word) {
        const auto eq = word.find('=');
        if (eq == std::string::npos) throw ParseError("checkpoint: bad config field " + word);
        kv[word.substr(0, eq)] = word.substr(eq + 1);
    }
    auto need = [&](const char* k) -> const std::string& {
        auto it = kv.find(k);
        if (it == kv.end()) throw ParseError(std::string("checkpoint: config lacks ") + k);
        return it->second;
    };
    ModelConfig cfg;
    cfg.hidden = parse_size(need("hidden"), "hidden");
    cfg.depth = parse_size(need("depth"), "depth");
    cfg.kernel = parse_size(need("kernel"), "kernel");
    cfg.patch = parse_size(need("patch"), "patch");
    cfg.n_classes = parse_size(need("n_classes"), "n_classes");
    cfg.image_size = parse_size(need("image_size"), "image_size");
    cfg.use_adaptive_matrix = need("use_adaptive_matrix") == "1";
    cfg.lambda = std::stod(need("lambda"));
    return cfg;
}

} // namespace

std::string format_model_config(const ModelConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "hidden=" << cfg.hidden << " depth=" << cfg.depth << " kernel=" << cfg.kernel << " patch=" << cfg.patch
        << " n_classes=" << cfg.n_classes << " image_size=" << cfg.image_size
        << " use_adaptive_matrix=" << (cfg.use_adaptive_matrix ? 1 : 0) << " lambda=" << cfg.lambda;
    return out.str();
}

void save_checkpoint(const std::filesystem::path& path, Model& model) {
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    for (Parameter* p : model.parameters()) tensors.emplace_back(p->name, &p->value);
    for (auto& [name, t] : model.buffers()) tensors.emplace_back(name, t);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << "ppcm-checkpoint 1\n";
    out << "config " << format_model_config(model.config()) << '\n';
    for (const auto& [name, t] : tensors) out << "tensor " << name << ' ' << shape_field(t->shape()) << '\n';
    out << "end\n";
    for (const auto& [name, t] : tensors)
        for (double v : t->data()) put_f64(out, v);
    if (!out) throw IoError("write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "ppcm-checkpoint 1") throw ParseError("not a ppcm checkpoint: " + path.string());
    if (!std::getline(in, line) || line.rfind("config ", 0) != 0) throw ParseError("checkpoint: missing config line");
    Model model = Model::build(parse_model_config(line), 0);

    std::vector<std::pair<std::string, Shape>> header;
    while (std::getline(in, line) && line != "end") {
        std::istringstream ls(line);
        std::string tag, name, shape;
        if (!(ls >> tag >> name >> shape) || tag != "tensor") throw ParseError("checkpoint: bad header line " + line);
        header.emplace_back(name, parse_shape(shape));
    }
    if (line != "end") throw ParseError("checkpoint: header not terminated");

    std::vector<std::pair<std::string, Tensor*>> targets;
    for (Parameter* p : model.parameters()) targets.emplace_back(p->name, &p->value);
    for (auto& b : model.buffers()) targets.push_back(b);
    if (targets.size() != header.size()) throw ParseError("checkpoint: tensor count does not match config");

    std::vector<unsigned char> buf;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        auto& [name, t] = targets[i];
        if (header[i].first != name || header[i].second != t->shape()) {
            throw ParseError("checkpoint: expected " + name + " " + shape_str(t->shape()) + ", found " +
                             header[i].first + " " + shape_str(header[i].second));
        }
        buf.resize(t->numel() * 8);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() != static_cast<std::streamsize>(buf.size())) throw ParseError("checkpoint: truncated data");
        for (std::size_t j = 0; j < t->numel(); ++j) (*t)[j] = get_f64(&buf[j * 8]);
    }
    return model;
}

} // namespace ppcm
