#include "ppcm/cli.hpp"

#include "ppcm/blockcipher.hpp"
#include "ppcm/checkpoint.hpp"
#include "ppcm/error.hpp"
#include "ppcm/image.hpp"
#include "ppcm/keystream.hpp"
#include "ppcm/parambudget.hpp"
#include "ppcm/run_config.hpp"
#include "ppcm/train.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <iostream>
#include <random>

namespace ppcm::cli {

namespace fs = std::filesystem;

namespace {

struct EncryptArgs {
    std::string key;
    std::size_t block = 0;
    std::string in;
    std::string out;
    std::size_t resize = 0;
    std::string mode = "on";
    bool shuffle_channels = false;
    bool per_sample_mask = false;
};

std::vector<LabeledImage> load_images(const fs::path& in) {
    if (fs::is_directory(in)) return load_image_dir(in);
    if (fs::is_regular_file(in)) return load_cifar10(in);
    throw IoError("input " + in.string() + " does not exist");
}

CipherParams cipher_from(const KeyFile& key, std::size_t block, const std::string& mode, bool shuffle_channels,
                         bool per_sample_mask) {
    if (block != 0 && block != static_cast<std::size_t>(key.block_size)) {
        throw KeyMismatch("key was generated for block size " + std::to_string(key.block_size) + ", not " +
                          std::to_string(block));
    }
    CipherParams p;
    p.block = static_cast<std::size_t>(key.block_size);
    p.key = SecretKey(key.master);
    p.options = cipher_options(parse_encryption_mode(mode));
    p.options.shuffle_channels = shuffle_channels;
    p.options.per_sample_mask = per_sample_mask;
    return p;
}

void run_cipher(const EncryptArgs& a, bool forward, std::ostream& out) {
    const auto key = read_key_file(a.key);
    const auto params = cipher_from(key, a.block, a.mode, a.shuffle_channels, a.per_sample_mask);
    auto images = load_images(a.in);
    if (a.resize) {
        for (auto& li : images) li.image = resize_nearest(li.image, a.resize, a.resize);
    }
    std::vector<LabeledImage> result;
    result.reserve(images.size());
    for (const auto& li : images) {
        result.push_back({forward ? encrypt(li.image, params) : decrypt(li.image, params), li.label});
    }
    save_image_dir(a.out, result);
    out << (forward ? "encrypted " : "decrypted ") << result.size() << " images -> " << a.out << '\n';
}

std::uint64_t parse_hex_seed(const std::string& s) {
    std::string_view v = s;
    if (v.starts_with("0x") || v.starts_with("0X")) v.remove_prefix(2);
    std::uint64_t seed = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), seed, 16);
    if (v.empty() || ec != std::errc{} || p != v.data() + v.size()) throw ParseError("invalid hex seed '" + s + "'");
    return seed;
}

Dataset prepare_dataset(const fs::path& dir, const RunConfig& rc, const std::string& key_path) {
    auto images = load_image_dir(dir, static_cast<int>(rc.model.n_classes));
    if (rc.encryption != EncryptionMode::off) {
        if (key_path.empty()) throw InvalidArgument("encryption=" + std::string(to_string(rc.encryption)) + " needs --key");
        const auto key = read_key_file(key_path);
        const auto params = cipher_from(key, rc.model.patch, to_string(rc.encryption), false, false);
        images = encrypt_all(images, params);
    }
    return to_dataset(images);
}

std::vector<std::int64_t> parse_sizes(const std::string& list) {
    std::vector<std::int64_t> out;
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto part = list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
        if (part.empty() || ec != std::errc{} || p != part.data() + part.size() || v < 1) {
            throw InvalidArgument("invalid size '" + part + "' in --sizes");
        }
        out.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Block-wise image cipher and ConvMixer with an adaptive permutation matrix", "ppcm"};
    app.require_subcommand(1);

    // keygen
    std::string key_out;
    std::string seed_hex;
    int key_block = 16;
    auto* keygen = app.add_subcommand("keygen", "Generate a key file");
    keygen->add_option("--out", key_out, "Key file to write")->required();
    keygen->add_option("--seed", seed_hex, "Deterministic seed (hex); random when omitted");
    keygen->add_option("--block", key_block, "Block size recorded in the key")->check(CLI::PositiveNumber);

    // encrypt / decrypt
    EncryptArgs enc;
    for (const char* name : {"encrypt", "decrypt"}) {
        auto* sc = app.add_subcommand(name, std::string(name == std::string("encrypt") ? "Encrypt" : "Decrypt") +
                                                 " a PPM directory or CIFAR-10 archive");
        sc->add_option("--key", enc.key, "Key file")->required();
        sc->add_option("--block", enc.block, "Block size (must match the key)");
        sc->add_option("--in", enc.in, "Input directory with manifest.txt, or CIFAR-10 .bin archive")->required();
        sc->add_option("--out", enc.out, "Output directory")->required();
        sc->add_option("--resize", enc.resize, "Nearest-neighbour resize to NxN before processing");
        sc->add_option("--mode", enc.mode, "on | perm_only | off")->check(CLI::IsMember({"on", "perm_only", "off"}));
        sc->add_flag("--shuffle-channels", enc.shuffle_channels, "Shuffle all 3*M*M samples of a block");
        sc->add_flag("--per-sample-mask", enc.per_sample_mask, "Negative-positive mask per sample");
    }

    // train
    std::string cfg_path, data_dir, test_dir, ckpt_dir, train_key;
    auto* train = app.add_subcommand("train", "Train a model from a run configuration");
    train->add_option("--config", cfg_path, "Run configuration (key=value)")->required();
    train->add_option("--data", data_dir, "Training directory with manifest.txt")->required();
    train->add_option("--test", test_dir, "Test directory with manifest.txt");
    train->add_option("--out", ckpt_dir, "Output directory for model.ckpt and metrics.csv")->required();
    train->add_option("--key", train_key, "Key file used when encryption is on or perm_only");

    // eval
    std::string eval_ckpt, eval_data, eval_key, eval_mode = "off";
    auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint");
    evalc->add_option("--ckpt", eval_ckpt, "Checkpoint file")->required();
    evalc->add_option("--data", eval_data, "Directory with manifest.txt")->required();
    evalc->add_option("--key", eval_key, "Key file for on-the-fly encryption");
    evalc->add_option("--encryption", eval_mode, "on | perm_only | off")
        ->check(CLI::IsMember({"on", "perm_only", "off"}));

    // params
    BudgetQuery q;
    std::string mode = "proposed";
    auto* params = app.add_subcommand("params", "Print a closed-form parameter count");
    params->add_option("--mode", mode, "ele_same | ele_different | proposed | convmixer_plain")
        ->check(CLI::IsMember({"ele_same", "ele_different", "proposed", "convmixer_plain"}));
    params->add_option("--image-size", q.image_size, "Image side length");
    params->add_option("--block", q.block, "Block / patch size M");
    params->add_option("--hidden", q.hidden, "ConvMixer hidden size h");
    params->add_option("--depth", q.depth, "ConvMixer depth d");
    params->add_option("--kernel", q.kernel, "ConvMixer kernel size k");
    params->add_option("--classes", q.n_classes, "Number of classes");
    params->add_option("--ele-hidden", q.ele_hidden, "ELE adaptation-network hidden size at 32x32");
    bool classifier_given = false;
    params->add_option("--classifier", q.classifier, "ELE classifier parameter count")
        ->each([&](const std::string&) { classifier_given = true; });

    // sweep
    std::string sizes = "32,64,128,224", sweep_out;
    BudgetQuery sq;
    auto* sweep = app.add_subcommand("sweep", "Parameter counts versus image size as CSV");
    sweep->add_option("--sizes", sizes, "Comma-separated image sizes");
    sweep->add_option("--out", sweep_out, "CSV file (stdout when omitted)");
    sweep->add_option("--block", sq.block, "Block / patch size M");
    sweep->add_option("--hidden", sq.hidden, "ConvMixer hidden size h");
    sweep->add_option("--depth", sq.depth, "ConvMixer depth d");
    sweep->add_option("--kernel", sq.kernel, "ConvMixer kernel size k");
    sweep->add_option("--classes", sq.n_classes, "Number of classes");
    sweep->add_option("--ele-hidden", sq.ele_hidden, "ELE adaptation-network hidden size at 32x32");
    sweep->add_option("--classifier", sq.classifier, "ELE classifier parameter count");

    std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(argv_rest.begin(), argv_rest.end());
    try {
        app.parse(argv_rest);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << "ppcm: error: " << e.what() << '\n';
        return usage_error;
    }

    try {
        if (*keygen) {
            KeyFile k;
            k.block_size = key_block;
            if (seed_hex.empty()) {
                std::random_device rd;
                for (auto& w : k.master.words) w = (static_cast<std::uint64_t>(rd()) << 32) | rd();
            } else {
                k.master = master_from_seed(parse_hex_seed(seed_hex));
            }
            write_key_file(key_out, k);
        } else if (app.got_subcommand("encrypt")) {
            run_cipher(enc, true, out);
        } else if (app.got_subcommand("decrypt")) {
            run_cipher(enc, false, out);
        } else if (*train) {
            const auto rc = read_run_config(cfg_path);
            const auto train_set = prepare_dataset(data_dir, rc, train_key);
            std::optional<Dataset> test_set;
            if (!test_dir.empty()) test_set = prepare_dataset(test_dir, rc, train_key);
            auto model = Model::build(rc.model, rc.train.seed);
            std::error_code ec;
            fs::create_directories(ckpt_dir, ec);
            if (ec) throw IoError("cannot create " + ckpt_dir + ": " + ec.message());
            std::vector<EpochMetrics> history;
            fit(model, train_set, test_set ? &*test_set : nullptr, rc.train, [&](const EpochMetrics& m) {
                history.push_back(m);
                write_metrics_csv(fs::path(ckpt_dir) / "metrics.csv", history);
                out << "epoch " << m.epoch << " loss " << m.train_loss << " train_acc " << m.train_acc;
                if (test_set) out << " test_acc " << m.test_acc;
                out << '\n';
            });
            save_checkpoint(fs::path(ckpt_dir) / "model.ckpt", model);
        } else if (*evalc) {
            auto model = load_checkpoint(eval_ckpt);
            RunConfig rc;
            rc.model = model.config();
            rc.encryption = parse_encryption_mode(eval_mode);
            const auto data = prepare_dataset(eval_data, rc, eval_key);
            out << evaluate(model, data) << '\n';
        } else if (*params) {
            q.mode = parse_budget_mode(mode);
            out << n_params(q) << '\n';
            if ((q.mode == BudgetMode::ele_same || q.mode == BudgetMode::ele_different) && !classifier_given) {
                err << "note: classifier size defaults to " << default_ele_classifier << " (approximate)\n";
            }
        } else if (*sweep) {
            const auto list = parse_sizes(sizes);
            const BudgetMode policies[] = {BudgetMode::ele_same, BudgetMode::ele_different, BudgetMode::proposed};
            const auto rows = sweep_image_sizes(list, policies, sq);
            if (sweep_out.empty()) write_sweep_csv(out, rows);
            else write_sweep_csv(fs::path(sweep_out), rows);
        }
    } catch (const KeyMismatch& e) {
        err << "ppcm: error: " << e.what() << '\n';
        return key_mismatch;
    } catch (const IoError& e) {
        err << "ppcm: error: " << e.what() << '\n';
        return io_error;
    } catch (const ParseError& e) {
        err << "ppcm: error: " << e.what() << '\n';
        return parse_error;
    } catch (const ShapeError& e) {
        err << "ppcm: error: " << e.what() << '\n';
        return shape_error;
    } catch (const InvalidArgument& e) {
        err << "ppcm: error: " << e.what() << '\n';
        return invalid_argument;
    } catch (const std::exception& e) {
        err << "ppcm: error: " << e.what() << '\n';
        return internal_error;
    }
    return ok;
}

} // namespace ppcm::cli
