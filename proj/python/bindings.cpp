#include "ppcm/blockcipher.hpp"
#include "ppcm/checkpoint.hpp"
#include "ppcm/convmixer.hpp"
#include "ppcm/error.hpp"
#include "ppcm/keystream.hpp"
#include "ppcm/parambudget.hpp"
#include "ppcm/train.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace ppcm;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

RasterImage to_image(const U8Array& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an H x W x 3 uint8 array");
    const auto h = static_cast<std::size_t>(a.shape(0)), w = static_cast<std::size_t>(a.shape(1));
    return RasterImage(w, h, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

U8Array from_image(const RasterImage& img) {
    U8Array out({img.height(), img.width(), std::size_t{3}});
    std::memcpy(out.mutable_data(), img.data().data(), img.size());
    return out;
}

std::vector<LabeledImage> to_images(const U8Array& batch, const std::vector<int>& labels) {
    if (batch.ndim() != 4 || batch.shape(3) != 3) throw ShapeError("expected an N x H x W x 3 uint8 array");
    const auto n = static_cast<std::size_t>(batch.shape(0));
    if (labels.size() != n) throw ShapeError("labels and images differ in length");
    const auto h = static_cast<std::size_t>(batch.shape(1)), w = static_cast<std::size_t>(batch.shape(2));
    const std::size_t per = h * w * 3;
    std::vector<LabeledImage> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({RasterImage(w, h, std::vector<std::uint8_t>(batch.data() + i * per, batch.data() + (i + 1) * per)),
                       labels[i]});
    }
    return out;
}

Tensor to_tensor(const F64Array& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

F64Array from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    F64Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

CipherParams cipher_params(std::size_t block, const std::string& master_hex, const std::string& mode,
                           bool shuffle_channels, bool per_sample_mask) {
    CipherParams p;
    p.block = block;
    p.key = SecretKey(MasterKey::from_hex(master_hex));
    p.options = cipher_options(parse_encryption_mode(mode));
    p.options.shuffle_channels = shuffle_channels;
    p.options.per_sample_mask = per_sample_mask;
    return p;
}

BudgetQuery budget(const std::string& mode, std::int64_t image_size, std::int64_t block, std::int64_t hidden,
                   std::int64_t depth, std::int64_t kernel, std::int64_t n_classes, std::int64_t ele_hidden,
                   std::int64_t classifier) {
    BudgetQuery q;
    q.mode = parse_budget_mode(mode);
    q.image_size = image_size;
    q.block = block;
    q.hidden = hidden;
    q.depth = depth;
    q.kernel = kernel;
    q.n_classes = n_classes;
    q.ele_hidden = ele_hidden;
    q.classifier = classifier;
    return q;
}

} // namespace

PYBIND11_MODULE(_ppcm, m) {
    m.doc() = "Block-wise image cipher and ConvMixer with an adaptive permutation matrix";

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<KeyMismatch>(m, "KeyMismatch", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    // keystream
    m.def("next_u64", [](std::uint64_t state) {
        const auto r = next_u64(state);
        return py::make_tuple(r.value, r.state);
    }, py::arg("state"), "One SplitMix64 step: (value, new_state).");
    m.def("derive_subkeys", [](const std::string& master_hex) {
        const auto k = derive_subkeys(MasterKey::from_hex(master_hex));
        return py::make_tuple(k.k1, k.k2, k.k3);
    }, py::arg("master_hex"));
    m.def("master_from_seed", [](std::uint64_t seed) { return master_from_seed(seed).to_hex(); }, py::arg("seed"));
    m.def("gen_permutation", [](std::uint64_t seed, std::size_t n) { return gen_permutation(seed, n).map; },
          py::arg("seed"), py::arg("n"));
    m.def("gen_mask", [](std::uint64_t seed, std::size_t n) { return gen_mask(seed, n).bits; }, py::arg("seed"),
          py::arg("n"));

    // blockcipher
    const auto cipher_doc = "image: H x W x 3 uint8; mode: on | perm_only | off";
    m.def("encrypt",
          [](const U8Array& image, std::size_t block, const std::string& master_hex, const std::string& mode,
             bool shuffle_channels, bool per_sample_mask) {
              return from_image(encrypt(to_image(image), cipher_params(block, master_hex, mode, shuffle_channels,
                                                                       per_sample_mask)));
          },
          py::arg("image"), py::arg("block"), py::arg("master_hex"), py::arg("mode") = "on",
          py::arg("shuffle_channels") = false, py::arg("per_sample_mask") = false, cipher_doc);
    m.def("decrypt",
          [](const U8Array& image, std::size_t block, const std::string& master_hex, const std::string& mode,
             bool shuffle_channels, bool per_sample_mask) {
              return from_image(decrypt(to_image(image), cipher_params(block, master_hex, mode, shuffle_channels,
                                                                       per_sample_mask)));
          },
          py::arg("image"), py::arg("block"), py::arg("master_hex"), py::arg("mode") = "on",
          py::arg("shuffle_channels") = false, py::arg("per_sample_mask") = false, cipher_doc);
    m.def("block_affine_map",
          [](std::size_t block, const std::string& master_hex, std::size_t blocks, const std::string& mode,
             bool shuffle_channels, bool per_sample_mask) {
              const auto map = block_affine_map(cipher_params(block, master_hex, mode, shuffle_channels,
                                                              per_sample_mask),
                                                blocks);
              py::array_t<int> a({map.dim, map.dim});
              std::copy(map.matrix.begin(), map.matrix.end(), a.mutable_data());
              py::array_t<int> b(map.dim);
              std::copy(map.offset.begin(), map.offset.end(), b.mutable_data());
              return py::make_tuple(a, b, map.block_perm.map);
          },
          py::arg("block"), py::arg("master_hex"), py::arg("blocks"), py::arg("mode") = "on",
          py::arg("shuffle_channels") = false, py::arg("per_sample_mask") = false,
          "(A, b, block_perm): encrypted block = A @ block + b on flattened M x M x 3 samples.");

    // parambudget
    m.def("n_params",
          [](const std::string& mode, std::int64_t image_size, std::int64_t block, std::int64_t hidden,
             std::int64_t depth, std::int64_t kernel, std::int64_t n_classes, std::int64_t ele_hidden,
             std::int64_t classifier) {
              return n_params(budget(mode, image_size, block, hidden, depth, kernel, n_classes, ele_hidden, classifier));
          },
          py::arg("mode") = "proposed", py::arg("image_size") = 224, py::arg("block") = 16, py::arg("hidden") = 512,
          py::arg("depth") = 16, py::arg("kernel") = 9, py::arg("n_classes") = 10,
          py::arg("ele_hidden") = default_ele_hidden, py::arg("classifier") = default_ele_classifier);
    m.def("sweep",
          [](const std::vector<std::int64_t>& sizes, std::int64_t block, std::int64_t hidden, std::int64_t depth,
             std::int64_t kernel, std::int64_t n_classes, std::int64_t ele_hidden, std::int64_t classifier) {
              const BudgetMode policies[] = {BudgetMode::ele_same, BudgetMode::ele_different, BudgetMode::proposed};
              const auto base = budget("proposed", 224, block, hidden, depth, kernel, n_classes, ele_hidden, classifier);
              std::vector<py::tuple> rows;
              for (const auto& r : sweep_image_sizes(sizes, policies, base))
                  rows.push_back(py::make_tuple(r.image_size, to_string(r.policy), r.params));
              return rows;
          },
          py::arg("sizes") = std::vector<std::int64_t>{32, 64, 128, 224}, py::arg("block") = 16,
          py::arg("hidden") = 512, py::arg("depth") = 16, py::arg("kernel") = 9, py::arg("n_classes") = 10,
          py::arg("ele_hidden") = default_ele_hidden, py::arg("classifier") = default_ele_classifier,
          "[(image_size, policy, params)] for ele_same, ele_different and proposed.");

    // convmixer
    m.def("penalty_LU", [](const F64Array& u) { return penalty_LU(to_tensor(u)); }, py::arg("u"));
    m.def("extract_permutation", [](const F64Array& u) {
        const auto ex = extract_permutation(to_tensor(u));
        return py::make_tuple(ex.row_argmax, ex.valid);
    }, py::arg("u"), "(row_argmax, valid)");
    m.def("permutation_matrix",
          [](const std::vector<std::size_t>& perm) { return from_tensor(permutation_matrix(PermutationVec{perm})); },
          py::arg("perm"), "P with P[perm[i], i] = 1.");

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init([](std::size_t hidden, std::size_t depth, std::size_t kernel, std::size_t patch,
                         std::size_t n_classes, std::size_t image_size, bool use_adaptive_matrix, double lambda) {
                 ModelConfig c{hidden, depth, kernel, patch, n_classes, image_size, use_adaptive_matrix, lambda};
                 c.validate();
                 return c;
             }),
             py::arg("hidden") = 512, py::arg("depth") = 16, py::arg("kernel") = 9, py::arg("patch") = 16,
             py::arg("n_classes") = 10, py::arg("image_size") = 224, py::arg("use_adaptive_matrix") = false,
             py::arg("lam") = 1e-4)
        .def_readonly("hidden", &ModelConfig::hidden)
        .def_readonly("depth", &ModelConfig::depth)
        .def_readonly("kernel", &ModelConfig::kernel)
        .def_readonly("patch", &ModelConfig::patch)
        .def_readonly("n_classes", &ModelConfig::n_classes)
        .def_readonly("image_size", &ModelConfig::image_size)
        .def_readonly("use_adaptive_matrix", &ModelConfig::use_adaptive_matrix)
        .def_readonly("lam", &ModelConfig::lambda)
        .def("__repr__", [](const ModelConfig& c) { return "ModelConfig(" + format_model_config(c) + ")"; });

    py::class_<EpochMetrics>(m, "EpochMetrics")
        .def_readonly("epoch", &EpochMetrics::epoch)
        .def_readonly("train_loss", &EpochMetrics::train_loss)
        .def_readonly("train_acc", &EpochMetrics::train_acc)
        .def_readonly("test_acc", &EpochMetrics::test_acc)
        .def_readonly("penalty_LU", &EpochMetrics::penalty_LU);

    py::class_<Model>(m, "Model")
        .def(py::init([](const ModelConfig& c, std::uint64_t seed) { return Model::build(c, seed); }),
             py::arg("config"), py::arg("seed") = 0)
        .def_property_readonly("config", &Model::config)
        .def("count_params", &Model::count_params)
        .def("freeze_backbone", &Model::freeze_backbone, py::arg("frozen") = true)
        .def_property(
            "adaptive_matrix",
            [](Model& model) -> py::object {
                const Parameter* u = model.adaptive_matrix();
                if (!u) return py::none();
                return from_tensor(u->value);
            },
            [](Model& model, const F64Array& a) {
                Parameter* u = model.adaptive_matrix();
                if (!u) throw InvalidArgument("model has no adaptive matrix");
                Tensor t = to_tensor(a);
                if (t.shape() != u->value.shape()) throw ShapeError("adaptive matrix shape mismatch");
                u->value = std::move(t);
            })
        .def("predict",
             [](Model& model, const U8Array& images) {
                 const std::vector<int> labels(static_cast<std::size_t>(images.ndim() ? images.shape(0) : 0), 0);
                 return from_tensor(predict(model, to_dataset(to_images(images, labels)).images));
             },
             py::arg("images"), "Logits for N x H x W x 3 uint8 images (eval mode).")
        .def("evaluate",
             [](Model& model, const U8Array& images, const std::vector<int>& labels) {
                 return evaluate(model, to_dataset(to_images(images, labels)));
             },
             py::arg("images"), py::arg("labels"))
        .def("fit",
             [](Model& model, const U8Array& images, const std::vector<int>& labels, std::size_t epochs,
                std::size_t batch_size, double lr, std::uint64_t seed, bool cosine) {
                 TrainSettings s{epochs, batch_size, lr, cosine, seed};
                 const auto data = to_dataset(to_images(images, labels));
                 py::gil_scoped_release release;
                 return fit(model, data, nullptr, s);
             },
             py::arg("images"), py::arg("labels"), py::arg("epochs") = 1, py::arg("batch_size") = 64,
             py::arg("lr") = 1e-3, py::arg("seed") = 0, py::arg("cosine") = true)
        .def("save", [](Model& model, const std::string& path) { save_checkpoint(path, model); }, py::arg("path"))
        .def_static("load", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"));
}
