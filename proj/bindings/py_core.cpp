#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "endoclass/config.hpp"
#include "endoclass/data_io.hpp"
#include "endoclass/ensemble.hpp"
#include "endoclass/nn.hpp"
#include "endoclass/sampling.hpp"
#include "endoclass/train.hpp"

namespace py = pybind11;
using namespace endoclass;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<long, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DoubleArray& a, const char* name) {
    if (a.ndim() != 2) throw std::invalid_argument(std::string(name) + " must be 2-D");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

py::array_t<double> from_vector(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::vector<double> to_vector(const DoubleArray& a, const char* name) {
    if (a.ndim() != 1) throw std::invalid_argument(std::string(name) + " must be 1-D");
    return std::vector<double>(a.data(), a.data() + a.size());
}

std::vector<int> to_targets(const IntArray& a) {
    if (a.ndim() != 1) throw std::invalid_argument("targets must be 1-D");
    std::vector<int> out(static_cast<std::size_t>(a.size()));
    for (py::ssize_t i = 0; i < a.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(a.data()[i]);
    return out;
}

ImageBuffer to_image(const DoubleArray& a, bool normalized) {
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw std::invalid_argument("image must have shape (H, W, 3)");
    ImageBuffer img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), 0.0, normalized);
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

py::array_t<double> from_image(const ImageBuffer& img) {
    py::array_t<double> out({static_cast<std::size_t>(img.height),
                             static_cast<std::size_t>(img.width), static_cast<std::size_t>(3)});
    std::copy(img.data.begin(), img.data.end(), out.mutable_data());
    return out;
}

loss::FocalConfig make_focal(const DoubleArray& alpha, double gamma, const std::string& reduction) {
    loss::FocalConfig cfg;
    cfg.alpha = to_vector(alpha, "alpha");
    cfg.gamma = gamma;
    if (reduction == "mean")
        cfg.reduction = loss::Reduction::mean;
    else if (reduction == "sum")
        cfg.reduction = loss::Reduction::sum;
    else
        throw std::invalid_argument("reduction must be 'mean' or 'sum'");
    return cfg;
}

config::RunConfig config_from_json(const std::string& config_json) {
    config::RunConfig cfg;
    if (!config_json.empty()) config::apply_config_json(cfg, config_json);
    return cfg;
}

struct PyAdamW {
    optim::AdamWConfig cfg;
    optim::AdamWState state;
    bool started = false;

    PyAdamW(double lr, double weight_decay, double beta1, double beta2, double eps) {
        cfg.lr = lr;
        cfg.weight_decay = weight_decay;
        cfg.beta1 = beta1;
        cfg.beta2 = beta2;
        cfg.eps = eps;
        cfg.validate();
    }

    py::array_t<double> step(const DoubleArray& params, const DoubleArray& grads) {
        auto p = to_vector(params, "params");
        auto g = to_vector(grads, "grads");
        if (!started) {
            state = optim::AdamWState::init(p.size());
            started = true;
        }
        optim::adamw_step(p, g, state, cfg);
        return from_vector(p);
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "capsule-endoscopy classifier core: loss, optimizer, metrics, sampling, "
              "augmentation and training";

    m.def("softmax", [](const DoubleArray& logits) {
        return from_matrix(nn::softmax(to_matrix(logits, "logits")));
    }, py::arg("logits"));

    m.def("focal_loss",
          [](const DoubleArray& logits, const IntArray& targets, const DoubleArray& alpha,
             double gamma, const std::string& reduction) {
              auto res = loss::focal_loss(to_matrix(logits, "logits"), to_targets(targets),
                                          make_focal(alpha, gamma, reduction));
              return py::make_tuple(res.total, from_vector(res.per_sample));
          },
          py::arg("logits"), py::arg("targets"), py::arg("alpha"), py::arg("gamma") = 2.0,
          py::arg("reduction") = "mean",
          "returns (reduced_total, per_sample_losses)");

    m.def("focal_loss_grad",
          [](const DoubleArray& logits, const IntArray& targets, const DoubleArray& alpha,
             double gamma, const std::string& reduction) {
              return from_matrix(loss::focal_loss_grad(to_matrix(logits, "logits"),
                                                       to_targets(targets),
                                                       make_focal(alpha, gamma, reduction)));
          },
          py::arg("logits"), py::arg("targets"), py::arg("alpha"), py::arg("gamma") = 2.0,
          py::arg("reduction") = "mean");

    m.def("auc_ovr",
          [](const DoubleArray& scores, const IntArray& positives) -> std::optional<double> {
              auto s = to_vector(scores, "scores");
              auto p = to_targets(positives);
              if (s.size() != p.size())
                  throw std::invalid_argument("scores and positives must have equal length");
              std::vector<char> mask(p.size());
              for (std::size_t i = 0; i < p.size(); ++i) mask[i] = p[i] != 0;
              return metrics::auc_ovr(s, mask);
          },
          py::arg("scores"), py::arg("positives"),
          "one-vs-rest AUC with mid-ranked ties; None when undefined");

    m.def("evaluate_json",
          [](const DoubleArray& probs, const IntArray& truth, const std::vector<std::string>& names) {
              ClassCatalog catalog(names);
              auto report = metrics::evaluate(to_matrix(probs, "probs"), to_targets(truth), catalog);
              return data_io::metrics_report_to_json(report);
          },
          py::arg("probs"), py::arg("truth"), py::arg("class_names"),
          "full metrics report as a JSON string");

    m.def("draw_weighted_indices",
          [](const DoubleArray& weights, std::size_t n, std::uint64_t seed) {
              sampling::SamplerSpec spec{to_vector(weights, "weights"), true, seed};
              auto idx = sampling::draw_epoch_indices(spec, n);
              py::array_t<long> out(static_cast<py::ssize_t>(idx.size()));
              for (std::size_t i = 0; i < idx.size(); ++i)
                  out.mutable_data()[i] = static_cast<long>(idx[i]);
              return out;
          },
          py::arg("weights"), py::arg("n"), py::arg("seed") = 0);

    m.def("chi_square_pvalue", &sampling::chi_square_pvalue, py::arg("statistic"), py::arg("dof"));

    m.def("ensemble_average",
          [](const std::vector<DoubleArray>& members) {
              if (members.empty()) throw std::invalid_argument("ensemble needs >= 1 member");
              std::vector<ensemble::ModelOutputs> outs;
              char buf[16];
              for (std::size_t i = 0; i < members.size(); ++i) {
                  ensemble::ModelOutputs m;
                  std::snprintf(buf, sizeof buf, "m%04zu", i);
                  m.model_id = buf;
                  m.values = to_matrix(members[i], "member");
                  m.values_are_probs = true;
                  m.image_ids.reserve(m.values.rows);
                  for (std::size_t r = 0; r < m.values.rows; ++r)
                      m.image_ids.push_back(std::to_string(r));
                  outs.push_back(std::move(m));
              }
              return from_matrix(ensemble::ensemble_average(outs));
          },
          py::arg("members"), "mean of per-model probability matrices (rows aligned by index)");

    m.def("apply_pipeline",
          [](const DoubleArray& image, std::uint64_t seed, std::uint64_t index,
             const std::string& config_json) {
              auto cfg = config_from_json(config_json);
              return from_image(augment::apply_pipeline(to_image(image, false), cfg.train.augment,
                                                        seed, index));
          },
          py::arg("image"), py::arg("seed") = 0, py::arg("index") = 0,
          py::arg("config_json") = std::string(),
          "full augmentation pipeline on a raw (H,W,3) image in [0,1]");

    m.def("eval_transform",
          [](const DoubleArray& image, const std::string& config_json) {
              auto cfg = config_from_json(config_json);
              return from_image(augment::eval_transform(to_image(image, false), cfg.train.augment));
          },
          py::arg("image"), py::arg("config_json") = std::string());

    m.def("decode_image", [](const std::string& path) {
        return from_image(data_io::decode_image(path));
    }, py::arg("path"));

    m.def("featurize",
          [](const DoubleArray& image, int side, bool normalized) {
              return from_vector(nn::featurize(to_image(image, normalized), side, side));
          },
          py::arg("image"), py::arg("side"), py::arg("normalized") = true);

    m.def("init_params", [](const std::string& arch, std::uint64_t seed) {
        return from_vector(nn::init_params(nn::Arch::parse(arch), seed).flat);
    }, py::arg("arch"), py::arg("seed") = 0);

    m.def("forward",
          [](const std::string& arch, const DoubleArray& params, const DoubleArray& features) {
              nn::ModelParams mp(nn::Arch::parse(arch), to_vector(params, "params"));
              return from_matrix(nn::forward(mp, to_matrix(features, "features")));
          },
          py::arg("arch"), py::arg("params"), py::arg("features"));

    m.def("backward",
          [](const std::string& arch, const DoubleArray& params, const DoubleArray& features,
             const DoubleArray& dlogits) {
              nn::ModelParams mp(nn::Arch::parse(arch), to_vector(params, "params"));
              return from_vector(nn::backward(mp, to_matrix(features, "features"),
                                              to_matrix(dlogits, "dlogits")));
          },
          py::arg("arch"), py::arg("params"), py::arg("features"), py::arg("dlogits"));

    py::class_<PyAdamW>(m, "AdamW")
        .def(py::init<double, double, double, double, double>(), py::arg("lr") = 1e-4,
             py::arg("weight_decay") = 0.05, py::arg("beta1") = 0.9, py::arg("beta2") = 0.999,
             py::arg("eps") = 1e-8)
        .def("step", &PyAdamW::step, py::arg("params"), py::arg("grads"),
             "one decoupled-decay update; returns the new parameter vector");

    m.def("train_files",
          [](const std::string& train_manifest, const std::string& train_root,
             const std::string& val_manifest, const std::string& val_root, const std::string& arch,
             const std::vector<std::string>& class_names, const std::string& config_json) {
              auto cfg = config_from_json(config_json);
              if (!class_names.empty()) cfg.catalog = ClassCatalog(class_names);
              auto tm = data_io::load_manifest(train_manifest, cfg.catalog);
              auto vm = data_io::load_manifest(val_manifest, cfg.catalog);
              auto result = train::train(tm, train_root, vm, val_root, nn::Arch::parse(arch),
                                         cfg.catalog, cfg.train);
              py::dict out;
              out["history_jsonl"] = train::history_to_jsonl(result.history);
              out["best_params"] = from_vector(result.best.params.flat);
              out["best_epoch"] = result.best.epoch;
              out["best_combined_score"] = result.best.best_combined_score;
              return out;
          },
          py::arg("train_manifest"), py::arg("train_root"), py::arg("val_manifest"),
          py::arg("val_root"), py::arg("arch"), py::arg("class_names") = std::vector<std::string>{},
          py::arg("config_json") = std::string(),
          "run the full training loop over manifest files; returns history and the best model");
}
