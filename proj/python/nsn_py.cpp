#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "nsn/checkpoint.hpp"
#include "nsn/train.hpp"
#include "nsn/verify.hpp"

namespace py = pybind11;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

nsn::Matrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw nsn::ShapeError("expected a 2-d array, got " + std::to_string(a.ndim()) + " dimensions");
  nsn::Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::memcpy(m.data(), a.data(), m.size() * sizeof(float));
  return m;
}

FloatArray to_array(const nsn::Matrix& m) {
  FloatArray a({m.rows(), m.cols()});
  std::memcpy(a.mutable_data(), m.data(), m.size() * sizeof(float));
  return a;
}

nsn::Labels to_labels(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  return nsn::Labels(a.data(), a.data() + a.size());
}

std::vector<std::uint8_t> to_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

py::list layers_to_list(const std::vector<nsn::DenseLayer<float>>& layers) {
  py::list out;
  for (const auto& l : layers) out.append(py::make_tuple(to_array(l.weight), to_array(l.bias)));
  return out;
}

nsn::TrainConfig config_from_kwargs(const py::kwargs& kwargs) {
  nsn::TrainConfig config;
  for (const auto& [key, value] : kwargs) {
    nsn::apply_setting(config, py::str(key), py::str(value));
  }
  return config;
}

// A model family plus its momentum buffers.
class Family {
 public:
  Family(std::size_t n, std::size_t width, std::uint64_t seed)
      : family_(nsn::build_family({n, width, width, nsn::kNumClasses}, seed)),
        momentum_(nsn::MomentumState::zeros_like(family_.groups())) {}

  std::size_t n() const { return family_.n(); }
  py::list groups() const { return layers_to_list(family_.groups()); }
  std::size_t param_count(std::size_t m) const { return nsn::param_count(family_, m); }

  FloatArray logits(std::size_t m, const FloatArray& x) const {
    return to_array(forward(family_.view(m), x).pre.back());
  }

  FloatArray detach_logits(std::size_t k, const FloatArray& x) const {
    return to_array(forward(nsn::detach(family_, k), x).pre.back());
  }

  double accuracy(std::size_t m, const FloatArray& x, const py::array_t<std::uint8_t>& labels) const {
    return nsn::evaluate(family_.view(m), nsn::Dataset{to_matrix(x), to_labels(labels)});
  }

  std::vector<float> train_step(const FloatArray& x, const py::array_t<std::uint8_t>& labels, std::size_t epoch,
                                std::size_t step, const py::kwargs& kwargs) {
    nsn::TrainConfig config = config_from_kwargs(kwargs);
    config.n_hidden = family_.n();
    config.width = family_.dims().input_dim;
    config.validate();
    return nsn::train_step(family_, momentum_, nsn::Batch{to_matrix(x), to_labels(labels)}, config, epoch, step);
  }

 private:
  static nsn::ForwardCache<float> forward(const nsn::LayerStack<float>& layers, const FloatArray& x) {
    return nsn::model_forward(nsn::ModelSpec{}, layers, to_matrix(x), nsn::Mode::kEval);
  }

  nsn::ModelFamily family_;
  nsn::MomentumState momentum_;
};

}  // namespace

PYBIND11_MODULE(_nsn, m) {
  m.doc() = "Network with sub-networks: depth-detachable MLPs trained with tied, pairwise-averaged gradients.";

  py::register_exception<nsn::Error>(m, "Error", PyExc_RuntimeError);

  m.def("matmul", [](const FloatArray& a, const FloatArray& b) { return to_array(nsn::matmul(to_matrix(a), to_matrix(b))); });
  m.def("log_softmax", [](const FloatArray& z) { return to_array(nsn::log_softmax(to_matrix(z))); });
  m.def("nll_loss", [](const FloatArray& logp, const py::array_t<std::uint8_t>& labels) {
    return nsn::nll_loss(to_matrix(logp), to_labels(labels));
  });
  m.def("lr_at", [](std::size_t epoch, double base_lr, std::size_t decay_every, double decay_factor) {
    return nsn::lr_at({base_lr, decay_every, decay_factor, 0.9}, epoch);
  }, py::arg("epoch"), py::arg("base_lr") = 0.3, py::arg("decay_every") = 200, py::arg("decay_factor") = 1.0 / 3.0);

  m.def("parse_idx_images", [](const py::bytes& b) {
    const auto raw = nsn::parse_idx_images(to_bytes(b));
    py::array_t<std::uint8_t> a({raw.count, raw.rows, raw.cols});
    std::memcpy(a.mutable_data(), raw.pixels.data(), raw.pixels.size());
    return a;
  });
  m.def("parse_idx_labels", [](const py::bytes& b) {
    const auto labels = nsn::parse_idx_labels(to_bytes(b));
    return py::array_t<std::uint8_t>(static_cast<py::ssize_t>(labels.size()), labels.data());
  });
  m.def("load_mnist", [](const std::filesystem::path& dir) {
    const auto data = nsn::load_mnist(dir);
    return py::make_tuple(to_array(data.train.images),
                          py::array_t<std::uint8_t>(static_cast<py::ssize_t>(data.train.size()), data.train.labels.data()),
                          to_array(data.test.images),
                          py::array_t<std::uint8_t>(static_cast<py::ssize_t>(data.test.size()), data.test.labels.data()));
  });

  m.def("load_checkpoint", [](const std::filesystem::path& path) {
    const auto c = nsn::load_checkpoint(path);
    py::dict d;
    d["n"] = c.n;
    d["epoch"] = c.epoch;
    d["groups"] = layers_to_list(c.groups);
    d["config"] = c.config_echo;
    return d;
  });

  m.def("verify", [](std::uint64_t seed) {
    py::list out;
    for (const auto& r : nsn::run_verify({seed})) out.append(py::make_tuple(r.name, r.passed, r.detail));
    return out;
  }, py::arg("seed") = 7);

  py::class_<Family>(m, "Family")
      .def(py::init<std::size_t, std::size_t, std::uint64_t>(), py::arg("n"), py::arg("width") = nsn::kImagePixels,
           py::arg("seed") = 1)
      .def_property_readonly("n", &Family::n)
      .def("groups", &Family::groups, "Canonical (weight, bias) pairs, head first.")
      .def("param_count", &Family::param_count)
      .def("logits", &Family::logits, py::arg("model"), py::arg("x"))
      .def("detach_logits", &Family::detach_logits, py::arg("k"), py::arg("x"))
      .def("accuracy", &Family::accuracy, py::arg("model"), py::arg("x"), py::arg("labels"))
      .def("train_step", &Family::train_step, py::arg("x"), py::arg("labels"), py::arg("epoch") = 0,
           py::arg("step") = 0, "One step; keyword arguments are config settings such as lr=0.1 or l2=0.");
}
