#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cakd/data.hpp"
#include "cakd/decoupled.hpp"
#include "cakd/partition.hpp"
#include "cakd/prob.hpp"

namespace py = pybind11;

PYBIND11_MODULE(_cakd, m) {
  m.doc() = "Correlation-aware decoupled KL distillation core";

  py::register_exception<cakd::DegeneratePartitionError>(
      m, "DegeneratePartitionError", PyExc_ValueError);

  py::class_<cakd::Partition>(m, "Partition")
      .def_readonly("strong", &cakd::Partition::strong)
      .def_readonly("weak", &cakd::Partition::weak)
      .def_readonly("total", &cakd::Partition::total)
      .def("two_sided", &cakd::Partition::two_sided);

  py::class_<cakd::BinaryProb>(m, "BinaryProb")
      .def_readonly("p_s", &cakd::BinaryProb::p_s)
      .def_readonly("p_w", &cakd::BinaryProb::p_w);

  py::class_<cakd::DecoupledKL>(m, "DecoupledKL")
      .def_readonly("bcd", &cakd::DecoupledKL::bcd)
      .def_readonly("scd", &cakd::DecoupledKL::scd)
      .def_readonly("wcd", &cakd::DecoupledKL::wcd)
      .def_readonly("p_s_teacher", &cakd::DecoupledKL::p_s_teacher)
      .def_readonly("p_w_teacher", &cakd::DecoupledKL::p_w_teacher)
      .def_readonly("plain_kl", &cakd::DecoupledKL::plain_kl)
      .def_readonly("weighted_total", &cakd::DecoupledKL::weighted_total);

  py::class_<cakd::LossConfig>(m, "LossConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &cakd::LossConfig::alpha)
      .def_readwrite("beta", &cakd::LossConfig::beta)
      .def_readwrite("temperature", &cakd::LossConfig::temperature)
      .def_readwrite("hard_label_weight", &cakd::LossConfig::hard_label_weight)
      .def_readwrite("gamma_logit", &cakd::LossConfig::gamma_logit)
      .def_readwrite("gamma_feature", &cakd::LossConfig::gamma_feature)
      .def_readwrite("feature_k", &cakd::LossConfig::feature_k)
      .def_readwrite("recover_plain_kd", &cakd::LossConfig::recover_plain_kd)
      .def_readwrite("temperature_squared_scaling",
                     &cakd::LossConfig::temperature_squared_scaling);

  m.def("softmax", &cakd::softmax, py::arg("logits"),
        py::arg("temperature") = 1.0);
  m.def("log_softmax", &cakd::log_softmax, py::arg("logits"),
        py::arg("temperature") = 1.0);
  m.def("kl_divergence", &cakd::kl_divergence, py::arg("p"), py::arg("q"));

  m.def("partition_topk", &cakd::partition_topk, py::arg("teacher_values"),
        py::arg("k"));
  m.def("partition_single_label", &cakd::partition_single_label,
        py::arg("total"), py::arg("target"));
  m.def("binary_probs", &cakd::binary_probs, py::arg("values"),
        py::arg("partition"), py::arg("temperature"));
  m.def("confidence_ratio", &cakd::confidence_ratio, py::arg("values"),
        py::arg("partition"), py::arg("temperature"));

  m.def("decouple", &cakd::decouple, py::arg("f_teacher"), py::arg("f_student"),
        py::arg("partition"), py::arg("config"));
  m.def("decouple_single_label", &cakd::decouple_single_label,
        py::arg("f_teacher"), py::arg("f_student"), py::arg("target"),
        py::arg("config"));
  m.def("grad_student", &cakd::grad_student, py::arg("f_teacher"),
        py::arg("f_student"), py::arg("partition"), py::arg("config"));

  m.def(
      "generate_blobs",
      [](std::uint64_t seed, int classes, int per_class, int dim,
         double spread) {
        const cakd::Dataset d =
            cakd::generate_blobs(seed, classes, per_class, dim, spread);
        return py::make_tuple(d.inputs, d.labels);
      },
      py::arg("seed"), py::arg("classes"), py::arg("per_class"), py::arg("dim"),
      py::arg("spread"));
}
