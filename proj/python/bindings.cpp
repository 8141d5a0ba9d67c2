// Copyright 2026 The LAQM Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "laqm/encoder.hpp"
#include "laqm/errors.hpp"
#include "laqm/evalreport.hpp"
#include "laqm/rnc.hpp"
#include "laqm/scorer.hpp"
#include "laqm/surrogate.hpp"

namespace py = pybind11;

namespace {

std::vector<laqm::SurrogateLabel> make_labels(
    const std::vector<double>& mos, const std::vector<std::string>& codecs,
    const std::vector<double>& bitrates) {
  if (mos.size() != codecs.size() || mos.size() != bitrates.size()) {
    throw laqm::runtime_error("mos/codecs/bitrates must have equal length");
  }
  std::vector<laqm::SurrogateLabel> labels(mos.size());
  for (size_t i = 0; i < mos.size(); ++i) {
    labels[i].visqol_mos = mos[i];
    labels[i].codec = laqm::codec_from_name(codecs[i]);
    labels[i].bitrate = laqm::ExtendedReal{bitrates[i]};
  }
  return labels;
}

laqm::RncConfig make_rnc_config(double tau, int sign, bool bitrate_term,
                                const std::string& codec_pool) {
  laqm::RncConfig cfg;
  cfg.tau = tau;
  cfg.sign = sign;
  cfg.bitrate_term = bitrate_term;
  if (codec_pool == "clean_and_same_codec") {
    cfg.codec_pool = laqm::CodecPoolRule::kCleanAndSameCodec;
  } else if (codec_pool == "full_batch") {
    cfg.codec_pool = laqm::CodecPoolRule::kFullBatch;
  } else {
    throw laqm::config_error("codec_pool must be 'clean_and_same_codec' or "
                             "'full_batch'");
  }
  return cfg;
}

// Toy-backbone encoder handle for smoke tests.
class PyEncoder {
 public:
  PyEncoder(int width, int num_blocks, int num_heads, int ffn_dim,
            int conv_kernel, int conv_stride, int sample_rate,
            int embedding_dim, uint64_t seed) {
    laqm::BackboneConfig cfg = laqm::toy_backbone_config(seed);
    cfg.width = width;
    cfg.num_blocks = num_blocks;
    cfg.num_heads = num_heads;
    cfg.ffn_dim = ffn_dim;
    cfg.conv_kernel = conv_kernel;
    cfg.conv_stride = conv_stride;
    cfg.sample_rate = sample_rate;
    model_ = std::make_unique<laqm::EncoderModel>(
        laqm::make_seeded_backbone(cfg), embedding_dim, seed);
  }

  Eigen::VectorXd embed(const Eigen::VectorXd& waveform) {
    laqm::Clip clip;
    clip.samples.assign(waveform.data(), waveform.data() + waveform.size());
    clip.sample_rate = model_->expected_sample_rate();
    return model_->embed(clip).vector;
  }

  void apply_lora(int rank, double alpha, double dropout,
                  const std::vector<std::string>& targets, uint64_t seed) {
    laqm::LoraConfig cfg;
    cfg.rank = rank;
    cfg.alpha = alpha;
    cfg.dropout = dropout;
    cfg.targets = targets;
    model_->apply_lora(cfg, seed);
    model_->set_adaptation_mode(laqm::AdaptationMode::kLora);
  }

  py::dict trainable_report() {
    laqm::TrainableReport r = model_->trainable_report();
    py::dict d;
    d["trainable"] = r.trainable;
    d["total"] = r.total;
    d["fraction"] = r.fraction;
    py::dict by_module;
    for (const auto& [module, counts] : r.by_module) {
      by_module[py::str(module)] =
          py::make_tuple(counts.first, counts.second);
    }
    d["by_module"] = by_module;
    return d;
  }

  int sample_rate() const { return model_->expected_sample_rate(); }
  int flat_dim() const { return model_->flat_dim(); }

 private:
  std::unique_ptr<laqm::EncoderModel> model_;
};

}  // namespace

PYBIND11_MODULE(_laqm, m) {
  m.doc() = "learned audio quality metric core";

  m.def(
      "label_distance",
      [](double a, double b) {
        return laqm::label_distance(laqm::ExtendedReal{a},
                                    laqm::ExtendedReal{b})
            .value;
      },
      py::arg("a"), py::arg("b"),
      "absolute label difference on the extended real line (inf-aware)");

  m.def(
      "rnc_batch",
      [](const Eigen::MatrixXd& embeddings, const std::vector<double>& mos,
         const std::vector<std::string>& codecs,
         const std::vector<double>& bitrates, double tau, int sign,
         bool bitrate_term, const std::string& codec_pool) {
        return laqm::rnc_batch(make_labels(mos, codecs, bitrates), embeddings,
                               make_rnc_config(tau, sign, bitrate_term,
                                               codec_pool));
      },
      py::arg("embeddings"), py::arg("mos"), py::arg("codecs"),
      py::arg("bitrates"), py::arg("tau") = 1.0, py::arg("sign") = -1,
      py::arg("bitrate_term") = true,
      py::arg("codec_pool") = "clean_and_same_codec");

  m.def(
      "rnc_batch_grad",
      [](const Eigen::MatrixXd& embeddings, const std::vector<double>& mos,
         const std::vector<std::string>& codecs,
         const std::vector<double>& bitrates, double tau, int sign,
         bool bitrate_term, const std::string& codec_pool) {
        Eigen::MatrixXd grad;
        double loss = laqm::rnc_batch_with_grad(
            make_labels(mos, codecs, bitrates), embeddings,
            make_rnc_config(tau, sign, bitrate_term, codec_pool), &grad);
        return py::make_tuple(loss, grad);
      },
      py::arg("embeddings"), py::arg("mos"), py::arg("codecs"),
      py::arg("bitrates"), py::arg("tau") = 1.0, py::arg("sign") = -1,
      py::arg("bitrate_term") = true,
      py::arg("codec_pool") = "clean_and_same_codec");

  m.def("pearson", &laqm::pearson, py::arg("x"), py::arg("y"));
  m.def("spearman", &laqm::spearman, py::arg("x"), py::arg("y"));
  m.def("average_ranks", &laqm::average_ranks, py::arg("x"));

  m.def("fad", &laqm::fad_matrices, py::arg("a"), py::arg("b"),
        "Frechet distance between Gaussians fitted to two embedding sets "
        "(rows = samples)");

  m.def(
      "resample",
      [](const Eigen::VectorXd& x, int in_rate, int out_rate) {
        laqm::Clip clip;
        clip.samples.assign(x.data(), x.data() + x.size());
        clip.sample_rate = in_rate;
        laqm::Clip out = laqm::resample(clip, out_rate);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
            out.samples.data(), static_cast<Eigen::Index>(out.samples.size())));
      },
      py::arg("x"), py::arg("in_rate"), py::arg("out_rate"));

  m.def(
      "segment",
      [](const Eigen::VectorXd& x, int rate, double clip_seconds) {
        laqm::AudioBuffer buf;
        buf.sample_rate = rate;
        buf.channels = {{x.data(), x.data() + x.size()}};
        std::vector<Eigen::VectorXd> out;
        for (const laqm::Clip& c : laqm::segment(buf, clip_seconds, "py")) {
          out.emplace_back(Eigen::Map<const Eigen::VectorXd>(
              c.samples.data(), static_cast<Eigen::Index>(c.samples.size())));
        }
        return out;
      },
      py::arg("x"), py::arg("rate"), py::arg("clip_seconds"));

  py::class_<laqm::DistanceMapping>(m, "DistanceMapping")
      .def("apply", &laqm::DistanceMapping::apply, py::arg("distance"))
      .def_property_readonly(
          "coeffs", [](const laqm::DistanceMapping& m2) { return m2.coeffs; })
      .def_readonly("residual_mse", &laqm::DistanceMapping::residual_mse)
      .def_readonly("scale_lo", &laqm::DistanceMapping::scale_lo)
      .def_readonly("scale_hi", &laqm::DistanceMapping::scale_hi);

  m.def("fit_cubic", &laqm::fit_cubic, py::arg("distances"),
        py::arg("subjective"), py::arg("scale_lo"), py::arg("scale_hi"));
  m.def(
      "fit_mlp",
      [](const std::vector<double>& distances,
         const std::vector<double>& subjective, double lo, double hi,
         int epochs, double lr, uint64_t seed) {
        laqm::MlpFitConfig cfg;
        cfg.epochs = epochs;
        cfg.lr = lr;
        cfg.seed = seed;
        return laqm::fit_mlp(distances, subjective, lo, hi, cfg);
      },
      py::arg("distances"), py::arg("subjective"), py::arg("scale_lo"),
      py::arg("scale_hi"), py::arg("epochs") = 4000, py::arg("lr") = 0.02,
      py::arg("seed") = 1);

  py::class_<PyEncoder>(m, "Encoder")
      .def(py::init<int, int, int, int, int, int, int, int, uint64_t>(),
           py::arg("width") = 32, py::arg("num_blocks") = 2,
           py::arg("num_heads") = 4, py::arg("ffn_dim") = 64,
           py::arg("conv_kernel") = 256, py::arg("conv_stride") = 256,
           py::arg("sample_rate") = 8000, py::arg("embedding_dim") = 32,
           py::arg("seed") = 0x70BACC)
      .def("embed", &PyEncoder::embed, py::arg("waveform"))
      .def("apply_lora", &PyEncoder::apply_lora, py::arg("rank") = 8,
           py::arg("alpha") = 16.0, py::arg("dropout") = 0.05,
           py::arg("targets") = std::vector<std::string>{"query", "value"},
           py::arg("seed") = 1)
      .def("trainable_report", &PyEncoder::trainable_report)
      .def_property_readonly("sample_rate", &PyEncoder::sample_rate)
      .def_property_readonly("flat_dim", &PyEncoder::flat_dim);
}
