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

#include "laqm/backbone.hpp"

#include <cmath>
#include <sstream>

#include "laqm/errors.hpp"
#include "laqm/hash.hpp"
#include "laqm/tensorio.hpp"

namespace laqm {

void LoraState::zero_grads() {
  for (auto& [name, adapter] : adapters) {
    auto& g = grads[name];
    g.a = Matrix::Zero(adapter.a.rows(), adapter.a.cols());
    g.b = Matrix::Zero(adapter.b.rows(), adapter.b.cols());
  }
}

BackboneConfig toy_backbone_config(uint64_t init_seed) {
  BackboneConfig cfg;
  cfg.id = "toy-v1";
  cfg.sample_rate = 8000;
  cfg.conv_kernel = 256;
  cfg.conv_stride = 256;
  cfg.width = 32;
  cfg.num_blocks = 2;
  cfg.num_heads = 4;
  cfg.ffn_dim = 64;
  cfg.init_seed = init_seed;
  return cfg;
}

BackboneConfig pretrained_95m_config() {
  BackboneConfig cfg;
  cfg.id = "mert-v1-95m";
  cfg.sample_rate = 24000;
  cfg.conv_kernel = 400;
  cfg.conv_stride = 320;  // 75 feature frames per second
  cfg.width = 768;
  cfg.num_blocks = 12;
  cfg.num_heads = 12;
  cfg.ffn_dim = 3072;
  cfg.init_seed = 0;
  return cfg;
}

nlohmann::json backbone_config_to_json(const BackboneConfig& config) {
  return nlohmann::json{{"id", config.id},
                        {"sample_rate", config.sample_rate},
                        {"conv_kernel", config.conv_kernel},
                        {"conv_stride", config.conv_stride},
                        {"width", config.width},
                        {"num_blocks", config.num_blocks},
                        {"num_heads", config.num_heads},
                        {"ffn_dim", config.ffn_dim},
                        {"init_seed", config.init_seed}};
}

BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig cfg;
  cfg.id = j.at("id").get<std::string>();
  cfg.sample_rate = j.at("sample_rate").get<int>();
  cfg.conv_kernel = j.at("conv_kernel").get<int>();
  cfg.conv_stride = j.at("conv_stride").get<int>();
  cfg.width = j.at("width").get<int>();
  cfg.num_blocks = j.at("num_blocks").get<int>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.ffn_dim = j.at("ffn_dim").get<int>();
  cfg.init_seed = j.at("init_seed").get<uint64_t>();
  return cfg;
}

namespace {

constexpr double kLnEps = 1e-5;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double phi = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return phi + x * pdf;
}

struct LayerNormParams {
  Matrix gamma;  // C x 1
  Matrix beta;   // C x 1
};

struct AttentionParams {
  Matrix wq, wk, wv, wo;  // C x C
  Matrix bq, bk, bv, bo;  // C x 1
};

struct BlockParams {
  AttentionParams attn;
  LayerNormParams ln1, ln2;
  Matrix w1, b1;  // F x C, F x 1
  Matrix w2, b2;  // C x F, C x 1
};

struct ConvParams {
  Matrix w;  // C x K
  Matrix b;  // C x 1
  LayerNormParams ln;
};

struct LnCache {
  Matrix x_hat;     // T x C
  Vector inv_std;   // T
};

Matrix layer_norm(const Matrix& x, const LayerNormParams& p, LnCache* cache) {
  const Eigen::Index t_frames = x.rows();
  const Eigen::Index c = x.cols();
  Matrix x_hat(t_frames, c);
  Vector inv_std(t_frames);
  for (Eigen::Index t = 0; t < t_frames; ++t) {
    const double mu = x.row(t).mean();
    Eigen::RowVectorXd centered = x.row(t).array() - mu;
    const double var = centered.squaredNorm() / static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + kLnEps);
    inv_std(t) = is;
    x_hat.row(t) = centered * is;
  }
  Matrix y = x_hat.array().rowwise() *
             p.gamma.col(0).transpose().array();
  y.rowwise() += p.beta.col(0).transpose();
  if (cache != nullptr) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormParams& p,
                           const LnCache& cache, LayerNormParams* grads) {
  const Eigen::Index t_frames = dy.rows();
  const Eigen::Index c = dy.cols();
  Matrix dx(t_frames, c);
  Matrix dx_hat =
      dy.array().rowwise() * p.gamma.col(0).transpose().array();
  for (Eigen::Index t = 0; t < t_frames; ++t) {
    const double m1 = dx_hat.row(t).mean();
    const double m2 =
        (dx_hat.row(t).array() * cache.x_hat.row(t).array()).mean();
    dx.row(t) = cache.inv_std(t) *
                (dx_hat.row(t).array() - m1 - cache.x_hat.row(t).array() * m2);
  }
  if (grads != nullptr) {
    grads->gamma.col(0) += (dy.array() * cache.x_hat.array())
                               .colwise()
                               .sum()
                               .matrix()
                               .transpose();
    grads->beta.col(0) += dy.colwise().sum().transpose();
  }
  return dx;
}

struct BlockCache {
  Matrix q, k, v;              // T x C (LoRA residual included)
  std::vector<Matrix> probs;   // per head, T x T
  Matrix attn_concat;          // T x C, input of the output projection
  LnCache ln1, ln2;
  Matrix x1;                   // post-LN1 activations
  Matrix u;                    // FFN pre-activation, T x F
  // LoRA caches keyed by projection name.
  std::map<std::string, Matrix> lora_z;     // T x rank
  std::map<std::string, Matrix> lora_mask;  // dropout mask / (1-p); empty = identity
};

class TransformerCache : public BackboneCache {
 public:
  std::vector<Matrix> layers;  // L of T x C (inputs to each block + final)
  std::vector<BlockCache> blocks;
};

std::string projection_name(int block, const std::string& role) {
  std::ostringstream os;
  os << "block" << block << "." << role;
  return os.str();
}

class TransformerBackbone : public Backbone {
 public:
  explicit TransformerBackbone(const BackboneConfig& config)
      : cfg_(config), revision_("seeded:" + std::to_string(config.init_seed)) {
    if (cfg_.width % cfg_.num_heads != 0) {
      throw config_error("backbone width must be divisible by heads");
    }
    init_weights();
    allocate_grads();
  }

  const BackboneConfig& config() const override { return cfg_; }

  BackboneOutput forward(const std::vector<double>& waveform,
                         const LoraState* lora, bool training, Rng* rng,
                         std::unique_ptr<BackboneCache>* cache)
      const override;

  void backward(const BackboneCache& cache,
                const std::vector<Matrix>& d_layers, LoraState* lora,
                bool accumulate_base_grads) override;

  std::vector<std::string> attention_projections() const override {
    std::vector<std::string> names;
    for (int b = 0; b < cfg_.num_blocks; ++b) {
      for (const char* role : {"query", "key", "value", "output"}) {
        names.push_back(projection_name(b, role));
      }
    }
    return names;
  }

  void visit_params(const ParamVisitor& visitor) override;

  void zero_base_grads() override {
    auto zero = [](Matrix& m) { m.setZero(); };
    for (auto& g : grads_) {
      zero(g.attn.wq);
      zero(g.attn.bq);
      zero(g.attn.wk);
      zero(g.attn.bk);
      zero(g.attn.wv);
      zero(g.attn.bv);
      zero(g.attn.wo);
      zero(g.attn.bo);
      zero(g.ln1.gamma);
      zero(g.ln1.beta);
      zero(g.ln2.gamma);
      zero(g.ln2.beta);
      zero(g.w1);
      zero(g.b1);
      zero(g.w2);
      zero(g.b2);
    }
  }

  std::string revision() const override { return revision_; }

  void set_revision(const std::string& rev) { revision_ = rev; }

 private:
  void init_weights();
  void allocate_grads();

  Matrix conv_frontend(const std::vector<double>& waveform) const;

  // Linear projection with optional LoRA residual.
  Matrix project(const std::string& name, const Matrix& input,
                 const Matrix& w, const Matrix& b, const LoraState* lora,
                 bool training, Rng* rng, BlockCache* cache) const;

  // Returns d(input); accumulates parameter gradients.
  Matrix project_backward(const std::string& name, const Matrix& d_out,
                          const Matrix& input, const Matrix& w,
                          Matrix* grad_w, Matrix* grad_b, LoraState* lora,
                          const BlockCache& cache,
                          bool accumulate_base_grads) const;

  BackboneConfig cfg_;
  ConvParams conv_;
  std::vector<BlockParams> blocks_;
  std::vector<BlockParams> grads_;
  std::string revision_;
};

void TransformerBackbone::init_weights() {
  Rng rng = Rng::substream(cfg_.init_seed, "backbone-init:" + cfg_.id);
  auto gauss = [&rng](Eigen::Index r, Eigen::Index c, double std) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = std * rng.normal();
    }
    return m;
  };
  const int c = cfg_.width;
  const int f = cfg_.ffn_dim;

  conv_.w = gauss(c, cfg_.conv_kernel, 1.0 / std::sqrt(cfg_.conv_kernel));
  conv_.b = Matrix::Zero(c, 1);
  conv_.ln.gamma = Matrix::Ones(c, 1);
  conv_.ln.beta = Matrix::Zero(c, 1);

  blocks_.clear();
  for (int i = 0; i < cfg_.num_blocks; ++i) {
    BlockParams p;
    p.attn.wq = gauss(c, c, 0.1);
    p.attn.wk = gauss(c, c, 0.1);
    p.attn.wv = gauss(c, c, 0.1);
    p.attn.wo = gauss(c, c, 0.1);
    p.attn.bq = Matrix::Zero(c, 1);
    p.attn.bk = Matrix::Zero(c, 1);
    p.attn.bv = Matrix::Zero(c, 1);
    p.attn.bo = Matrix::Zero(c, 1);
    p.ln1.gamma = Matrix::Ones(c, 1);
    p.ln1.beta = Matrix::Zero(c, 1);
    p.ln2.gamma = Matrix::Ones(c, 1);
    p.ln2.beta = Matrix::Zero(c, 1);
    p.w1 = gauss(f, c, std::sqrt(2.0 / c));
    p.b1 = Matrix::Zero(f, 1);
    p.w2 = gauss(c, f, std::sqrt(2.0 / f));
    p.b2 = Matrix::Zero(c, 1);
    blocks_.push_back(std::move(p));
  }
}

void TransformerBackbone::allocate_grads() {
  grads_.clear();
  for (const auto& p : blocks_) {
    BlockParams g;
    auto zeros_like = [](const Matrix& m) {
      return Matrix::Zero(m.rows(), m.cols()).eval();
    };
    g.attn.wq = zeros_like(p.attn.wq);
    g.attn.bq = zeros_like(p.attn.bq);
    g.attn.wk = zeros_like(p.attn.wk);
    g.attn.bk = zeros_like(p.attn.bk);
    g.attn.wv = zeros_like(p.attn.wv);
    g.attn.bv = zeros_like(p.attn.bv);
    g.attn.wo = zeros_like(p.attn.wo);
    g.attn.bo = zeros_like(p.attn.bo);
    g.ln1.gamma = zeros_like(p.ln1.gamma);
    g.ln1.beta = zeros_like(p.ln1.beta);
    g.ln2.gamma = zeros_like(p.ln2.gamma);
    g.ln2.beta = zeros_like(p.ln2.beta);
    g.w1 = zeros_like(p.w1);
    g.b1 = zeros_like(p.b1);
    g.w2 = zeros_like(p.w2);
    g.b2 = zeros_like(p.b2);
    grads_.push_back(std::move(g));
  }
}

Matrix TransformerBackbone::conv_frontend(
    const std::vector<double>& waveform) const {
  const int k = cfg_.conv_kernel;
  const int s = cfg_.conv_stride;
  const int64_t n = static_cast<int64_t>(waveform.size());
  if (n < k) {
    throw runtime_error("waveform shorter than one backbone frame (" +
                        std::to_string(n) + " < " + std::to_string(k) + ")");
  }
  const int64_t t_frames = (n - k) / s + 1;
  Matrix pre(t_frames, cfg_.width);
  for (int64_t t = 0; t < t_frames; ++t) {
    Eigen::Map<const Vector> seg(waveform.data() + t * s, k);
    pre.row(t) = (conv_.w * seg + conv_.b.col(0)).transpose();
  }
  Matrix activated = pre.unaryExpr([](double x) { return gelu(x); });
  return layer_norm(activated, conv_.ln, nullptr);
}

Matrix TransformerBackbone::project(const std::string& name,
                                    const Matrix& input, const Matrix& w,
                                    const Matrix& b, const LoraState* lora,
                                    bool training, Rng* rng,
                                    BlockCache* cache) const {
  Matrix out = input * w.transpose();
  out.rowwise() += b.col(0).transpose();
  if (lora != nullptr) {
    auto it = lora->adapters.find(name);
    if (it != lora->adapters.end()) {
      const LoraAdapter& adapter = it->second;
      Matrix dropped_input;
      Matrix mask;
      const double p = lora->cfg.dropout;
      if (training && p > 0.0) {
        if (rng == nullptr) {
          throw runtime_error("training forward with LoRA dropout needs rng");
        }
        mask.resize(input.rows(), input.cols());
        const double keep = 1.0 - p;
        for (Eigen::Index i = 0; i < mask.rows(); ++i) {
          for (Eigen::Index j = 0; j < mask.cols(); ++j) {
            mask(i, j) = rng->uniform() < keep ? 1.0 / keep : 0.0;
          }
        }
        dropped_input = input.cwiseProduct(mask);
      } else {
        dropped_input = input;
      }
      Matrix z = dropped_input * adapter.a.transpose();  // T x rank
      out.noalias() += lora->scaling() * z * adapter.b.transpose();
      if (cache != nullptr) {
        cache->lora_z[name] = std::move(z);
        if (mask.size() > 0) cache->lora_mask[name] = std::move(mask);
      }
    }
  }
  return out;
}

Matrix TransformerBackbone::project_backward(
    const std::string& name, const Matrix& d_out, const Matrix& input,
    const Matrix& w, Matrix* grad_w, Matrix* grad_b, LoraState* lora,
    const BlockCache& cache, bool accumulate_base_grads) const {
  if (accumulate_base_grads) {
    grad_w->noalias() += d_out.transpose() * input;
    grad_b->col(0) += d_out.colwise().sum().transpose();
  }
  Matrix d_input = d_out * w;
  if (lora != nullptr) {
    auto it = lora->adapters.find(name);
    if (it != lora->adapters.end()) {
      const LoraAdapter& adapter = it->second;
      LoraAdapter& grads = lora->grads.at(name);
      const double s = lora->scaling();
      const Matrix& z = cache.lora_z.at(name);
      auto mask_it = cache.lora_mask.find(name);
      Matrix dropped_input = mask_it == cache.lora_mask.end()
                                 ? input
                                 : input.cwiseProduct(mask_it->second);
      Matrix dz = s * d_out * adapter.b;                   // T x rank
      grads.b.noalias() += s * d_out.transpose() * z;      // out x rank
      grads.a.noalias() += dz.transpose() * dropped_input; // rank x in
      Matrix d_dropped = dz * adapter.a;                   // T x in
      if (mask_it == cache.lora_mask.end()) {
        d_input += d_dropped;
      } else {
        d_input += d_dropped.cwiseProduct(mask_it->second);
      }
    }
  }
  return d_input;
}

BackboneOutput TransformerBackbone::forward(
    const std::vector<double>& waveform, const LoraState* lora, bool training,
    Rng* rng, std::unique_ptr<BackboneCache>* cache) const {
  TransformerCache* tc = nullptr;
  if (cache != nullptr) {
    auto owned = std::make_unique<TransformerCache>();
    tc = owned.get();
    *cache = std::move(owned);
  }

  const int heads = cfg_.num_heads;
  const int dh = cfg_.width / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  BackboneOutput out;
  Matrix x = conv_frontend(waveform);
  out.layers.push_back(x);
  if (tc != nullptr) {
    tc->layers.push_back(x);
    tc->blocks.resize(static_cast<size_t>(cfg_.num_blocks));
  }

  for (int bidx = 0; bidx < cfg_.num_blocks; ++bidx) {
    const BlockParams& p = blocks_[static_cast<size_t>(bidx)];
    BlockCache scratch;
    BlockCache* bc = tc != nullptr ? &tc->blocks[static_cast<size_t>(bidx)]
                                   : &scratch;

    Matrix q = project(projection_name(bidx, "query"), x, p.attn.wq,
                       p.attn.bq, lora, training, rng, bc);
    Matrix k = project(projection_name(bidx, "key"), x, p.attn.wk, p.attn.bk,
                       lora, training, rng, bc);
    Matrix v = project(projection_name(bidx, "value"), x, p.attn.wv,
                       p.attn.bv, lora, training, rng, bc);

    const Eigen::Index t_frames = x.rows();
    Matrix attn_concat(t_frames, cfg_.width);
    std::vector<Matrix> probs;
    probs.reserve(static_cast<size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      auto qh = q.middleCols(h * dh, dh);
      auto kh = k.middleCols(h * dh, dh);
      auto vh = v.middleCols(h * dh, dh);
      Matrix scores = qh * kh.transpose() * inv_sqrt_dh;
      for (Eigen::Index t = 0; t < t_frames; ++t) {
        const double m = scores.row(t).maxCoeff();
        Eigen::RowVectorXd e = (scores.row(t).array() - m).exp();
        scores.row(t) = e / e.sum();
      }
      attn_concat.middleCols(h * dh, dh) = scores * vh;
      probs.push_back(std::move(scores));
    }

    Matrix a = project(projection_name(bidx, "output"), attn_concat,
                       p.attn.wo, p.attn.bo, lora, training, rng, bc);
    Matrix r1 = x + a;
    Matrix x1 = layer_norm(r1, p.ln1, tc != nullptr ? &bc->ln1 : nullptr);

    Matrix u = x1 * p.w1.transpose();
    u.rowwise() += p.b1.col(0).transpose();
    Matrix g = u.unaryExpr([](double val) { return gelu(val); });
    Matrix f = g * p.w2.transpose();
    f.rowwise() += p.b2.col(0).transpose();
    Matrix r2 = x1 + f;
    Matrix y = layer_norm(r2, p.ln2, tc != nullptr ? &bc->ln2 : nullptr);

    if (tc != nullptr) {
      bc->q = std::move(q);
      bc->k = std::move(k);
      bc->v = std::move(v);
      bc->probs = std::move(probs);
      bc->attn_concat = std::move(attn_concat);
      bc->x1 = x1;
      bc->u = std::move(u);
      tc->layers.push_back(y);
    }
    x = std::move(y);
    out.layers.push_back(x);
  }
  return out;
}

void TransformerBackbone::backward(const BackboneCache& cache,
                                   const std::vector<Matrix>& d_layers,
                                   LoraState* lora,
                                   bool accumulate_base_grads) {
  const auto& tc = dynamic_cast<const TransformerCache&>(cache);
  if (d_layers.size() != tc.layers.size()) {
    throw runtime_error("backbone backward: layer gradient count mismatch");
  }

  const int heads = cfg_.num_heads;
  const int dh = cfg_.width / heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix d_next = d_layers.back();
  for (int bidx = cfg_.num_blocks - 1; bidx >= 0; --bidx) {
    const BlockParams& p = blocks_[static_cast<size_t>(bidx)];
    BlockParams& g = grads_[static_cast<size_t>(bidx)];
    const BlockCache& bc = tc.blocks[static_cast<size_t>(bidx)];
    const Matrix& x = tc.layers[static_cast<size_t>(bidx)];

    // LN2 -> residual split.
    Matrix d_r2 = layer_norm_backward(d_next, p.ln2, bc.ln2,
                                      accumulate_base_grads ? &g.ln2 : nullptr);
    Matrix d_x1 = d_r2;

    // FFN.
    Matrix gelu_u = bc.u.unaryExpr([](double val) { return gelu(val); });
    Matrix d_g = d_r2 * p.w2;
    if (accumulate_base_grads) {
      g.w2.noalias() += d_r2.transpose() * gelu_u;
      g.b2.col(0) += d_r2.colwise().sum().transpose();
    }
    Matrix d_u =
        d_g.cwiseProduct(bc.u.unaryExpr([](double val) { return gelu_grad(val); }));
    d_x1.noalias() += d_u * p.w1;
    if (accumulate_base_grads) {
      g.w1.noalias() += d_u.transpose() * bc.x1;
      g.b1.col(0) += d_u.colwise().sum().transpose();
    }

    // LN1 -> residual split.
    Matrix d_r1 = layer_norm_backward(d_x1, p.ln1, bc.ln1,
                                      accumulate_base_grads ? &g.ln1 : nullptr);
    Matrix d_x = d_r1;

    // Attention output projection.
    Matrix d_concat = project_backward(
        projection_name(bidx, "output"), d_r1, bc.attn_concat, p.attn.wo,
        &g.attn.wo, &g.attn.bo, lora, bc, accumulate_base_grads);

    // Heads.
    const Eigen::Index t_frames = x.rows();
    Matrix d_q(t_frames, cfg_.width), d_k(t_frames, cfg_.width),
        d_v(t_frames, cfg_.width);
    for (int h = 0; h < heads; ++h) {
      const Matrix& probs = bc.probs[static_cast<size_t>(h)];
      auto qh = bc.q.middleCols(h * dh, dh);
      auto kh = bc.k.middleCols(h * dh, dh);
      auto vh = bc.v.middleCols(h * dh, dh);
      auto d_oh = d_concat.middleCols(h * dh, dh);

      Matrix d_probs = d_oh * vh.transpose();
      d_v.middleCols(h * dh, dh) = probs.transpose() * d_oh;

      Matrix d_scores(t_frames, t_frames);
      for (Eigen::Index t = 0; t < t_frames; ++t) {
        const double dot = d_probs.row(t).dot(probs.row(t));
        d_scores.row(t) =
            (probs.row(t).array() * (d_probs.row(t).array() - dot)).matrix();
      }
      d_q.middleCols(h * dh, dh) = d_scores * kh * inv_sqrt_dh;
      d_k.middleCols(h * dh, dh) = d_scores.transpose() * qh * inv_sqrt_dh;
    }

    d_x += project_backward(projection_name(bidx, "query"), d_q, x, p.attn.wq,
                            &g.attn.wq, &g.attn.bq, lora, bc,
                            accumulate_base_grads);
    d_x += project_backward(projection_name(bidx, "key"), d_k, x, p.attn.wk,
                            &g.attn.wk, &g.attn.bk, lora, bc,
                            accumulate_base_grads);
    d_x += project_backward(projection_name(bidx, "value"), d_v, x, p.attn.wv,
                            &g.attn.wv, &g.attn.bv, lora, bc,
                            accumulate_base_grads);

    d_next = d_x + d_layers[static_cast<size_t>(bidx)];
  }
  // The conv frontend is frozen in every mode; gradients stop here.
}

void TransformerBackbone::visit_params(const ParamVisitor& visitor) {
  visitor("conv.w", conv_.w, nullptr, ParamGroup::kConvFrontend);
  visitor("conv.b", conv_.b, nullptr, ParamGroup::kConvFrontend);
  visitor("conv.ln.gamma", conv_.ln.gamma, nullptr, ParamGroup::kConvFrontend);
  visitor("conv.ln.beta", conv_.ln.beta, nullptr, ParamGroup::kConvFrontend);
  for (int i = 0; i < cfg_.num_blocks; ++i) {
    BlockParams& p = blocks_[static_cast<size_t>(i)];
    BlockParams& g = grads_[static_cast<size_t>(i)];
    const std::string prefix = "block" + std::to_string(i) + ".";
    auto visit = [&](const std::string& name, Matrix& value, Matrix& grad) {
      visitor(prefix + name, value, &grad, ParamGroup::kTransformer);
    };
    visit("attn.wq", p.attn.wq, g.attn.wq);
    visit("attn.bq", p.attn.bq, g.attn.bq);
    visit("attn.wk", p.attn.wk, g.attn.wk);
    visit("attn.bk", p.attn.bk, g.attn.bk);
    visit("attn.wv", p.attn.wv, g.attn.wv);
    visit("attn.bv", p.attn.bv, g.attn.bv);
    visit("attn.wo", p.attn.wo, g.attn.wo);
    visit("attn.bo", p.attn.bo, g.attn.bo);
    visit("ln1.gamma", p.ln1.gamma, g.ln1.gamma);
    visit("ln1.beta", p.ln1.beta, g.ln1.beta);
    visit("ln2.gamma", p.ln2.gamma, g.ln2.gamma);
    visit("ln2.beta", p.ln2.beta, g.ln2.beta);
    visit("ffn.w1", p.w1, g.w1);
    visit("ffn.b1", p.b1, g.b1);
    visit("ffn.w2", p.w2, g.w2);
    visit("ffn.b2", p.b2, g.b2);
  }
}

}  // namespace

std::shared_ptr<Backbone> make_seeded_backbone(const BackboneConfig& config) {
  return std::make_shared<TransformerBackbone>(config);
}

std::shared_ptr<Backbone> load_pretrained_backbone(
    const BackboneConfig& config, const std::string& weights_path) {
  auto backbone = std::make_shared<TransformerBackbone>(config);
  TensorFile file = load_tensor_file(weights_path);
  const std::string file_id = file.header.value("backbone_id", "");
  if (file_id != config.id) {
    throw config_error("backbone weights file '" + weights_path +
                       "' carries id '" + file_id + "', expected '" +
                       config.id + "'");
  }
  size_t loaded = 0;
  backbone->visit_params([&](const std::string& name, Matrix& value, Matrix*,
                             ParamGroup) {
    auto it = file.tensors.find(name);
    if (it == file.tensors.end()) {
      throw runtime_error("backbone weights file misses tensor '" + name +
                          "'");
    }
    if (it->second.rows() != value.rows() || it->second.cols() != value.cols()) {
      throw runtime_error("backbone tensor '" + name + "' has shape " +
                          std::to_string(it->second.rows()) + "x" +
                          std::to_string(it->second.cols()) + ", expected " +
                          std::to_string(value.rows()) + "x" +
                          std::to_string(value.cols()));
    }
    value = it->second;
    ++loaded;
  });
  if (loaded != file.tensors.size()) {
    throw runtime_error("backbone weights file has " +
                        std::to_string(file.tensors.size()) +
                        " tensors, model uses " + std::to_string(loaded));
  }
  backbone->set_revision("file-sha256:" + sha256_file_hex(weights_path));
  return backbone;
}

}  // namespace laqm
