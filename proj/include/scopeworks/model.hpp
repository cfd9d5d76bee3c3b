// Copyright 2026 The Scopeworks Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Token classifiers.
//
// TransformerClassifier is a small post-norm transformer encoder trained from
// scratch: token + learned position embeddings, LayerNorm, a stack of
// self-attention / feed-forward blocks, and a linear head Y = X W + b with
// W of shape n_hidden x num_classes, followed by a row softmax. Gradients are
// derived by hand; the test suite checks them against finite differences.
//
// ReplayModel serves probability tables produced elsewhere (for example by a
// pretrained model) from a probability interchange file.

#ifndef SCOPEWORKS_MODEL_HPP_
#define SCOPEWORKS_MODEL_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "scopeworks/common.hpp"
#include "scopeworks/encoding.hpp"
#include "scopeworks/eval.hpp"
#include "scopeworks/tokenize.hpp"

namespace scopeworks::model {

using Matrix = Eigen::MatrixXd;
using align::ProbTable;
using align::TokenizedInstance;

// Portable random numbers: the mt19937_64 output sequence is fixed by the
// standard, the distributions below are computed here rather than taken from
// the library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

struct ClassifierConfig {
  std::size_t vocab_size = 0;
  std::size_t n_hidden = 64;
  std::size_t num_classes = 4;
  std::size_t encoder_layers = 2;
  std::size_t attention_heads = 4;
  std::size_t ff_width = 128;
  double dropout = 0.1;
  std::size_t max_len = 128;

  void validate() const {
    const auto fail = [](const std::string& m) { throw Error(ErrorKind::kConfig, m); };
    if (vocab_size == 0) fail("vocab_size must be positive");
    if (n_hidden == 0 || attention_heads == 0) fail("n_hidden and attention_heads must be positive");
    if (n_hidden % attention_heads != 0) {
      fail("n_hidden " + std::to_string(n_hidden) + " not divisible by attention_heads " +
           std::to_string(attention_heads));
    }
    if (num_classes < 2) fail("num_classes must be at least 2");
    if (ff_width == 0) fail("ff_width must be positive");
    if (max_len == 0) fail("max_len must be positive");
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  }

  bool operator==(const ClassifierConfig&) const = default;
};

inline Json to_json(const ClassifierConfig& c) {
  return {{"vocab_size", c.vocab_size},   {"n_hidden", c.n_hidden},
          {"num_classes", c.num_classes}, {"encoder_layers", c.encoder_layers},
          {"attention_heads", c.attention_heads}, {"ff_width", c.ff_width},
          {"dropout", c.dropout},         {"max_len", c.max_len}};
}

inline ClassifierConfig classifier_config_from_json(const Json& j) {
  ClassifierConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.n_hidden = j.value("n_hidden", c.n_hidden);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.attention_heads = j.value("attention_heads", c.attention_heads);
  c.ff_width = j.value("ff_width", c.ff_width);
  c.dropout = j.value("dropout", c.dropout);
  c.max_len = j.value("max_len", c.max_len);
  return c;
}

struct LayerParams {
  Matrix wq, wk, wv, wo;      // d x d
  Matrix bq, bk, bv, bo;      // 1 x d
  Matrix ln1_gamma, ln1_beta;
  Matrix w1, b1;              // d x ff, 1 x ff
  Matrix w2, b2;              // ff x d, 1 x d
  Matrix ln2_gamma, ln2_beta;
};

struct Parameters {
  Matrix token_embedding;     // vocab x d
  Matrix position_embedding;  // max_len x d
  Matrix emb_gamma, emb_beta;
  std::vector<LayerParams> layers;
  Matrix head_w;  // d x num_classes
  Matrix head_b;  // 1 x num_classes

  // Every tensor with a stable name, in a fixed order.
  std::vector<std::pair<std::string, Matrix*>> entries() {
    std::vector<std::pair<std::string, Matrix*>> out = {
        {"token_embedding", &token_embedding},
        {"position_embedding", &position_embedding},
        {"emb_gamma", &emb_gamma},
        {"emb_beta", &emb_beta}};
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& L = layers[l];
      const std::string p = "layer" + std::to_string(l) + ".";
      for (auto& [n, m] : std::vector<std::pair<const char*, Matrix*>>{
               {"wq", &L.wq}, {"wk", &L.wk}, {"wv", &L.wv}, {"wo", &L.wo},
               {"bq", &L.bq}, {"bk", &L.bk}, {"bv", &L.bv}, {"bo", &L.bo},
               {"ln1_gamma", &L.ln1_gamma}, {"ln1_beta", &L.ln1_beta},
               {"w1", &L.w1}, {"b1", &L.b1}, {"w2", &L.w2}, {"b2", &L.b2},
               {"ln2_gamma", &L.ln2_gamma}, {"ln2_beta", &L.ln2_beta}}) {
        out.emplace_back(p + n, m);
      }
    }
    out.emplace_back("head_w", &head_w);
    out.emplace_back("head_b", &head_b);
    return out;
  }

  std::vector<std::pair<std::string, const Matrix*>> entries() const {
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (auto& [n, m] : const_cast<Parameters*>(this)->entries()) out.emplace_back(n, m);
    return out;
  }

  Parameters zeros_like() const {
    Parameters z = *this;
    for (auto& [n, m] : z.entries()) m->setZero();
    return z;
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [name, m] : entries()) n += static_cast<std::size_t>(m->size());
    return n;
  }

  bool operator==(const Parameters& o) const {
    auto a = entries();
    auto b = o.entries();
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].second->rows() != b[i].second->rows() ||
          a[i].second->cols() != b[i].second->cols() || *a[i].second != *b[i].second) {
        return false;
      }
    }
    return true;
  }
};

// Common surface of every backend that produces per-token probabilities.
class ProbabilityModel {
 public:
  virtual ~ProbabilityModel() = default;
  virtual ProbTable predict(const TokenizedInstance& instance) const = 0;
};

// ---------------------------------------------------------------------------
// Loss

inline constexpr double kLogClamp = 1e-12;

struct LossParts {
  double weighted_nll = 0.0;  // sum of weight * -log p over counted positions
  double weight = 0.0;        // sum of applied weights

  double value() const { return weight > 0.0 ? weighted_nll / weight : 0.0; }
};

// Weighted categorical cross entropy over the positions where pad_mask is
// true and the gold class weight is non-zero; other positions are skipped,
// not multiplied by zero. Normalized by the sum of applied weights.
inline LossParts weighted_ce_parts(const ProbTable& probs, std::span<const int> labels,
                                   std::span<const double> class_weights,
                                   const std::vector<bool>& pad_mask,
                                   const std::vector<int>& order) {
  if (labels.size() != probs.rows() || pad_mask.size() != probs.rows()) {
    throw Error(ErrorKind::kInput, "loss inputs differ in length");
  }
  if (class_weights.size() != probs.classes() || order.size() != probs.classes()) {
    throw Error(ErrorKind::kInput, "class weights do not match the class count");
  }
  LossParts out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!pad_mask[i]) continue;
    const int c = class_index(order, labels[i]);
    const double w = class_weights[static_cast<std::size_t>(c)];
    if (w == 0.0) continue;
    out.weighted_nll += w * -std::log(std::max(probs.at(i, static_cast<std::size_t>(c)), kLogClamp));
    out.weight += w;
  }
  return out;
}

inline double weighted_ce_loss(const ProbTable& probs, std::span<const int> labels,
                               std::span<const double> class_weights,
                               const std::vector<bool>& pad_mask,
                               const std::vector<int>& order) {
  return weighted_ce_parts(probs, labels, class_weights, pad_mask, order).value();
}

// Cue task: pad label 4 weighted 0, everything else 1. Scope task: all 1
// (pads are excluded through pad_mask).
inline std::vector<double> default_class_weights(Task task) {
  if (task == Task::kCue) return {1.0, 1.0, 1.0, 0.0};
  return {1.0, 1.0};
}

// ---------------------------------------------------------------------------
// Transformer encoder

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

inline Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                         LayerNormCache* cache) {
  const Eigen::Index d = x.cols();
  Eigen::VectorXd mean = x.rowwise().mean();
  Matrix centered = x.colwise() - mean;
  Eigen::VectorXd var = centered.array().square().rowwise().sum() / static_cast<double>(d);
  Eigen::VectorXd inv = (var.array() + kLayerNormEps).rsqrt();
  Matrix xhat = centered.array().colwise() * inv.array();
  Matrix y = (xhat.array().rowwise() * gamma.row(0).array()).rowwise() + beta.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const Matrix& gamma,
                                  const LayerNormCache& c, Matrix& dgamma, Matrix& dbeta) {
  const double d = static_cast<double>(dy.cols());
  dgamma += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  dbeta += dy.colwise().sum();
  Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
  Eigen::VectorXd m1 = dxhat.rowwise().sum() / d;
  Eigen::VectorXd m2 = (dxhat.array() * c.xhat.array()).rowwise().sum() / d;
  Matrix dx = (dxhat.colwise() - m1) - (c.xhat.array().colwise() * m2.array()).matrix();
  return dx.array().colwise() * c.inv_std.array();
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

inline void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    m.row(r) /= m.row(r).sum();
  }
}

struct LayerCache {
  Matrix x_in, q, k, v;
  std::vector<Matrix> attention;  // per head, rows x valid
  Matrix context;
  Matrix attn_mask;  // dropout mask on the attention output, empty when off
  LayerNormCache ln1;
  Matrix x1, h_pre, h;
  Matrix ff_mask;
  LayerNormCache ln2;
};

struct ForwardCache {
  std::vector<int> ids;
  Matrix emb_mask;
  LayerNormCache emb_ln;
  std::vector<LayerCache> layers;
  Matrix hidden;  // final encoder output
  Matrix probs;
};

inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng) {
  if (!rng || rate <= 0.0) return {};
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, c) = rng->uniform() < rate ? 0.0 : keep;
  }
  return mask;
}

inline void apply_mask(Matrix& m, const Matrix& mask) {
  if (mask.size()) m.array() *= mask.array();
}

}  // namespace detail

class TransformerClassifier : public ProbabilityModel {
 public:
  TransformerClassifier() = default;

  TransformerClassifier(const ClassifierConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const auto d = static_cast<Eigen::Index>(config_.n_hidden);
    const auto ff = static_cast<Eigen::Index>(config_.ff_width);
    const auto normal = [&](Eigen::Index r, Eigen::Index c, double std) {
      Matrix m(r, c);
      for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = std * rng.normal();
      }
      return m;
    };
    const auto xavier = [&](Eigen::Index r, Eigen::Index c) {
      const double limit = std::sqrt(6.0 / static_cast<double>(r + c));
      Matrix m(r, c);
      for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = limit * (2.0 * rng.uniform() - 1.0);
      }
      return m;
    };
    const auto ones = [](Eigen::Index c) { return Matrix::Ones(1, c); };
    const auto zeros = [](Eigen::Index c) { return Matrix::Zero(1, c); };

    params_.token_embedding = normal(static_cast<Eigen::Index>(config_.vocab_size), d, 0.02);
    params_.position_embedding = normal(static_cast<Eigen::Index>(config_.max_len), d, 0.02);
    params_.emb_gamma = ones(d);
    params_.emb_beta = zeros(d);
    for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
      LayerParams L;
      L.wq = xavier(d, d);
      L.wk = xavier(d, d);
      L.wv = xavier(d, d);
      L.wo = xavier(d, d);
      L.bq = L.bk = L.bv = L.bo = zeros(d);
      L.ln1_gamma = ones(d);
      L.ln1_beta = zeros(d);
      L.w1 = xavier(d, ff);
      L.b1 = zeros(ff);
      L.w2 = xavier(ff, d);
      L.b2 = zeros(d);
      L.ln2_gamma = ones(d);
      L.ln2_beta = zeros(d);
      params_.layers.push_back(std::move(L));
    }
    params_.head_w = xavier(d, static_cast<Eigen::Index>(config_.num_classes));
    params_.head_b = zeros(static_cast<Eigen::Index>(config_.num_classes));
  }

  const ClassifierConfig& config() const { return config_; }
  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }

  // Inference over all max_len positions. Attention never reads pad keys, so
  // real rows do not depend on what sits in the pad positions.
  ProbTable forward(std::span<const int> token_ids, const std::vector<bool>& pad_mask) const {
    if (token_ids.size() != config_.max_len || pad_mask.size() != config_.max_len) {
      throw Error(ErrorKind::kInput, "expected " + std::to_string(config_.max_len) +
                                         " positions, got " + std::to_string(token_ids.size()));
    }
    std::size_t valid = 0;
    while (valid < pad_mask.size() && pad_mask[valid]) ++valid;
    detail::ForwardCache cache;
    run_forward(token_ids, config_.max_len, valid, nullptr, cache);
    return to_table(cache.probs);
  }

  ProbTable predict(const TokenizedInstance& t) const override {
    return forward(t.token_ids, t.pad_mask);
  }

  // Encoder output for the real prefix, before the head.
  Matrix encode(std::span<const int> token_ids, std::size_t valid) const {
    detail::ForwardCache cache;
    run_forward(token_ids, valid, valid, nullptr, cache);
    return cache.hidden;
  }

  // One training pass over the real prefix of `t`: adds the gradient of the
  // un-normalized weighted loss to `grads` and returns its parts. Divide the
  // accumulated gradient by the summed weight to get the normalized loss's
  // gradient. Dropout is active when `rng` is given.
  LossParts accumulate_gradients(const TokenizedInstance& t, std::span<const double> class_weights,
                                 Parameters& grads, Rng* rng) const {
    const auto order = class_order(t.task);
    if (order.size() != config_.num_classes) {
      throw Error(ErrorKind::kConfig, "model has " + std::to_string(config_.num_classes) +
                                          " classes, task class order " + order_string(order));
    }
    const std::size_t n = t.real_length();
    LossParts parts;
    if (n == 0) return parts;
    detail::ForwardCache cache;
    run_forward(t.token_ids, n, n, rng, cache);
    Matrix dlogits = Matrix::Zero(static_cast<Eigen::Index>(n), cache.probs.cols());
    for (std::size_t i = 0; i < n; ++i) {
      if (!t.pad_mask[i]) continue;
      const int c = class_index(order, t.token_labels[i]);
      const double w = class_weights[static_cast<std::size_t>(c)];
      if (w == 0.0) continue;
      const auto r = static_cast<Eigen::Index>(i);
      parts.weighted_nll += w * -std::log(std::max(cache.probs(r, c), kLogClamp));
      parts.weight += w;
      dlogits.row(r) = w * cache.probs.row(r);
      dlogits(r, c) -= w;
    }
    backward(cache, dlogits, grads);
    return parts;
  }

 private:
  static ProbTable to_table(const Matrix& probs) {
    ProbTable t(static_cast<std::size_t>(probs.rows()), static_cast<std::size_t>(probs.cols()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      for (Eigen::Index c = 0; c < probs.cols(); ++c) {
        t.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = probs(r, c);
      }
    }
    return t;
  }

  // Computes `rows` positions; attention keys are limited to the first
  // `valid` positions.
  void run_forward(std::span<const int> ids, std::size_t rows, std::size_t valid, Rng* rng,
                   detail::ForwardCache& cache) const {
    const auto n = static_cast<Eigen::Index>(rows);
    const auto nv = static_cast<Eigen::Index>(valid);
    const auto d = static_cast<Eigen::Index>(config_.n_hidden);
    const auto heads = static_cast<Eigen::Index>(config_.attention_heads);
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    if (rows > config_.max_len || ids.size() < rows) {
      throw Error(ErrorKind::kInput, "sequence longer than max_len");
    }

    cache.ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(rows));
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int id = cache.ids[static_cast<std::size_t>(i)];
      if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
        throw Error(ErrorKind::kInput, "token id " + std::to_string(id) +
                                           " outside vocabulary of " +
                                           std::to_string(config_.vocab_size));
      }
      x.row(i) = params_.token_embedding.row(id) + params_.position_embedding.row(i);
    }
    x = detail::layer_norm(x, params_.emb_gamma, params_.emb_beta, &cache.emb_ln);
    cache.emb_mask = detail::dropout_mask(n, d, config_.dropout, rng);
    detail::apply_mask(x, cache.emb_mask);

    cache.layers.resize(params_.layers.size());
    for (std::size_t l = 0; l < params_.layers.size(); ++l) {
      const LayerParams& L = params_.layers[l];
      detail::LayerCache& c = cache.layers[l];
      c.x_in = x;
      c.q = (x * L.wq).rowwise() + L.bq.row(0);
      c.k = (x * L.wk).rowwise() + L.bk.row(0);
      c.v = (x * L.wv).rowwise() + L.bv.row(0);
      c.context = Matrix::Zero(n, d);
      c.attention.assign(static_cast<std::size_t>(heads), Matrix());
      if (nv > 0) {
        for (Eigen::Index h = 0; h < heads; ++h) {
          Matrix s = c.q.middleCols(h * dh, dh) *
                     c.k.topRows(nv).middleCols(h * dh, dh).transpose() * scale;
          detail::softmax_rows(s);
          c.context.middleCols(h * dh, dh) = s * c.v.topRows(nv).middleCols(h * dh, dh);
          c.attention[static_cast<std::size_t>(h)] = std::move(s);
        }
      }
      Matrix attn = (c.context * L.wo).rowwise() + L.bo.row(0);
      c.attn_mask = detail::dropout_mask(n, d, config_.dropout, rng);
      detail::apply_mask(attn, c.attn_mask);
      c.x1 = detail::layer_norm(x + attn, L.ln1_gamma, L.ln1_beta, &c.ln1);
      c.h_pre = (c.x1 * L.w1).rowwise() + L.b1.row(0);
      c.h = c.h_pre.unaryExpr(&detail::gelu);
      Matrix f = (c.h * L.w2).rowwise() + L.b2.row(0);
      c.ff_mask = detail::dropout_mask(n, d, config_.dropout, rng);
      detail::apply_mask(f, c.ff_mask);
      x = detail::layer_norm(c.x1 + f, L.ln2_gamma, L.ln2_beta, &c.ln2);
    }
    cache.hidden = x;
    cache.probs = (x * params_.head_w).rowwise() + params_.head_b.row(0);
    detail::softmax_rows(cache.probs);
  }

  void backward(const detail::ForwardCache& cache, const Matrix& dlogits, Parameters& g) const {
    const auto d = static_cast<Eigen::Index>(config_.n_hidden);
    const auto heads = static_cast<Eigen::Index>(config_.attention_heads);
    const Eigen::Index dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    g.head_w += cache.hidden.transpose() * dlogits;
    g.head_b += dlogits.colwise().sum();
    Matrix dx = dlogits * params_.head_w.transpose();

    for (std::size_t li = params_.layers.size(); li-- > 0;) {
      const LayerParams& L = params_.layers[li];
      LayerParams& G = g.layers[li];
      const detail::LayerCache& c = cache.layers[li];
      const Eigen::Index nv = c.attention.empty() || c.attention[0].size() == 0
                                  ? 0
                                  : c.attention[0].cols();

      Matrix dr2 = detail::layer_norm_backward(dx, L.ln2_gamma, c.ln2, G.ln2_gamma, G.ln2_beta);
      Matrix dx1 = dr2;
      Matrix df = dr2;
      detail::apply_mask(df, c.ff_mask);
      G.w2 += c.h.transpose() * df;
      G.b2 += df.colwise().sum();
      Matrix dh_act = df * L.w2.transpose();
      Matrix dh_pre = dh_act.array() * c.h_pre.unaryExpr(&detail::gelu_grad).array();
      G.w1 += c.x1.transpose() * dh_pre;
      G.b1 += dh_pre.colwise().sum();
      dx1 += dh_pre * L.w1.transpose();

      Matrix dr1 = detail::layer_norm_backward(dx1, L.ln1_gamma, c.ln1, G.ln1_gamma, G.ln1_beta);
      Matrix dx_in = dr1;
      Matrix da = dr1;
      detail::apply_mask(da, c.attn_mask);
      G.wo += c.context.transpose() * da;
      G.bo += da.colwise().sum();
      Matrix dctx = da * L.wo.transpose();

      Matrix dq = Matrix::Zero(c.q.rows(), d);
      Matrix dk = Matrix::Zero(c.k.rows(), d);
      Matrix dv = Matrix::Zero(c.v.rows(), d);
      if (nv > 0) {
        for (Eigen::Index h = 0; h < heads; ++h) {
          const Matrix& p = c.attention[static_cast<std::size_t>(h)];
          Matrix dctx_h = dctx.middleCols(h * dh, dh);
          Matrix dp = dctx_h * c.v.topRows(nv).middleCols(h * dh, dh).transpose();
          dv.topRows(nv).middleCols(h * dh, dh) += p.transpose() * dctx_h;
          Eigen::VectorXd dot = (dp.array() * p.array()).rowwise().sum();
          Matrix ds = (p.array() * (dp.colwise() - dot).array()) * scale;
          dq.middleCols(h * dh, dh) += ds * c.k.topRows(nv).middleCols(h * dh, dh);
          dk.topRows(nv).middleCols(h * dh, dh) += ds.transpose() * c.q.middleCols(h * dh, dh);
        }
      }
      G.wq += c.x_in.transpose() * dq;
      G.bq += dq.colwise().sum();
      G.wk += c.x_in.transpose() * dk;
      G.bk += dk.colwise().sum();
      G.wv += c.x_in.transpose() * dv;
      G.bv += dv.colwise().sum();
      dx_in += dq * L.wq.transpose() + dk * L.wk.transpose() + dv * L.wv.transpose();
      dx = std::move(dx_in);
    }

    detail::apply_mask(dx, cache.emb_mask);
    Matrix de = detail::layer_norm_backward(dx, params_.emb_gamma, cache.emb_ln, g.emb_gamma,
                                            g.emb_beta);
    for (Eigen::Index i = 0; i < de.rows(); ++i) {
      g.token_embedding.row(cache.ids[static_cast<std::size_t>(i)]) += de.row(i);
      g.position_embedding.row(i) += de.row(i);
    }
  }

  ClassifierConfig config_;
  Parameters params_;
};

// ---------------------------------------------------------------------------
// Optimizer

// Adam with bias correction; no warmup, decay or weight decay.
class Adam {
 public:
  Adam(const Parameters& like, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : m_(like.zeros_like()), v_(like.zeros_like()), lr_(learning_rate), beta1_(beta1),
        beta2_(beta2), eps_(eps) {}

  void step(Parameters& params, Parameters& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    auto p = params.entries();
    auto g = grads.entries();
    auto m = m_.entries();
    auto v = v_.entries();
    for (std::size_t i = 0; i < p.size(); ++i) {
      Matrix& gi = *g[i].second;
      *m[i].second = beta1_ * *m[i].second + (1.0 - beta1_) * gi;
      *v[i].second = beta2_ * *v[i].second + (1.0 - beta2_) * gi.cwiseProduct(gi);
      p[i].second->array() -= lr_ * (m[i].second->array() / c1) /
                              ((v[i].second->array() / c2).sqrt() + eps_);
    }
  }

  int steps() const { return t_; }

 private:
  Parameters m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
};

// ---------------------------------------------------------------------------
// Training

struct Example {
  encoding::TaskInstance instance;
  TokenizedInstance tokens;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool early_stopped = false;
};

struct TrainConfig {
  double learning_rate = 3e-5;
  std::size_t batch_size = 8;
  int max_epochs = 60;
  int early_stop_patience = 6;
  std::vector<double> class_weights;  // empty: default_class_weights(task)
  std::uint64_t seed = 0;
  align::Aggregation val_aggregation = align::Aggregation::kAverage;
  // Replaces the validation word-level F1 when set (test harnesses).
  std::function<double(int epoch, const TransformerClassifier&)> validation_metric;
  std::function<void(const EpochRecord&, const TransformerClassifier&)> on_epoch_end;
};

struct TrainedModel {
  TransformerClassifier model;
  TrainingHistory history;
};

inline std::vector<eval::WordPredictions> predict_words(const ProbabilityModel& model,
                                                        const std::vector<Example>& examples,
                                                        align::Aggregation method) {
  std::vector<eval::WordPredictions> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back(eval::make_word_predictions(ex.instance, ex.tokens, model.predict(ex.tokens),
                                              method));
  }
  return out;
}

// Trains with early stopping on validation word-level F1: stops once
// `early_stop_patience` epochs pass without a strict improvement, and
// returns the parameters of the best epoch.
inline TrainedModel train(const ClassifierConfig& config, const std::vector<Example>& train_set,
                          const std::vector<Example>& val_set, const TrainConfig& tc) {
  if (train_set.empty()) throw Error(ErrorKind::kConfig, "empty training set");
  if (tc.batch_size == 0) throw Error(ErrorKind::kConfig, "batch_size must be positive");
  if (tc.max_epochs < 1) throw Error(ErrorKind::kConfig, "max_epochs must be at least 1");
  if (tc.early_stop_patience < 1) throw Error(ErrorKind::kConfig, "patience must be at least 1");
  const Task task = train_set.front().instance.task;
  std::set<std::string> train_ids;
  for (const auto& ex : train_set) {
    if (ex.instance.task != task) throw Error(ErrorKind::kConfig, "mixed tasks in training set");
    train_ids.insert(ex.instance.instance_id);
  }
  for (const auto& ex : val_set) {
    if (train_ids.count(ex.instance.instance_id)) {
      throw Error(ErrorKind::kConfig,
                  "instance " + ex.instance.instance_id + " is in both train and validation");
    }
  }
  std::vector<double> weights =
      tc.class_weights.empty() ? default_class_weights(task) : tc.class_weights;
  if (weights.size() != config.num_classes) {
    throw Error(ErrorKind::kConfig, "class_weights has " + std::to_string(weights.size()) +
                                        " entries for " + std::to_string(config.num_classes) +
                                        " classes");
  }
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorKind::kConfig, "class weights must be non-negative");
  }

  TrainedModel out{TransformerClassifier(config, tc.seed), {}};
  TransformerClassifier& model = out.model;
  Rng rng(tc.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam adam(model.parameters(), tc.learning_rate);
  Parameters grads = model.parameters().zeros_like();
  Parameters best = model.parameters();
  double best_f1 = -std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0, weight_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
      for (auto& [n, m] : grads.entries()) m->setZero();
      LossParts batch;
      const std::size_t end = std::min(order.size(), b + tc.batch_size);
      for (std::size_t i = b; i < end; ++i) {
        auto parts = model.accumulate_gradients(train_set[order[i]].tokens, weights, grads, &rng);
        batch.weighted_nll += parts.weighted_nll;
        batch.weight += parts.weight;
      }
      if (batch.weight <= 0.0) continue;
      for (auto& [n, m] : grads.entries()) *m /= batch.weight;
      adam.step(model.parameters(), grads);
      loss_sum += batch.weighted_nll;
      weight_sum += batch.weight;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;
    rec.val_f1 = tc.validation_metric
                     ? tc.validation_metric(epoch, model)
                     : eval::score_task(predict_words(model, val_set, tc.val_aggregation), task).f1;
    out.history.epochs.push_back(rec);
    if (tc.on_epoch_end) tc.on_epoch_end(rec, model);
    if (rec.val_f1 > best_f1) {
      best_f1 = rec.val_f1;
      out.history.best_epoch = epoch;
      best = model.parameters();
    } else if (epoch - out.history.best_epoch >= tc.early_stop_patience) {
      out.history.early_stopped = true;
      break;
    }
  }
  model.parameters() = std::move(best);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// A checkpoint is one JSON document:
//   {"format": "scopeworks-checkpoint", "version": 1, "task": "cue"|"scope",
//    "config": {...ClassifierConfig...}, "vocab": [token, ...],
//    "params": {name: {"rows": r, "cols": c, "data": [row-major values]}}}
// Doubles are written in shortest round-trip form, so a reload is exact.

inline constexpr std::string_view kCheckpointFormat = "scopeworks-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Task task = Task::kCue;
  TransformerClassifier model;
  align::WordPieceTokenizer tokenizer;
};

inline std::string save_checkpoint(const Checkpoint& ck) {
  Json params = Json::object();
  for (const auto& [name, m] : ck.model.parameters().entries()) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m->size()));
    for (Eigen::Index r = 0; r < m->rows(); ++r) {
      for (Eigen::Index c = 0; c < m->cols(); ++c) data.push_back((*m)(r, c));
    }
    params[name] = {{"rows", m->rows()}, {"cols", m->cols()}, {"data", data}};
  }
  Json j = {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"task", to_string(ck.task)},
            {"config", to_json(ck.model.config())},
            {"vocab", ck.tokenizer.vocab()},
            {"params", params}};
  return j.dump() + "\n";
}

inline Checkpoint load_checkpoint(std::string_view bytes) {
  Json j;
  try {
    j = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("checkpoint: ") + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) {
    throw Error(ErrorKind::kSchema, "not a scopeworks checkpoint");
  }
  if (j.value("version", -1) != kCheckpointVersion) {
    throw Error(ErrorKind::kSchema, "checkpoint version " + std::to_string(j.value("version", -1)) +
                                        " unsupported");
  }
  Checkpoint ck;
  ck.task = parse_task(j.at("task").get<std::string>());
  ClassifierConfig config = classifier_config_from_json(j.at("config"));
  ck.tokenizer = align::WordPieceTokenizer(j.at("vocab").get<std::vector<std::string>>(),
                                           config.max_len);
  ck.model = TransformerClassifier(config, 0);
  const Json& params = j.at("params");
  for (auto& [name, m] : ck.model.parameters().entries()) {
    if (!params.contains(name)) throw Error(ErrorKind::kSchema, "checkpoint lacks " + name);
    const Json& p = params.at(name);
    const auto rows = p.at("rows").get<Eigen::Index>();
    const auto cols = p.at("cols").get<Eigen::Index>();
    const auto data = p.at("data").get<std::vector<double>>();
    if (rows != m->rows() || cols != m->cols() ||
        data.size() != static_cast<std::size_t>(rows * cols)) {
      throw Error(ErrorKind::kSchema, "checkpoint tensor " + name + " has the wrong shape");
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        (*m)(r, c) = data[static_cast<std::size_t>(r * cols + c)];
      }
    }
  }
  return ck;
}

// ---------------------------------------------------------------------------
// Probability interchange files and replay
//
// One JSON object per line:
//   {"instance_id": "...", "class_order": [...], "probs": [[...], ...]}
// with exactly max_len rows, each summing to 1 within 1e-4.

inline constexpr double kRowSumTolerance = 1e-4;

inline Json probability_line(const std::string& instance_id, const ProbTable& probs,
                             const std::vector<int>& order) {
  Json rows = Json::array();
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto row = probs.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"instance_id", instance_id}, {"class_order", order}, {"probs", rows}};
}

inline std::string write_probability_file(
    const std::vector<std::pair<std::string, ProbTable>>& tables, Task task) {
  std::string out;
  for (const auto& [id, t] : tables) out += probability_line(id, t, class_order(task)).dump() + "\n";
  return out;
}

class ReplayModel : public ProbabilityModel {
 public:
  // `max_len` of 0 accepts any row count.
  static ReplayModel load(std::string_view bytes, Task task, std::size_t max_len = 0) {
    ReplayModel rm;
    const auto expected = class_order(task);
    for (const auto& line : parse_jsonl(bytes)) {
      const auto where = "line " + std::to_string(line.line_number) + ": ";
      const auto lno = static_cast<std::int64_t>(line.line_number);
      try {
        const Json& j = line.value;
        auto id = j.at("instance_id").get<std::string>();
        auto order = j.at("class_order").get<std::vector<int>>();
        if (order != expected) {
          throw Error(ErrorKind::kSchema,
                      where + "class_order " + order_string(order) +
                          " does not match the task's class order " + order_string(expected),
                      lno);
        }
        const Json& rows = j.at("probs");
        if (max_len && rows.size() != max_len) {
          throw Error(ErrorKind::kSchema,
                      where + std::to_string(rows.size()) + " rows, expected max_len " +
                          std::to_string(max_len),
                      lno);
        }
        ProbTable t(rows.size(), expected.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          auto row = rows.at(r).get<std::vector<double>>();
          if (row.size() != expected.size()) {
            throw Error(ErrorKind::kSchema, where + "row " + std::to_string(r) + " has " +
                                                std::to_string(row.size()) + " entries",
                        lno);
          }
          std::copy(row.begin(), row.end(), t.row(r).begin());
        }
        try {
          t.validate(kRowSumTolerance);
        } catch (const Error& e) {
          throw Error(ErrorKind::kSchema, where + "instance " + id + ": " + e.what(), lno);
        }
        if (!rm.tables_.emplace(id, std::move(t)).second) {
          throw Error(ErrorKind::kSchema, where + "duplicate instance " + id, lno);
        }
      } catch (const Json::exception& e) {
        throw Error(ErrorKind::kSchema, where + e.what(), lno);
      }
    }
    return rm;
  }

  ProbTable predict(const TokenizedInstance& t) const override { return table(t.instance_id); }

  const ProbTable& table(const std::string& instance_id) const {
    auto it = tables_.find(instance_id);
    if (it == tables_.end()) {
      throw Error(ErrorKind::kLookup, "no probabilities for instance " + instance_id);
    }
    return it->second;
  }

  std::size_t size() const { return tables_.size(); }

 private:
  std::map<std::string, ProbTable> tables_;
};

}  // namespace scopeworks::model

#endif  // SCOPEWORKS_MODEL_HPP_
