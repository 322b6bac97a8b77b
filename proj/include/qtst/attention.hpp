/* Copyright 2026 The QTST Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
/**
 * @file attention.hpp
 * Classical baseline: a small post-norm transformer encoder over the same
 * window-averaged, affinely projected input as the quantum model, with mean
 * pooling over time and a linear head. Gradients are by hand-written
 * backpropagation.
 */
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qtst/core.hpp"
#include "qtst/dataio.hpp"
#include "qtst/metrics.hpp"

namespace qtst::attention {

using metrics::Task;
using Mat = Eigen::MatrixXd;

struct AttentionConfig {
  std::size_t embed_dim = 16;
  /// Query/key width per head.
  std::size_t key_dim = 4;
  std::size_t n_heads = 4;
  std::size_t n_layers = 4;
  std::size_t seq_len = 8;
  std::size_t ffn_dim = 64;
  std::size_t input_dim = 8;
  bool positional_encoding = true;
  Task task = Task::kBinaryClassification;

  void validate() const {
    QTST_REQUIRE(embed_dim >= 1 && key_dim >= 1 && n_heads >= 1 && seq_len >= 1 && ffn_dim >= 1 &&
                     input_dim >= 1,
                 ErrorCode::kConfigError, "attention dimensions must be >= 1");
    QTST_REQUIRE(embed_dim % n_heads == 0, ErrorCode::kConfigError,
                 "embed_dim must be divisible by n_heads");
  }
};

inline constexpr double kLayerNormEps = 1e-5;

/// Row-wise softmax, shifted by the row maximum.
inline Mat softmax_rows(const Mat& s) {
  Mat p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    p.row(i) = (s.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// softmax(Q K^T / sqrt(d_k)) V for Q, K of width d_k and V of any width.
inline Mat attention(const Mat& q, const Mat& k, const Mat& v) {
  QTST_REQUIRE(q.cols() == k.cols() && k.rows() == v.rows() && q.cols() >= 1,
               ErrorCode::kShapeMismatch, "attention shapes do not match");
  return softmax_rows(q * k.transpose() / std::sqrt(static_cast<double>(q.cols()))) * v;
}

/// Sinusoidal position table, L x d.
inline Mat positional_table(std::size_t length, std::size_t d) {
  Mat pe(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(d));
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          i % 2 == 0 ? std::sin(static_cast<double>(t) * rate) : std::cos(static_cast<double>(t) * rate);
    }
  return pe;
}

struct LayerParams {
  Mat wq, bq, wk, bk, wv, bv, wo, bo;  // biases are 1 x n rows
  Mat ln1_gain, ln1_bias;
  Mat w1, b1, w2, b2;
  Mat ln2_gain, ln2_bias;

  template <class F>
  void visit(F&& f) { visit_all(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_all(*this, f); }

 private:
  template <class Self, class F>
  static void visit_all(Self& s, F& f) {
    for (auto* m : {&s.wq, &s.bq, &s.wk, &s.bk, &s.wv, &s.bv, &s.wo, &s.bo, &s.ln1_gain,
                    &s.ln1_bias, &s.w1, &s.b1, &s.w2, &s.b2, &s.ln2_gain, &s.ln2_bias})
      f(*m);
  }
};

struct BaselineParams {
  Mat projection;       // embed_dim x input_dim
  Mat projection_bias;  // 1 x embed_dim
  std::vector<LayerParams> layers;
  Mat head;       // 1 x embed_dim
  Mat head_bias;  // 1 x 1

  template <class F>
  void visit(F&& f) { visit_all(*this, f); }
  template <class F>
  void visit(F&& f) const { visit_all(*this, f); }

  static BaselineParams zeros(const AttentionConfig& c) {
    const auto d = static_cast<Eigen::Index>(c.embed_dim);
    const auto hk = static_cast<Eigen::Index>(c.n_heads * c.key_dim);
    const auto f = static_cast<Eigen::Index>(c.ffn_dim);
    BaselineParams p;
    p.projection = Mat::Zero(d, static_cast<Eigen::Index>(c.input_dim));
    p.projection_bias = Mat::Zero(1, d);
    p.layers.resize(c.n_layers);
    for (auto& l : p.layers) {
      l.wq = Mat::Zero(d, hk);
      l.bq = Mat::Zero(1, hk);
      l.wk = Mat::Zero(d, hk);
      l.bk = Mat::Zero(1, hk);
      l.wv = Mat::Zero(d, d);
      l.bv = Mat::Zero(1, d);
      l.wo = Mat::Zero(d, d);
      l.bo = Mat::Zero(1, d);
      l.ln1_gain = Mat::Zero(1, d);
      l.ln1_bias = Mat::Zero(1, d);
      l.w1 = Mat::Zero(d, f);
      l.b1 = Mat::Zero(1, f);
      l.w2 = Mat::Zero(f, d);
      l.b2 = Mat::Zero(1, d);
      l.ln2_gain = Mat::Zero(1, d);
      l.ln2_bias = Mat::Zero(1, d);
    }
    p.head = Mat::Zero(1, d);
    p.head_bias = Mat::Zero(1, 1);
    return p;
  }

  /// Glorot-uniform weights, zero biases, unit LayerNorm gains, zero head.
  static BaselineParams init(const AttentionConfig& c, Rng& rng) {
    c.validate();
    BaselineParams p = zeros(c);
    auto glorot = [&](Mat& m) {
      const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -bound, bound);
    };
    glorot(p.projection);
    for (auto& l : p.layers) {
      for (Mat* m : {&l.wq, &l.wk, &l.wv, &l.wo, &l.w1, &l.w2}) glorot(*m);
      l.ln1_gain.setOnes();
      l.ln2_gain.setOnes();
    }
    return p;
  }

  std::vector<double> flatten() const {
    std::vector<double> v;
    visit([&](const Mat& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
    });
    return v;
  }

  static BaselineParams unflatten(const AttentionConfig& c, std::span<const double> v) {
    BaselineParams p = zeros(c);
    std::size_t at = 0;
    p.visit([&](Mat& m) { at += static_cast<std::size_t>(m.size()); });
    QTST_REQUIRE(v.size() == at, ErrorCode::kDimensionMismatch,
                 "expected " + std::to_string(at) + " parameters, got " + std::to_string(v.size()));
    at = 0;
    p.visit([&](Mat& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          QTST_REQUIRE(std::isfinite(v[at]), ErrorCode::kNonFinite, "non-finite parameter");
          m(i, j) = v[at++];
        }
    });
    return p;
  }

 private:
  template <class Self, class F>
  static void visit_all(Self& s, F& f) {
    f(s.projection);
    f(s.projection_bias);
    for (auto& l : s.layers) l.visit(f);
    f(s.head);
    f(s.head_bias);
  }
};

/// Exact count of trainable scalars.
inline std::size_t count_parameters(const AttentionConfig& c) {
  const std::size_t d = c.embed_dim, hk = c.n_heads * c.key_dim, f = c.ffn_dim;
  const std::size_t per_layer = 2 * (d * hk + hk) + 2 * (d * d + d) + 2 * d + (d * f + f) +
                                (f * d + d) + 2 * d;
  return c.input_dim * d + d + c.n_layers * per_layer + d + 1;
}

namespace detail {

inline Mat add_row(const Mat& m, const Mat& row) { return m.rowwise() + row.row(0); }

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

inline Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, LayerNormCache& cache) {
  const auto d = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.inv_std.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).sum() / d;
    const double var = (x.row(i).array() - mu).square().sum() / d;
    cache.inv_std(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.xhat.row(i) = (x.row(i).array() - mu) * cache.inv_std(i);
  }
  return add_row(cache.xhat.array().rowwise() * gain.row(0).array(), bias);
}

inline Mat layer_norm_backward(const Mat& dy, const Mat& gain, const LayerNormCache& cache,
                               Mat& d_gain, Mat& d_bias) {
  d_gain += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  d_bias += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * gain.row(0).array();
  Mat dx(dy.rows(), dy.cols());
  const auto d = static_cast<double>(dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double m1 = dxhat.row(i).sum() / d;
    const double m2 = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.inv_std(i) * (dxhat.row(i).array() - m1 - cache.xhat.row(i).array() * m2);
  }
  return dx;
}

struct LayerCache {
  Mat x, q, k, v;
  std::vector<Mat> probs;
  Mat concat;
  LayerNormCache ln1, ln2;
  Mat h1, z;
};

struct Cache {
  Mat x;  // segmented input
  std::vector<LayerCache> layers;
  Mat out;  // final L x d
  Mat pooled;
  double output = 0.0;
};

inline Mat layer_forward(const AttentionConfig& c, const LayerParams& p, const Mat& x, LayerCache& k) {
  const auto dk = static_cast<Eigen::Index>(c.key_dim);
  const auto dv = static_cast<Eigen::Index>(c.embed_dim / c.n_heads);
  k.x = x;
  k.q = add_row(x * p.wq, p.bq);
  k.k = add_row(x * p.wk, p.bk);
  k.v = add_row(x * p.wv, p.bv);
  k.concat.resize(x.rows(), x.cols());
  k.probs.clear();
  const double inv = 1.0 / std::sqrt(static_cast<double>(c.key_dim));
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const auto hi = static_cast<Eigen::Index>(h);
    Mat pr = softmax_rows(k.q.middleCols(hi * dk, dk) * k.k.middleCols(hi * dk, dk).transpose() * inv);
    k.concat.middleCols(hi * dv, dv) = pr * k.v.middleCols(hi * dv, dv);
    k.probs.push_back(std::move(pr));
  }
  const Mat attn = add_row(k.concat * p.wo, p.bo);
  k.h1 = layer_norm(x + attn, p.ln1_gain, p.ln1_bias, k.ln1);
  k.z = add_row(k.h1 * p.w1, p.b1);
  const Mat f = add_row(k.z.cwiseMax(0.0) * p.w2, p.b2);
  return layer_norm(k.h1 + f, p.ln2_gain, p.ln2_bias, k.ln2);
}

inline Mat layer_backward(const AttentionConfig& c, const LayerParams& p, const LayerCache& k,
                          const Mat& dy, LayerParams& g) {
  const auto dk = static_cast<Eigen::Index>(c.key_dim);
  const auto dv = static_cast<Eigen::Index>(c.embed_dim / c.n_heads);
  const Mat d_r2 = layer_norm_backward(dy, p.ln2_gain, k.ln2, g.ln2_gain, g.ln2_bias);
  const Mat relu = k.z.cwiseMax(0.0);
  g.w2 += relu.transpose() * d_r2;
  g.b2 += d_r2.colwise().sum();
  const Mat d_z = (d_r2 * p.w2.transpose()).array() * (k.z.array() > 0.0).cast<double>();
  g.w1 += k.h1.transpose() * d_z;
  g.b1 += d_z.colwise().sum();
  const Mat d_h1 = d_r2 + d_z * p.w1.transpose();
  const Mat d_r1 = layer_norm_backward(d_h1, p.ln1_gain, k.ln1, g.ln1_gain, g.ln1_bias);

  g.wo += k.concat.transpose() * d_r1;
  g.bo += d_r1.colwise().sum();
  const Mat d_concat = d_r1 * p.wo.transpose();
  Mat d_q = Mat::Zero(k.q.rows(), k.q.cols());
  Mat d_k = Mat::Zero(k.k.rows(), k.k.cols());
  Mat d_v = Mat::Zero(k.v.rows(), k.v.cols());
  const double inv = 1.0 / std::sqrt(static_cast<double>(c.key_dim));
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const auto hi = static_cast<Eigen::Index>(h);
    const Mat& pr = k.probs[h];
    const Mat d_a = d_concat.middleCols(hi * dv, dv);
    d_v.middleCols(hi * dv, dv) = pr.transpose() * d_a;
    const Mat d_p = d_a * k.v.middleCols(hi * dv, dv).transpose();
    Mat d_s = pr.array() * d_p.array();
    for (Eigen::Index i = 0; i < d_s.rows(); ++i) d_s.row(i) -= pr.row(i) * d_s.row(i).sum();
    d_s *= inv;
    d_q.middleCols(hi * dk, dk) = d_s * k.k.middleCols(hi * dk, dk);
    d_k.middleCols(hi * dk, dk) = d_s.transpose() * k.q.middleCols(hi * dk, dk);
  }
  g.wq += k.x.transpose() * d_q;
  g.bq += d_q.colwise().sum();
  g.wk += k.x.transpose() * d_k;
  g.bk += d_k.colwise().sum();
  g.wv += k.x.transpose() * d_v;
  g.bv += d_v.colwise().sum();
  return d_r1 + d_q * p.wq.transpose() + d_k * p.wk.transpose() + d_v * p.wv.transpose();
}

inline Cache run_forward(const AttentionConfig& c, const BaselineParams& p, const Mat& series,
                         const std::string& sample_id) {
  QTST_REQUIRE(series.cols() == static_cast<Eigen::Index>(c.input_dim), ErrorCode::kShapeMismatch,
               "sample '" + sample_id + "' has " + std::to_string(series.cols()) +
                   " features, model expects " + std::to_string(c.input_dim));
  Cache k;
  k.x = dataio::segment(series, c.seq_len);
  Mat h = add_row(k.x * p.projection.transpose(), p.projection_bias);
  if (c.positional_encoding) h += positional_table(c.seq_len, c.embed_dim);
  k.layers.resize(c.n_layers);
  for (std::size_t l = 0; l < c.n_layers; ++l) h = layer_forward(c, p.layers[l], h, k.layers[l]);
  k.out = h;
  k.pooled = h.colwise().mean();
  k.output = k.pooled.row(0).dot(p.head.row(0)) + p.head_bias(0, 0);
  QTST_REQUIRE(std::isfinite(k.output), ErrorCode::kNonFinite,
               "sample '" + sample_id + "': non-finite output");
  return k;
}

}  // namespace detail

/// Logit (classification) or predicted value (regression).
inline double forward(const AttentionConfig& c, const BaselineParams& p, const Mat& series,
                      const std::string& sample_id = "") {
  return detail::run_forward(c, p, series, sample_id).output;
}

/// Adds d(loss)/d(params) for one sample to `grad` (same shapes as params).
inline double accumulate_gradient(const AttentionConfig& c, const BaselineParams& p,
                                  const dataio::TimeSeriesSample& s, BaselineParams& grad) {
  const auto k = detail::run_forward(c, p, s.series, s.subject_id);
  const double loss = metrics::loss(c.task, k.output, s.label);
  const double g = metrics::loss_grad(c.task, k.output, s.label);
  grad.head += g * k.pooled;
  grad.head_bias(0, 0) += g;
  const auto rows = static_cast<double>(k.out.rows());
  Mat d_h = p.head.replicate(k.out.rows(), 1) * (g / rows);
  for (std::size_t l = c.n_layers; l-- > 0;)
    d_h = detail::layer_backward(c, p.layers[l], k.layers[l], d_h, grad.layers[l]);
  grad.projection += d_h.transpose() * k.x;
  grad.projection_bias += d_h.colwise().sum();
  return loss;
}

/// Adapter used by the generic training loop (train.hpp).
class BaselineModel {
 public:
  BaselineModel(AttentionConfig config, BaselineParams params)
      : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
  }

  static BaselineModel initialized(const AttentionConfig& config, std::uint64_t seed) {
    Rng rng = substream(seed, "init");
    return BaselineModel(config, BaselineParams::init(config, rng));
  }

  const AttentionConfig& config() const { return config_; }
  const BaselineParams& params() const { return params_; }
  Task task() const { return config_.task; }
  std::size_t parameter_count() const { return count_parameters(config_); }

  std::vector<double> parameters() const { return params_.flatten(); }
  void set_parameters(std::span<const double> v) { params_ = BaselineParams::unflatten(config_, v); }

  double predict(const Mat& series, const std::string& id = "") const {
    return forward(config_, params_, series, id);
  }

  double accumulate_gradient(const dataio::TimeSeriesSample& s, std::span<double> grad) const {
    BaselineParams g = BaselineParams::zeros(config_);
    const double loss = attention::accumulate_gradient(config_, params_, s, g);
    std::size_t at = 0;
    g.visit([&](const Mat& m) {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) grad[at++] += m(i, j);
    });
    return loss;
  }

 private:
  AttentionConfig config_;
  BaselineParams params_;
};

}  // namespace qtst::attention
