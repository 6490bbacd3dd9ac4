// Copyright 2026 The cpvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cpvae/autodiff/tensor.hpp"
#include "cpvae/error.hpp"
#include "cpvae/random.hpp"

namespace cpvae {

enum class LayerKind {
  Dense,
  MaskedDenseTriangular,
  CircularConv1d,
  Relu,
  Selu,
  GlobalAveragePool,
  Sigmoid,
  Exponential,
  Tanh,
};

inline std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::MaskedDenseTriangular: return "masked_dense_triangular";
    case LayerKind::CircularConv1d: return "circular_conv1d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Selu: return "selu";
    case LayerKind::GlobalAveragePool: return "global_average_pool";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::Exponential: return "exponential";
    case LayerKind::Tanh: return "tanh";
  }
  return "unknown";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  for (auto k : {LayerKind::Dense, LayerKind::MaskedDenseTriangular, LayerKind::CircularConv1d,
                 LayerKind::Relu, LayerKind::Selu, LayerKind::GlobalAveragePool,
                 LayerKind::Sigmoid, LayerKind::Exponential, LayerKind::Tanh}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidInput("unknown layer kind '" + s + "'");
}

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

/// Layer description. Which size fields are meaningful depends on `kind`:
///   dense:                   in_features -> out_features, input [B, in]
///   masked_dense_triangular: as dense; the first `context` input columns are always
///                            visible, remaining inputs and all outputs carry site degrees
///                            floor(k * n_sites / width); output o sees input c iff
///                            deg(c) < deg(o) (strict) or deg(c) <= deg(o) (inclusive)
///   circular_conv1d:         input [B, N, in_channels] -> [B, N, out_channels], centered
///                            kernel of odd length with periodic wrap
///   global_average_pool:     [B, N, C] -> [B, C]
///   activations:             elementwise, any shape
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::size_t kernel_size = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t n_sites = 0;
  std::size_t context = 0;
  bool strict = true;

  static LayerSpec dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.in_features = in;
    s.out_features = out;
    return s;
  }
  static LayerSpec masked(std::size_t context, std::size_t in, std::size_t out,
                          std::size_t n_sites, bool strict) {
    LayerSpec s;
    s.kind = LayerKind::MaskedDenseTriangular;
    s.context = context;
    s.in_features = in;
    s.out_features = out;
    s.n_sites = n_sites;
    s.strict = strict;
    return s;
  }
  static LayerSpec conv1d(std::size_t kernel, std::size_t in_ch, std::size_t out_ch) {
    LayerSpec s;
    s.kind = LayerKind::CircularConv1d;
    s.kernel_size = kernel;
    s.in_channels = in_ch;
    s.out_channels = out_ch;
    return s;
  }
  static LayerSpec activation(LayerKind kind) {
    LayerSpec s;
    s.kind = kind;
    return s;
  }

  bool has_parameters() const {
    return kind == LayerKind::Dense || kind == LayerKind::MaskedDenseTriangular ||
           kind == LayerKind::CircularConv1d;
  }

  std::vector<Shape> parameter_shapes() const {
    switch (kind) {
      case LayerKind::Dense:
      case LayerKind::MaskedDenseTriangular:
        return {{out_features, in_features}, {out_features}};
      case LayerKind::CircularConv1d:
        return {{out_channels, kernel_size, in_channels}, {out_channels}};
      default:
        return {};
    }
  }

  std::size_t fan_in() const {
    return kind == LayerKind::CircularConv1d ? kernel_size * in_channels : in_features;
  }

  void validate() const {
    if (kind == LayerKind::Dense) {
      detail::require(in_features > 0 && out_features > 0, "dense layer needs positive sizes");
    } else if (kind == LayerKind::MaskedDenseTriangular) {
      detail::require(out_features > 0 && in_features > context && n_sites > 0,
                      "masked layer needs out > 0, in > context and n_sites > 0");
      detail::require(in_features - context >= n_sites && out_features >= n_sites,
                      "masked layer widths must cover every site degree");
    } else if (kind == LayerKind::CircularConv1d) {
      detail::require(kernel_size % 2 == 1 && in_channels > 0 && out_channels > 0,
                      "circular conv needs an odd kernel and positive channels");
    }
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Site degree of a non-context unit k in a layer of `width` site-carrying units.
inline std::size_t site_degree(std::size_t k, std::size_t width, std::size_t n_sites) {
  return (k * n_sites) / width;
}

/// 0/1 connectivity pattern [out, in] for a masked layer.
inline RowMatrix triangular_mask(const LayerSpec& spec) {
  RowMatrix mask(spec.out_features, spec.in_features);
  const std::size_t sites_in = spec.in_features - spec.context;
  for (std::size_t o = 0; o < spec.out_features; ++o) {
    const std::size_t d_out = site_degree(o, spec.out_features, spec.n_sites);
    for (std::size_t c = 0; c < spec.in_features; ++c) {
      bool allowed = true;
      if (c >= spec.context) {
        const std::size_t d_in = site_degree(c - spec.context, sites_in, spec.n_sites);
        allowed = spec.strict ? d_in < d_out : d_in <= d_out;
      }
      mask(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(c)) = allowed ? 1.0 : 0.0;
    }
  }
  return mask;
}

/// Everything backward needs from one forward call.
struct Tape {
  Tensor input;
  Tensor output;
};

namespace detail {

/// Per-thread cache of mask patterns, keyed by layer geometry.
inline const RowMatrix& cached_mask(const LayerSpec& spec) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t, std::size_t, bool>;
  thread_local std::map<Key, RowMatrix> cache;
  const Key key{spec.in_features, spec.out_features, spec.context, spec.n_sites, spec.strict};
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, triangular_mask(spec)).first;
  return it->second;
}

inline void require_params(const LayerSpec& spec, std::size_t count) {
  require(count == spec.parameter_shapes().size(),
          "layer " + to_string(spec.kind) + " received the wrong number of parameters");
}

inline RowMatrix effective_weight(const LayerSpec& spec, const Parameter& w) {
  RowMatrix weight = w.value.matrix();
  if (spec.kind == LayerKind::MaskedDenseTriangular) {
    weight = weight.cwiseProduct(cached_mask(spec));
  }
  return weight;
}

inline long wrap(long k, long n) { return ((k % n) + n) % n; }

/// im2col for a centered circular kernel: row b*N+n holds x[b, n+k-K/2 mod N, :] for k.
inline RowMatrix circular_columns(const Tensor& x, std::size_t kernel) {
  const std::size_t batch = x.dim(0);
  const std::size_t n = x.dim(1);
  const std::size_t cin = x.dim(2);
  RowMatrix col(batch * n, kernel * cin);
  const long half = static_cast<long>(kernel / 2);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = col.data() + (b * n + i) * kernel * cin;
      for (std::size_t k = 0; k < kernel; ++k) {
        const auto src_site = static_cast<std::size_t>(
            wrap(static_cast<long>(i) + static_cast<long>(k) - half, static_cast<long>(n)));
        const double* src = x.data() + (b * n + src_site) * cin;
        std::copy(src, src + cin, dst + k * cin);
      }
    }
  }
  return col;
}

}  // namespace detail

/// Forward pass of one layer. Returns the output and the tape for `backward`.
inline std::pair<Tensor, Tape> forward(const LayerSpec& spec, std::span<const Parameter> params,
                                       const Tensor& input) {
  detail::require_params(spec, params.size());
  Tensor out;
  switch (spec.kind) {
    case LayerKind::Dense:
    case LayerKind::MaskedDenseTriangular: {
      detail::require(input.rank() == 2 && input.dim(1) == spec.in_features,
                      "dense input must be [B, " + std::to_string(spec.in_features) + "], got " +
                          shape_string(input.shape()));
      const RowMatrix weight = detail::effective_weight(spec, params[0]);
      out = Tensor({input.dim(0), spec.out_features});
      auto y = out.matrix();
      y.noalias() = input.matrix() * weight.transpose();
      y.rowwise() += params[1].value.matrix().row(0);
      break;
    }
    case LayerKind::CircularConv1d: {
      detail::require(input.rank() == 3 && input.dim(2) == spec.in_channels,
                      "conv input must be [B, N, " + std::to_string(spec.in_channels) +
                          "], got " + shape_string(input.shape()));
      const RowMatrix col = detail::circular_columns(input, spec.kernel_size);
      const ConstMatrixMap weight(params[0].value.data(),
                                  static_cast<Eigen::Index>(spec.out_channels),
                                  static_cast<Eigen::Index>(spec.kernel_size * spec.in_channels));
      out = Tensor({input.dim(0), input.dim(1), spec.out_channels});
      auto y = out.matrix();
      y.noalias() = col * weight.transpose();
      y.rowwise() += params[1].value.matrix().row(0);
      break;
    }
    case LayerKind::GlobalAveragePool: {
      detail::require(input.rank() == 3, "global average pool input must be [B, N, C]");
      const std::size_t batch = input.dim(0);
      const std::size_t n = input.dim(1);
      const std::size_t c = input.dim(2);
      out = Tensor({batch, c});
      for (std::size_t b = 0; b < batch; ++b) {
        const ConstMatrixMap block(input.data() + b * n * c, static_cast<Eigen::Index>(n),
                                   static_cast<Eigen::Index>(c));
        out.matrix().row(static_cast<Eigen::Index>(b)) =
            block.colwise().sum() / static_cast<double>(n);
      }
      break;
    }
    case LayerKind::Relu:
    case LayerKind::Selu:
    case LayerKind::Sigmoid:
    case LayerKind::Exponential:
    case LayerKind::Tanh: {
      detail::require(input.size() > 0, "activation input must be non-empty");
      out = Tensor(input.shape());
      const double* x = input.data();
      double* y = out.data();
      const std::size_t size = input.size();
      switch (spec.kind) {
        case LayerKind::Relu:
          for (std::size_t k = 0; k < size; ++k) y[k] = x[k] > 0.0 ? x[k] : 0.0;
          break;
        case LayerKind::Selu:
          for (std::size_t k = 0; k < size; ++k) {
            y[k] = x[k] > 0.0 ? kSeluLambda * x[k] : kSeluLambda * kSeluAlpha * std::expm1(x[k]);
          }
          break;
        case LayerKind::Sigmoid:
          for (std::size_t k = 0; k < size; ++k) {
            y[k] = x[k] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[k]))
                               : std::exp(x[k]) / (1.0 + std::exp(x[k]));
          }
          break;
        case LayerKind::Exponential:
          for (std::size_t k = 0; k < size; ++k) y[k] = std::exp(x[k]);
          break;
        default:
          for (std::size_t k = 0; k < size; ++k) y[k] = std::tanh(x[k]);
          break;
      }
      break;
    }
  }
  Tape tape{input, out};
  return {std::move(out), std::move(tape)};
}

/// Reverse-mode vector-Jacobian product. Parameter gradients are accumulated into
/// `params[k].grad`; the input cotangent is returned.
inline Tensor backward(const LayerSpec& spec, std::span<Parameter> params, const Tape& tape,
                       const Tensor& cotangent) {
  detail::require_params(spec, params.size());
  detail::require(cotangent.shape() == tape.output.shape(),
                  "cotangent shape " + shape_string(cotangent.shape()) +
                      " does not match layer output " + shape_string(tape.output.shape()));
  Tensor dx(tape.input.shape());
  switch (spec.kind) {
    case LayerKind::Dense:
    case LayerKind::MaskedDenseTriangular: {
      const auto dy = cotangent.matrix();
      const auto x = tape.input.matrix();
      RowMatrix dw = dy.transpose() * x;
      if (spec.kind == LayerKind::MaskedDenseTriangular) dw = dw.cwiseProduct(detail::cached_mask(spec));
      params[0].grad.matrix() += dw;
      params[1].grad.matrix().row(0) += dy.colwise().sum();
      const RowMatrix weight = detail::effective_weight(spec, params[0]);
      dx.matrix().noalias() = dy * weight;
      break;
    }
    case LayerKind::CircularConv1d: {
      const std::size_t batch = tape.input.dim(0);
      const std::size_t n = tape.input.dim(1);
      const std::size_t cin = spec.in_channels;
      const std::size_t kernel = spec.kernel_size;
      const RowMatrix col = detail::circular_columns(tape.input, kernel);
      const auto dy = cotangent.matrix();
      MatrixMap dweight(params[0].grad.data(), static_cast<Eigen::Index>(spec.out_channels),
                        static_cast<Eigen::Index>(kernel * cin));
      dweight.noalias() += dy.transpose() * col;
      params[1].grad.matrix().row(0) += dy.colwise().sum();
      const ConstMatrixMap weight(params[0].value.data(),
                                  static_cast<Eigen::Index>(spec.out_channels),
                                  static_cast<Eigen::Index>(kernel * cin));
      const RowMatrix dcol = dy * weight;
      const long half = static_cast<long>(kernel / 2);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
          const double* src = dcol.data() + (b * n + i) * kernel * cin;
          for (std::size_t k = 0; k < kernel; ++k) {
            const auto site = static_cast<std::size_t>(detail::wrap(
                static_cast<long>(i) + static_cast<long>(k) - half, static_cast<long>(n)));
            double* dst = dx.data() + (b * n + site) * cin;
            for (std::size_t c = 0; c < cin; ++c) dst[c] += src[k * cin + c];
          }
        }
      }
      break;
    }
    case LayerKind::GlobalAveragePool: {
      const std::size_t batch = tape.input.dim(0);
      const std::size_t n = tape.input.dim(1);
      const std::size_t c = tape.input.dim(2);
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t k = 0; k < c; ++k) {
            dx[(b * n + i) * c + k] = cotangent[b * c + k] * inv;
          }
        }
      }
      break;
    }
    default: {
      const double* x = tape.input.data();
      const double* y = tape.output.data();
      const double* g = cotangent.data();
      double* d = dx.data();
      const std::size_t size = dx.size();
      switch (spec.kind) {
        case LayerKind::Relu:
          for (std::size_t k = 0; k < size; ++k) d[k] = x[k] > 0.0 ? g[k] : 0.0;
          break;
        case LayerKind::Selu:
          for (std::size_t k = 0; k < size; ++k) {
            d[k] = g[k] * (x[k] > 0.0 ? kSeluLambda : y[k] + kSeluLambda * kSeluAlpha);
          }
          break;
        case LayerKind::Sigmoid:
          for (std::size_t k = 0; k < size; ++k) d[k] = g[k] * y[k] * (1.0 - y[k]);
          break;
        case LayerKind::Exponential:
          for (std::size_t k = 0; k < size; ++k) d[k] = g[k] * y[k];
          break;
        default:
          for (std::size_t k = 0; k < size; ++k) d[k] = g[k] * (1.0 - y[k] * y[k]);
          break;
      }
      break;
    }
  }
  return dx;
}

/// Fan-in-scaled uniform weights U(-sqrt(3/fan_in), sqrt(3/fan_in)); zero biases.
inline void initialize(const LayerSpec& spec, std::span<Parameter> params, Rng& rng) {
  if (!spec.has_parameters()) return;
  detail::require_params(spec, params.size());
  const double limit = std::sqrt(3.0 / static_cast<double>(spec.fan_in()));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  for (double& w : params[0].value.values()) w = uniform(rng);
  params[1].value.fill(0.0);
}

/// A layer together with the parameters it owns.
struct Layer {
  LayerSpec spec;
  std::vector<Parameter> params;

  Layer() = default;
  Layer(LayerSpec s, const std::string& name) : spec(s) {
    spec.validate();
    const auto shapes = spec.parameter_shapes();
    const char* suffix[] = {"weight", "bias"};
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      params.emplace_back(name + "." + suffix[k], shapes[k]);
    }
  }

  std::pair<Tensor, Tape> forward(const Tensor& input) const {
    return cpvae::forward(spec, params, input);
  }
  Tensor backward(const Tape& tape, const Tensor& cotangent) {
    return cpvae::backward(spec, params, tape, cotangent);
  }
};

}  // namespace cpvae
