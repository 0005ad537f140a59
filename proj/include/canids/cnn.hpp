#pragma once

// Residual convolutional classifier over stacked wavelet tensors, written
// out by hand: forward, backward, Adam, early stopping, finite-difference
// gradient check and a versioned, checksummed container.
//
// Architecture: `residual_blocks` blocks, each
//   out = act(conv2(act(conv1(x))) + shortcut(x))
// with same-padded kh x kw convolutions and a 1x1 projection shortcut where
// the channel count changes, then global average pooling, one affine unit
// and a sigmoid. act is SiLU (smooth, so finite differences stay exact to
// second order). Everything runs in double precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "canids/common.hpp"
#include "canids/wavelet.hpp"

namespace canids {

struct CnnConfig {
  std::size_t residual_blocks = 3;
  std::size_t base_channels = 16;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 5;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  InputShape input{20, 11, 57};
  // Adam constants, recorded with every model.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline std::vector<std::string> validate(const CnnConfig& c) {
  std::vector<std::string> out;
  if (c.residual_blocks < 1) out.push_back("cnn.residual_blocks must be >= 1");
  if (c.base_channels < 1) out.push_back("cnn.base_channels must be >= 1");
  if (c.kernel_h < 1 || c.kernel_w < 1) out.push_back("cnn.kernel must be >= 1 in both axes");
  if (c.kernel_h % 2 == 0 || c.kernel_w % 2 == 0) out.push_back("cnn.kernel sizes must be odd (same padding)");
  if (c.batch_size < 1) out.push_back("cnn.batch_size must be >= 1");
  if (c.max_epochs < 1) out.push_back("cnn.max_epochs must be >= 1");
  if (!(c.learning_rate > 0.0)) out.push_back("cnn.learning_rate must be > 0");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
    out.push_back("cnn.validation_fraction must lie in (0, 1)");
  }
  if (c.input.planes < 1 || c.input.height < 1 || c.input.width < 1) out.push_back("cnn.input shape must be positive");
  return out;
}

inline nlohmann::json to_json(const CnnConfig& c) {
  return {{"residual_blocks", c.residual_blocks},
          {"base_channels", c.base_channels},
          {"kernel", {c.kernel_h, c.kernel_w}},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"early_stop_patience", c.early_stop_patience},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"input_shape", {c.input.planes, c.input.height, c.input.width}},
          {"optimizer", {{"name", "adam"}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"epsilon", c.epsilon}}},
          {"loss", "binary_cross_entropy"},
          {"activation", "silu"}};
}

inline CnnConfig cnn_config_from_json(const nlohmann::json& j, CnnConfig c = {}) {
  c.residual_blocks = j.value("residual_blocks", c.residual_blocks);
  c.base_channels = j.value("base_channels", c.base_channels);
  if (j.contains("kernel")) {
    c.kernel_h = j.at("kernel").at(0).get<std::size_t>();
    c.kernel_w = j.at("kernel").at(1).get<std::size_t>();
  }
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.early_stop_patience = j.value("early_stop_patience", c.early_stop_patience);
  c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  c.seed = j.value("seed", c.seed);
  if (j.contains("input_shape")) {
    const auto& s = j.at("input_shape");
    c.input = {s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(), s.at(2).get<std::size_t>()};
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    c.beta1 = o.value("beta1", c.beta1);
    c.beta2 = o.value("beta2", c.beta2);
    c.epsilon = o.value("epsilon", c.epsilon);
  }
  return c;
}

struct ParamTensor {
  std::string name;
  std::vector<std::size_t> dims;
  std::size_t offset = 0;
  std::size_t size() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct BlockLayout {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t conv1_w = 0, conv1_b = 0, conv2_w = 0, conv2_b = 0;
  std::optional<std::size_t> proj_w;  // 1x1 shortcut when channels change
};

struct CnnModel {
  CnnConfig config;
  std::vector<ParamTensor> tensors;
  std::vector<double> params;
  std::vector<EpochStats> history;
  std::optional<std::size_t> best_epoch;

  std::size_t offset_of(std::string_view name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t.offset;
    }
    throw Error("cnn: no parameter tensor '" + std::string(name) + "'");
  }
  const ParamTensor& tensor(std::string_view name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t;
    }
    throw Error("cnn: no parameter tensor '" + std::string(name) + "'");
  }
};

namespace detail {

inline std::vector<ParamTensor> cnn_layout(const CnnConfig& c) {
  std::vector<ParamTensor> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> dims) {
    ParamTensor t{std::move(name), std::move(dims), offset};
    offset += t.size();
    out.push_back(std::move(t));
  };
  std::size_t in = c.input.planes;
  const std::size_t ch = c.base_channels;
  for (std::size_t b = 0; b < c.residual_blocks; ++b) {
    const auto p = "block" + std::to_string(b) + ".";
    add(p + "conv1.weight", {ch, in, c.kernel_h, c.kernel_w});
    add(p + "conv1.bias", {ch});
    add(p + "conv2.weight", {ch, ch, c.kernel_h, c.kernel_w});
    add(p + "conv2.bias", {ch});
    if (in != ch) add(p + "shortcut.weight", {ch, in});
    in = ch;
  }
  add("head.weight", {ch});
  add("head.bias", {1});
  return out;
}

inline std::vector<BlockLayout> block_layouts(const CnnModel& m) {
  std::vector<BlockLayout> out;
  std::size_t in = m.config.input.planes;
  for (std::size_t b = 0; b < m.config.residual_blocks; ++b) {
    const auto p = "block" + std::to_string(b) + ".";
    BlockLayout l;
    l.in_channels = in;
    l.out_channels = m.config.base_channels;
    l.conv1_w = m.offset_of(p + "conv1.weight");
    l.conv1_b = m.offset_of(p + "conv1.bias");
    l.conv2_w = m.offset_of(p + "conv2.weight");
    l.conv2_b = m.offset_of(p + "conv2.bias");
    if (in != m.config.base_channels) l.proj_w = m.offset_of(p + "shortcut.weight");
    out.push_back(l);
    in = m.config.base_channels;
  }
  return out;
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double silu(double z) { return z * sigmoid(z); }

inline double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

// Binary cross-entropy of a logit, computed stably.
inline double bce_from_logit(double z, double y) {
  return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z)));
}

// Sigmoid clamped to the open interval (0, 1).
inline double open_unit_score(double z) {
  return std::clamp(sigmoid(z), std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

struct ConvGeom {
  std::size_t height, width, kh, kw;
};

// out[co] += sum_ci w[co][ci] (*) in[ci], same padding.
inline void conv_forward(const double* in, std::size_t cin, const double* w, std::size_t cout, double* out,
                         const ConvGeom& g) {
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  const auto ph = static_cast<std::ptrdiff_t>(g.kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(g.kw / 2);
  const std::size_t plane = g.height * g.width;
  for (std::size_t co = 0; co < cout; ++co) {
    double* o = out + co * plane;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* x = in + ci * plane;
      const double* wk = w + (co * cin + ci) * g.kh * g.kw;
      for (std::ptrdiff_t ky = 0; ky < static_cast<std::ptrdiff_t>(g.kh); ++ky) {
        const std::ptrdiff_t dy = ky - ph;
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy), y1 = std::min(H, H - dy);
        for (std::ptrdiff_t kx = 0; kx < static_cast<std::ptrdiff_t>(g.kw); ++kx) {
          const std::ptrdiff_t dx = kx - pw;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx), x1 = std::min(W, W - dx);
          const double wv = wk[ky * static_cast<std::ptrdiff_t>(g.kw) + kx];
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            double* orow = o + y * W;
            const double* xrow = x + (y + dy) * W + dx;
            for (std::ptrdiff_t xx = x0; xx < x1; ++xx) orow[xx] += wv * xrow[xx];
          }
        }
      }
    }
  }
}

// Accumulates dW and (optionally) dIn for conv_forward given dOut.
inline void conv_backward(const double* in, std::size_t cin, const double* w, std::size_t cout, const double* dout,
                          double* dw, double* din, const ConvGeom& g) {
  const auto H = static_cast<std::ptrdiff_t>(g.height);
  const auto W = static_cast<std::ptrdiff_t>(g.width);
  const auto ph = static_cast<std::ptrdiff_t>(g.kh / 2);
  const auto pw = static_cast<std::ptrdiff_t>(g.kw / 2);
  const std::size_t plane = g.height * g.width;
  for (std::size_t co = 0; co < cout; ++co) {
    const double* go = dout + co * plane;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* x = in + ci * plane;
      double* gx = din ? din + ci * plane : nullptr;
      const std::size_t base = (co * cin + ci) * g.kh * g.kw;
      for (std::ptrdiff_t ky = 0; ky < static_cast<std::ptrdiff_t>(g.kh); ++ky) {
        const std::ptrdiff_t dy = ky - ph;
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy), y1 = std::min(H, H - dy);
        for (std::ptrdiff_t kx = 0; kx < static_cast<std::ptrdiff_t>(g.kw); ++kx) {
          const std::ptrdiff_t dx = kx - pw;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx), x1 = std::min(W, W - dx);
          const std::size_t widx = base + static_cast<std::size_t>(ky * static_cast<std::ptrdiff_t>(g.kw) + kx);
          const double wv = w[widx];
          double acc = 0.0;
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            const double* grow = go + y * W;
            const double* xrow = x + (y + dy) * W + dx;
            for (std::ptrdiff_t xx = x0; xx < x1; ++xx) acc += grow[xx] * xrow[xx];
            if (gx) {
              double* gxrow = gx + (y + dy) * W + dx;
              for (std::ptrdiff_t xx = x0; xx < x1; ++xx) gxrow[xx] += wv * grow[xx];
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
}

// Per-example activations kept for the backward pass.
struct BlockCache {
  std::vector<double> z1;   // conv1 pre-activation
  std::vector<double> h1;   // act(z1)
  std::vector<double> u;    // conv2 + shortcut, pre-activation
  std::vector<double> out;  // act(u)
};

struct Workspace {
  std::vector<BlockCache> blocks;
  std::vector<double> pooled;
  double logit = 0.0;
  // Backward scratch.
  std::vector<double> d_out, d_u, d_h1, d_in;
};

}  // namespace detail

struct ForwardOptions {
  bool shortcuts = true;  // false ablates every residual shortcut
};

// Initializes parameters with fan-in-scaled uniform draws from the seed.
inline CnnModel init_model(const CnnConfig& cfg) {
  const auto problems = validate(cfg);
  if (!problems.empty()) throw Error("cnn config: " + problems.front());
  CnnModel m;
  m.config = cfg;
  m.tensors = detail::cnn_layout(cfg);
  const auto& last = m.tensors.back();
  m.params.assign(last.offset + last.size(), 0.0);
  Rng rng(cfg.seed);
  for (const auto& t : m.tensors) {
    const bool bias = t.dims.size() == 1 && t.name.find("bias") != std::string::npos;
    if (bias) continue;  // biases start at zero
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < t.dims.size(); ++d) fan_in *= t.dims[d];
    if (t.name == "head.weight") fan_in = t.dims[0];
    const bool head = t.name.rfind("head.", 0) == 0;
    const double bound = std::sqrt((head ? 3.0 : 6.0) / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) m.params[t.offset + i] = rng.uniform(-bound, bound);
  }
  return m;
}

inline std::size_t parameter_count(const CnnModel& m) { return m.params.size(); }

namespace detail {

inline void check_shape(const CnnModel& m, const InputShape& shape) {
  if (!(shape == m.config.input)) {
    throw Error("cnn: input shape " + std::to_string(shape.planes) + "x" + std::to_string(shape.height) + "x" +
                std::to_string(shape.width) + " does not match model shape " + std::to_string(m.config.input.planes) +
                "x" + std::to_string(m.config.input.height) + "x" + std::to_string(m.config.input.width));
  }
}

inline double forward_impl(const CnnModel& m, std::span<const double> params, std::span<const double> input,
                           Workspace& ws, const ForwardOptions& opt) {
  const auto& cfg = m.config;
  const ConvGeom g{cfg.input.height, cfg.input.width, cfg.kernel_h, cfg.kernel_w};
  const std::size_t plane = g.height * g.width;
  const auto layouts = block_layouts(m);
  ws.blocks.resize(layouts.size());
  const double* x = input.data();
  for (std::size_t b = 0; b < layouts.size(); ++b) {
    const auto& l = layouts[b];
    auto& c = ws.blocks[b];
    const std::size_t n = l.out_channels * plane;
    c.z1.assign(n, 0.0);
    c.h1.resize(n);
    c.u.assign(n, 0.0);
    c.out.resize(n);
    for (std::size_t co = 0; co < l.out_channels; ++co) {
      std::fill_n(c.z1.begin() + static_cast<std::ptrdiff_t>(co * plane), plane, params[l.conv1_b + co]);
      std::fill_n(c.u.begin() + static_cast<std::ptrdiff_t>(co * plane), plane, params[l.conv2_b + co]);
    }
    conv_forward(x, l.in_channels, params.data() + l.conv1_w, l.out_channels, c.z1.data(), g);
    for (std::size_t i = 0; i < n; ++i) c.h1[i] = silu(c.z1[i]);
    conv_forward(c.h1.data(), l.out_channels, params.data() + l.conv2_w, l.out_channels, c.u.data(), g);
    if (opt.shortcuts) {
      if (l.proj_w) {
        for (std::size_t co = 0; co < l.out_channels; ++co) {
          double* urow = c.u.data() + co * plane;
          for (std::size_t ci = 0; ci < l.in_channels; ++ci) {
            const double wv = params[*l.proj_w + co * l.in_channels + ci];
            const double* xrow = x + ci * plane;
            for (std::size_t p = 0; p < plane; ++p) urow[p] += wv * xrow[p];
          }
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) c.u[i] += x[i];
      }
    }
    for (std::size_t i = 0; i < n; ++i) c.out[i] = silu(c.u[i]);
    x = c.out.data();
  }
  const std::size_t ch = cfg.base_channels;
  ws.pooled.assign(ch, 0.0);
  for (std::size_t c = 0; c < ch; ++c) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane; ++p) s += x[c * plane + p];
    ws.pooled[c] = s / static_cast<double>(plane);
  }
  const std::size_t hw = m.offset_of("head.weight");
  const std::size_t hb = m.offset_of("head.bias");
  double z = params[hb];
  for (std::size_t c = 0; c < ch; ++c) z += params[hw + c] * ws.pooled[c];
  ws.logit = z;
  return z;
}

// Adds dLoss/dparams for one example (given dLoss/dlogit) into `grad`.
inline void backward_impl(const CnnModel& m, std::span<const double> params, std::span<const double> input,
                          Workspace& ws, double d_logit, std::span<double> grad, const ForwardOptions& opt) {
  const auto& cfg = m.config;
  const ConvGeom g{cfg.input.height, cfg.input.width, cfg.kernel_h, cfg.kernel_w};
  const std::size_t plane = g.height * g.width;
  const auto layouts = block_layouts(m);
  const std::size_t ch = cfg.base_channels;
  const std::size_t hw = m.offset_of("head.weight");
  const std::size_t hb = m.offset_of("head.bias");

  grad[hb] += d_logit;
  ws.d_out.assign(ch * plane, 0.0);
  for (std::size_t c = 0; c < ch; ++c) {
    grad[hw + c] += d_logit * ws.pooled[c];
    const double d_pool = d_logit * params[hw + c] / static_cast<double>(plane);
    std::fill_n(ws.d_out.begin() + static_cast<std::ptrdiff_t>(c * plane), plane, d_pool);
  }

  for (std::size_t bi = layouts.size(); bi-- > 0;) {
    const auto& l = layouts[bi];
    const auto& c = ws.blocks[bi];
    const double* x = bi == 0 ? input.data() : ws.blocks[bi - 1].out.data();
    const std::size_t n = l.out_channels * plane;
    const bool need_din = bi > 0;

    ws.d_u.resize(n);
    for (std::size_t i = 0; i < n; ++i) ws.d_u[i] = ws.d_out[i] * silu_grad(c.u[i]);

    for (std::size_t co = 0; co < l.out_channels; ++co) {
      double s = 0.0;
      for (std::size_t p = 0; p < plane; ++p) s += ws.d_u[co * plane + p];
      grad[l.conv2_b + co] += s;
    }
    ws.d_h1.assign(n, 0.0);
    conv_backward(c.h1.data(), l.out_channels, params.data() + l.conv2_w, l.out_channels, ws.d_u.data(),
                  grad.data() + l.conv2_w, ws.d_h1.data(), g);
    for (std::size_t i = 0; i < n; ++i) ws.d_h1[i] *= silu_grad(c.z1[i]);
    for (std::size_t co = 0; co < l.out_channels; ++co) {
      double s = 0.0;
      for (std::size_t p = 0; p < plane; ++p) s += ws.d_h1[co * plane + p];
      grad[l.conv1_b + co] += s;
    }
    if (need_din) ws.d_in.assign(l.in_channels * plane, 0.0);
    conv_backward(x, l.in_channels, params.data() + l.conv1_w, l.out_channels, ws.d_h1.data(),
                  grad.data() + l.conv1_w, need_din ? ws.d_in.data() : nullptr, g);
    if (opt.shortcuts) {
      if (l.proj_w) {
        for (std::size_t co = 0; co < l.out_channels; ++co) {
          const double* du = ws.d_u.data() + co * plane;
          for (std::size_t ci = 0; ci < l.in_channels; ++ci) {
            const double* xrow = x + ci * plane;
            double acc = 0.0;
            for (std::size_t p = 0; p < plane; ++p) acc += du[p] * xrow[p];
            grad[*l.proj_w + co * l.in_channels + ci] += acc;
            if (need_din) {
              const double wv = params[*l.proj_w + co * l.in_channels + ci];
              double* gx = ws.d_in.data() + ci * plane;
              for (std::size_t p = 0; p < plane; ++p) gx[p] += wv * du[p];
            }
          }
        }
      } else if (need_din) {
        for (std::size_t i = 0; i < n; ++i) ws.d_in[i] += ws.d_u[i];
      }
    }
    if (need_din) std::swap(ws.d_out, ws.d_in);
  }
}

}  // namespace detail

// Score in the open interval (0, 1).
inline double forward(const CnnModel& model, const ModelInput& input, const ForwardOptions& opt = {}) {
  detail::check_shape(model, input.shape);
  detail::Workspace ws;
  return detail::open_unit_score(detail::forward_impl(model, model.params, input.values, ws, opt));
}

inline double logit(const CnnModel& model, const ModelInput& input, const ForwardOptions& opt = {}) {
  detail::check_shape(model, input.shape);
  detail::Workspace ws;
  return detail::forward_impl(model, model.params, input.values, ws, opt);
}

inline double example_loss(const CnnModel& model, const ModelInput& input, double label) {
  return detail::bce_from_logit(logit(model, input), label);
}

// Analytic gradient of the example's binary cross-entropy.
inline std::vector<double> loss_gradient(const CnnModel& model, const ModelInput& input, double label) {
  detail::check_shape(model, input.shape);
  detail::Workspace ws;
  const double z = detail::forward_impl(model, model.params, input.values, ws, {});
  std::vector<double> grad(model.params.size(), 0.0);
  detail::backward_impl(model, model.params, input.values, ws, detail::sigmoid(z) - label, grad, {});
  return grad;
}

struct Prediction {
  int flag = 0;
  double score = 0.0;
};

// flag = 1 iff score >= cutoff.
inline Prediction predict(const CnnModel& model, const ModelInput& input, double cutoff = 0.5) {
  const double s = forward(model, input);
  return {s >= cutoff ? 1 : 0, s};
}

// Gradient check -------------------------------------------------------------------

struct GradientCheckOptions {
  std::size_t samples = 200;
  double step = 1e-5;
  double abs_tolerance = 1e-8;  // differences below this count as exact
  std::uint64_t seed = 0;
  bool five_point = false;  // fourth-order stencil; use a larger step, e.g. 1e-3
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

// Compares analytic gradients with central differences on a random sample
// of parameters.
inline GradientCheckResult gradient_check(const CnnModel& model, const ModelInput& input, double label,
                                          const GradientCheckOptions& opt = {}) {
  const auto grad = loss_gradient(model, input, label);
  CnnModel probe = model;
  Rng rng(opt.seed);
  std::vector<std::size_t> indices(model.params.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  rng.shuffle(indices);
  indices.resize(std::min(opt.samples, indices.size()));
  std::sort(indices.begin(), indices.end());

  GradientCheckResult r;
  for (auto i : indices) {
    const double original = probe.params[i];
    auto loss_at = [&](double delta) {
      probe.params[i] = original + delta;
      const double v = example_loss(probe, input, label);
      probe.params[i] = original;
      return v;
    };
    const double h = opt.step;
    const double numeric =
        opt.five_point
            ? (loss_at(-2.0 * h) - 8.0 * loss_at(-h) + 8.0 * loss_at(h) - loss_at(2.0 * h)) / (12.0 * h)
            : (loss_at(h) - loss_at(-h)) / (2.0 * h);
    const double diff = std::abs(numeric - grad[i]);
    r.max_abs_error = std::max(r.max_abs_error, diff);
    if (diff > opt.abs_tolerance) {
      const double denom = std::max(std::abs(numeric), std::abs(grad[i]));
      r.max_relative_error = std::max(r.max_relative_error, diff / denom);
    }
    ++r.checked;
  }
  return r;
}

// Training ------------------------------------------------------------------------

struct LabeledInput {
  const ModelInput* input;
  double label;
};

inline double mean_loss(const CnnModel& model, std::span<const ModelInput> data) {
  if (data.empty()) return 0.0;
  detail::Workspace ws;
  double total = 0.0;
  for (const auto& in : data) {
    detail::check_shape(model, in.shape);
    const double z = detail::forward_impl(model, model.params, in.values, ws, {});
    total += detail::bce_from_logit(z, in.label == WindowLabel::Attack ? 1.0 : 0.0);
  }
  return total / static_cast<double>(data.size());
}

struct TrainingSplit {
  std::size_t train_count = 0;
  std::size_t validation_count = 0;
};

// The last validation_fraction of the sequence (by order) is held out.
inline TrainingSplit split_for_validation(std::size_t n, double validation_fraction) {
  auto val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * validation_fraction));
  val = std::clamp<std::size_t>(val, 1, n > 0 ? n - 1 : 0);
  return {n - val, val};
}

// Minimizes binary cross-entropy with Adam and early stopping. Returns the
// parameters of the epoch with the lowest validation loss.
inline CnnModel train(CnnModel model, std::span<const ModelInput> data, const CnnConfig& cfg) {
  const auto problems = validate(cfg);
  if (!problems.empty()) throw Error("cnn config: " + problems.front());
  if (data.size() < 2) throw Error("train: need at least 2 examples");
  for (const auto& in : data) detail::check_shape(model, in.shape);

  const auto split = split_for_validation(data.size(), cfg.validation_fraction);
  const auto train_set = data.first(split.train_count);
  const auto val_set = data.subspan(split.train_count);
  std::size_t positives = 0;
  for (const auto& in : train_set) positives += in.label == WindowLabel::Attack ? 1 : 0;
  const std::size_t negatives = train_set.size() - positives;
  if (positives == 0 || negatives == 0) throw Error("train: training data contains a single class");
  if (positives < 2 || negatives < 2) throw Error("train: need at least 2 examples per class after the validation split");

  model.history.clear();
  model.best_epoch.reset();
  Rng rng(derive_seed(cfg.seed, 1));
  const std::size_t n_params = model.params.size();
  std::vector<double> grad(n_params), m1(n_params, 0.0), m2(n_params, 0.0);
  std::vector<double> best_params = model.params;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_improvement = 0;
  std::size_t step = 0;
  detail::Workspace ws;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& in = train_set[order[k]];
        const double y = in.label == WindowLabel::Attack ? 1.0 : 0.0;
        const double z = detail::forward_impl(model, model.params, in.values, ws, {});
        batch_loss += detail::bce_from_logit(z, y);
        detail::backward_impl(model, model.params, in.values, ws, detail::sigmoid(z) - y, grad, {});
      }
      if (!std::isfinite(batch_loss)) {
        throw Error("train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
      }
      loss_sum += batch_loss;
      const double scale = 1.0 / static_cast<double>(end - start);
      ++step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < n_params; ++i) {
        const double gi = grad[i] * scale;
        m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * gi;
        m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * gi * gi;
        model.params[i] -= cfg.learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + cfg.epsilon);
      }
    }
    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_loss = mean_loss(model, val_set);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      throw Error("train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
    }
    model.history.push_back(stats);
    info("epoch " + std::to_string(epoch) + " train_loss " + format_double(stats.train_loss) + " val_loss " +
         format_double(stats.val_loss));
    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best_params = model.params;
      model.best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement > cfg.early_stop_patience) {
      break;
    }
  }
  model.params = std::move(best_params);
  model.config = cfg;
  return model;
}

// Container ------------------------------------------------------------------------
//
//   magic "CIDSCNN\0" | u32 version | u32 json_len | json (config snapshot,
//   history) | u32 tensor_count | per tensor: u32 name_len, name, u32 ndims,
//   u32 dims... | u64 param_count | float64 params | 32-byte SHA-256 of all
//   preceding bytes. Little-endian throughout.

inline constexpr std::array<char, 8> kModelMagic{'C', 'I', 'D', 'S', 'C', 'N', 'N', '\0'};
inline constexpr std::uint32_t kModelVersion = 1;

inline std::string encode_model(const CnnModel& m, std::uint32_t version = kModelVersion) {
  std::string out(kModelMagic.begin(), kModelMagic.end());
  detail::put_le<std::uint32_t>(out, version);
  nlohmann::json meta{{"config", to_json(m.config)}};
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& e : m.history) hist.push_back({e.train_loss, e.val_loss});
  meta["history"] = hist;
  meta["best_epoch"] = m.best_epoch ? nlohmann::json(*m.best_epoch) : nlohmann::json(nullptr);
  const auto text = meta.dump();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.tensors.size()));
  for (const auto& t : m.tensors) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  detail::put_le<std::uint64_t>(out, m.params.size());
  for (double p : m.params) detail::put_le<double>(out, p);
  const auto digest = sha256(std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

inline CnnModel decode_model(std::string_view bytes) {
  if (bytes.size() < kModelMagic.size() + 4 || !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) {
    throw Error("model: bad magic");
  }
  std::size_t pos = kModelMagic.size();
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kModelVersion) {
    throw Error("model: unsupported container version " + std::to_string(version) + " (no migration available)");
  }
  if (bytes.size() < pos + 32) throw Error("model: checksum mismatch (truncated file)");
  const auto body = bytes.substr(0, bytes.size() - 32);
  const auto digest = sha256(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
  if (!std::equal(digest.begin(), digest.end(), reinterpret_cast<const std::uint8_t*>(bytes.data() + body.size()))) {
    throw Error("model: checksum mismatch (corrupted or truncated file)");
  }
  const auto json_len = detail::get_le<std::uint32_t>(body, pos);
  if (pos + json_len > body.size()) throw Error("model: bad metadata length");
  const auto meta = nlohmann::json::parse(body.substr(pos, json_len));
  pos += json_len;
  CnnModel m;
  m.config = cnn_config_from_json(meta.at("config"));
  m.tensors = detail::cnn_layout(m.config);
  const auto tensor_count = detail::get_le<std::uint32_t>(body, pos);
  if (tensor_count != m.tensors.size()) throw Error("model: shape table does not match config");
  for (const auto& expected : m.tensors) {
    const auto name_len = detail::get_le<std::uint32_t>(body, pos);
    if (pos + name_len > body.size()) throw Error("model: bad tensor name");
    const auto name = body.substr(pos, name_len);
    pos += name_len;
    const auto ndims = detail::get_le<std::uint32_t>(body, pos);
    std::vector<std::size_t> dims;
    for (std::uint32_t d = 0; d < ndims; ++d) dims.push_back(detail::get_le<std::uint32_t>(body, pos));
    if (name != expected.name || dims != expected.dims) {
      throw Error("model: shape mismatch for tensor '" + std::string(name) + "'");
    }
  }
  const auto count = detail::get_le<std::uint64_t>(body, pos);
  const auto& last = m.tensors.back();
  if (count != last.offset + last.size()) throw Error("model: parameter count mismatch");
  m.params.resize(count);
  for (auto& p : m.params) p = detail::get_le<double>(body, pos);
  if (pos != body.size()) throw Error("model: trailing bytes");
  for (const auto& e : meta.at("history")) m.history.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
  if (!meta.at("best_epoch").is_null()) m.best_epoch = meta.at("best_epoch").get<std::size_t>();
  return m;
}

inline void save_model(const std::string& path, const CnnModel& m) { write_text_file(path, encode_model(m)); }

inline CnnModel load_model(const std::string& path) { return decode_model(read_text_file(path)); }

}  // namespace canids
