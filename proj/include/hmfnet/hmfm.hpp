#pragma once

// Harmonic modulated feature mapping. Sigmoid-gated feature importance,
// learned frequency modulation against fixed base frequencies, and a
// cos/sin harmonic encoding that doubles the feature width.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "hmfnet/layers.hpp"
#include "hmfnet/params.hpp"
#include "hmfnet/tensor.hpp"

namespace hmfnet {

struct HmfmConfig {
  int input_dim = 0;        // A; the output dim D equals A
  double base_sigma = 1.0;  // sigma' in the base-frequency formula

  int output_dim() const { return input_dim; }
};

// b_j = 2*pi*sigma'*j/D for j = 0..D-1; j starts at zero, so the first
// channel is unmodulated.
inline Tensor base_frequencies(const HmfmConfig &config) {
  int d = config.output_dim();
  Tensor b({static_cast<std::size_t>(d)});
  for (int j = 0; j < d; ++j)
    b.data[j] = 2.0 * std::numbers::pi * config.base_sigma *
                static_cast<double>(j) / static_cast<double>(d);
  return b;
}

inline void init_hmfm(ParamStore &store, const std::string &prefix,
                      const HmfmConfig &config, Xoshiro256 &rng) {
  std::size_t a = static_cast<std::size_t>(config.input_dim);
  init_linear(store, prefix + ".importance", a, a, rng);
  init_layer_norm(store, prefix + ".importance_norm", a);
  init_linear(store, prefix + ".modulation", a,
              static_cast<std::size_t>(config.output_dim()), rng);
}

// w_imp = sigmoid(layer_norm(linear(x))); x' = x (.) w_imp.
inline std::pair<Var, Var> importance_weights(Binder &p,
                                              const std::string &prefix,
                                              Var x) {
  Var w_imp = ops::sigmoid(
      layer_norm(p, prefix + ".importance_norm",
                 linear(p, prefix + ".importance", x)));
  Var weighted = ops::mul(x, w_imp);
  return {w_imp, weighted};
}

// f = sigmoid(linear(x')); m = b (.) f with b broadcast over rows.
inline std::pair<Var, Var> frequency_modulation(Binder &p,
                                                const std::string &prefix,
                                                Var x_weighted,
                                                const Tensor &base_freq) {
  Var f = ops::sigmoid(linear(p, prefix + ".modulation", x_weighted));
  Var m = ops::scale_cols(f, base_freq);
  return {f, m};
}

// x_encoded = m (.) x'; x_final = concat(cos(x_encoded), sin(x_encoded)).
inline Var harmonic_encode(Var x_weighted, Var m) {
  if (x_weighted.val().shape != m.val().shape)
    throw ShapeMismatch("harmonic_encode: modulation width must equal the "
                        "weighted-feature width (D = A)");
  Var x_encoded = ops::mul(m, x_weighted);
  return ops::concat_cols({ops::cos_op(x_encoded), ops::sin_op(x_encoded)});
}

struct HmfmTrace {
  Var w_imp;
  Var x_weighted;
  Var f;
  Var m;
  Var x_final;
};

inline HmfmTrace hmfm_forward_trace(Binder &p, const std::string &prefix,
                                    Var x, const HmfmConfig &config) {
  if (x.val().cols() != static_cast<std::size_t>(config.input_dim))
    throw ShapeMismatch("hmfm_forward: input width mismatch");
  Tensor base = base_frequencies(config);
  auto [w_imp, weighted] = importance_weights(p, prefix, x);
  auto [f, m] = frequency_modulation(p, prefix, weighted, base);
  HmfmTrace trace;
  trace.w_imp = w_imp;
  trace.x_weighted = weighted;
  trace.f = f;
  trace.m = m;
  trace.x_final = harmonic_encode(weighted, m);
  return trace;
}

// N x A in, N x 2A out; every entry lies in [-1, 1].
inline Var hmfm_forward(Binder &p, const std::string &prefix, Var x,
                        const HmfmConfig &config) {
  return hmfm_forward_trace(p, prefix, x, config).x_final;
}

} // namespace hmfnet
