#pragma once

// Dense and gated-recurrent layers over flat weight spans. Generic over the
// scalar so the same weights run in plain double rollouts and on the tape.

#include <cmath>
#include <cstddef>
#include <span>

#include "bmppi/core/scalar.hpp"

namespace bmppi::learn {

enum class Activation { kLinear, kTanh, kSigmoid };

template <class T>
T activate(const T& x, Activation a) {
  using std::tanh;
  switch (a) {
    case Activation::kTanh: return tanh(x);
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kLinear: break;
  }
  return x;
}

// Row-major W (out x in) followed by b (out).
struct DenseShape {
  int in = 0;
  int out = 0;
  std::size_t size() const { return static_cast<std::size_t>(out) * (in + 1); }
};

template <class T>
void dense_forward(const DenseShape& s, const T* w, const T* x, T* y, Activation act) {
  const T* bias = w + static_cast<std::size_t>(s.out) * s.in;
  for (int o = 0; o < s.out; ++o)
    y[o] = activate(dot(w + static_cast<std::size_t>(o) * s.in, x, static_cast<std::size_t>(s.in), bias[o]), act);
}

// Two-gate recurrent cell (update + reset):
//   z = sig(Wz [x, h] + bz), r = sig(Wr [x, h] + br)
//   n = tanh(Wn [x, r*h] + bn), h' = (1 - z) * n + z * h
struct GruShape {
  int in = 0;
  int hidden = 0;
  std::size_t gate_size() const { return static_cast<std::size_t>(hidden) * (in + hidden + 1); }
  std::size_t size() const { return 3 * gate_size(); }
};

inline constexpr int kMaxLayerWidth = 128;

template <class T>
void gru_forward(const GruShape& s, const T* w, const T* x, const T* h, T* h_out) {
  const int n_in = s.in + s.hidden;
  T xh[kMaxLayerWidth];
  for (int i = 0; i < s.in; ++i) xh[i] = x[i];
  for (int i = 0; i < s.hidden; ++i) xh[s.in + i] = h[i];
  const DenseShape gate{n_in, s.hidden};
  T z[kMaxLayerWidth], r[kMaxLayerWidth], n[kMaxLayerWidth];
  dense_forward(gate, w, xh, z, Activation::kSigmoid);
  dense_forward(gate, w + s.gate_size(), xh, r, Activation::kSigmoid);
  for (int i = 0; i < s.hidden; ++i) xh[s.in + i] = r[i] * h[i];
  dense_forward(gate, w + 2 * s.gate_size(), xh, n, Activation::kTanh);
  for (int i = 0; i < s.hidden; ++i) h_out[i] = n[i] + z[i] * (h[i] - n[i]);
}

}  // namespace bmppi::learn
