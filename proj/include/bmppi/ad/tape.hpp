#pragma once

// Reverse-mode automatic differentiation over scalar graphs.
//
// A Tape records one node per non-constant operation. Each node stores the
// local partial derivatives to its parents, so the backward sweep is a single
// pass in reverse creation order. Var values live in the Var itself; the tape
// only keeps what the backward sweep needs.
//
// Operations on Vars push to the calling thread's active tape (see
// ActiveTape). Vars with no tape index behave as constants and never create
// nodes, which keeps frozen parameters and data free.

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace bmppi::ad {

inline constexpr std::uint32_t kConstant = std::numeric_limits<std::uint32_t>::max();

class Tape {
 public:
  Tape() { reserve(1 << 16, 1 << 18); }

  void reserve(std::size_t nodes, std::size_t edges) {
    begin_.reserve(nodes + 1);
    parents_.reserve(edges);
    partials_.reserve(edges);
  }

  void clear() {
    begin_.clear();
    parents_.clear();
    partials_.clear();
  }

  std::size_t size() const { return begin_.size(); }
  std::size_t edges() const { return parents_.size(); }

  std::uint32_t new_leaf() { return push_node(); }

  // Opens a node; the caller then appends edges with add_edge.
  std::uint32_t push_node() {
    if (begin_.size() >= kConstant - 1) throw std::length_error("tape overflow");
    begin_.push_back(static_cast<std::uint32_t>(parents_.size()));
    return static_cast<std::uint32_t>(begin_.size() - 1);
  }

  void add_edge(std::uint32_t parent, double partial) {
    if (parent == kConstant) return;
    parents_.push_back(parent);
    partials_.push_back(partial);
  }

  // Adjoints of every node w.r.t. `output`.
  std::vector<double> gradient(std::uint32_t output) const {
    std::vector<double> adj(begin_.size(), 0.0);
    if (output == kConstant) return adj;
    adj[output] = 1.0;
    const auto n_edges = static_cast<std::uint32_t>(parents_.size());
    for (std::size_t i = begin_.size(); i-- > 0;) {
      const double g = adj[i];
      if (g == 0.0) continue;
      const std::uint32_t end = (i + 1 < begin_.size()) ? begin_[i + 1] : n_edges;
      for (std::uint32_t e = begin_[i]; e < end; ++e) adj[parents_[e]] += partials_[e] * g;
    }
    return adj;
  }

 private:
  std::vector<std::uint32_t> begin_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
};

// Thread-local pointer to the tape that Var arithmetic records into.
class ActiveTape {
 public:
  static Tape* get() { return slot(); }

 private:
  friend class TapeScope;
  static Tape*& slot() {
    thread_local Tape* tape = nullptr;
    return tape;
  }
};

// Makes `tape` the active tape for this thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : previous_(ActiveTape::slot()) { ActiveTape::slot() = &tape; }
  ~TapeScope() { ActiveTape::slot() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

class Var {
 public:
  Var() = default;
  Var(double v) : val_(v) {}  // NOLINT: implicit constants are the point
  Var(double v, std::uint32_t idx) : val_(v), idx_(idx) {}

  static Var leaf(double v) {
    Tape* t = ActiveTape::get();
    assert(t != nullptr);
    return Var(v, t->new_leaf());
  }

  double value() const { return val_; }
  std::uint32_t index() const { return idx_; }
  bool is_constant() const { return idx_ == kConstant; }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  friend Var operator+(const Var& a, const Var& b);
  friend Var operator-(const Var& a, const Var& b);
  friend Var operator*(const Var& a, const Var& b);
  friend Var operator/(const Var& a, const Var& b);
  friend Var operator-(const Var& a);

 private:
  double val_ = 0.0;
  std::uint32_t idx_ = kConstant;
};

namespace detail {

inline Var unary(const Var& a, double value, double d) {
  if (a.is_constant()) return Var(value);
  Tape& t = *ActiveTape::get();
  const auto n = t.push_node();
  t.add_edge(a.index(), d);
  return Var(value, n);
}

inline Var binary(const Var& a, const Var& b, double value, double da, double db) {
  if (a.is_constant() && b.is_constant()) return Var(value);
  Tape& t = *ActiveTape::get();
  const auto n = t.push_node();
  t.add_edge(a.index(), da);
  t.add_edge(b.index(), db);
  return Var(value, n);
}

}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(a, b, a.val_ + b.val_, 1.0, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(a, b, a.val_ - b.val_, 1.0, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(a, b, a.val_ * b.val_, b.val_, a.val_);
}
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.val_;
  return detail::binary(a, b, a.val_ * inv, inv, -a.val_ * inv * inv);
}
inline Var operator-(const Var& a) { return detail::unary(a, -a.val_, -1.0); }

inline bool operator<(const Var& a, const Var& b) { return a.value() < b.value(); }
inline bool operator>(const Var& a, const Var& b) { return a.value() > b.value(); }
inline bool operator<=(const Var& a, const Var& b) { return a.value() <= b.value(); }
inline bool operator>=(const Var& a, const Var& b) { return a.value() >= b.value(); }

inline Var sin(const Var& a) { return detail::unary(a, std::sin(a.value()), std::cos(a.value())); }
inline Var cos(const Var& a) { return detail::unary(a, std::cos(a.value()), -std::sin(a.value())); }
inline Var tan(const Var& a) {
  const double t = std::tan(a.value());
  return detail::unary(a, t, 1.0 + t * t);
}
inline Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  return detail::unary(a, t, 1.0 - t * t);
}
inline Var atan(const Var& a) {
  const double x = a.value();
  return detail::unary(a, std::atan(x), 1.0 / (1.0 + x * x));
}
inline Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return detail::unary(a, e, e);
}
inline Var log(const Var& a) { return detail::unary(a, std::log(a.value()), 1.0 / a.value()); }
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return detail::unary(a, s, 0.5 / s);
}
inline Var abs(const Var& a) {
  const double x = a.value();
  return detail::unary(a, std::abs(x), x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
}
inline Var sigmoid(const Var& a) {
  const double s = 1.0 / (1.0 + std::exp(-a.value()));
  return detail::unary(a, s, s * (1.0 - s));
}

inline double value(const Var& a) { return a.value(); }

// Euclidean norm whose gradient at the origin is taken as zero.
inline Var norm2(std::span<const Var> xs) {
  double s = 0.0;
  for (const auto& x : xs) s += x.value() * x.value();
  const double n = std::sqrt(s);
  bool all_const = true;
  for (const auto& x : xs) all_const = all_const && x.is_constant();
  if (all_const) return Var(n);
  Tape& t = *ActiveTape::get();
  const auto node = t.push_node();
  if (n > 0.0)
    for (const auto& x : xs) t.add_edge(x.index(), x.value() / n);
  return Var(n, node);
}

// sum_i a[i]*b[i] + bias as a single node.
inline Var dot(const Var* a, const Var* b, std::size_t n, const Var& bias = Var(0.0)) {
  double v = bias.value();
  bool all_const = bias.is_constant();
  for (std::size_t i = 0; i < n; ++i) {
    v += a[i].value() * b[i].value();
    all_const = all_const && a[i].is_constant() && b[i].is_constant();
  }
  if (all_const) return Var(v);
  Tape& t = *ActiveTape::get();
  const auto node = t.push_node();
  t.add_edge(bias.index(), 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    t.add_edge(a[i].index(), b[i].value());
    t.add_edge(b[i].index(), a[i].value());
  }
  return Var(v, node);
}

// Gradient of `output` w.r.t. each leaf in `leaves`.
inline std::vector<double> gradient(const Tape& tape, const Var& output, std::span<const Var> leaves) {
  const auto adj = tape.gradient(output.index());
  std::vector<double> g(leaves.size(), 0.0);
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (!leaves[i].is_constant()) g[i] = adj[leaves[i].index()];
  return g;
}

}  // namespace bmppi::ad
