#pragma once

// Power-law (1/f^beta) noise sequences drawn in the frequency domain and
// brought back with an inverse real FFT.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace bmppi::mppi {

// Owns one inverse real transform of a fixed length and its buffers.
class InverseRealFft {
 public:
  explicit InverseRealFft(int n) : n_(n) {
    if (n < 2) throw std::invalid_argument("transform length must be at least 2");
    spec_.reset(fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1)));
    out_.reset(fftw_alloc_real(static_cast<std::size_t>(n)));
    if (!spec_ || !out_) throw std::bad_alloc();
    plan_ = fftw_plan_dft_c2r_1d(n, spec_.get(), out_.get(), FFTW_ESTIMATE);
    if (!plan_) throw std::runtime_error("fftw plan creation failed");
  }
  ~InverseRealFft() {
    if (plan_) fftw_destroy_plan(plan_);
  }
  InverseRealFft(const InverseRealFft&) = delete;
  InverseRealFft& operator=(const InverseRealFft&) = delete;

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }
  fftw_complex* spectrum() { return spec_.get(); }
  std::span<const double> execute() {
    fftw_execute(plan_);
    return {out_.get(), static_cast<std::size_t>(n_)};
  }

 private:
  struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
  };
  int n_;
  std::unique_ptr<fftw_complex[], FftwFree> spec_;
  std::unique_ptr<double[], FftwFree> out_;
  fftw_plan plan_ = nullptr;
};

// One zero-mean, unit-variance sequence of length out.size() whose power
// spectrum falls as f^-exponent. The DC bin is zeroed; exponent 0 gives white
// noise.
inline void colored_sequence(InverseRealFft& fft, double exponent, std::mt19937_64& rng, std::span<double> out) {
  const int n = fft.size();
  if (static_cast<int>(out.size()) != n) throw std::invalid_argument("output length does not match transform");
  std::normal_distribution<double> g;
  auto* s = fft.spectrum();
  s[0][0] = s[0][1] = 0.0;
  for (int k = 1; k < fft.bins(); ++k) {
    const double amp = std::pow(static_cast<double>(k) / n, -exponent / 2.0);
    s[k][0] = amp * g(rng);
    s[k][1] = amp * g(rng);
  }
  // The Nyquist bin of an even-length real signal is real.
  if (n % 2 == 0) s[n / 2][1] = 0.0;
  const auto x = fft.execute();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (int i = 0; i < n; ++i) out[i] = sd > 0.0 ? (x[i] - mean) / sd : 0.0;
}

// Perturbations laid out [sample][step][channel].
template <std::size_t C>
struct NoiseBatch {
  int samples = 0;
  int horizon = 0;
  std::vector<double> data;

  double& at(int k, int t, std::size_t c) { return data[(static_cast<std::size_t>(k) * horizon + t) * C + c]; }
  double at(int k, int t, std::size_t c) const { return data[(static_cast<std::size_t>(k) * horizon + t) * C + c]; }
};

template <std::size_t C>
NoiseBatch<C> sample_colored(int samples, int horizon, const std::array<double, C>& stddev,
                             const std::array<double, C>& exponent, std::uint64_t seed) {
  if (samples < 1 || horizon < 1) throw std::invalid_argument("noise batch needs samples >= 1 and horizon >= 1");
  NoiseBatch<C> b;
  b.samples = samples;
  b.horizon = horizon;
  b.data.assign(static_cast<std::size_t>(samples) * horizon * C, 0.0);
  std::mt19937_64 rng(seed);
  std::vector<double> seq(static_cast<std::size_t>(horizon));
  std::unique_ptr<InverseRealFft> fft;
  if (horizon >= 2) fft = std::make_unique<InverseRealFft>(horizon);
  std::normal_distribution<double> g;
  for (int k = 0; k < samples; ++k) {
    for (std::size_t c = 0; c < C; ++c) {
      if (fft) colored_sequence(*fft, exponent[c], rng, seq);
      else seq[0] = g(rng);
      for (int t = 0; t < horizon; ++t) b.at(k, t, c) = stddev[c] * seq[static_cast<std::size_t>(t)];
    }
  }
  return b;
}

}  // namespace bmppi::mppi
