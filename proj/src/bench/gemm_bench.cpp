#include "mbbn/bench/gemm_bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ostream>

#include <Eigen/Core>

#include "mbbn/core/rng.hpp"
#include "mbbn/gemm/encoded_gemm.hpp"

namespace mbbn::bench {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxIterations = std::size_t{1} << 26;

std::size_t parse_count(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || v == 0) {
    throw ConfigError("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto pos = s.find(sep);
    parts.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) return parts;
    s.remove_prefix(pos + 1);
  }
}

// Smallest observable step of the clock.
double clock_resolution_ns() {
  double best = 1e9;
  for (int i = 0; i < 64; ++i) {
    const auto a = Clock::now();
    auto b = Clock::now();
    while (b == a) b = Clock::now();
    best = std::min(best, std::chrono::duration<double, std::nano>(b - a).count());
  }
  return best;
}

struct Timing {
  double median_ns = 0.0;
  bool unresolved = false;
};

template <typename Fn>
double run_ns(Fn& fn, std::size_t iters) {
  const auto start = Clock::now();
  for (std::size_t i = 0; i < iters; ++i) fn();
  return std::chrono::duration<double, std::nano>(Clock::now() - start).count();
}

template <typename Fn>
Timing time_kernel(Fn fn, const BenchConfig& cfg, double resolution) {
  std::size_t iters = 1;
  double t = run_ns(fn, iters);
  while (t < cfg.min_sample_ns && iters < kMaxIterations) {
    iters *= 2;
    t = run_ns(fn, iters);
  }
  for (std::size_t i = 0; i < cfg.warmups; ++i) run_ns(fn, iters);
  std::vector<double> samples;
  for (std::size_t i = 0; i < cfg.repeats; ++i) samples.push_back(run_ns(fn, iters));
  std::sort(samples.begin(), samples.end());
  const double median = samples[samples.size() / 2];
  return {median / static_cast<double>(iters), median < 100.0 * resolution};
}

std::string label(const BenchRow& r) {
  return r.kernel.rfind("encoded", 0) == 0 ? "M" + std::to_string(r.act_bits) + "K" + std::to_string(r.weight_bits)
                                          : r.kernel;
}

}  // namespace

std::vector<GemmSize> parse_sizes(std::string_view text) {
  std::vector<GemmSize> sizes;
  for (auto item : split_on(text, ',')) {
    const auto dims = split_on(item, 'x');
    if (dims.size() != 3) throw ConfigError("size '" + std::string(item) + "' must be PxNxQ");
    sizes.push_back({parse_count(dims[0], "P"), parse_count(dims[1], "N"), parse_count(dims[2], "Q")});
  }
  return sizes;
}

std::vector<std::pair<int, int>> parse_precisions(std::string_view text) {
  std::vector<std::pair<int, int>> out;
  for (auto item : split_on(text, ',')) {
    const auto parts = split_on(item, 'x');
    if (parts.size() != 2) throw ConfigError("precision '" + std::string(item) + "' must be MxK");
    const int m = static_cast<int>(parse_count(parts[0], "M"));
    const int k = static_cast<int>(parse_count(parts[1], "K"));
    check_bits(m);
    check_bits(k);
    out.emplace_back(m, k);
  }
  return out;
}

void scalar_float_gemm(const float* x, const float* w, float* y, std::size_t p, std::size_t n, std::size_t q) {
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) {
      float acc = 0.0f;
      for (std::size_t k = 0; k < n; ++k) acc += x[i * n + k] * w[j * n + k];
      y[i * q + j] = acc;
    }
}

std::vector<BenchRow> bench_gemm(const BenchConfig& cfg) {
  std::vector<BenchRow> rows;
  if (cfg.repeats == 0) return rows;
  if (cfg.threads == 0) throw ConfigError("thread count must be at least 1");
  const double resolution = clock_resolution_ns();
  Rng rng(cfg.seed);
  volatile double sink = 0.0;

  auto push = [&](std::string kernel, int m, int k, const GemmSize& s, const Timing& t, double baseline) {
    rows.push_back({std::move(kernel), m, k, s.p, s.n, s.q, t.median_ns, baseline > 0.0 ? baseline / t.median_ns : 1.0});
    if (t.unresolved) rows.push_back({"warning_timer", m, k, s.p, s.n, s.q, t.median_ns, 0.0});
  };

  for (const auto& size : cfg.sizes) {
    const Tensor x = Tensor::uniform({size.p, size.n}, {}, rng);
    const Tensor w = Tensor::uniform({size.q, size.n}, {}, rng);
    std::vector<float> xf(x.values().begin(), x.values().end());
    std::vector<float> wf(w.values().begin(), w.values().end());
    std::vector<float> yf(size.p * size.q);

    const Timing scalar = time_kernel(
        [&] {
          scalar_float_gemm(xf.data(), wf.data(), yf.data(), size.p, size.n, size.q);
          sink = sink + yf[0];
        },
        cfg, resolution);
    push("scalar_float", 0, 0, size, scalar, 0.0);

    if (cfg.eigen_baseline) {
      const Eigen::MatrixXf xe = x.matrix().cast<float>();
      const Eigen::MatrixXf we = w.matrix().cast<float>().transpose();
      Eigen::MatrixXf ye(size.p, size.q);
      const Timing eigen = time_kernel(
          [&] {
            ye.noalias() = xe * we;
            sink = sink + ye(0, 0);
          },
          cfg, resolution);
      push("eigen_float", 0, 0, size, eigen, scalar.median_ns);
    }

    for (auto [m, k] : cfg.precisions) {
      const auto qx = quantize_odd(x, m);
      const auto qw = quantize_odd(w, k);
      const auto ex = EncodedMatrix::from_codes(qx);
      const auto ew = EncodedMatrix::from_codes(qw);
      if (encoded_gemm(ex, ew, cfg.threads) != integer_gemm(ex.codes(), ew.codes())) {
        throw CheckError("encoded_gemm disagrees with the integer oracle at M=" + std::to_string(m) + " K=" + std::to_string(k));
      }
      const Timing enc = time_kernel(
          [&] {
            const IntTensor acc = encoded_gemm(ex, ew, cfg.threads);
            sink = sink + static_cast<double>(acc[0]);
          },
          cfg, resolution);
      push(cfg.threads > 1 ? "encoded_t" + std::to_string(cfg.threads) : "encoded", m, k, size, enc, scalar.median_ns);
    }
  }
  return rows;
}

void write_csv(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << kBenchCsvHeader << "\n";
  char buf[64];
  for (const auto& r : rows) {
    os << r.kernel << "," << r.act_bits << "," << r.weight_bits << "," << r.p << "," << r.n << "," << r.q << ",";
    std::snprintf(buf, sizeof buf, "%.1f,%.3f", r.median_ns, r.speedup_vs_scalar);
    os << buf << "\n";
  }
}

void write_gnuplot(std::ostream& os, const std::vector<BenchRow>& rows) {
  os << "# speedup over scalar_float; one block per PxNxQ, plot with 'using 2:xtic(1) with boxes'\n";
  const BenchRow* prev = nullptr;
  char buf[64];
  for (const auto& r : rows) {
    if (r.kernel == "scalar_float" || r.kernel == "warning_timer") continue;
    if (!prev || prev->p != r.p || prev->n != r.n || prev->q != r.q) {
      if (prev) os << "\n\n";
      os << "# " << r.p << "x" << r.n << "x" << r.q << "\n";
    }
    std::snprintf(buf, sizeof buf, " %.3f\n", r.speedup_vs_scalar);
    os << label(r) << buf;
    prev = &r;
  }
}

}  // namespace mbbn::bench
