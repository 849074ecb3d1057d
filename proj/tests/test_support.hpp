#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oodselect/oodselect.hpp"

namespace oodselect::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 gen{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("oodselect_" + tag + "_" + std::to_string(gen()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::string> ids(char prefix, std::size_t n, std::size_t start = 1) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(std::string(1, prefix) + std::to_string(start + k));
  return out;
}

inline CorrectnessMatrix matrix(const std::vector<std::vector<int>>& rows) {
  return CorrectnessMatrix::from_rows(rows, ids('m', rows.size()), ids('e', rows.front().size()));
}

/// Uniformly random 0/1 matrix with given models and examples.
inline CorrectnessMatrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double p = 0.5) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(p);
  std::vector<std::vector<int>> rows(n, std::vector<int>(d));
  for (auto& r : rows)
    for (auto& c : r) c = coin(rng) ? 1 : 0;
  return matrix(rows);
}

inline ModelTable table_with_splits(const std::vector<double>& acc, const std::vector<Split>& splits) {
  ModelTable t;
  for (std::size_t i = 0; i < acc.size(); ++i) t.records.push_back({"m" + std::to_string(i + 1), acc[i], "", splits[i]});
  return t;
}

/// Plain two-pass Pearson, written independently of the library.
inline double reference_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Inverse normal CDF by bisection on erfc; slow but shares no code with the library.
inline double reference_probit(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace oodselect::testing

namespace oodselect::testing {

struct GradientCheck {
  double max_rel_error = 0.0;  ///< ||analytic - fd||_inf / ||fd||_inf
  bool near_clip = false;      ///< some weighted accuracy within 2h of a clip edge
};

/// Central finite differences of `problem.evaluate` at theta.
inline GradientCheck check_gradient(const SelectionProblem& problem, const std::vector<double>& theta,
                                    double target, double lambda, const CorrectnessMatrix& z,
                                    std::span<const std::size_t> rows, double h = 1e-5) {
  GradientCheck out;
  std::vector<double> s(theta.size());
  for (std::size_t j = 0; j < s.size(); ++j) s[j] = 1.0 / (1.0 + std::exp(-theta[j]));
  const double eps = problem.clip_eps();
  for (double m : selected_ood_accuracy(z, s, rows))
    out.near_clip |= std::abs(m - eps) < 2 * h || std::abs(m - (1 - eps)) < 2 * h;

  std::vector<double> g(theta.size());
  problem.evaluate(theta, target, lambda, g);
  double err = 0.0, scale = 0.0;
  auto t = theta;
  for (std::size_t j = 0; j < t.size(); ++j) {
    t[j] = theta[j] + h;
    const double up = problem.evaluate(t, target, lambda);
    t[j] = theta[j] - h;
    const double down = problem.evaluate(t, target, lambda);
    t[j] = theta[j];
    const double fd = (up - down) / (2 * h);
    err = std::max(err, std::abs(fd - g[j]));
    scale = std::max(scale, std::abs(fd));
  }
  out.max_rel_error = err / scale;
  return out;
}

}  // namespace oodselect::testing
