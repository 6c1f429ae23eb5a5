#include "fracbayes/diagnostics.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fracbayes/exec.hpp"

namespace fracbayes {

Eigen::VectorXd acf(const Eigen::MatrixXd& series, int max_lag) {
  const int T = static_cast<int>(series.cols());
  if (max_lag < 0 || T <= max_lag)
    throw std::invalid_argument("acf: series shorter than requested lag");

  const Eigen::VectorXd mu = series.rowwise().mean();
  const Eigen::MatrixXd centered = series.colwise() - mu;
  const double var0 = centered.squaredNorm() / T;
  if (!(var0 > 0.0)) throw std::domain_error("acf: zero-variance series");

  Eigen::VectorXd rho(max_lag + 1);
  for (int k = 0; k <= max_lag; ++k) {
    double acc = 0.0;
    for (int t = 0; t + k < T; ++t)
      acc += centered.col(t).dot(centered.col(t + k));
    rho[k] = acc / T / var0;
  }
  return rho;
}

IactResult iact_ess(const Eigen::MatrixXd& chain, int max_lag) {
  const int dims = static_cast<int>(chain.rows());
  const int T = static_cast<int>(chain.cols());
  if (T <= max_lag)
    throw std::invalid_argument("iact_ess: chain shorter than requested lag");

  double iact_sum = 0.0;
  for (int d = 0; d < dims; ++d) {
    const Eigen::VectorXd rho = acf(chain.row(d), max_lag);
    // initial-positive-sequence truncation: stop at the first nonpositive
    // paired sum rho_{2t-1} + rho_{2t}
    double s = 0.0;
    for (int k = 1; k + 1 <= max_lag; k += 2) {
      const double pair = rho[k] + rho[k + 1];
      if (pair <= 0.0) break;
      s += pair;
    }
    iact_sum += 1.0 + 2.0 * s;
  }

  IactResult res;
  res.iact = iact_sum / dims;
  res.ess = T / res.iact;
  return res;
}

namespace {

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  bool regularized = false;
};

GaussianFit fit_gaussian(const Eigen::MatrixXd& samples) {
  const int dim = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  GaussianFit fit;
  fit.mean = samples.rowwise().mean();
  const Eigen::MatrixXd centered = samples.colwise() - fit.mean;
  fit.cov = centered * centered.transpose() / (n - 1);

  Eigen::LLT<Eigen::MatrixXd> llt(fit.cov);
  if (llt.info() != Eigen::Success) {
    fit.cov += 1e-12 * std::max(fit.cov.trace(), 1.0) *
               Eigen::MatrixXd::Identity(dim, dim);
    fit.regularized = true;
  }
  return fit;
}

}  // namespace

GaussianKl gaussian_kl(const Eigen::MatrixXd& samples_a,
                       const Eigen::MatrixXd& samples_b) {
  const int dim = static_cast<int>(samples_a.rows());
  if (samples_b.rows() != dim)
    throw std::invalid_argument("gaussian_kl: dimension mismatch");
  if (samples_a.cols() < dim + 2 || samples_b.cols() < dim + 2)
    throw std::invalid_argument("gaussian_kl: needs at least dim + 2 samples per set");

  const GaussianFit fa = fit_gaussian(samples_a);
  const GaussianFit fb = fit_gaussian(samples_b);

  Eigen::LLT<Eigen::MatrixXd> llt_b(fb.cov);
  Eigen::LLT<Eigen::MatrixXd> llt_a(fa.cov);
  if (llt_b.info() != Eigen::Success || llt_a.info() != Eigen::Success)
    throw std::runtime_error("gaussian_kl: fitted covariance not factorizable");

  const Eigen::MatrixXd La = llt_a.matrixL();
  const Eigen::MatrixXd Lb = llt_b.matrixL();
  auto log_det = [](const Eigen::MatrixXd& L) {
    return 2.0 * L.diagonal().array().log().sum();
  };

  const Eigen::VectorXd dmu = fb.mean - fa.mean;
  const double trace_term = llt_b.solve(fa.cov).trace();
  const double quad_term = dmu.dot(llt_b.solve(dmu));

  GaussianKl kl;
  kl.value = 0.5 * (trace_term + quad_term - dim + log_det(Lb) - log_det(La));
  kl.regularized = fa.regularized || fb.regularized;
  return kl;
}

Moments moments(const Eigen::MatrixXd& samples) {
  const int dim = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  if (n < 4) throw std::invalid_argument("moments: needs at least 4 samples");

  Moments mom;
  mom.mean = samples.rowwise().mean();
  mom.stddev.resize(dim);
  mom.skewness.resize(dim);
  mom.kurtosis.resize(dim);
  for (int d = 0; d < dim; ++d) {
    const Eigen::ArrayXd c = samples.row(d).transpose().array() - mom.mean[d];
    const double m2 = c.square().mean();
    if (!(m2 > 0.0)) throw std::domain_error("moments: degenerate variance");
    const double m3 = c.cube().mean();
    const double m4 = c.square().square().mean();
    mom.stddev[d] = std::sqrt(m2 * n / (n - 1.0));
    mom.skewness[d] = m3 / std::pow(m2, 1.5);
    mom.kurtosis[d] = m4 / (m2 * m2) - 3.0;
  }
  return mom;
}

std::array<int, 7> weight_histogram(const Eigen::VectorXd& weights) {
  std::array<int, 7> counts{};
  for (int i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    int bucket = 6;
    for (int b = 0; b < 7; ++b)
      if (w < kWeightBucketEdges[b + 1]) { bucket = b; break; }
    ++counts[bucket];
  }
  return counts;
}

namespace {

double percentile(std::vector<double>& values, double p) {
  std::sort(values.begin(), values.end());
  const double idx = p * (values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(idx));
  const size_t hi = static_cast<size_t>(std::ceil(idx));
  const double frac = idx - lo;
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace

IntervalBand intervals(const Eigen::MatrixXd& realizations, double sigma,
                       double level, std::uint64_t seed, int noise_draws) {
  const int locations = static_cast<int>(realizations.rows());
  const int n = static_cast<int>(realizations.cols());
  if (n < 100)
    throw std::invalid_argument("intervals: needs at least 100 realizations");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("intervals: level must lie in (0,1)");
  if (sigma < 0.0) throw std::invalid_argument("intervals: negative noise level");

  const double lo_p = 0.5 * (1.0 - level);
  const double hi_p = 1.0 - lo_p;

  IntervalBand band;
  band.credible_lo.resize(locations);
  band.credible_hi.resize(locations);
  band.predictive_lo.resize(locations);
  band.predictive_hi.resize(locations);

  for (int loc = 0; loc < locations; ++loc) {
    std::vector<double> values(realizations.row(loc).begin(),
                               realizations.row(loc).end());
    band.credible_lo[loc] = percentile(values, lo_p);
    band.credible_hi[loc] = percentile(values, hi_p);

    if (sigma == 0.0) {
      band.predictive_lo[loc] = band.credible_lo[loc];
      band.predictive_hi[loc] = band.credible_hi[loc];
      continue;
    }
    std::mt19937_64 rng(substream_seed(seed, loc));
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> noisy;
    noisy.reserve(static_cast<size_t>(n) * noise_draws);
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < noise_draws; ++r)
        noisy.push_back(realizations(loc, i) + noise(rng));
    band.predictive_lo[loc] = percentile(noisy, lo_p);
    band.predictive_hi[loc] = percentile(noisy, hi_p);
  }
  return band;
}

double sample_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("sample_correlation: size mismatch");
  const Eigen::ArrayXd ca = a.array() - a.mean();
  const Eigen::ArrayXd cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.square().sum() * cb.square().sum());
  if (!(denom > 0.0)) throw std::domain_error("sample_correlation: degenerate variance");
  return (ca * cb).sum() / denom;
}

}  // namespace fracbayes
