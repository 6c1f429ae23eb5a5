#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

namespace fracbayes {

/// Autocorrelation of a (possibly vector-valued) series, columns = time:
/// rho_k = E[(M_t - mu)^T (M_{t+k} - mu)] / sigma0^2 with sample moments.
/// rho_0 = 1 exactly.
Eigen::VectorXd acf(const Eigen::MatrixXd& series, int max_lag);

struct IactResult {
  double iact = 1.0;  // averaged integrated autocorrelation time
  double ess = 0.0;   // chain length / iact
};

/// Per-dimension integrated autocorrelation times (lag sums truncated at the
/// first nonpositive paired sum), averaged over dimensions.
IactResult iact_ess(const Eigen::MatrixXd& chain, int max_lag);

struct GaussianKl {
  double value = 0.0;
  bool regularized = false;  // a fitted covariance needed regularization
};

/// Closed-form KL divergence between moment-matched Gaussian fits of two
/// sample sets (columns = samples). Asymmetric in its arguments.
GaussianKl gaussian_kl(const Eigen::MatrixXd& samples_a,
                       const Eigen::MatrixXd& samples_b);

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  Eigen::VectorXd skewness;
  Eigen::VectorXd kurtosis;  // excess, Gaussian -> 0
};

Moments moments(const Eigen::MatrixXd& samples);

/// Bucket boundaries 0, 1e-6, 1e-5, ..., 1e-1, 1 (7 buckets).
inline constexpr std::array<double, 8> kWeightBucketEdges = {
    0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};

std::array<int, 7> weight_histogram(const Eigen::VectorXd& weights);

struct IntervalBand {
  Eigen::VectorXd credible_lo, credible_hi;
  Eigen::VectorXd predictive_lo, predictive_hi;
};

/// Per-location empirical bands: credible from the realizations themselves,
/// predictive after adding independent N(0, sigma^2) noise draws
/// (`noise_draws` per realization) to smooth the predictive quantiles.
IntervalBand intervals(const Eigen::MatrixXd& realizations, double sigma,
                       double level, std::uint64_t seed, int noise_draws = 16);

/// Pearson correlation of two sample vectors.
double sample_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace fracbayes
