#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eigenfolio/returns.hpp"

namespace eigenfolio {

/// Eigenpairs of a correlation matrix. Eigenvalues ascend; column j of
/// `vectors` belongs to values(j) and has its first nonzero component positive.
struct EigenSystem {
  std::vector<std::string> labels;
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
};

EigenSystem eig_sym(const Eigen::MatrixXd& matrix, std::vector<std::string> labels);
EigenSystem eig_sym(const CorrelationMatrix& corr);

/// Eigendecomposition of every member (OpenMP over members).
std::vector<EigenSystem> eig_ensemble(std::span<const CorrelationMatrix> ensemble);

/// Element-wise mean of the ensemble; still a valid correlation matrix.
CorrelationMatrix mean_correlation(std::span<const CorrelationMatrix> ensemble);

/// Minimum-volatility normalized portfolio of the given rank: the eigenvector
/// of the rank-th smallest eigenvalue, so WᵀΛW = λ_rank and WᵀW = 1.
Eigen::VectorXd eigenportfolio(const EigenSystem& es, std::size_t rank);

/// φ(j) = Σ_{k<=j} λ_k / Σ_k λ_k with eigenvalues ranked largest first.
std::vector<double> cumulative_volatility(const EigenSystem& es);

/// Pointwise mean of φ over the ensemble, accumulated in member order.
std::vector<double> expected_cumulative_volatility(std::span<const EigenSystem> ensemble);

// --- density of states -----------------------------------------------------

struct DOSCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double eta = 0.0;
  std::size_t sample_count = 0;
};

/// `points` evenly spaced values from start to stop inclusive.
std::vector<double> linear_grid(double start, double stop, std::size_t points);

/// 0.05 · (largest observed eigenvalue / 2).
double default_eta(std::span<const EigenSystem> ensemble);

/// Ensemble-averaged −(1/πM) Im Tr G(λ + iη), evaluated through the
/// eigenvalues as a sum of Lorentzians η / ((λ − λ_m)² + η²) / (πM).
/// OpenMP over grid points; each point accumulates members in index order.
DOSCurve dos_green(std::span<const EigenSystem> ensemble, std::span<const double> grid, double eta);

// --- level spacings --------------------------------------------------------

struct UnfoldOptions {
  std::size_t draws = 10000;
  std::size_t sets = 100;
  std::uint64_t seed = 0;
  std::size_t bins = 60;
  double max_spacing = 6.0;
};

struct SpacingHistogram {
  std::vector<double> bin_edges;  // bins + 1 edges
  std::vector<double> density;    // normalized to unit area over all spacings
  double mean_spacing = 0.0;
  std::size_t spacing_count = 0;
  std::size_t draws = 0;
  std::size_t sets = 0;
  std::uint64_t seed = 0;
};

/// Draws `sets` synthetic level sequences of `draws` levels from the linearly
/// interpolated inverse CDF of `dos`, unfolds every level through the
/// staircase η(λ) = Σθ(λ − λ_n) averaged over all sets on the DOS grid,
/// and histograms the nearest-neighbour differences pooled over sets.
SpacingHistogram unfold_and_spacings(const DOSCurve& dos, const UnfoldOptions& options);

// --- localization ----------------------------------------------------------

enum class PrScale {
  normalized,  // Δ/M in [1/M, 1]
  raw,         // Δ = 1/Σv⁴ in [1, M]
};

/// Participation ratio of every eigenvector, in eigenvalue order.
std::vector<double> ipr(const EigenSystem& es, PrScale scale = PrScale::normalized);

/// Gaussian radial-basis interpolant φ(λ) = Σ A_m exp(−(λ − λ_m)²/2σ²)
/// through (λ_k, Δ_k). Anchors closer than 1e-9 are merged (averaged Δ) and
/// the kernel matrix gets a 1e-10 ridge before the Cholesky solve.
class RbfInterpolant {
 public:
  RbfInterpolant(std::vector<double> centers, std::vector<double> coefficients, double sigma);

  double operator()(double lambda) const;

  const std::vector<double>& centers() const noexcept { return centers_; }
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  double sigma() const noexcept { return sigma_; }

 private:
  std::vector<double> centers_;
  std::vector<double> coefficients_;
  double sigma_;
};

RbfInterpolant rbf_fit(std::span<const double> eigenvalues, std::span<const double> values, double sigma);

/// Median nearest-neighbour spacing of the merged anchors; 0.1 when fewer
/// than two distinct anchors remain.
double auto_sigma(std::span<const double> eigenvalues);

struct SigmaPolicy {
  std::optional<double> fixed;  // empty: auto_sigma per member
};

struct PRCurve {
  std::vector<double> grid;
  std::vector<double> pr;
  double sigma = 0.0;  // fixed width, or the mean auto width over used members
  PrScale scale = PrScale::normalized;
  std::size_t members_used = 0;
  std::size_t members_dropped = 0;
};

/// Per member: participation ratios, RBF interpolant, evaluation on the grid
/// clamped to the scale's range; then the mean over members in index order.
/// Members whose kernel system is ill-conditioned are dropped and counted.
PRCurve expected_pr(std::span<const EigenSystem> ensemble, std::span<const double> grid,
                    const SigmaPolicy& sigma, PrScale scale = PrScale::normalized);

}  // namespace eigenfolio
