#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eigenfolio/market_ingest.hpp"

namespace eigenfolio {

/// Standardized log-returns L (M x N). Each row has population mean 0 and
/// population standard deviation 1; the raw per-asset moments are kept.
struct NormalizedReturns {
  std::vector<std::string> labels;
  std::vector<Timestamp> timestamps;  // end of each return interval; may be empty
  Eigen::MatrixXd values;
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  std::size_t assets() const noexcept { return static_cast<std::size_t>(values.rows()); }
  std::size_t length() const noexcept { return static_cast<std::size_t>(values.cols()); }
};

/// Symmetric M x M matrix with unit diagonal, entries in [-1, 1].
struct CorrelationMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

/// Exact symmetry, unit diagonal within 1e-10, off-diagonals in [-1, 1] and
/// smallest eigenvalue >= -1e-9. Returns an empty string when all hold,
/// otherwise a description of the first violation.
std::string check_correlation_invariants(const CorrelationMatrix& corr);

struct BootstrapSpec {
  std::size_t window = 100;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

/// r(m, n) = log p(m, n+1) - log p(m, n).
Eigen::MatrixXd log_returns(const Eigen::MatrixXd& prices);
Eigen::MatrixXd log_returns(const PriceMatrix& prices);

/// Population standardization of each row; a zero-variance row raises
/// degenerate_asset naming the ticker.
NormalizedReturns normalize(const Eigen::MatrixXd& returns, std::vector<std::string> labels,
                            std::vector<Timestamp> timestamps = {});

/// Convenience: log_returns + normalize, carrying symbols and interval-end timestamps.
NormalizedReturns normalized_returns(const PriceMatrix& prices);

/// Re-centres and re-scales each row of `window` in place (population
/// convention). Returns false, leaving the input unspecified, when some row
/// has zero variance.
bool standardize_rows(Eigen::MatrixXd& window);

/// Pearson correlation of the rows: Λ = (1/n) Z Zᵀ with Z the row-standardized
/// input. The result is exactly symmetric with an exactly unit diagonal.
CorrelationMatrix correlation(const Eigen::MatrixXd& rows, std::vector<std::string> labels);

struct BootstrapSample {
  std::size_t start = 0;
  std::size_t rejected = 0;     // degenerate windows redrawn for this sample
  Eigen::MatrixXd window;       // M x window, rows re-standardized
};

/// Sample `index` of the bootstrap ensemble. Its start column is drawn
/// uniformly from {0, ..., N - window} using the stream subseed(seed, index);
/// windows with a constant row are rejected and redrawn.
BootstrapSample bootstrap_sample(const NormalizedReturns& returns, const BootstrapSpec& spec,
                                 std::size_t index);

struct BootstrapEnsemble {
  std::vector<BootstrapSample> samples;
  std::size_t rejected = 0;
};

BootstrapEnsemble bootstrap_windows(const NormalizedReturns& returns, const BootstrapSpec& spec);

/// Correlation matrix of every bootstrap window (OpenMP over samples).
/// `rejected`, when given, receives the total number of redrawn windows.
std::vector<CorrelationMatrix> correlation_ensemble(const NormalizedReturns& returns,
                                                    const BootstrapSpec& spec,
                                                    std::size_t* rejected = nullptr);

}  // namespace eigenfolio
