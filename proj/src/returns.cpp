#include "eigenfolio/returns.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eigenfolio/error.hpp"
#include "eigenfolio/parallel.hpp"
#include "eigenfolio/rng.hpp"

namespace eigenfolio {

namespace {

struct RowMoments {
  double mean = 0.0;
  double stddev = 0.0;
  bool degenerate = false;
};

// Population moments. A row counts as constant when its spread is below
// 1e-12 of its magnitude, which absorbs the rounding left by the mean.
template <class Row>
RowMoments row_moments(const Row& row) {
  const double n = static_cast<double>(row.size());
  RowMoments out;
  out.mean = row.sum() / n;
  const double var = (row.array() - out.mean).square().sum() / n;
  out.stddev = std::sqrt(var);
  const double scale = row.cwiseAbs().maxCoeff();
  out.degenerate = !(out.stddev > 1e-12 * scale) || !std::isfinite(out.stddev);
  return out;
}

}  // namespace

std::string check_correlation_invariants(const CorrelationMatrix& corr) {
  const auto& a = corr.values;
  if (a.rows() != a.cols()) return "matrix is not square";
  if (corr.labels.size() != static_cast<std::size_t>(a.rows())) return "label count mismatch";
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (std::abs(a(i, i) - 1.0) > 1e-10) return "diagonal entry " + std::to_string(i) + " is not 1";
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != a(j, i)) return "matrix is not exactly symmetric";
      if (!(a(i, j) >= -1.0 && a(i, j) <= 1.0)) return "entry outside [-1, 1]";
    }
  }
  if (a.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() < -1e-9) return "matrix is not positive semidefinite";
  }
  return {};
}

void BootstrapSpec::validate() const {
  if (window < 2) throw Error(ErrorKind::argument, "bootstrap window must be at least 2");
  if (samples < 1) throw Error(ErrorKind::argument, "bootstrap needs at least one sample");
}

Eigen::MatrixXd log_returns(const Eigen::MatrixXd& prices) {
  if (prices.cols() < 2) throw Error(ErrorKind::insufficient_data, "need at least two prices per asset");
  if (!(prices.array() > 0.0).all() || !prices.allFinite()) {
    throw Error(ErrorKind::domain, "log returns need strictly positive prices");
  }
  const Eigen::MatrixXd logp = prices.array().log().matrix();
  const Eigen::Index n = prices.cols() - 1;
  return logp.rightCols(n) - logp.leftCols(n);
}

Eigen::MatrixXd log_returns(const PriceMatrix& prices) { return log_returns(prices.prices()); }

NormalizedReturns normalize(const Eigen::MatrixXd& returns, std::vector<std::string> labels,
                            std::vector<Timestamp> timestamps) {
  if (labels.size() != static_cast<std::size_t>(returns.rows())) {
    throw Error(ErrorKind::argument, "label count does not match return rows");
  }
  if (!timestamps.empty() && timestamps.size() != static_cast<std::size_t>(returns.cols())) {
    throw Error(ErrorKind::argument, "timestamp count does not match return columns");
  }
  if (returns.cols() < 2) throw Error(ErrorKind::insufficient_data, "need at least two returns per asset");

  NormalizedReturns out;
  out.values.resize(returns.rows(), returns.cols());
  out.mean.resize(returns.rows());
  out.stddev.resize(returns.rows());
  for (Eigen::Index m = 0; m < returns.rows(); ++m) {
    const auto mom = row_moments(returns.row(m));
    if (mom.degenerate) {
      throw Error(ErrorKind::degenerate_asset, "asset " + labels[static_cast<std::size_t>(m)] +
                                                   " has zero return variance");
    }
    out.mean(m) = mom.mean;
    out.stddev(m) = mom.stddev;
    out.values.row(m) = (returns.row(m).array() - mom.mean) / mom.stddev;
  }
  out.labels = std::move(labels);
  out.timestamps = std::move(timestamps);
  return out;
}

NormalizedReturns normalized_returns(const PriceMatrix& prices) {
  const auto& ts = prices.timestamps();
  std::vector<Timestamp> ends(ts.begin() + (ts.empty() ? 0 : 1), ts.end());
  return normalize(log_returns(prices), prices.symbols(), std::move(ends));
}

bool standardize_rows(Eigen::MatrixXd& window) {
  for (Eigen::Index m = 0; m < window.rows(); ++m) {
    const auto mom = row_moments(window.row(m));
    if (mom.degenerate) return false;
    window.row(m) = (window.row(m).array() - mom.mean) / mom.stddev;
  }
  return true;
}

CorrelationMatrix correlation(const Eigen::MatrixXd& rows, std::vector<std::string> labels) {
  if (labels.size() != static_cast<std::size_t>(rows.rows())) {
    throw Error(ErrorKind::argument, "label count does not match matrix rows");
  }
  if (rows.cols() < 2) throw Error(ErrorKind::insufficient_data, "correlation needs at least two columns");
  Eigen::MatrixXd z = rows;
  if (!standardize_rows(z)) {
    throw Error(ErrorKind::degenerate_window, "a row is constant; correlation undefined");
  }
  const double n = static_cast<double>(z.cols());
  const Eigen::Index m = z.rows();
  Eigen::MatrixXd lambda(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    lambda(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double c = std::clamp(z.row(i).dot(z.row(j)) / n, -1.0, 1.0);
      lambda(i, j) = c;
      lambda(j, i) = c;
    }
  }
  return {std::move(labels), std::move(lambda)};
}

BootstrapSample bootstrap_sample(const NormalizedReturns& returns, const BootstrapSpec& spec,
                                 std::size_t index) {
  spec.validate();
  const std::size_t n = returns.length();
  if (spec.window > n) {
    throw Error(ErrorKind::insufficient_data, "bootstrap window " + std::to_string(spec.window) +
                                                  " exceeds series length " + std::to_string(n));
  }
  const std::size_t starts = n - spec.window + 1;
  const std::size_t max_attempts = std::max<std::size_t>(1000, 20 * starts);
  CounterRng rng(spec.seed, index);
  BootstrapSample out;
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    const std::size_t start = static_cast<std::size_t>(rng.below(starts));
    Eigen::MatrixXd w = returns.values.middleCols(static_cast<Eigen::Index>(start),
                                                  static_cast<Eigen::Index>(spec.window));
    if (standardize_rows(w)) {
      out.start = start;
      out.window = std::move(w);
      return out;
    }
    ++out.rejected;
  }
  throw Error(ErrorKind::degenerate_window, "no non-degenerate window found after " +
                                                std::to_string(max_attempts) + " draws");
}

BootstrapEnsemble bootstrap_windows(const NormalizedReturns& returns, const BootstrapSpec& spec) {
  spec.validate();
  BootstrapEnsemble out;
  out.samples.resize(spec.samples);
  parallel_for(spec.samples, [&](std::size_t i) { out.samples[i] = bootstrap_sample(returns, spec, i); });
  for (const auto& s : out.samples) out.rejected += s.rejected;
  return out;
}

std::vector<CorrelationMatrix> correlation_ensemble(const NormalizedReturns& returns,
                                                    const BootstrapSpec& spec, std::size_t* rejected) {
  spec.validate();
  std::vector<CorrelationMatrix> out(spec.samples);
  std::vector<std::size_t> redraws(spec.samples, 0);
  parallel_for(spec.samples, [&](std::size_t i) {
    auto sample = bootstrap_sample(returns, spec, i);
    redraws[i] = sample.rejected;
    out[i] = correlation(sample.window, returns.labels);
  });
  if (rejected) {
    *rejected = 0;
    for (auto r : redraws) *rejected += r;
  }
  return out;
}

}  // namespace eigenfolio
