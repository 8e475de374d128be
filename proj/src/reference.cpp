#include "eigenfolio/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "eigenfolio/error.hpp"

namespace eigenfolio::reference {

std::vector<CorrelationMatrix> correlation_ensemble(const NormalizedReturns& returns, const BootstrapSpec& spec,
                                                    std::size_t* rejected) {
  spec.validate();
  std::vector<CorrelationMatrix> out;
  out.reserve(spec.samples);
  std::size_t redraws = 0;
  for (std::size_t i = 0; i < spec.samples; ++i) {
    auto sample = bootstrap_sample(returns, spec, i);
    redraws += sample.rejected;
    out.push_back(correlation(sample.window, returns.labels));
  }
  if (rejected) *rejected = redraws;
  return out;
}

std::vector<CorrelationMatrix> sample_benchmark_ensemble(const EnsembleSpec& spec) {
  spec.validate();
  std::vector<CorrelationMatrix> out;
  out.reserve(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) out.push_back(benchmark_sample(spec, i));
  return out;
}

std::vector<EigenSystem> eig_ensemble(std::span<const CorrelationMatrix> ensemble) {
  std::vector<EigenSystem> out;
  out.reserve(ensemble.size());
  for (const auto& c : ensemble) out.push_back(eig_sym(c));
  return out;
}

DOSCurve dos_green(std::span<const EigenSystem> ensemble, std::span<const double> grid, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorKind::domain, "broadening eta must be positive");
  if (ensemble.empty()) throw Error(ErrorKind::argument, "empty ensemble");
  DOSCurve out;
  out.grid.assign(grid.begin(), grid.end());
  out.density.assign(grid.size(), 0.0);
  out.eta = eta;
  out.sample_count = ensemble.size();
  const double eta2 = eta * eta;
  for (const auto& es : ensemble) {
    const double norm = std::numbers::pi * static_cast<double>(es.values.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double s = 0.0;
      for (Eigen::Index m = 0; m < es.values.size(); ++m) {
        const double d = grid[g] - es.values(m);
        s += eta / (d * d + eta2);
      }
      out.density[g] += s / norm;
    }
  }
  for (auto& d : out.density) d /= static_cast<double>(ensemble.size());
  return out;
}

PRCurve expected_pr(std::span<const EigenSystem> ensemble, std::span<const double> grid, const SigmaPolicy& sigma,
                    PrScale scale) {
  if (ensemble.empty()) throw Error(ErrorKind::argument, "empty ensemble");
  PRCurve result;
  result.grid.assign(grid.begin(), grid.end());
  result.pr.assign(grid.size(), 0.0);
  result.scale = scale;
  double sigma_sum = 0.0;
  for (const auto& es : ensemble) {
    const std::span<const double> lambdas(es.values.data(), es.size());
    const double width = sigma.fixed ? *sigma.fixed : auto_sigma(lambdas);
    const double m = static_cast<double>(es.size());
    const double lo = scale == PrScale::raw ? 1.0 : 1.0 / m;
    const double hi = scale == PrScale::raw ? m : 1.0;
    try {
      const auto phi = rbf_fit(lambdas, ipr(es, scale), width);
      for (std::size_t g = 0; g < grid.size(); ++g) result.pr[g] += std::clamp(phi(grid[g]), lo, hi);
      sigma_sum += width;
      ++result.members_used;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ill_conditioned) throw;
      ++result.members_dropped;
    }
  }
  if (result.members_used == 0) throw Error(ErrorKind::ill_conditioned, "every ensemble member failed the kernel fit");
  const double used = static_cast<double>(result.members_used);
  for (auto& p : result.pr) p /= used;
  result.sigma = sigma.fixed ? *sigma.fixed : sigma_sum / used;
  return result;
}

}  // namespace eigenfolio::reference
