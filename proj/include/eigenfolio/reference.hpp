#pragma once

#include <span>
#include <vector>

#include "eigenfolio/returns.hpp"
#include "eigenfolio/rmt_bench.hpp"
#include "eigenfolio/spectral.hpp"

// Single-threaded versions of the ensemble kernels. Same operations in the
// same order as the parallel versions.
namespace eigenfolio::reference {

std::vector<CorrelationMatrix> correlation_ensemble(const NormalizedReturns& returns, const BootstrapSpec& spec,
                                                    std::size_t* rejected = nullptr);

std::vector<CorrelationMatrix> sample_benchmark_ensemble(const EnsembleSpec& spec);

std::vector<EigenSystem> eig_ensemble(std::span<const CorrelationMatrix> ensemble);

/// Members in the outer loop, grid in the inner loop.
DOSCurve dos_green(std::span<const EigenSystem> ensemble, std::span<const double> grid, double eta);

PRCurve expected_pr(std::span<const EigenSystem> ensemble, std::span<const double> grid, const SigmaPolicy& sigma,
                    PrScale scale = PrScale::normalized);

}  // namespace eigenfolio::reference
