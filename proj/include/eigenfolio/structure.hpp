#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eigenfolio/returns.hpp"
#include "eigenfolio/spectral.hpp"

namespace eigenfolio {

// --- eigenvector-sign partitioning -----------------------------------------

struct PartitionNode {
  std::vector<std::size_t> members;   // asset indices
  int split_level = -1;               // eigenvector rank that splits this node, -1 for leaves
  std::vector<std::size_t> children;  // node indices; one child when the sign pattern does not split
};

struct PartitionTree {
  std::vector<std::string> labels;
  std::vector<PartitionNode> nodes;  // nodes[0] is the root holding every asset

  std::size_t depth() const;
};

/// Recursively splits the asset set by the sign of successive eigenvectors,
/// largest eigenvalue first (level 0). Zero components go to the positive
/// side. A branch stops at a singleton or when the eigenvectors run out.
PartitionTree sign_partition(const EigenSystem& es);

/// Number of disjoint sets after applying the splits of levels 0..p.
std::size_t cluster_count(const PartitionTree& tree, std::size_t p);

/// Uniform pairwise bifurcation baseline: min(2^(p+1), M).
std::size_t trivial_count(std::size_t assets, std::size_t p);

struct P0Fit {
  double p0 = 0.0;  // +infinity when the log-difference has zero slope
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<std::size_t> used_levels;
  std::vector<std::size_t> excluded_levels;  // baseline - measured <= 0
};

/// Ordinary least squares of log(baseline − measured) against the level p;
/// p0 = 1/slope. Levels with non-positive difference are excluded.
P0Fit fit_p0(std::span<const double> measured, std::span<const double> baseline);

// --- distances and graphs --------------------------------------------------

struct DistanceMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.rows()); }
};

/// d_nm = √(2(1 − Λ_nm)).
DistanceMatrix euclid_dist(const CorrelationMatrix& corr);

/// d_nm = √(Σ_k λ_k² (v_{n,k} − v_{m,k})²).
DistanceMatrix spectral_dist(const EigenSystem& es);

struct TreeEdge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  double weight = 0.0;
};

struct SpanningTree {
  std::vector<std::string> labels;
  std::vector<TreeEdge> edges;  // in the order Prim adds them
  double total_weight = 0.0;
};

/// Prim's algorithm from asset 0; ties go to the lowest index.
SpanningTree mst_prim(const DistanceMatrix& d);

/// d_km = α_i d_im + α_j d_jm + β d_ij + γ|d_im − d_jm|.
struct LinkageCoefficients {
  double alpha_i = 0.5;
  double alpha_j = 0.5;
  double beta = 0.0;
  double gamma = -0.5;

  static constexpr LinkageCoefficients single_linkage() { return {0.5, 0.5, 0.0, -0.5}; }

  double update(double d_im, double d_jm, double d_ij) const;
};

struct Merge {
  std::size_t a = 0;  // cluster ids: leaves 0..M-1, merged clusters M..2M-2
  std::size_t b = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> labels;
  std::vector<Merge> merges;
  std::vector<std::size_t> leaf_order;  // depth-first plotting order
};

/// Agglomerative clustering with Lance–Williams updates; the closest active
/// pair merges first, ties broken by lowest cluster ids.
Dendrogram agglomerate(const DistanceMatrix& d, const LinkageCoefficients& coefficients);
Dendrogram single_linkage(const DistanceMatrix& d);

/// Height at which each pair of leaves first shares a cluster.
DistanceMatrix cophenetic(const Dendrogram& dendro);

struct UltrametricReport {
  bool ultrametric = true;
  std::vector<std::array<std::size_t, 3>> violations;  // (x, y, z) with d(x,z) > max(d(x,y), d(y,z))
};

/// Strong triangle inequality over every ordered triple, within `tolerance`.
UltrametricReport ultrametric_check(const DistanceMatrix& d, double tolerance = 1e-12);

/// Leaves sorted by the height of their first merge, then merge index, then leaf id.
std::vector<std::size_t> appearance_order(const Dendrogram& dendro);

/// Pearson r between appearance position and an external per-label value.
double leaf_order_correlation(const Dendrogram& dendro, const std::map<std::string, double>& external);

double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace eigenfolio
