#include "eigenfolio/structure.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "eigenfolio/error.hpp"

namespace eigenfolio {

// --- eigenvector-sign partitioning -----------------------------------------

std::size_t PartitionTree::depth() const {
  std::function<std::size_t(std::size_t)> walk = [&](std::size_t n) -> std::size_t {
    std::size_t d = 0;
    for (auto c : nodes[n].children) d = std::max(d, 1 + walk(c));
    return d;
  };
  return nodes.empty() ? 0 : walk(0);
}

PartitionTree sign_partition(const EigenSystem& es) {
  const std::size_t m = es.size();
  if (m == 0) throw Error(ErrorKind::argument, "empty eigensystem");
  PartitionTree tree;
  tree.labels = es.labels;

  std::function<std::size_t(std::vector<std::size_t>, std::size_t)> build =
      [&](std::vector<std::size_t> members, std::size_t level) -> std::size_t {
    const std::size_t id = tree.nodes.size();
    tree.nodes.push_back(PartitionNode{members, -1, {}});
    if (members.size() <= 1 || level >= m) return id;

    const auto column = es.vectors.col(static_cast<Eigen::Index>(m - 1 - level));
    std::vector<std::size_t> pos, neg;
    for (auto a : members) {
      const double v = column(static_cast<Eigen::Index>(a));
      (v >= -1e-12 ? pos : neg).push_back(a);
    }
    std::vector<std::size_t> kids;
    if (pos.empty() || neg.empty()) {
      kids.push_back(build(std::move(members), level + 1));
    } else {
      kids.push_back(build(std::move(pos), level + 1));
      kids.push_back(build(std::move(neg), level + 1));
    }
    tree.nodes[id].split_level = static_cast<int>(level);
    tree.nodes[id].children = std::move(kids);
    return id;
  };

  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t{0});
  build(std::move(all), 0);
  return tree;
}

std::size_t cluster_count(const PartitionTree& tree, std::size_t p) {
  if (tree.nodes.empty()) return 0;
  std::function<std::size_t(std::size_t)> count = [&](std::size_t n) -> std::size_t {
    const auto& node = tree.nodes[n];
    if (node.children.empty() || static_cast<std::size_t>(node.split_level) > p) return 1;
    std::size_t total = 0;
    for (auto c : node.children) total += count(c);
    return total;
  };
  return count(0);
}

std::size_t trivial_count(std::size_t assets, std::size_t p) {
  if (p + 1 >= 63) return assets;
  return std::min<std::size_t>(std::size_t{1} << (p + 1), assets);
}

P0Fit fit_p0(std::span<const double> measured, std::span<const double> baseline) {
  if (measured.size() != baseline.size()) {
    throw Error(ErrorKind::argument, "measured and baseline series differ in length");
  }
  P0Fit fit;
  std::vector<double> xs, ys;
  for (std::size_t p = 0; p < measured.size(); ++p) {
    const double diff = baseline[p] - measured[p];
    if (diff > 0.0 && std::isfinite(diff)) {
      fit.used_levels.push_back(p);
      xs.push_back(static_cast<double>(p));
      ys.push_back(std::log(diff));
    } else {
      fit.excluded_levels.push_back(p);
    }
  }
  if (xs.size() < 2) {
    std::ostringstream msg;
    msg << "baseline - measured must be positive on at least two levels; non-positive at levels";
    for (auto p : fit.excluded_levels) msg << ' ' << p;
    throw Error(ErrorKind::fit_domain, msg.str());
  }
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.p0 = std::abs(fit.slope) < 1e-15 ? std::numeric_limits<double>::infinity() : 1.0 / fit.slope;
  return fit;
}

// --- distances -------------------------------------------------------------

DistanceMatrix euclid_dist(const CorrelationMatrix& corr) {
  const Eigen::Index m = corr.values.rows();
  DistanceMatrix d{corr.labels, Eigen::MatrixXd::Zero(m, m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double v = std::sqrt(std::max(0.0, 2.0 * (1.0 - corr.values(i, j))));
      d.values(i, j) = v;
      d.values(j, i) = v;
    }
  }
  return d;
}

DistanceMatrix spectral_dist(const EigenSystem& es) {
  const auto m = static_cast<Eigen::Index>(es.size());
  const Eigen::VectorXd weights = es.values.array().square();
  DistanceMatrix d{es.labels, Eigen::MatrixXd::Zero(m, m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double diff = es.vectors(i, k) - es.vectors(j, k);
        s += weights(k) * diff * diff;
      }
      const double v = std::sqrt(s);
      d.values(i, j) = v;
      d.values(j, i) = v;
    }
  }
  return d;
}

// --- minimum spanning tree -------------------------------------------------

SpanningTree mst_prim(const DistanceMatrix& d) {
  const std::size_t m = d.size();
  if (m < 2) throw Error(ErrorKind::argument, "spanning tree needs at least two assets");
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto at = [&](std::size_t i, std::size_t j) {
    return d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };

  std::vector<bool> in_tree(m, false);
  std::vector<double> best(m, inf);
  std::vector<std::size_t> parent(m, 0);
  in_tree[0] = true;
  for (std::size_t j = 1; j < m; ++j) best[j] = std::isfinite(at(0, j)) ? at(0, j) : inf;

  SpanningTree tree;
  tree.labels = d.labels;
  for (std::size_t step = 1; step < m; ++step) {
    std::size_t next = m;
    for (std::size_t j = 0; j < m; ++j) {
      if (!in_tree[j] && (next == m || best[j] < best[next])) next = j;
    }
    if (!std::isfinite(best[next])) {
      throw Error(ErrorKind::no_spanning_tree, "distance graph is disconnected at " + d.labels[next]);
    }
    in_tree[next] = true;
    tree.edges.push_back({std::min(parent[next], next), std::max(parent[next], next), best[next]});
    tree.total_weight += best[next];
    for (std::size_t j = 0; j < m; ++j) {
      if (in_tree[j]) continue;
      const double w = at(next, j);
      if (std::isfinite(w) && w < best[j]) {
        best[j] = w;
        parent[j] = next;
      }
    }
  }
  return tree;
}

// --- hierarchical clustering -----------------------------------------------

double LinkageCoefficients::update(double d_im, double d_jm, double d_ij) const {
  // Lance–Williams regrouped around the smaller distance.
  if (d_im <= d_jm) return (alpha_i - gamma) * d_im + (alpha_j + gamma) * d_jm + beta * d_ij;
  return (alpha_i + gamma) * d_im + (alpha_j - gamma) * d_jm + beta * d_ij;
}

Dendrogram agglomerate(const DistanceMatrix& d, const LinkageCoefficients& coefficients) {
  const std::size_t m = d.size();
  if (m < 2) throw Error(ErrorKind::argument, "clustering needs at least two assets");
  const std::size_t total = 2 * m - 1;
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(total));
  dist.topLeftCorner(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) = d.values;
  auto D = [&](std::size_t i, std::size_t j) -> double& {
    return dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  };

  std::vector<std::size_t> active(m);
  std::iota(active.begin(), active.end(), std::size_t{0});
  std::vector<std::size_t> sizes(total, 1);
  std::vector<std::array<std::size_t, 2>> children(total, {total, total});

  Dendrogram out;
  out.labels = d.labels;
  for (std::size_t step = 0; step + 1 < m; ++step) {
    // `active` stays sorted by id, so the first strict minimum is the lowest pair.
    std::size_t bi = 0, bj = 1;
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        if (D(active[x], active[y]) < D(active[bi], active[bj])) {
          bi = x;
          bj = y;
        }
      }
    }
    const std::size_t a = active[bi], b = active[bj];
    const std::size_t k = m + step;
    const double height = D(a, b);
    for (auto c : active) {
      if (c == a || c == b) continue;
      const double v = coefficients.update(D(a, c), D(b, c), height);
      D(k, c) = v;
      D(c, k) = v;
    }
    sizes[k] = sizes[a] + sizes[b];
    children[k] = {a, b};
    out.merges.push_back({a, b, height, sizes[k]});
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
    active.push_back(k);
  }

  std::vector<std::size_t> stack{total - 1};
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    if (id < m) {
      out.leaf_order.push_back(id);
    } else {
      stack.push_back(children[id][1]);
      stack.push_back(children[id][0]);
    }
  }
  return out;
}

Dendrogram single_linkage(const DistanceMatrix& d) {
  return agglomerate(d, LinkageCoefficients::single_linkage());
}

namespace {

std::vector<std::vector<std::size_t>> cluster_members(const Dendrogram& dendro) {
  const std::size_t m = dendro.labels.size();
  std::vector<std::vector<std::size_t>> members(m + dendro.merges.size());
  for (std::size_t i = 0; i < m; ++i) members[i] = {i};
  for (std::size_t k = 0; k < dendro.merges.size(); ++k) {
    const auto& mg = dendro.merges[k];
    auto& dst = members[m + k];
    dst = members[mg.a];
    dst.insert(dst.end(), members[mg.b].begin(), members[mg.b].end());
  }
  return members;
}

}  // namespace

DistanceMatrix cophenetic(const Dendrogram& dendro) {
  const std::size_t m = dendro.labels.size();
  const auto members = cluster_members(dendro);
  DistanceMatrix out{dendro.labels, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m))};
  for (const auto& mg : dendro.merges) {
    for (auto x : members[mg.a]) {
      for (auto y : members[mg.b]) {
        out.values(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = mg.height;
        out.values(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = mg.height;
      }
    }
  }
  return out;
}

UltrametricReport ultrametric_check(const DistanceMatrix& d, double tolerance) {
  const auto m = d.values.rows();
  UltrametricReport report;
  for (Eigen::Index x = 0; x < m; ++x) {
    for (Eigen::Index y = 0; y < m; ++y) {
      if (y == x) continue;
      for (Eigen::Index z = 0; z < m; ++z) {
        if (z == x || z == y) continue;
        if (d.values(x, z) > std::max(d.values(x, y), d.values(y, z)) + tolerance) {
          report.ultrametric = false;
          report.violations.push_back({static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                                       static_cast<std::size_t>(z)});
        }
      }
    }
  }
  return report;
}

std::vector<std::size_t> appearance_order(const Dendrogram& dendro) {
  const std::size_t m = dendro.labels.size();
  std::vector<std::size_t> first_merge(m, dendro.merges.size());
  const auto members = cluster_members(dendro);
  for (std::size_t k = dendro.merges.size(); k-- > 0;) {
    for (auto leaf : members[m + k]) first_merge[leaf] = k;
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto height = [&](std::size_t leaf) {
    return first_merge[leaf] < dendro.merges.size() ? dendro.merges[first_merge[leaf]].height
                                                    : std::numeric_limits<double>::infinity();
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (height(a) != height(b)) return height(a) < height(b);
    return first_merge[a] < first_merge[b];
  });
  return order;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::argument, "Pearson correlation needs two equal-length series of length >= 2");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorKind::degenerate_variance, "Pearson correlation undefined for a constant series");
  }
  return sxy / std::sqrt(sxx * syy);
}

double leaf_order_correlation(const Dendrogram& dendro, const std::map<std::string, double>& external) {
  const auto order = appearance_order(dendro);
  std::vector<double> position, value;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& label = dendro.labels[order[r]];
    auto it = external.find(label);
    if (it == external.end()) throw Error(ErrorKind::lookup, "no external value for " + label);
    position.push_back(static_cast<double>(r));
    value.push_back(it->second);
  }
  return pearson(position, value);
}

}  // namespace eigenfolio
