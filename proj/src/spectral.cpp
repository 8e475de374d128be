#include "eigenfolio/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "eigenfolio/error.hpp"
#include "eigenfolio/parallel.hpp"
#include "eigenfolio/rng.hpp"

namespace eigenfolio {

namespace {

constexpr double kMergeTolerance = 1e-9;
constexpr double kRidge = 1e-10;
constexpr double kInterpolationTolerance = 1e-6;
constexpr double kZeroComponent = 1e-12;

void canonicalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    for (Eigen::Index k = 0; k < vectors.rows(); ++k) {
      const double v = vectors(k, j);
      if (std::abs(v) > kZeroComponent) {
        if (v < 0.0) vectors.col(j) = -vectors.col(j);
        break;
      }
    }
  }
}

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw Error(ErrorKind::argument, "empty grid");
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (!(grid[k] > grid[k - 1])) throw Error(ErrorKind::argument, "grid must be strictly ascending");
  }
}

struct Anchors {
  std::vector<double> centers;
  std::vector<double> values;
};

Anchors merge_anchors(std::span<const double> lambdas, std::span<const double> values) {
  std::vector<std::size_t> order(lambdas.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lambdas[a] < lambdas[b]; });
  Anchors out;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && lambdas[order[j]] - lambdas[order[j - 1]] < kMergeTolerance) ++j;
    double lsum = 0.0, vsum = 0.0;
    for (std::size_t k = i; k < j; ++k) {
      lsum += lambdas[order[k]];
      vsum += values[order[k]];
    }
    const double count = static_cast<double>(j - i);
    out.centers.push_back(lsum / count);
    out.values.push_back(vsum / count);
    i = j;
  }
  return out;
}

double gaussian_kernel(double a, double b, double sigma) {
  const double d = a - b;
  return std::exp(-(d * d) / (2.0 * sigma * sigma));
}

}  // namespace

// --- eigensystems ----------------------------------------------------------

EigenSystem eig_sym(const Eigen::MatrixXd& matrix, std::vector<std::string> labels) {
  if (matrix.rows() != matrix.cols() || matrix.rows() == 0) {
    throw Error(ErrorKind::contract, "eigendecomposition needs a non-empty square matrix");
  }
  if (labels.size() != static_cast<std::size_t>(matrix.rows())) {
    throw Error(ErrorKind::argument, "label count does not match matrix size");
  }
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::contract, "matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::contract, "eigensolver did not converge");
  EigenSystem es;
  es.labels = std::move(labels);
  es.values = solver.eigenvalues();
  es.vectors = solver.eigenvectors();
  canonicalize_signs(es.vectors);
  return es;
}

EigenSystem eig_sym(const CorrelationMatrix& corr) { return eig_sym(corr.values, corr.labels); }

std::vector<EigenSystem> eig_ensemble(std::span<const CorrelationMatrix> ensemble) {
  std::vector<EigenSystem> out(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t i) { out[i] = eig_sym(ensemble[i]); });
  return out;
}

CorrelationMatrix mean_correlation(std::span<const CorrelationMatrix> ensemble) {
  if (ensemble.empty()) throw Error(ErrorKind::argument, "empty ensemble");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(ensemble[0].values.rows(), ensemble[0].values.cols());
  for (const auto& c : ensemble) {
    if (c.values.rows() != sum.rows()) throw Error(ErrorKind::argument, "ensemble members differ in size");
    sum += c.values;
  }
  sum /= static_cast<double>(ensemble.size());
  // Restore exact symmetry and the unit diagonal lost to rounding.
  Eigen::MatrixXd sym = sum;
  for (Eigen::Index i = 0; i < sym.rows(); ++i) {
    sym(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < sym.cols(); ++j) {
      const double v = std::clamp(sum(i, j), -1.0, 1.0);
      sym(i, j) = v;
      sym(j, i) = v;
    }
  }
  return {ensemble[0].labels, std::move(sym)};
}

Eigen::VectorXd eigenportfolio(const EigenSystem& es, std::size_t rank) {
  if (rank >= es.size()) {
    throw Error(ErrorKind::argument, "eigenportfolio rank " + std::to_string(rank) + " out of range");
  }
  return es.vectors.col(static_cast<Eigen::Index>(rank));
}

std::vector<double> cumulative_volatility(const EigenSystem& es) {
  const std::size_t m = es.size();
  std::vector<double> partial(m);
  double running = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    running += es.values(static_cast<Eigen::Index>(m - 1 - j));
    partial[j] = running;
  }
  const double total = running;
  if (!(total > 0.0)) throw Error(ErrorKind::domain, "eigenvalue sum must be positive");
  for (auto& p : partial) p /= total;
  return partial;
}

std::vector<double> expected_cumulative_volatility(std::span<const EigenSystem> ensemble) {
  if (ensemble.empty()) throw Error(ErrorKind::argument, "empty ensemble");
  std::vector<double> sum(ensemble[0].size(), 0.0);
  for (const auto& es : ensemble) {
    const auto phi = cumulative_volatility(es);
    if (phi.size() != sum.size()) throw Error(ErrorKind::argument, "ensemble members differ in size");
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += phi[j];
  }
  for (auto& s : sum) s /= static_cast<double>(ensemble.size());
  return sum;
}

// --- density of states -----------------------------------------------------

std::vector<double> linear_grid(double start, double stop, std::size_t points) {
  if (points < 2) throw Error(ErrorKind::argument, "grid needs at least two points");
  if (!(stop > start)) throw Error(ErrorKind::argument, "grid stop must exceed start");
  std::vector<double> g(points);
  const double step = (stop - start) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) g[k] = start + step * static_cast<double>(k);
  g.back() = stop;
  return g;
}

double default_eta(std::span<const EigenSystem> ensemble) {
  double top = 0.0;
  for (const auto& es : ensemble) {
    if (es.size() > 0) top = std::max(top, es.values.maxCoeff());
  }
  if (!(top > 0.0)) throw Error(ErrorKind::domain, "cannot derive broadening from a non-positive spectrum");
  return 0.05 * (top / 2.0);
}

DOSCurve dos_green(std::span<const EigenSystem> ensemble, std::span<const double> grid, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorKind::domain, "broadening eta must be positive, got " + std::to_string(eta));
  }
  if (ensemble.empty()) throw Error(ErrorKind::argument, "empty ensemble");
  check_grid(grid);

  DOSCurve out;
  out.grid.assign(grid.begin(), grid.end());
  out.density.assign(grid.size(), 0.0);
  out.eta = eta;
  out.sample_count = ensemble.size();

  const double eta2 = eta * eta;
  const double members = static_cast<double>(ensemble.size());
  parallel_for(grid.size(), [&](std::size_t g) {
    const double x = grid[g];
    double acc = 0.0;
    for (const auto& es : ensemble) {
      double s = 0.0;
      for (Eigen::Index m = 0; m < es.values.size(); ++m) {
        const double d = x - es.values(m);
        s += eta / (d * d + eta2);
      }
      acc += s / (std::numbers::pi * static_cast<double>(es.values.size()));
    }
    out.density[g] = acc / members;
  });
  return out;
}

// --- level spacings --------------------------------------------------------

namespace {

struct InverseCdf {
  std::span<const double> x;
  std::vector<double> cdf;

  double operator()(double u) const {
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.begin()) return x.front();
    if (it == cdf.end()) return x.back();
    const auto k = static_cast<std::size_t>(it - cdf.begin());
    const double f0 = cdf[k - 1], f1 = cdf[k];
    if (f1 <= f0) return x[k];
    return x[k - 1] + (u - f0) / (f1 - f0) * (x[k] - x[k - 1]);
  }
};

double interpolate_staircase(std::span<const double> x, std::span<const double> stair, double level) {
  auto it = std::upper_bound(x.begin(), x.end(), level);
  if (it == x.begin()) return stair.front();
  if (it == x.end()) return stair.back();
  const auto k = static_cast<std::size_t>(it - x.begin());
  const double t = (level - x[k - 1]) / (x[k] - x[k - 1]);
  return stair[k - 1] + t * (stair[k] - stair[k - 1]);
}

}  // namespace

SpacingHistogram unfold_and_spacings(const DOSCurve& dos, const UnfoldOptions& options) {
  if (options.draws < 2) throw Error(ErrorKind::argument, "unfolding needs at least two draws");
  if (options.sets < 1) throw Error(ErrorKind::argument, "unfolding needs at least one set");
  if (options.bins < 1 || !(options.max_spacing > 0.0)) {
    throw Error(ErrorKind::argument, "histogram needs bins >= 1 and a positive range");
  }
  if (dos.grid.size() < 2 || dos.density.size() != dos.grid.size()) {
    throw Error(ErrorKind::cannot_unfold, "density curve has fewer than two points");
  }
  check_grid(dos.grid);

  const std::span<const double> x(dos.grid);
  InverseCdf inverse{x, std::vector<double>(x.size(), 0.0)};
  for (std::size_t k = 1; k < x.size(); ++k) {
    const double a = dos.density[k - 1], b = dos.density[k];
    if (!(a >= 0.0) || !(b >= 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
      throw Error(ErrorKind::cannot_unfold, "density must be finite and non-negative");
    }
    inverse.cdf[k] = inverse.cdf[k - 1] + 0.5 * (a + b) * (x[k] - x[k - 1]);
  }
  const double mass = inverse.cdf.back();
  if (!(mass > 0.0)) throw Error(ErrorKind::cannot_unfold, "density curve has no mass");
  for (auto& f : inverse.cdf) f /= mass;

  // Synthetic level sets, each from its own stream.
  std::vector<std::vector<double>> levels(options.sets);
  parallel_for(options.sets, [&](std::size_t s) {
    CounterRng rng(options.seed, s);
    auto& lv = levels[s];
    lv.resize(options.draws);
    for (auto& l : lv) l = inverse(rng.uniform_open());
    std::sort(lv.begin(), lv.end());
  });

  // Staircase averaged over sets at the grid points.
  std::vector<double> stair(x.size(), 0.0);
  for (const auto& lv : levels) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      stair[k] += static_cast<double>(std::upper_bound(lv.begin(), lv.end(), x[k]) - lv.begin());
    }
  }
  for (auto& s : stair) s /= static_cast<double>(options.sets);

  std::vector<std::vector<double>> spacings(options.sets);
  parallel_for(options.sets, [&](std::size_t s) {
    const auto& lv = levels[s];
    auto& sp = spacings[s];
    sp.resize(lv.size() - 1);
    double prev = interpolate_staircase(x, stair, lv[0]);
    for (std::size_t i = 1; i < lv.size(); ++i) {
      const double cur = interpolate_staircase(x, stair, lv[i]);
      sp[i - 1] = cur - prev;
      prev = cur;
    }
  });

  SpacingHistogram out;
  out.draws = options.draws;
  out.sets = options.sets;
  out.seed = options.seed;
  const double width = options.max_spacing / static_cast<double>(options.bins);
  out.bin_edges.resize(options.bins + 1);
  for (std::size_t b = 0; b <= options.bins; ++b) out.bin_edges[b] = width * static_cast<double>(b);
  out.bin_edges.back() = options.max_spacing;

  std::vector<std::size_t> counts(options.bins, 0);
  std::size_t in_range = 0;
  double total = 0.0;
  for (const auto& sp : spacings) {
    for (double s : sp) {
      total += s;
      ++out.spacing_count;
      if (s >= 0.0 && s < options.max_spacing) {
        auto b = static_cast<std::size_t>(s / width);
        if (b >= options.bins) b = options.bins - 1;
        ++counts[b];
        ++in_range;
      }
    }
  }
  out.mean_spacing = total / static_cast<double>(out.spacing_count);
  out.density.assign(options.bins, 0.0);
  if (in_range > 0) {
    for (std::size_t b = 0; b < options.bins; ++b) {
      out.density[b] = static_cast<double>(counts[b]) / (static_cast<double>(in_range) * width);
    }
  }
  return out;
}

// --- localization ----------------------------------------------------------

std::vector<double> ipr(const EigenSystem& es, PrScale scale) {
  const auto m = static_cast<double>(es.vectors.rows());
  std::vector<double> out(es.size());
  for (std::size_t j = 0; j < es.size(); ++j) {
    const double quartic = es.vectors.col(static_cast<Eigen::Index>(j)).array().pow(4).sum();
    const double raw = 1.0 / quartic;
    out[j] = scale == PrScale::raw ? raw : raw / m;
  }
  return out;
}

RbfInterpolant::RbfInterpolant(std::vector<double> centers, std::vector<double> coefficients, double sigma)
    : centers_(std::move(centers)), coefficients_(std::move(coefficients)), sigma_(sigma) {}

double RbfInterpolant::operator()(double lambda) const {
  double s = 0.0;
  for (std::size_t m = 0; m < centers_.size(); ++m) {
    s += coefficients_[m] * gaussian_kernel(lambda, centers_[m], sigma_);
  }
  return s;
}

RbfInterpolant rbf_fit(std::span<const double> eigenvalues, std::span<const double> values, double sigma) {
  if (eigenvalues.empty() || eigenvalues.size() != values.size()) {
    throw Error(ErrorKind::argument, "rbf_fit needs matching, non-empty anchors and values");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::domain, "kernel width must be positive");

  auto anchors = merge_anchors(eigenvalues, values);
  const auto k = static_cast<Eigen::Index>(anchors.centers.size());
  Eigen::MatrixXd kernel(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      kernel(a, b) = gaussian_kernel(anchors.centers[static_cast<std::size_t>(a)],
                                     anchors.centers[static_cast<std::size_t>(b)], sigma);
    }
  }
  const Eigen::Map<const Eigen::VectorXd> rhs(anchors.values.data(), k);
  const Eigen::MatrixXd ridged = kernel + kRidge * Eigen::MatrixXd::Identity(k, k);
  Eigen::LLT<Eigen::MatrixXd> llt(ridged);
  Eigen::VectorXd coeffs;
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    coeffs = llt.solve(rhs);
    ok = coeffs.allFinite() && (kernel * coeffs - rhs).cwiseAbs().maxCoeff() <= kInterpolationTolerance;
  }
  if (!ok) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ev(kernel, Eigen::EigenvaluesOnly);
    const double lo = std::max(std::abs(ev.eigenvalues().minCoeff()), 1e-300);
    const double cond = ev.eigenvalues().maxCoeff() / lo;
    throw Error(ErrorKind::ill_conditioned,
                "Gaussian kernel system is ill-conditioned (condition estimate " + std::to_string(cond) + ")");
  }
  return RbfInterpolant(std::move(anchors.centers),
                        std::vector<double>(coeffs.data(), coeffs.data() + coeffs.size()), sigma);
}

double auto_sigma(std::span<const double> eigenvalues) {
  const std::vector<double> dummy(eigenvalues.size(), 0.0);
  const auto anchors = merge_anchors(eigenvalues, dummy);
  const auto& c = anchors.centers;
  if (c.size() < 2) return 0.1;
  std::vector<double> nn(c.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i > 0) nn[i] = std::min(nn[i], c[i] - c[i - 1]);
    if (i + 1 < c.size()) nn[i] = std::min(nn[i], c[i + 1] - c[i]);
  }
  std::sort(nn.begin(), nn.end());
  const std::size_t mid = nn.size() / 2;
  return nn.size() % 2 ? nn[mid] : 0.5 * (nn[mid - 1] + nn[mid]);
}

PRCurve expected_pr(std::span<const EigenSystem> ensemble, std::span<const double> grid,
                    const SigmaPolicy& sigma, PrScale scale) {
  if (ensemble.empty()) throw Error(ErrorKind::argument, "empty ensemble");
  check_grid(grid);
  if (sigma.fixed && !(*sigma.fixed > 0.0)) throw Error(ErrorKind::domain, "kernel width must be positive");

  struct MemberCurve {
    std::vector<double> values;
    double sigma = 0.0;
    bool ok = false;
  };
  std::vector<MemberCurve> curves(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t i) {
    const auto& es = ensemble[i];
    const std::span<const double> lambdas(es.values.data(), es.size());
    const auto delta = ipr(es, scale);
    const double width = sigma.fixed ? *sigma.fixed : auto_sigma(lambdas);
    const double m = static_cast<double>(es.size());
    const double lo = scale == PrScale::raw ? 1.0 : 1.0 / m;
    const double hi = scale == PrScale::raw ? m : 1.0;
    auto& out = curves[i];
    try {
      const auto phi = rbf_fit(lambdas, delta, width);
      out.values.resize(grid.size());
      for (std::size_t g = 0; g < grid.size(); ++g) out.values[g] = std::clamp(phi(grid[g]), lo, hi);
      out.sigma = width;
      out.ok = true;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ill_conditioned) throw;
    }
  });

  PRCurve result;
  result.grid.assign(grid.begin(), grid.end());
  result.pr.assign(grid.size(), 0.0);
  result.scale = scale;
  double sigma_sum = 0.0;
  for (const auto& c : curves) {
    if (!c.ok) {
      ++result.members_dropped;
      continue;
    }
    ++result.members_used;
    sigma_sum += c.sigma;
    for (std::size_t g = 0; g < grid.size(); ++g) result.pr[g] += c.values[g];
  }
  if (result.members_used == 0) {
    throw Error(ErrorKind::ill_conditioned, "every ensemble member failed the kernel fit");
  }
  const double used = static_cast<double>(result.members_used);
  for (auto& p : result.pr) p /= used;
  result.sigma = sigma.fixed ? *sigma.fixed : sigma_sum / used;
  return result;
}

}  // namespace eigenfolio
