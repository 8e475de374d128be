#include <doctest.h>

#include <cmath>
#include <random>

#include "eigenfolio/error.hpp"
#include "eigenfolio/returns.hpp"
#include "eigenfolio/spectral.hpp"

using namespace eigenfolio;

namespace {

Eigen::MatrixXd gaussian_rows(int m, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) x(i, j) = normal(gen);
  }
  return x;
}

std::vector<std::string> labels(int m) {
  std::vector<std::string> out;
  for (int i = 0; i < m; ++i) out.push_back("A" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("log_returns") {
  Eigen::MatrixXd p(1, 2);
  p << 100, 110;
  CHECK(log_returns(p)(0, 0) == doctest::Approx(0.0953101798).epsilon(1e-9));

  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(2, 4, 3.5);
  CHECK(log_returns(flat).isZero(0.0));

  Eigen::MatrixXd e(1, 3);
  e << 1, std::exp(1.0), std::exp(2.0);
  const auto r = log_returns(e);
  CHECK(r.cols() == 2);
  CHECK(r(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r(0, 1) == doctest::Approx(1.0).epsilon(1e-14));

  Eigen::MatrixXd bad(1, 2);
  bad << 1, -1;
  CHECK_THROWS_AS(log_returns(bad), Error);
}

TEST_CASE("normalize") {
  Eigen::MatrixXd r(1, 2);
  r << 1, -1;
  auto l = normalize(r, {"A"});
  CHECK(l.values(0, 0) == doctest::Approx(1.0));
  CHECK(l.values(0, 1) == doctest::Approx(-1.0));

  Eigen::MatrixXd s(1, 3);
  s << 0, 1, 2;
  l = normalize(s, {"A"});
  CHECK(l.values(0, 0) == doctest::Approx(-std::sqrt(1.5)).epsilon(1e-12));
  CHECK(l.values(0, 1) == doctest::Approx(0.0));
  CHECK(l.values(0, 2) == doctest::Approx(std::sqrt(1.5)).epsilon(1e-12));
  CHECK(l.mean(0) == doctest::Approx(1.0));
  CHECK(l.stddev(0) == doctest::Approx(std::sqrt(2.0 / 3.0)));

  Eigen::MatrixXd c(2, 3);
  c << 1, 2, 3, 5, 5, 5;
  try {
    normalize(c, {"GOOD", "FLAT"});
    FAIL("expected degenerate asset");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_asset);
    CHECK(std::string(e.what()).find("FLAT") != std::string::npos);
  }

  const auto x = normalize(gaussian_rows(5, 300, 3) * 7.0, labels(5));
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(x.values.row(i).mean()) < 1e-10);
    CHECK(std::abs(x.values.row(i).squaredNorm() / 300.0 - 1.0) < 1e-10);
  }
}

TEST_CASE("correlation") {
  Eigen::MatrixXd same(2, 4);
  same << 1, 2, 3, 5, 1, 2, 3, 5;
  auto c = correlation(same, {"A", "B"});
  CHECK(c.values(0, 1) == doctest::Approx(1.0));
  const auto es = eig_sym(c);
  CHECK(es.values(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(es.values(1) == doctest::Approx(2.0));

  Eigen::MatrixXd neg(2, 4);
  neg << 1, 2, 3, 5, -1, -2, -3, -5;
  c = correlation(neg, {"A", "B"});
  CHECK(c.values(0, 1) == doctest::Approx(-1.0));

  c = correlation(gaussian_rows(2, 10000, 5), {"A", "B"});
  CHECK(std::abs(c.values(0, 1)) < 0.05);
  CHECK(check_correlation_invariants(c).empty());

  Eigen::MatrixXd flat(2, 3);
  flat << 1, 2, 3, 4, 4, 4;
  try {
    correlation(flat, {"A", "B"});
    FAIL("expected degenerate window");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_window);
  }
}

TEST_CASE("correlation is invariant under per-asset affine rescaling") {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> scale(0.01, 100.0), shift(-50.0, 50.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = gaussian_rows(6, 80, 100 + trial);
    Eigen::MatrixXd y = x;
    for (int i = 0; i < 6; ++i) y.row(i) = (x.row(i).array() * scale(gen) + shift(gen)).matrix();
    const auto a = correlation(normalize(x, labels(6)).values, labels(6));
    const auto b = correlation(normalize(y, labels(6)).values, labels(6));
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("bootstrap windows") {
  const auto l = normalize(gaussian_rows(4, 101, 21), labels(4));

  SUBCASE("window equal to the series length forces start 0") {
    const auto full = normalize(gaussian_rows(3, 50, 2), labels(3));
    const auto e = bootstrap_windows(full, {50, 20, 1});
    for (const auto& s : e.samples) CHECK(s.start == 0);
  }
  SUBCASE("deterministic in the seed") {
    const auto a = correlation_ensemble(l, {100, 50, 42});
    const auto b = correlation_ensemble(l, {100, 50, 42});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
  }
  SUBCASE("N = 101, window 100 draws both starts roughly uniformly") {
    const auto e = bootstrap_windows(l, {100, 1000, 42});
    std::size_t zeros = 0;
    for (const auto& s : e.samples) {
      CHECK(s.start <= 1);
      zeros += s.start == 0;
    }
    CHECK(zeros > 0);
    CHECK(zeros < 1000);
    // Chi-square with one degree of freedom; 10.83 is the 0.1% critical value.
    const double chi2 = 2.0 * std::pow(static_cast<double>(zeros) - 500.0, 2) / 500.0;
    CHECK(chi2 < 10.83);
  }
  SUBCASE("window longer than the series") {
    try {
      bootstrap_windows(l, {102, 5, 1});
      FAIL("expected insufficient data");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::insufficient_data);
    }
  }
  SUBCASE("invalid spec") {
    CHECK_THROWS_AS(bootstrap_windows(l, {1, 5, 1}), Error);
    CHECK_THROWS_AS(bootstrap_windows(l, {10, 0, 1}), Error);
  }
  SUBCASE("windows are re-standardized and every sample is a valid correlation") {
    const auto e = bootstrap_windows(l, {30, 40, 7});
    for (const auto& s : e.samples) {
      for (Eigen::Index i = 0; i < s.window.rows(); ++i) {
        CHECK(std::abs(s.window.row(i).mean()) < 1e-10);
        CHECK(std::abs(s.window.row(i).squaredNorm() / 30.0 - 1.0) < 1e-10);
      }
    }
    for (const auto& c : correlation_ensemble(l, {30, 40, 7})) {
      CHECK(check_correlation_invariants(c).empty());
      CHECK(std::abs(c.values.trace() - 4.0) < 1e-8);
      CHECK(std::abs(eig_sym(c).values.sum() - 4.0) < 1e-8);
    }
  }
}

TEST_CASE("degenerate windows are redrawn and counted") {
  // Asset 1 is frozen for the first 60 intervals.
  Eigen::MatrixXd r = gaussian_rows(2, 200, 4);
  r.block(1, 0, 1, 60).setZero();
  const auto l = normalize(r, labels(2));
  std::size_t rejected = 0;
  const auto ens = correlation_ensemble(l, {20, 200, 3}, &rejected);
  CHECK(rejected > 0);
  for (const auto& c : ens) CHECK(check_correlation_invariants(c).empty());
  const auto windows = bootstrap_windows(l, {20, 200, 3});
  CHECK(windows.rejected == rejected);
  for (const auto& s : windows.samples) CHECK(s.start + 20 > 60);
}
