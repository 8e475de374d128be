#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "eigenfolio/error.hpp"
#include "eigenfolio/rmt_bench.hpp"
#include "eigenfolio/structure.hpp"
#include "oracles.hpp"

using namespace eigenfolio;

namespace {

std::vector<std::string> names(std::size_t m) { return benchmark_labels(m); }

DistanceMatrix as_distance(const Eigen::MatrixXd& d) { return {names(static_cast<std::size_t>(d.rows())), d}; }

EigenSystem from_vectors(const Eigen::MatrixXd& vectors, const Eigen::VectorXd& values) {
  return {names(static_cast<std::size_t>(values.size())), values, vectors};
}

}  // namespace

TEST_CASE("sign partition") {
  SUBCASE("hand-built two-level split") {
    // Columns ascend by eigenvalue: column 3 is level 0, column 2 is level 1.
    Eigen::MatrixXd v(4, 4);
    v << 0.5, 0.5, 0.5, 0.5,
         0.5, -0.5, 0.5, -0.5,
         0.5, 0.5, -0.5, 0.5,
         0.5, -0.5, -0.5, -0.5;
    const auto tree = sign_partition(from_vectors(v, Eigen::Vector4d(0.1, 0.2, 0.3, 3.4)));
    CHECK(cluster_count(tree, 0) == 2);
    CHECK(cluster_count(tree, 1) == 4);
    CHECK(tree.nodes[0].split_level == 0);
    CHECK(tree.nodes[0].members.size() == 4);
  }
  SUBCASE("same-sign level passes through") {
    Eigen::MatrixXd v(3, 3);
    v << 1, 0.5, 0.5,
         1, 0.5, -0.5,
         1, 0.5, 0.5;
    const auto tree = sign_partition(from_vectors(v, Eigen::Vector3d(0.1, 0.5, 2.4)));
    CHECK(cluster_count(tree, 0) == 2);
    CHECK(tree.nodes[0].children.size() == 2);
  }
  SUBCASE("zero components join the positive side") {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(3, 3);
    v.col(2) << 0.0, -1.0, 1e-13;
    const auto tree = sign_partition(from_vectors(v, Eigen::Vector3d(0.1, 0.2, 2.7)));
    const auto& root = tree.nodes[0];
    REQUIRE(root.children.size() == 2);
    const auto& positive = tree.nodes[root.children[0]].members;
    CHECK(positive == std::vector<std::size_t>{0, 2});
    CHECK(tree.nodes[root.children[1]].members == std::vector<std::size_t>{1});
  }
  SUBCASE("random spectra: monotone, bounded, singletons at the end") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 20; ++trial) {
      const int m = 3 + trial % 12;
      const auto es = eig_sym(oracle::random_correlation(m, 3 * m, gen), names(static_cast<std::size_t>(m)));
      const auto tree = sign_partition(es);
      std::size_t prev = 1;
      for (std::size_t p = 0; p < static_cast<std::size_t>(m); ++p) {
        const auto n = cluster_count(tree, p);
        CHECK(n >= prev);
        CHECK(n <= trivial_count(static_cast<std::size_t>(m), p));
        CHECK(n <= static_cast<std::size_t>(m));
        prev = n;
      }
      // Leaves partition the asset set.
      std::multiset<std::size_t> seen;
      for (const auto& node : tree.nodes) {
        if (node.children.empty()) seen.insert(node.members.begin(), node.members.end());
      }
      CHECK(seen.size() == static_cast<std::size_t>(m));
      CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == static_cast<std::size_t>(m));
      CHECK(tree.depth() <= static_cast<std::size_t>(m));
    }
  }
}

TEST_CASE("trivial count") {
  CHECK(trivial_count(17, 0) == 2);
  CHECK(trivial_count(17, 3) == 16);
  CHECK(trivial_count(17, 4) == 17);
  CHECK(trivial_count(17, 100) == 17);
  CHECK(trivial_count(1, 0) == 1);
}

TEST_CASE("p0 fit") {
  SUBCASE("recovers a planted decay") {
    for (double p0 : {-2.0, -5.0, 3.0}) {
      std::vector<double> measured, baseline;
      for (int p = 0; p < 8; ++p) {
        baseline.push_back(20.0);
        measured.push_back(20.0 - 4.0 * std::exp(p / p0));
      }
      const auto fit = fit_p0(measured, baseline);
      CHECK(fit.p0 == doctest::Approx(p0).epsilon(1e-9));
      CHECK(fit.intercept == doctest::Approx(std::log(4.0)).epsilon(1e-9));
      CHECK(fit.used_levels.size() == 8);
    }
  }
  SUBCASE("non-positive differences are excluded") {
    const std::vector<double> measured{1, 2, 4, 8, 17}, baseline{2, 4, 8, 8, 17};
    const auto fit = fit_p0(measured, baseline);
    CHECK(fit.used_levels == std::vector<std::size_t>{0, 1, 2});
    CHECK(fit.excluded_levels == std::vector<std::size_t>{3, 4});
    CHECK(fit.p0 == doctest::Approx(1.0 / std::log(2.0)));
  }
  SUBCASE("flat difference has infinite p0") {
    const std::vector<double> measured{1, 1, 1}, baseline{3, 3, 3};
    CHECK(std::isinf(fit_p0(measured, baseline).p0));
  }
  SUBCASE("too few usable levels") {
    const std::vector<double> measured{2, 4, 7}, baseline{2, 4, 8};
    try {
      fit_p0(measured, baseline);
      FAIL("expected fit_domain");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::fit_domain);
      CHECK(std::string(e.what()).find("0 1") != std::string::npos);
    }
    CHECK_THROWS_AS(fit_p0(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), Error);
  }
}

TEST_CASE("distances") {
  std::mt19937_64 gen(6);
  const auto c = oracle::random_correlation(7, 20, gen);
  const CorrelationMatrix corr{names(7), c};
  const auto es = eig_sym(corr);
  for (const auto& d : {euclid_dist(corr), spectral_dist(es)}) {
    CHECK(d.values.isApprox(d.values.transpose(), 0.0));
    CHECK(d.values.diagonal().isZero(0.0));
    CHECK(d.values.minCoeff() >= 0.0);
  }

  Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(3, 3);
  const auto e = euclid_dist({names(3), ident});
  CHECK(e.values(0, 1) == doctest::Approx(std::sqrt(2.0)));
  Eigen::MatrixXd perfect = Eigen::MatrixXd::Ones(2, 2);
  CHECK(euclid_dist({names(2), perfect}).values(0, 1) == 0.0);

  // Spectral distance reproduces the Euclidean distance between rows of VΛ.
  const Eigen::MatrixXd scaled = es.vectors * es.values.asDiagonal();
  const auto s = spectral_dist(es);
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      CHECK(std::abs(s.values(i, j) - (scaled.row(i) - scaled.row(j)).norm()) < 1e-12);
    }
  }

  SUBCASE("permutation equivariance") {
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(7);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 7, gen);
    const Eigen::MatrixXd pc = perm * c * perm.transpose();
    const auto pe = euclid_dist({names(7), pc});
    const Eigen::MatrixXd expect_e = perm * euclid_dist(corr).values * perm.transpose();
    CHECK((pe.values - expect_e).cwiseAbs().maxCoeff() == 0.0);
    const auto ps = spectral_dist(eig_sym(pc, names(7)));
    const Eigen::MatrixXd expect_s = perm * s.values * perm.transpose();
    CHECK((ps.values - expect_s).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("minimum spanning tree") {
  SUBCASE("matches brute force on exactly representable weights") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 30; ++trial) {
      const int n = 3 + trial % 5;
      const auto d = oracle::quantized_distances(n, gen);
      const auto t = mst_prim(as_distance(d));
      CHECK(t.edges.size() == static_cast<std::size_t>(n - 1));
      CHECK(t.total_weight == oracle::mst_bruteforce(d));
    }
  }
  SUBCASE("continuous weights within rounding") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(7, 7);
      for (int i = 0; i < 7; ++i) {
        for (int j = i + 1; j < 7; ++j) d(i, j) = d(j, i) = u(gen);
      }
      CHECK(std::abs(mst_prim(as_distance(d)).total_weight - oracle::mst_bruteforce(d)) < 1e-12);
    }
  }
  SUBCASE("relabelling permutes the edge set") {
    std::mt19937_64 gen(9);
    const auto d = oracle::quantized_distances(8, gen);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(8);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 8, gen);
    const Eigen::MatrixXd pd = perm * d * perm.transpose();
    auto edge_set = [](const SpanningTree& t, const std::vector<std::size_t>& map) {
      std::set<std::pair<std::size_t, std::size_t>> out;
      for (const auto& e : t.edges) {
        const auto a = map[e.a], b = map[e.b];
        out.insert({std::min(a, b), std::max(a, b)});
      }
      return out;
    };
    std::vector<std::size_t> id(8), fwd(8);
    for (std::size_t i = 0; i < 8; ++i) {
      id[i] = i;
      fwd[i] = static_cast<std::size_t>(perm.indices()(static_cast<Eigen::Index>(i)));
    }
    const auto original = mst_prim(as_distance(d));
    const auto permuted = mst_prim(as_distance(pd));
    CHECK(edge_set(original, fwd) == edge_set(permuted, id));
    CHECK(original.total_weight == permuted.total_weight);
  }
  SUBCASE("edges are ordered pairs") {
    std::mt19937_64 gen(10);
    for (const auto& e : mst_prim(as_distance(oracle::quantized_distances(6, gen))).edges) CHECK(e.a < e.b);
  }
  SUBCASE("disconnected graph") {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
    d(0, 1) = d(1, 0) = 1.0;
    d(0, 2) = d(2, 0) = std::numeric_limits<double>::infinity();
    d(1, 2) = d(2, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
      mst_prim(as_distance(d));
      FAIL("expected no_spanning_tree");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::no_spanning_tree);
    }
  }
}

TEST_CASE("single linkage") {
  SUBCASE("hand example") {
    Eigen::MatrixXd d(4, 4);
    d << 0, 1, 4, 5,
         1, 0, 3, 6,
         4, 3, 0, 2,
         5, 6, 2, 0;
    const auto dendro = single_linkage(as_distance(d));
    REQUIRE(dendro.merges.size() == 3);
    CHECK(dendro.merges[0].a == 0);
    CHECK(dendro.merges[0].b == 1);
    CHECK(dendro.merges[0].height == 1.0);
    CHECK(dendro.merges[1].a == 2);
    CHECK(dendro.merges[1].b == 3);
    CHECK(dendro.merges[1].height == 2.0);
    CHECK(dendro.merges[2].a == 4);
    CHECK(dendro.merges[2].b == 5);
    CHECK(dendro.merges[2].height == 3.0);
    CHECK(dendro.merges[2].size == 4);
    CHECK(dendro.leaf_order == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(appearance_order(dendro) == std::vector<std::size_t>{0, 1, 2, 3});
  }
  SUBCASE("ties resolve to the lowest pair") {
    const Eigen::MatrixXd d = Eigen::MatrixXd::Ones(3, 3) - Eigen::MatrixXd::Identity(3, 3);
    const auto dendro = single_linkage(as_distance(d));
    CHECK(dendro.merges[0].a == 0);
    CHECK(dendro.merges[0].b == 1);
    CHECK(dendro.merges[1].a == 2);
    CHECK(dendro.merges[1].b == 3);
  }
  SUBCASE("cophenetic distance is the subdominant ultrametric") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int trial = 0; trial < 15; ++trial) {
      const int n = 4 + trial % 9;
      Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = u(gen);
      }
      const auto dist = as_distance(d);
      const auto dendro = single_linkage(dist);
      const auto coph = cophenetic(dendro);

      std::set<double> inputs;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) inputs.insert(d(i, j));
      }
      for (const auto& mg : dendro.merges) CHECK(inputs.count(mg.height) == 1);
      for (std::size_t k = 1; k < dendro.merges.size(); ++k) {
        CHECK(dendro.merges[k].height >= dendro.merges[k - 1].height);
      }

      CHECK((coph.values - oracle::minimax_paths(d)).cwiseAbs().maxCoeff() == 0.0);
      std::vector<std::array<double, 3>> edges;
      for (const auto& e : mst_prim(dist).edges) {
        edges.push_back({static_cast<double>(e.a), static_cast<double>(e.b), e.weight});
      }
      CHECK((coph.values - oracle::tree_path_max(n, edges)).cwiseAbs().maxCoeff() == 0.0);

      CHECK(ultrametric_check(coph).ultrametric);
      CHECK(dendro.leaf_order.size() == static_cast<std::size_t>(n));
      auto order = appearance_order(dendro);
      std::sort(order.begin(), order.end());
      for (int i = 0; i < n; ++i) CHECK(order[static_cast<std::size_t>(i)] == static_cast<std::size_t>(i));
    }
  }
  SUBCASE("lance-williams update") {
    const auto sl = LinkageCoefficients::single_linkage();
    CHECK(sl.update(0.3, 0.7, 0.1) == 0.3);
    CHECK(sl.update(0.9, 0.2, 0.1) == 0.2);
    const LinkageCoefficients complete{0.5, 0.5, 0.0, 0.5};
    CHECK(complete.update(0.3, 0.7, 0.1) == doctest::Approx(0.7));
    const LinkageCoefficients average{0.5, 0.5, 0.0, 0.0};
    CHECK(average.update(0.3, 0.7, 0.1) == doctest::Approx(0.5));
  }
  SUBCASE("needs two leaves") {
    CHECK_THROWS_AS(single_linkage(as_distance(Eigen::MatrixXd::Zero(1, 1))), Error);
  }
}

TEST_CASE("ultrametric check") {
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 3,
       1, 0, 1,
       3, 1, 0;
  const auto report = ultrametric_check(as_distance(d));
  CHECK_FALSE(report.ultrametric);
  REQUIRE(report.violations.size() == 2);
  CHECK(report.violations[0] == std::array<std::size_t, 3>{0, 1, 2});
  CHECK(report.violations[1] == std::array<std::size_t, 3>{2, 1, 0});

  d(0, 2) = d(2, 0) = 1.0 + 1e-13;
  CHECK(ultrametric_check(as_distance(d)).ultrametric);
  CHECK_FALSE(ultrametric_check(as_distance(d), 0.0).ultrametric);
}

TEST_CASE("leaf order correlation") {
  Eigen::MatrixXd d(4, 4);
  d << 0, 1, 4, 5,
       1, 0, 3, 6,
       4, 3, 0, 2,
       5, 6, 2, 0;
  const auto dendro = single_linkage(as_distance(d));
  const std::map<std::string, double> rising{{"X0", 1}, {"X1", 2}, {"X2", 3}, {"X3", 4}};
  CHECK(leaf_order_correlation(dendro, rising) == doctest::Approx(1.0));
  const std::map<std::string, double> falling{{"X0", 4}, {"X1", 3}, {"X2", 2}, {"X3", 1}};
  CHECK(leaf_order_correlation(dendro, falling) == doctest::Approx(-1.0));

  try {
    leaf_order_correlation(dendro, {{"X0", 1}, {"X1", 2}, {"X2", 3}});
    FAIL("expected lookup error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::lookup);
    CHECK(std::string(e.what()).find("X3") != std::string::npos);
  }
  try {
    leaf_order_correlation(dendro, {{"X0", 1}, {"X1", 1}, {"X2", 1}, {"X3", 1}});
    FAIL("expected degenerate variance");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate_variance);
  }

  const std::vector<double> x{1, 2, 3}, y{2, 4, 7};
  CHECK(pearson(x, y) == doctest::Approx(0.9933992677987828));
  CHECK_THROWS_AS(pearson(std::vector<double>{1.0}, std::vector<double>{2.0}), Error);
}
