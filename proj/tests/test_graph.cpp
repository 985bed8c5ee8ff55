#include <doctest.h>

#include <sstream>

#include "peerconf/error.hpp"
#include "peerconf/graph.hpp"
#include "support.hpp"

using namespace peerconf;
using peerconf::test::edges_network;
using peerconf::test::random_graph;

TEST_CASE("self-loops are dropped and duplicate edges collapse") {
  const Network net = edges_network(3, {{0, 0}, {0, 1}, {0, 1}, {1, 2}, {2, 2}});
  CHECK(net.edge_count() == 2);
  CHECK(net.dropped_self_loops() == 2);
  CHECK_FALSE(net.has_edge(0, 0));
  CHECK(net.degree(0) == 1);
  CHECK(net.degree(2) == 0);
  const Eigen::MatrixXd a = net.adjacency_matrix();
  CHECK(a.diagonal().isZero());
  CHECK(a.rowwise().sum()(0) == 1.0);
}

TEST_CASE("undirected input is mirrored") {
  const Network net = edges_network(3, {{0, 1}, {1, 2}}, true);
  CHECK(net.has_edge(1, 0));
  CHECK(net.has_edge(2, 1));
  CHECK(net.edge_count() == 4);
}

TEST_CASE("from_adjacency ignores the diagonal") {
  const std::vector<std::uint8_t> a{1, 1, 0, 0, 1, 1, 1, 0, 0};
  const Network net = Network::from_adjacency("a", 3, a);
  CHECK(net.edge_count() == 3);
  CHECK(net.dropped_self_loops() == 2);
  CHECK(net.has_edge(2, 0));
}

TEST_CASE("row_normalize: directed star") {
  const Network net = edges_network(3, {{0, 1}, {0, 2}});
  const Eigen::MatrixXd g = row_normalize(net).to_dense();
  CHECK(g(0, 0) == 0.0);
  CHECK(g(0, 1) == 0.5);
  CHECK(g(0, 2) == 0.5);
  CHECK(g.row(1).isZero());
  CHECK(g.row(2).isZero());
}

TEST_CASE("row_normalize: single isolated node") {
  const Network net = edges_network(1, {});
  const Eigen::MatrixXd g = row_normalize(net).to_dense();
  CHECK(g.rows() == 1);
  CHECK(g(0, 0) == 0.0);
}

TEST_CASE("row_normalize: complete triangle") {
  const Network net = edges_network(3, {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}});
  const Eigen::MatrixXd g = row_normalize(net).to_dense();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(g(i, j) == (i == j ? 0.0 : 0.5));
  }
}

TEST_CASE("row_normalize invariants on random graphs") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Network net = random_graph(40, 0.06, rng);
    const InteractionMatrix g = row_normalize(net);
    const Eigen::MatrixXd gd = g.to_dense();
    const Eigen::MatrixXd a = net.adjacency_matrix();
    for (Eigen::Index i = 0; i < gd.rows(); ++i) {
      const double s = gd.row(i).sum();
      if (net.isolated(static_cast<std::size_t>(i))) {
        CHECK(gd.row(i).isZero());
      } else {
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
      for (Eigen::Index j = 0; j < gd.cols(); ++j) {
        if (gd(i, j) > 0.0) CHECK(a(i, j) == 1.0);
      }
    }
    // G built from the support of G equals G.
    std::vector<std::uint8_t> support(gd.size());
    for (Eigen::Index i = 0; i < gd.rows(); ++i) {
      for (Eigen::Index j = 0; j < gd.cols(); ++j) {
        support[static_cast<std::size_t>(i * gd.cols() + j)] = gd(i, j) > 0.0 ? 1 : 0;
      }
    }
    const Network again = Network::from_adjacency("s", net.size(), support);
    CHECK(row_normalize(again).to_dense() == gd);
  }
}

TEST_CASE("sparse and dense storage give the same products") {
  std::mt19937_64 rng(5);
  const Network net = random_graph(60, 0.1, rng);
  const InteractionMatrix dense = row_normalize(net);
  const InteractionMatrix sparse = row_normalize(net, 0);
  REQUIRE(dense.is_dense());
  REQUIRE_FALSE(sparse.is_dense());
  const Eigen::VectorXd p = test::random_probabilities(60, rng);
  const Eigen::VectorXd v = p.array() * (1.0 - p.array());
  std::vector<double> f1(60), s1(60), f2(60), s2(60);
  const std::span<const double> ps(p.data(), 60), vs(v.data(), 60);
  dense.row_moments(ps, vs, f1, s1);
  sparse.row_moments(ps, vs, f2, s2);
  for (std::size_t i = 0; i < 60; ++i) {
    CHECK(f1[i] == doctest::Approx(f2[i]).epsilon(1e-14));
    CHECK(s1[i] == doctest::Approx(s2[i]).epsilon(1e-14));
  }
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(60, 3);
  CHECK((dense.multiply(x) - sparse.multiply(x)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((dense.multiply(x) - dense.to_dense() * x).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("adjacency weights keep raw entries") {
  const Network net = edges_network(3, {{0, 1}, {0, 2}, {1, 2}});
  const InteractionMatrix w = adjacency_weights(net);
  CHECK(w.to_dense() == net.adjacency_matrix());
  CHECK(w.max_row_sum() == 2.0);
}

namespace {

// Exhaustive scan over ordered triples.
TriadReport brute_force_triads(const Network& net) {
  TriadReport r;
  const std::size_t n = net.size();
  r.starts.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        if (i == j || j == k || i == k) continue;
        if (net.has_edge(i, j) && net.has_edge(j, k) && !net.has_edge(i, k)) {
          r.starts[i] = 1;
          ++r.triad_count;
        }
      }
    }
  }
  return r;
}

}  // namespace

TEST_CASE("intransitive triads: directed path") {
  const auto r = intransitive_start_indicator(edges_network(3, {{0, 1}, {1, 2}}));
  CHECK(r.starts == std::vector<std::uint8_t>{1, 0, 0});
  CHECK(r.triad_count == 1);
}

TEST_CASE("intransitive triads: complete triangle has none") {
  const auto r = intransitive_start_indicator(
      edges_network(3, {{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}}));
  CHECK(r.starts == std::vector<std::uint8_t>{0, 0, 0});
  CHECK(r.triad_count == 0);
}

TEST_CASE("intransitive triads: chain through a transitive triple") {
  const Network net = edges_network(4, {{0, 1}, {1, 2}, {0, 2}, {2, 3}});
  const auto r = intransitive_start_indicator(net);
  CHECK(r.starts[0] == 1);
  CHECK(r.starts[1] == 1);
  CHECK(r.starts[2] == 0);
  CHECK(r.starts[3] == 0);
  CHECK(r.starts == brute_force_triads(net).starts);
}

TEST_CASE("intransitive triads match brute force on random graphs") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 2 + rng() % 49;
    const double p = 0.02 + 0.3 * std::uniform_real_distribution<double>()(rng);
    const Network net = random_graph(n, p, rng);
    const auto fast = intransitive_start_indicator(net);
    const auto slow = brute_force_triads(net);
    CHECK(fast.starts == slow.starts);
    CHECK(fast.triad_count == slow.triad_count);
  }
}

TEST_CASE("sigma quadratic form: fixed examples") {
  const std::vector<double> one_friend{0.0, 1.0, 0.0};
  const std::vector<double> p1{0.3, 0.7, 0.1};
  CHECK(sigma_quadratic_form(one_friend, p1) == doctest::Approx(0.7).epsilon(1e-15));
  const std::vector<double> zeros(3, 0.0);
  CHECK(sigma_quadratic_form(one_friend, zeros) == 0.0);
  const std::vector<double> half{0.5, 0.5};
  CHECK(sigma_quadratic_form(half, half) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK_THROWS_AS(sigma_quadratic_form(half, p1), DimensionError);
}

TEST_CASE("sigma quadratic form equals the dense product and respects its bounds") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rng() % 30;
    const Eigen::VectorXd p = test::random_probabilities(n, rng, 0.0, 1.0);
    Eigen::VectorXd g = test::random_probabilities(n, rng, 0.0, 1.0);
    g /= g.sum();
    const Eigen::VectorXd v = p.array() * (1.0 - p.array());
    const Eigen::MatrixXd sigma = p * p.transpose() + Eigen::MatrixXd(v.asDiagonal());
    const double dense = g.dot(sigma * g);
    const double fast = sigma_quadratic_form(std::span<const double>(g.data(), n),
                                             std::span<const double>(p.data(), n));
    CHECK(std::abs(dense - fast) <= 1e-12);
    const double pbar = g.dot(p);
    CHECK(fast >= pbar * pbar - 1e-15);
    CHECK(fast <= pbar * pbar + v.maxCoeff() + 1e-15);
    CHECK(fast >= 0.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("edge list reader maps ids in order of first appearance") {
  std::istringstream in(
      "network_id,source,target\n"
      "b,x,y\n"
      "a,p,q\n"
      "b,y,z\n"
      "b,z,z\n");
  const auto nets = read_edge_list(in);
  REQUIRE(nets.size() == 2);
  CHECK(nets[0].id() == "b");
  CHECK(nets[0].size() == 3);
  CHECK(nets[0].node_ids() == std::vector<std::string>{"x", "y", "z"});
  CHECK(nets[0].has_edge(0, 1));
  CHECK(nets[0].has_edge(1, 2));
  CHECK(nets[0].dropped_self_loops() == 1);
  CHECK(nets[1].id() == "a");

  std::istringstream bad("src,dst\n1,2\n");
  CHECK_THROWS_AS(read_edge_list(bad), ParseError);
}
