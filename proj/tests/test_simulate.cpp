#include <doctest.h>

#include <array>
#include <cmath>

#include "peerconf/error.hpp"
#include "peerconf/inference.hpp"
#include "peerconf/simulate.hpp"
#include "support.hpp"

using namespace peerconf;

namespace {

bool same_edges(const Network& a, const Network& b) {
  if (a.size() != b.size() || a.edge_count() != b.edge_count()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a.has_edge(i, j) != b.has_edge(i, j)) return false;
    }
  }
  return true;
}

Dataset covariate_free(std::vector<Network> nets) {
  std::vector<Eigen::MatrixXd> xs;
  for (const auto& n : nets) xs.emplace_back(static_cast<Eigen::Index>(n.size()), 0);
  return Dataset::assemble(std::move(nets), std::move(xs));
}

}  // namespace

TEST_CASE("edge rules and size ranges parse") {
  CHECK(EdgeRule::parse("er:0.05").p_link == 0.05);
  CHECK(EdgeRule::parse("out:3").out_degree == 3);
  CHECK(EdgeRule::parse("out:3").to_string() == "out:3");
  CHECK_THROWS_AS(EdgeRule::parse("ba:2"), ParseError);
  CHECK_THROWS_AS(EdgeRule::parse("er"), ParseError);
  const auto r = SizeRange::parse("40-60");
  CHECK(r.min == 40);
  CHECK(r.max == 60);
  CHECK(SizeRange::parse("50").max == 50);
  CHECK_THROWS_AS(SizeRange::parse("60-40"), ParseError);
}

TEST_CASE("network generation is reproducible and stream-stable") {
  const auto a = generate_networks(8, SizeRange{20, 40}, EdgeRule::erdos_renyi(0.1), 42);
  const auto b = generate_networks(8, SizeRange{20, 40}, EdgeRule::erdos_renyi(0.1), 42);
  const auto c = generate_networks(3, SizeRange{20, 40}, EdgeRule::erdos_renyi(0.1), 42);
  REQUIRE(a.size() == 8);
  for (std::size_t m = 0; m < 8; ++m) {
    CHECK(same_edges(a[m], b[m]));
    CHECK(a[m].size() >= 20);
    CHECK(a[m].size() <= 40);
  }
  for (std::size_t m = 0; m < 3; ++m) CHECK(same_edges(a[m], c[m]));
  const auto d = generate_networks(8, SizeRange{20, 40}, EdgeRule::erdos_renyi(0.1), 43);
  bool differs = false;
  for (std::size_t m = 0; m < 8; ++m) differs = differs || !same_edges(a[m], d[m]);
  CHECK(differs);
}

TEST_CASE("fixed out-degree rule") {
  const auto nets = generate_networks(5, SizeRange{3, 3}, EdgeRule::fixed_out_degree(2), 1);
  for (const auto& net : nets) {
    // Two distinct targets among two candidates: the complete triangle.
    CHECK(net.edge_count() == 6);
    for (std::size_t i = 0; i < 3; ++i) CHECK(net.degree(i) == 2);
  }
  CHECK_THROWS_AS(generate_networks(2, SizeRange{3, 3}, EdgeRule::fixed_out_degree(3), 1), Error);
  CHECK_THROWS_AS(generate_networks(0, SizeRange{3, 3}, EdgeRule::erdos_renyi(0.1), 1), Error);
}

TEST_CASE("Erdos-Renyi isolated share matches (1 - p)^(n - 1)") {
  const double p = 0.1;
  const std::size_t n = 50, m = 200;
  const auto nets = generate_networks(m, SizeRange{n, n}, EdgeRule::erdos_renyi(p), 7);
  std::size_t isolated = 0;
  for (const auto& net : nets) isolated += net.isolated_count();
  const double total = static_cast<double>(n * m);
  const double q = std::pow(1.0 - p, static_cast<double>(n - 1));
  const double se = std::sqrt(q * (1.0 - q) / total);
  CHECK(std::abs(static_cast<double>(isolated) / total - q) <= 3.0 * se);
}

TEST_CASE("covariates follow their column kinds") {
  const auto nets = generate_networks(20, SizeRange{50, 50}, EdgeRule::erdos_renyi(0.05), 3);
  const Dataset data = draw_covariates(
      nets, {{"z", CovariateKind::gaussian, 0.0}, {"c", CovariateKind::poisson, 3.0}}, 3);
  double sz = 0.0, sc = 0.0;
  std::size_t count = 0;
  for (const auto& nd : data.networks) {
    for (Eigen::Index i = 0; i < nd.cov.x.rows(); ++i) {
      sz += nd.cov.x(i, 0);
      sc += nd.cov.x(i, 1);
      CHECK(nd.cov.x(i, 1) == std::floor(nd.cov.x(i, 1)));
      CHECK(nd.cov.x(i, 1) >= 0.0);
      ++count;
    }
  }
  const double nn = static_cast<double>(count);
  CHECK(std::abs(sz / nn) <= 4.0 / std::sqrt(nn));
  CHECK(std::abs(sc / nn - 3.0) <= 4.0 * std::sqrt(3.0 / nn));
  CHECK(data.covariate_names == std::vector<std::string>{"z", "c"});
}

TEST_CASE("outcomes at zero index average one half") {
  const auto nets = generate_networks(100, SizeRange{100, 100}, EdgeRule::erdos_renyi(0.03), 5);
  const Dataset data = covariate_free(nets);
  const Parameters params = parameters_for(data);
  const auto out = simulate_outcomes(params, data, 11);
  double sum = 0.0, count = 0.0;
  for (const auto& y : out.y) {
    sum += y.sum();
    count += static_cast<double>(y.size());
  }
  CHECK(count == 10000.0);
  CHECK(std::abs(sum / count - 0.5) <= 4.0 * 0.5 / std::sqrt(count));
}

TEST_CASE("a large intercept makes every outcome one") {
  const auto nets = generate_networks(10, SizeRange{30, 30}, EdgeRule::erdos_renyi(0.05), 5);
  const Dataset data = covariate_free(nets);
  Parameters params = parameters_for(data);
  params.gamma0.setConstant(20.0);
  params.beta_h = 1.0;
  params.delta_beta = 1.0;
  const auto out = simulate_outcomes(params, data, 2);
  for (const auto& y : out.y) CHECK(y.minCoeff() == 1.0);
}

TEST_CASE("simulated dataset is reproducible and centred on p*") {
  SimulationDesign design;
  design.networks = 60;
  const auto a = simulate_dataset(design, 99);
  const auto b = simulate_dataset(design, 99);
  REQUIRE(a.data.network_count() == 60);
  CHECK(a.seed == 99);
  CHECK(a.truth.to_vector() == b.truth.to_vector());
  CHECK(a.truth.beta_h == 1.0);
  CHECK(a.truth.beta_l() == 2.0);
  double sum_y = 0.0, sum_p = 0.0, var = 0.0, count = 0.0;
  for (std::size_t m = 0; m < 60; ++m) {
    CHECK(a.data.networks[m].y == b.data.networks[m].y);
    CHECK(a.equilibria[m].certificate.satisfied);
    const auto& p = a.equilibria[m].p_star;
    sum_y += a.data.networks[m].y.sum();
    sum_p += p.sum();
    var += (p.array() * (1.0 - p.array())).sum();
    count += static_cast<double>(p.size());
  }
  CHECK(std::abs(sum_y - sum_p) / count <= 4.0 * std::sqrt(var) / count);
  for (double g0 : a.truth.gamma0) {
    CHECK(g0 >= design.gamma0_low);
    CHECK(g0 <= design.gamma0_high);
  }
}

TEST_CASE("threshold draws and direct coin flips share one distribution") {
  const Network net = test::edges_network(3, {{0, 1}, {1, 2}, {2, 0}, {0, 2}});
  std::vector<Network> nets{net};
  std::vector<Eigen::MatrixXd> xs{Eigen::Vector3d(-1.0, 0.2, 1.0)};
  const Dataset data = Dataset::assemble(nets, xs);
  Parameters params = parameters_for(data);
  params.gamma1[0] = 0.8;
  params.beta_h = 1.0;
  params.delta_beta = 0.5;
  const int reps = 10000;
  std::array<double, 8> thr{}, coin{};
  for (int r = 0; r < reps; ++r) {
    const auto out = simulate_outcomes(params, data, 1000 + static_cast<std::uint64_t>(r));
    const auto flips = bernoulli_outcomes(out.equilibria, 5000 + static_cast<std::uint64_t>(r));
    const auto cell = [](const Eigen::VectorXd& y) {
      return static_cast<std::size_t>(y[0] + 2.0 * y[1] + 4.0 * y[2]);
    };
    thr[cell(out.y.front())] += 1.0;
    coin[cell(flips.front())] += 1.0;
  }
  // Two-sample homogeneity statistic over the 8 joint patterns.
  double stat = 0.0;
  for (std::size_t c = 0; c < 8; ++c) {
    const double pooled = (thr[c] + coin[c]) / (2.0 * reps);
    const double expected = pooled * reps;
    if (expected == 0.0) continue;
    stat += (thr[c] - expected) * (thr[c] - expected) / expected;
    stat += (coin[c] - expected) * (coin[c] - expected) / expected;
  }
  CHECK(chi_square_survival(stat, 7) > 0.001);
}

TEST_CASE("design parameters draw fixed effects in range") {
  SimulationDesign design;
  design.networks = 30;
  const Parameters p = design_parameters(design, 4);
  CHECK(p.gamma0.size() == 30);
  CHECK(p.gamma0.minCoeff() >= -1.5);
  CHECK(p.gamma0.maxCoeff() <= -0.5);
  CHECK(p.gamma1 == design.gamma1);
  design.gamma2 = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(design_parameters(design, 4), DimensionError);
}
