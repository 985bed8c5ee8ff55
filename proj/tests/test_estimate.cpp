#include <doctest.h>

#include <cmath>

#include "peerconf/error.hpp"
#include "peerconf/estimate.hpp"
#include "peerconf/simulate.hpp"
#include "support.hpp"

using namespace peerconf;

namespace {

SyntheticDataset small_sample(std::size_t networks, std::uint64_t seed, ModelFamily family = {}) {
  SimulationDesign design;
  design.networks = networks;
  design.family = family;
  return simulate_dataset(design, seed);
}

Parameters random_parameters(const Dataset& data, ModelFamily family, std::mt19937_64& rng,
                             LinkFunction link = {}) {
  Parameters th = parameters_for(data, family, link);
  std::normal_distribution<double> z(0.0, 0.5);
  Eigen::VectorXd v = th.to_vector();
  for (auto& x : v) x = z(rng);
  th.assign(v);
  return th;
}

Beliefs random_beliefs(const Dataset& data, std::mt19937_64& rng) {
  Beliefs p;
  for (const auto& nd : data.networks) p.push_back(test::random_probabilities(nd.size(), rng));
  return p;
}

// Textbook Newton iterations for a binary logit on stacked regressor rows.
Eigen::VectorXd reference_logit(const Eigen::MatrixXd& k, const Eigen::VectorXd& y) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k.cols());
  for (int it = 0; it < 100; ++it) {
    const Eigen::ArrayXd mu = 1.0 / (1.0 + (-(k * b).array()).exp());
    const Eigen::VectorXd grad = k.transpose() * (y.array() - mu).matrix();
    const Eigen::MatrixXd info = k.transpose() * (mu * (1.0 - mu)).matrix().asDiagonal() * k;
    const Eigen::VectorXd step = info.ldlt().solve(grad);
    b += step;
    if (step.cwiseAbs().maxCoeff() < 1e-13) break;
  }
  return b;
}

struct Stacked {
  Eigen::MatrixXd k;
  Eigen::VectorXd y;
};

Stacked stack_regressors(const Parameters& th, const Beliefs& p, const Dataset& data) {
  Stacked s;
  const auto rows = static_cast<Eigen::Index>(data.node_count());
  s.k.resize(rows, static_cast<Eigen::Index>(th.size()));
  s.y.resize(rows);
  Eigen::Index r = 0;
  for (std::size_t m = 0; m < data.network_count(); ++m) {
    const auto& nd = data.networks[m];
    const Eigen::MatrixXd km = regressor_matrix(p[m], th, nd.net, nd.g, nd.cov);
    s.k.middleRows(r, km.rows()) = km;
    s.y.segment(r, km.rows()) = nd.y;
    r += km.rows();
  }
  return s;
}

}  // namespace

TEST_CASE("pseudo-score matches central differences for every family") {
  std::mt19937_64 rng(1);
  const auto sample = small_sample(4, 10);
  const Dataset& data = sample.data;
  for (auto tag : test::kAllFamilies) {
    for (const auto link : {LinkFunction{LinkTag::logistic}, LinkFunction{LinkTag::standard_normal}}) {
      CAPTURE(family_name(tag));
      const Parameters th = random_parameters(data, ModelFamily{tag}, rng, link);
      const Beliefs p = random_beliefs(data, rng);
      const Eigen::VectorXd score = pseudo_score(th, p, data);
      const Eigen::VectorXd v = th.to_vector();
      Eigen::VectorXd fd(v.size());
      const double h = 1e-6;
      for (Eigen::Index c = 0; c < v.size(); ++c) {
        Parameters up = th, down = th;
        Eigen::VectorXd vu = v, vd = v;
        vu[c] += h;
        vd[c] -= h;
        up.assign(vu);
        down.assign(vd);
        fd[c] = (pseudo_loglik(up, p, data) - pseudo_loglik(down, p, data)) / (2.0 * h);
      }
      CHECK(test::max_relative_error(score, fd, 1e-3) <= 1e-6);
    }
  }
}

TEST_CASE("pseudo log-likelihood: fixed examples") {
  const auto sample = small_sample(3, 2);
  Dataset data = sample.data;
  const Beliefs p = data.constant_beliefs(0.5);
  Parameters th = parameters_for(data);
  const double n = static_cast<double>(data.node_count());
  CHECK(pseudo_loglik(th, p, data) == doctest::Approx(n / 3.0 * std::log(0.5)).epsilon(1e-14));
  for (auto& nd : data.networks) nd.y.setOnes();
  th.gamma0.setConstant(40.0);
  CHECK(pseudo_loglik(th, p, data) <= 0.0);
  CHECK(pseudo_loglik(th, p, data) >= -n * 1e-12);
}

TEST_CASE("inner maximization agrees with a textbook logit fit") {
  std::mt19937_64 rng(2);
  const auto sample = small_sample(10, 3);
  const Dataset& data = sample.data;
  for (auto tag : {FamilyTag::het_conformity, FamilyTag::spillover, FamilyTag::generalized}) {
    const Beliefs p = random_beliefs(data, rng);
    const Parameters start = parameters_for(data, ModelFamily{tag});
    const auto fit = inner_maximize(p, data, start);
    const Stacked s = stack_regressors(start, p, data);
    const Eigen::VectorXd ref = reference_logit(s.k, s.y);
    CHECK(test::max_abs(fit.theta.to_vector() - ref) <= 1e-7);
    CHECK(fit.gradient_norm <= 1e-8);
  }
}

TEST_CASE("collinear regressors raise IdentificationError") {
  auto sample = small_sample(5, 4);
  Dataset& data = sample.data;
  std::vector<Network> nets;
  std::vector<Eigen::MatrixXd> xs;
  std::vector<Eigen::VectorXd> ys;
  for (const auto& nd : data.networks) {
    nets.push_back(nd.net);
    Eigen::MatrixXd x(nd.cov.x.rows(), 2);
    x.col(0) = nd.cov.x.col(0);
    x.col(1) = 2.0 * nd.cov.x.col(0);
    xs.push_back(x);
    ys.push_back(nd.y);
  }
  const Dataset bad = Dataset::assemble(nets, xs, ys, {"a", "b"});
  CHECK_THROWS_AS(npl_estimate(bad), IdentificationError);
  CHECK_THROWS_AS(inner_maximize(bad.outcome_mean_beliefs(), bad, parameters_for(bad)),
                  IdentificationError);
}

TEST_CASE("peer effects are unidentified without network members") {
  std::vector<Network> nets{test::edges_network(6, {})};
  std::vector<Eigen::MatrixXd> xs{Eigen::MatrixXd::Random(6, 1)};
  std::vector<Eigen::VectorXd> ys{(Eigen::VectorXd(6) << 1, 0, 1, 1, 0, 0).finished()};
  const Dataset data = Dataset::assemble(nets, xs, ys);
  CHECK_THROWS_AS(npl_estimate(data), IdentificationError);
  const auto rep = identification_diagnostics(data, data.outcome_mean_beliefs());
  CHECK_FALSE(rep.full_rank());
  CHECK(rep.non_isolated_nodes == 0);
}

TEST_CASE("NPL output is a fixed point of both steps") {
  const auto sample = small_sample(40, 5);
  EstimationOptions opts;
  opts.outer_tol = 1e-10;
  const auto fit = npl_estimate(sample.data, opts);
  REQUIRE(fit.converged);
  CHECK(fit.method == "npl");
  // theta_hat maximizes the pseudo-likelihood at p_hat.
  const auto again = inner_maximize(fit.p_hat, sample.data, fit.theta_hat);
  CHECK(test::max_abs(again.theta.to_vector() - fit.theta_hat.to_vector()) <= 1e-8);
  // p_hat is a best response to itself.
  for (std::size_t m = 0; m < sample.data.network_count(); ++m) {
    const auto& nd = sample.data.networks[m];
    const Eigen::VectorXd br = best_response(fit.p_hat[m], fit.theta_hat, nd.net, nd.g, nd.cov);
    CHECK(test::max_abs(br - fit.p_hat[m]) <= 1e-9);
  }
  CHECK(fit.beta_l_hat == doctest::Approx(fit.theta_hat.beta_l()));
  CHECK(fit.names.size() == fit.theta_hat.size());
  CHECK(fit.loglik_total == doctest::Approx(fit.loglik * 40.0));
}

TEST_CASE("NPL does not depend on the starting beliefs") {
  const auto sample = small_sample(40, 6);
  EstimationOptions a;
  a.outer_tol = 1e-10;
  EstimationOptions b = a;
  std::mt19937_64 rng(60);
  b.p0 = random_beliefs(sample.data, rng);
  const auto fa = npl_estimate(sample.data, a);
  const auto fb = npl_estimate(sample.data, b);
  REQUIRE(fa.converged);
  REQUIRE(fb.converged);
  CHECK(test::max_abs(fa.theta_hat.to_vector() - fb.theta_hat.to_vector()) <= 1e-5);
}

TEST_CASE("outer iteration budget is reported, not thrown") {
  const auto sample = small_sample(10, 7);
  EstimationOptions opts;
  opts.max_outer = 1;
  opts.outer_tol = 1e-14;
  const auto fit = npl_estimate(sample.data, opts);
  CHECK_FALSE(fit.converged);
  CHECK(fit.trace.size() == 1);
}

TEST_CASE("variance without feedback is the logit inverse information") {
  const auto sample = small_sample(20, 8);
  const auto fit = npl_estimate(sample.data);
  const Eigen::MatrixXd v = npl_variance(fit.theta_hat, fit.p_hat, sample.data, false);
  const Stacked s = stack_regressors(fit.theta_hat, fit.p_hat, sample.data);
  const Eigen::ArrayXd mu = 1.0 / (1.0 + (-(s.k * fit.theta_hat.to_vector()).array()).exp());
  const Eigen::MatrixXd info = s.k.transpose() * (mu * (1.0 - mu)).matrix().asDiagonal() * s.k;
  const Eigen::MatrixXd ref = info.inverse();
  CHECK(test::max_relative_error(v, ref, 1e-6 * ref.cwiseAbs().maxCoeff()) <= 1e-6);
}

TEST_CASE("covariance matrices are symmetric positive semi-definite") {
  const auto sample = small_sample(30, 9);
  const auto npl = npl_estimate(sample.data);
  EstimationOptions opts;
  opts.theta0 = npl.theta_hat;
  const auto nfxp = nfxp_estimate(sample.data, opts);
  for (const Eigen::MatrixXd& v : {npl.vcov, nfxp.vcov}) {
    REQUIRE(v.rows() == static_cast<Eigen::Index>(npl.theta_hat.size()));
    CHECK(test::max_abs(v - v.transpose()) <= 1e-12 * test::max_abs(v));
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(
                                   0.5 * (v + v.transpose()), Eigen::EigenvaluesOnly)
                                   .eigenvalues();
    CHECK(ev.minCoeff() >= -1e-12 * ev.cwiseAbs().maxCoeff());
  }
  CHECK(npl.std_errors.size() == npl.vcov.rows());
  CHECK(npl.beta_l_se == doctest::Approx(beta_l_standard_error(npl.theta_hat, npl.vcov)));
}

TEST_CASE("NFXP beats NPL on the full likelihood") {
  const auto sample = small_sample(30, 10);
  const auto npl = npl_estimate(sample.data);
  EstimationOptions opts;
  opts.theta0 = npl.theta_hat;
  const auto nfxp = nfxp_estimate(sample.data, opts);
  REQUIRE(nfxp.converged);
  CHECK(nfxp.method == "nfxp");
  Beliefs p_npl;
  for (const auto& eq : solve_all(npl.theta_hat, sample.data)) p_npl.push_back(eq.p_star);
  CHECK(nfxp.loglik >= pseudo_loglik(npl.theta_hat, p_npl, sample.data) - 1e-9);
  // NFXP beliefs are the equilibrium of its own estimate.
  const auto eqs = solve_all(nfxp.theta_hat, sample.data);
  for (std::size_t m = 0; m < eqs.size(); ++m) {
    CHECK(test::max_abs(eqs[m].p_star - nfxp.p_hat[m]) <= 1e-8);
  }
}

TEST_CASE("identification: one friend each and complete graphs are deficient") {
  std::mt19937_64 rng(11);
  SUBCASE("every node has exactly one friend") {
    std::vector<Network> nets;
    std::vector<Eigen::MatrixXd> xs;
    for (int m = 0; m < 4; ++m) {
      std::vector<Edge> e;
      for (std::size_t i = 0; i < 10; ++i) e.emplace_back(i, (i + 1 + rng() % 9) % 10);
      nets.push_back(test::edges_network(10, e));
      xs.push_back(Eigen::MatrixXd::Random(10, 1));
    }
    const Dataset data = Dataset::assemble(nets, xs);
    Beliefs p;
    for (int m = 0; m < 4; ++m) p.push_back(test::random_probabilities(10, rng));
    const auto rep = identification_diagnostics(data, p);
    CHECK_FALSE(rep.full_rank());
    CHECK(rep.regressor_rank + 1 == rep.parameter_count);
  }
  SUBCASE("complete graphs") {
    std::vector<Network> nets;
    std::vector<Eigen::MatrixXd> xs;
    for (int m = 0; m < 4; ++m) {
      std::vector<Edge> e;
      for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 8; ++j) {
          if (i != j) e.emplace_back(i, j);
        }
      }
      nets.push_back(test::edges_network(8, e));
      xs.push_back(Eigen::MatrixXd::Random(8, 1));
    }
    const Dataset data = Dataset::assemble(nets, xs);
    Beliefs p;
    for (int m = 0; m < 4; ++m) p.push_back(test::random_probabilities(8, rng));
    const auto rep = identification_diagnostics(data, p);
    CHECK_FALSE(rep.full_rank());
    CHECK(rep.total_triads() == 0);
  }
  SUBCASE("random graphs with intransitive triads") {
    const auto sample = small_sample(10, 12);
    const auto rep = identification_diagnostics(sample.data, sample.data.outcome_mean_beliefs());
    CHECK(rep.full_rank());
    CHECK(rep.total_triads() > 0);
    CHECK(rep.triad_counts.size() == 10);
  }
}

TEST_CASE("NPL recovers the heterogeneous design") {
  const auto sample = small_sample(150, 13);
  const auto fit = npl_estimate(sample.data);
  REQUIRE(fit.converged);
  const auto names = fit.names;
  const Eigen::Index ih = static_cast<Eigen::Index>(names.size()) - 2;
  CHECK(std::abs(fit.theta_hat.beta_h - 1.0) <= 4.0 * fit.std_errors[ih]);
  CHECK(std::abs(fit.beta_l_hat - 2.0) <= 4.0 * fit.beta_l_se);
}

TEST_CASE("pseudo log-likelihood: two-node hand computation") {
  std::vector<Network> nets{test::edges_network(2, {{0, 1}, {1, 0}})};
  std::vector<Eigen::MatrixXd> xs{Eigen::MatrixXd(2, 0)};
  std::vector<Eigen::VectorXd> ys{Eigen::Vector2d(1.0, 0.0)};
  const Dataset data = Dataset::assemble(nets, xs, ys);
  Parameters th = parameters_for(data);
  th.gamma0[0] = 0.3;
  th.beta_h = 1.0;
  th.delta_beta = 1.0;
  // index_0 = 0.3 + (0.7 - 0.5) + 0.5 * (0.49 + 0.21) = 0.85
  // index_1 = 0.3 + (0.2 - 0.5) + 0.5 * (0.04 + 0.16) = 0.10
  const Beliefs p{Eigen::Vector2d(0.2, 0.7)};
  const double expected = std::log(1.0 / (1.0 + std::exp(-0.85))) +
                          std::log(1.0 - 1.0 / (1.0 + std::exp(-0.10)));
  CHECK(pseudo_loglik(th, p, data) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("an isolated-only network's fixed effect is the logit of its mean") {
  const auto sample = small_sample(6, 14);
  std::vector<Network> nets;
  std::vector<Eigen::MatrixXd> xs;
  std::vector<Eigen::VectorXd> ys;
  for (const auto& nd : sample.data.networks) {
    nets.push_back(nd.net);
    xs.emplace_back(nd.cov.x.rows(), 0);
    ys.push_back(nd.y);
  }
  nets.push_back(test::edges_network(8, {}));
  xs.emplace_back(8, 0);
  ys.push_back((Eigen::VectorXd(8) << 1, 0, 0, 1, 1, 0, 1, 1).finished());
  const Dataset data = Dataset::assemble(nets, xs, ys);
  const auto fit = inner_maximize(data.outcome_mean_beliefs(), data, parameters_for(data));
  CHECK(fit.theta.gamma0[6] == doctest::Approx(std::log(5.0 / 3.0)).epsilon(1e-9));
}
