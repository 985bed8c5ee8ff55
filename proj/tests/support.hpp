#pragma once

// Fixtures shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "peerconf/dataset.hpp"
#include "peerconf/equilibrium.hpp"
#include "peerconf/graph.hpp"
#include "peerconf/model.hpp"

namespace peerconf::test {

inline constexpr FamilyTag kAllFamilies[] = {
    FamilyTag::het_conformity, FamilyTag::hom_conformity,       FamilyTag::spillover,
    FamilyTag::generalized,    FamilyTag::aggregate_conformity, FamilyTag::linear_conformity,
};

inline Network edges_network(std::size_t n, std::vector<Edge> edges, bool undirected = false) {
  return Network::from_edges("net", n, edges, {}, undirected);
}

inline Network random_graph(std::size_t n, double p_link, std::mt19937_64& rng) {
  std::bernoulli_distribution link(p_link);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && link(rng)) edges.emplace_back(i, j);
    }
  }
  return edges_network(n, edges);
}

inline Eigen::VectorXd random_probabilities(std::size_t n, std::mt19937_64& rng,
                                            double lo = 0.02, double hi = 0.98) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  for (auto& v : p) v = u(rng);
  return p;
}

// One network with K Gaussian covariates and parameters of `family`.
struct Instance {
  Dataset data;
  Parameters params;

  const NetworkData& nd() const { return data.networks.front(); }
  const Network& net() const { return nd().net; }
  const InteractionMatrix& g() const { return nd().g; }
  const CovariateBundle& cov() const { return nd().cov; }
  std::size_t size() const { return nd().size(); }
};

inline Instance make_instance(Network net, std::mt19937_64& rng, ModelFamily family = {},
                              double beta_h = 1.0, double delta_beta = 1.0,
                              LinkFunction link = {}, std::size_t k = 2) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(net.size()), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = z(rng);
  std::vector<Network> nets{std::move(net)};
  std::vector<Eigen::MatrixXd> xs{std::move(x)};
  Instance inst{Dataset::assemble(std::move(nets), std::move(xs)), {}};
  inst.params = parameters_for(inst.data, family, link);
  inst.params.gamma0[0] = 0.3 * z(rng);
  for (Eigen::Index c = 0; c < inst.params.gamma1.size(); ++c) {
    inst.params.gamma1[c] = 0.4 * z(rng);
    inst.params.gamma2[c] = 0.4 * z(rng);
  }
  if (family.tag == FamilyTag::generalized) {
    inst.params.family.beta1 = beta_h;
    inst.params.family.beta2 = -0.5 * beta_h;
    inst.params.family.beta3 = 0.5 * delta_beta;
  } else {
    inst.params.beta_h = beta_h;
    inst.params.delta_beta = family.tag == FamilyTag::hom_conformity ? 0.0 : delta_beta;
  }
  return inst;
}

inline Instance random_instance(std::size_t n, double p_link, std::mt19937_64& rng,
                                ModelFamily family = {}, double beta_h = 1.0,
                                double delta_beta = 1.0, LinkFunction link = {}) {
  return make_instance(random_graph(n, p_link, rng), rng, family, beta_h, delta_beta, link);
}

inline double max_abs(const Eigen::MatrixXd& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Central differences of the best response in p.
inline Eigen::MatrixXd fd_jacobian(const Instance& inst, const Eigen::VectorXd& p,
                                   double h = 1e-6) {
  const auto n = p.size();
  Eigen::MatrixXd j(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::VectorXd up = p, down = p;
    up[c] += h;
    down[c] -= h;
    j.col(c) = (best_response(up, inst.params, inst.net(), inst.g(), inst.cov()) -
                best_response(down, inst.params, inst.net(), inst.g(), inst.cov())) /
               (2.0 * h);
  }
  return j;
}

// Largest entrywise |a - b| / max(|b|, floor).
inline double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                 double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(b.data()[i]), floor);
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / scale);
  }
  return worst;
}

}  // namespace peerconf::test
