#pragma once

// A sample of independent networks: graph, weights, covariates and (optionally)
// observed binary outcomes for every node.

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peerconf/graph.hpp"
#include "peerconf/model.hpp"

namespace peerconf {

struct NetworkData {
  Network net;
  InteractionMatrix g;
  CovariateBundle cov;
  Eigen::VectorXd y;  // empty when outcomes are not observed

  std::size_t size() const noexcept { return net.size(); }
};

struct Dataset {
  std::vector<NetworkData> networks;
  std::vector<std::string> covariate_names;

  // Builds G and the contextual averages for every network. `x[m]` is n_m x K;
  // `y` may be empty or hold one 0/1 vector per network.
  static Dataset assemble(std::vector<Network> nets, std::vector<Eigen::MatrixXd> x,
                          std::vector<Eigen::VectorXd> y = {},
                          std::vector<std::string> covariate_names = {});

  std::size_t network_count() const noexcept { return networks.size(); }
  std::size_t node_count() const noexcept;
  std::size_t covariate_count() const noexcept { return covariate_names.size(); }
  bool has_outcomes() const noexcept;
  std::vector<std::string> network_ids() const;

  // Per-network outcome means, the default starting beliefs for estimation.
  std::vector<Eigen::VectorXd> outcome_mean_beliefs() const;
  std::vector<Eigen::VectorXd> constant_beliefs(double value) const;
};

// Zero-initialized parameters shaped for `data`.
Parameters parameters_for(const Dataset& data, ModelFamily family = {},
                          LinkFunction link = {});

}  // namespace peerconf
