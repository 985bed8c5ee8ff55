#pragma once

// Synthetic many-network samples drawn from the structural model.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "peerconf/dataset.hpp"
#include "peerconf/equilibrium.hpp"
#include "peerconf/graph.hpp"
#include "peerconf/model.hpp"

namespace peerconf {

struct EdgeRule {
  enum class Kind { erdos_renyi, fixed_out_degree };
  Kind kind = Kind::erdos_renyi;
  double p_link = 0.05;        // erdos_renyi: probability of each ordered pair
  std::size_t out_degree = 2;  // fixed_out_degree: distinct targets per node

  static EdgeRule erdos_renyi(double p);
  static EdgeRule fixed_out_degree(std::size_t d);
  // "er:0.05" or "out:3".
  static EdgeRule parse(std::string_view text);
  std::string to_string() const;
};

struct SizeRange {
  std::size_t min = 50;
  std::size_t max = 50;
  // "50" or "40-60".
  static SizeRange parse(std::string_view text);
};

// Directed graphs, reproducible given `seed`. Network m uses its own stream.
// Guarantees that some node has out-degree >= 2, redrawing the whole sample
// with a fresh stream family when no node does. Throws Error for infeasible
// requests (d >= n, M == 0, sizes below 1).
std::vector<Network> generate_networks(std::size_t count, SizeRange sizes,
                                       EdgeRule rule, std::uint64_t seed);

enum class CovariateKind { gaussian, poisson };

struct CovariateColumn {
  std::string name;
  CovariateKind kind = CovariateKind::gaussian;
  double poisson_mean = 2.0;
};

// Data-generating design. The defaults are ours: one standard normal column,
// one Poisson(2) count, fixed effects uniform on [-1.5, -0.5].
struct SimulationDesign {
  std::size_t networks = 100;
  SizeRange sizes{};
  EdgeRule edges{};
  std::vector<CovariateColumn> covariates{{"x1", CovariateKind::gaussian, 0.0},
                                          {"x2", CovariateKind::poisson, 2.0}};
  double gamma0_low = -1.5;
  double gamma0_high = -0.5;
  Eigen::VectorXd gamma1 = Eigen::Vector2d(-0.4, 0.2);
  Eigen::VectorXd gamma2 = Eigen::Vector2d(0.5, 0.3);
  double beta_h = 1.0;
  double beta_l = 2.0;
  ModelFamily family{};
  LinkFunction link{};
};

struct SimulatedOutcomes {
  std::vector<Eigen::VectorXd> y;
  std::vector<EquilibriumProfile> equilibria;
  std::vector<std::string> warnings;
};

struct SyntheticDataset {
  Dataset data;
  Parameters truth;
  std::vector<EquilibriumProfile> equilibria;
  std::vector<std::string> warnings;
  std::uint64_t seed = 0;
};

// Covariates for the given networks (no outcomes attached).
Dataset draw_covariates(std::vector<Network> nets,
                        const std::vector<CovariateColumn>& columns,
                        std::uint64_t seed);

// Solves p* per network, then y_i = 1{index_i(p*) - eta_i > 0} with eta_i
// drawn from the link distribution. Uncertified parameters produce a warning.
SimulatedOutcomes simulate_outcomes(const Parameters& params, const Dataset& data,
                                    std::uint64_t seed,
                                    const SolverOptions& opts = {});

// Reference path: y_i ~ Bernoulli(p*_i) by direct coin flips.
std::vector<Eigen::VectorXd> bernoulli_outcomes(
    const std::vector<EquilibriumProfile>& equilibria, std::uint64_t seed);

// Parameters of `design` with fixed effects drawn for every network.
Parameters design_parameters(const SimulationDesign& design, std::uint64_t seed);

// Networks, covariates, parameters and outcomes in one call.
SyntheticDataset simulate_dataset(const SimulationDesign& design, std::uint64_t seed,
                                  const SolverOptions& opts = {});

}  // namespace peerconf
