#pragma once

// Pseudo-likelihood estimation: the sequential NPL estimator, the nested
// fixed-point (NFXP) maximum likelihood alternative, the NPL sandwich variance
// and identification diagnostics.
//
// Parameter vectors follow Parameters::to_vector(): (gamma0, gamma1, gamma2,
// peer coefficients). Log-likelihoods are normalized by the number of networks
// M unless a name says otherwise.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "peerconf/dataset.hpp"
#include "peerconf/equilibrium.hpp"
#include "peerconf/model.hpp"

namespace peerconf {

using Beliefs = std::vector<Eigen::VectorXd>;

inline constexpr double kProbabilityClamp = 1e-12;

// (1/M) sum_i [y_i ln Gamma_i + (1 - y_i) ln(1 - Gamma_i)] with Gamma evaluated
// at (theta, p) and clamped to [1e-12, 1 - 1e-12].
double pseudo_loglik(const Parameters& theta, const Beliefs& p, const Dataset& data);

// Gradient of pseudo_loglik in theta (beliefs held fixed).
Eigen::VectorXd pseudo_score(const Parameters& theta, const Beliefs& p,
                             const Dataset& data);

struct InnerOptions {
  double grad_tol = 1e-8;  // sup norm of the normalized gradient
  std::size_t max_iter = 200;
};

struct InnerResult {
  Parameters theta;
  double loglik = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

// argmax_theta pseudo_loglik(theta, p_fixed) by Fisher scoring (Newton for the
// logistic link) with step halving. The family and link of `theta0` are used.
// Throws IdentificationError when the regressors are rank deficient and
// ConvergenceError when the gradient test fails after max_iter steps.
InnerResult inner_maximize(const Beliefs& p_fixed, const Dataset& data,
                           const Parameters& theta0, const InnerOptions& opts = {});

struct IdentificationReport {
  std::size_t parameter_count = 0;
  std::size_t regressor_rank = 0;
  double max_singular_value = 0.0;
  double min_singular_value = 0.0;
  std::vector<std::size_t> triad_counts;     // per network
  std::vector<std::size_t> triad_starts;     // nodes starting a triad, per network
  std::vector<std::size_t> isolated_counts;  // per network
  std::size_t non_isolated_nodes = 0;
  // Per covariate: gamma1_k * gamma2_k >= 0 and gamma2_k != 0. Empty when no
  // fitted parameters were supplied.
  std::vector<bool> condition3;
  std::vector<std::string> notes;

  bool full_rank() const noexcept { return regressor_rank == parameter_count; }
  std::size_t total_triads() const noexcept;
};

// Numerical rank of sum_i k_i k_i' at beliefs p (threshold 1e-8 times the
// largest singular value) plus graph diagnostics. Never throws on deficiency.
IdentificationReport identification_diagnostics(
    const Dataset& data, const Beliefs& p, ModelFamily family = {},
    const std::optional<Parameters>& fitted = std::nullopt);

struct IterationRecord {
  std::size_t iteration = 0;
  double p_change = 0.0;  // sup norm; NFXP records the step length instead
  double loglik = 0.0;
};

struct EstimationResult {
  std::string method;
  Parameters theta_hat;
  Beliefs p_hat;
  double loglik = 0.0;          // normalized by M
  double loglik_total = 0.0;    // unnormalized sum over nodes
  double loglik_per_obs = 0.0;  // divided by node count
  Eigen::MatrixXd vcov;
  Eigen::VectorXd std_errors;
  double beta_l_hat = 0.0;
  double beta_l_se = 0.0;
  std::size_t outer_iterations = 0;
  bool converged = false;
  std::vector<IterationRecord> trace;
  IdentificationReport diagnostics;
  std::vector<std::string> names;
  std::size_t network_count = 0;
  std::size_t node_count = 0;
};

struct EstimationOptions {
  ModelFamily family{};
  LinkFunction link{};
  // Starting beliefs. Outcome means per network when unset.
  std::optional<Beliefs> p0;
  std::optional<Parameters> theta0;
  double outer_tol = 1e-6;
  std::size_t max_outer = 500;
  InnerOptions inner{};
  SolverOptions solver{};  // NFXP equilibrium solves
  bool compute_variance = true;
  // The rank part of the diagnostics costs O(P^3) in the parameter count P;
  // Monte Carlo loops switch it off.
  bool compute_diagnostics = true;
};

// Alternates inner_maximize at fixed beliefs with one best-response update
// until ||p^{k+1} - p^k|| < outer_tol. On return theta_hat maximizes the
// pseudo-likelihood at p_hat and ||Gamma(theta_hat, p_hat) - p_hat|| < tol.
// Hitting max_outer returns converged = false with the trace.
EstimationResult npl_estimate(const Dataset& data, const EstimationOptions& opts = {});

// Maximizes L(theta, p*(theta)) by Fisher scoring on the total derivative.
// Candidates outside the certified region are rejected by the line search.
// Starts from theta0 or the first NPL step at the starting beliefs.
EstimationResult nfxp_estimate(const Dataset& data, const EstimationOptions& opts = {});

// Sandwich H^{-1} Omega H^{-T} / M with
//   Omega = (1/M) sum_i w_i k_i k_i',
//   H     = Omega + (1/M) sum_i w_i k_i c_i' (I - grad_p Gamma)^{-1} grad_theta Gamma,
// c_i = d index_i / d p. With include_feedback = false the second term of H
// is dropped and the result is the inverse information.
// Throws CertificateError if I - grad_p Gamma is singular.
Eigen::MatrixXd npl_variance(const Parameters& theta_hat, const Beliefs& p_hat,
                             const Dataset& data, bool include_feedback = true);

// Inverse Fisher information of the full likelihood at p*(theta).
Eigen::MatrixXd nfxp_variance(const Parameters& theta_hat, const Beliefs& p_star,
                              const Dataset& data);

// Standard error of beta_l = beta_h + dbeta from the joint covariance.
double beta_l_standard_error(const Parameters& theta, const Eigen::MatrixXd& vcov);

}  // namespace peerconf
