#pragma once

// Likelihood-ratio and Wald tests, the specification tests on the generalized
// reduced form, and marginal effects of the local norm.

#include <cstddef>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "peerconf/dataset.hpp"
#include "peerconf/estimate.hpp"
#include "peerconf/model.hpp"

namespace peerconf {

// P(chi2_dof > x). Throws Error for dof < 1 or x < 0.
double chi_square_survival(double x, int dof);

// "***" below 0.001, "**" below 0.01, "*" below 0.05, otherwise empty.
std::string_view significance_stars(double p_value) noexcept;

struct TestResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  std::string null_description;
  double alpha = 0.05;

  bool reject() const noexcept { return p_value < alpha; }
};

// 2 (ll_full - ll_restricted) on unnormalized log-likelihoods. Statistics
// below -1e-8 mean the models are not nested (or the fits failed) and throw.
TestResult lr_test(double loglik_restricted, double loglik_full, int dof,
                   double alpha = 0.05);

// Same test from log-likelihoods normalized by the number of networks.
TestResult lr_test_normalized(double loglik_restricted, double loglik_full,
                              std::size_t networks, int dof, double alpha = 0.05);

// (R theta - r)' (R V R')^{-1} (R theta - r) against chi2 with rows(R) dof.
// Throws IdentificationError if R V R' is singular.
TestResult wald_linear_restriction(const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& vcov, const Eigen::MatrixXd& R,
                                   const Eigen::VectorXd& r,
                                   std::string null_description = {},
                                   double alpha = 0.05);

// (estimate - null_value) / se.
double wald_z(double estimate, double se, double null_value = 0.0);

struct SpecificationTests {
  TestResult conformity;  // beta1 = -2 beta2
  TestResult spillover;   // beta3 = 0
  std::string conformity_conclusion;
  std::string spillover_conclusion;
  std::string overall_conclusion;
  std::string caveat;
};

// Both restrictions on one fit of the generalized family. Throws Error for
// any other family or a fit without covariance.
SpecificationTests specification_tests(const EstimationResult& generalized_fit,
                                       double alpha = 0.05);

// The caveat attached to the beta3 = 0 test.
std::string_view spillover_test_caveat() noexcept;

// Slope of the best response in the norm for the heterogeneous family:
// (beta_h + dbeta * pbar) * p (1 - p).
double norm_derivative(double beta_h, double delta_beta, double pbar, double p) noexcept;

struct NormEffects {
  Eigen::VectorXd derivative;  // d p_i / d pbar_i, zero on isolated nodes
  Eigen::VectorXd one_friend;  // derivative / d_i
  double average_derivative = 0.0;
  double average_one_friend = 0.0;
  double average_derivative_se = 0.0;  // delta method, NaN without vcov
  double average_one_friend_se = 0.0;
  std::size_t non_isolated = 0;
};

// Per-node effects for one network: 1{d_i>0} * slope_i * Gamma_i (1 - Gamma_i)
// with Gamma evaluated at p_hat. Logistic link only (throws otherwise).
NormEffects marginal_effect_of_norm(const Parameters& theta, const Eigen::VectorXd& p_hat,
                                    const Network& net, const InteractionMatrix& g,
                                    const CovariateBundle& cov);

// Sample-wide effects; averages run over non-isolated nodes of every network.
// With a covariance matrix the averages get delta-method standard errors.
NormEffects marginal_effect_of_norm(const Parameters& theta, const Beliefs& p_hat,
                                    const Dataset& data,
                                    const Eigen::MatrixXd& vcov = {});

}  // namespace peerconf
