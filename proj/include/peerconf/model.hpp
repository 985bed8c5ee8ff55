#pragma once

// Parameters, link functions and the best-response index of every supported
// model family, together with its analytic Jacobian and contraction bound.
//
// All families share the index
//
//   index_i(p) = alpha_i + sum_r beta_r * c_ir(p)
//
// where alpha_i = gamma0[m] + x_i'gamma1 + xbar_i'gamma2 and the peer columns
// c_ir(p) are built from the local norm pbar_i = g_i p, the second moment
// s_i = g_i Sigma g_i' and the network-membership indicator 1{d_i > 0}:
//
//   family                 peer coefficients    peer columns
//   het_conformity         (beta_h, dbeta)      1{d>0}(pbar - 1/2), s/2
//   hom_conformity         (beta)               1{d>0}(pbar - 1/2)
//   spillover              (beta_h, dbeta)      2 pbar - 1{d>0}, pbar - 1{d>0}
//   generalized            (b1, b2, b3)         pbar, 1{d>0}, s
//   aggregate_conformity   (beta_h, dbeta)      Wp - 1{d>0}/2, Wp/2
//   linear_conformity      (beta_h, dbeta)      2 pbar - 1{d>0}, pbar
//
// with dbeta = beta_l - beta_h. W is G (default) or the raw adjacency A.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "peerconf/graph.hpp"

namespace peerconf {

enum class LinkTag { logistic, standard_normal };

class LinkFunction {
 public:
  constexpr LinkFunction() = default;
  constexpr explicit LinkFunction(LinkTag tag) : tag_(tag) {}

  LinkTag tag() const noexcept { return tag_; }
  std::string_view name() const noexcept;
  static LinkFunction parse(std::string_view name);

  double cdf(double u) const noexcept;
  double pdf(double u) const noexcept;
  // sup_u pdf(u): 1/4 for the logistic, 1/sqrt(2 pi) for the standard normal.
  double max_density() const noexcept;
  // Inverse cdf on (0, 1).
  double quantile(double q) const;

  friend bool operator==(LinkFunction, LinkFunction) = default;

 private:
  LinkTag tag_ = LinkTag::logistic;
};

enum class FamilyTag {
  het_conformity,
  hom_conformity,
  spillover,
  generalized,
  aggregate_conformity,
  linear_conformity,
};

enum class AggregateWeights { row_normalized, adjacency };

std::string_view family_name(FamilyTag tag) noexcept;

struct ModelFamily {
  FamilyTag tag = FamilyTag::het_conformity;
  // Peer coefficients of the generalized reduced form.
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta3 = 0.0;
  // Weight matrix of the aggregate family.
  AggregateWeights weights = AggregateWeights::row_normalized;

  static ModelFamily parse(std::string_view name);
  std::string_view name() const noexcept { return family_name(tag); }
  std::size_t peer_count() const noexcept;
  std::vector<std::string> peer_names() const;
};

struct Parameters {
  Eigen::VectorXd gamma0;  // one fixed effect per network
  Eigen::VectorXd gamma1;  // own characteristics
  Eigen::VectorXd gamma2;  // contextual averages
  double beta_h = 0.0;
  double delta_beta = 0.0;
  ModelFamily family;
  LinkFunction link;

  static Parameters zeros(std::size_t networks, std::size_t covariates,
                          ModelFamily family = {}, LinkFunction link = {});

  double beta_l() const noexcept { return beta_h + delta_beta; }
  std::size_t network_count() const noexcept {
    return static_cast<std::size_t>(gamma0.size());
  }
  std::size_t covariate_count() const noexcept {
    return static_cast<std::size_t>(gamma1.size());
  }

  // Peer coefficients in the order of the family's peer columns.
  Eigen::VectorXd peer() const;
  void set_peer(const Eigen::VectorXd& values);

  // Flat layout: (gamma0, gamma1, gamma2, peer).
  std::size_t size() const noexcept;
  Eigen::VectorXd to_vector() const;
  void assign(const Eigen::VectorXd& theta);

  // Names matching to_vector(), e.g. gamma0[net3], gamma1[x1], beta_h.
  std::vector<std::string> names(const std::vector<std::string>& network_ids = {},
                                 const std::vector<std::string>& covariates = {}) const;

  // Throws DimensionError unless gamma1 and gamma2 share a length.
  void validate() const;
};

// Covariates of one network: every node belongs to network `network_index`
// out of `network_count`, so the one-hot fixed-effect rows are implicit.
struct CovariateBundle {
  std::size_t network_index = 0;
  std::size_t network_count = 1;
  Eigen::MatrixXd x;     // n x K
  Eigen::MatrixXd xbar;  // n x K, equals G x

  static CovariateBundle build(std::size_t network_index,
                               std::size_t network_count, Eigen::MatrixXd x,
                               const InteractionMatrix& g);
  std::size_t size() const noexcept { return static_cast<std::size_t>(x.rows()); }
  std::size_t covariate_count() const noexcept {
    return static_cast<std::size_t>(x.cols());
  }
};

// Local norm and second moment s_i = pbar_i^2 + sum_j g_ij^2 p_j (1 - p_j).
struct NormTerms {
  Eigen::VectorXd pbar;
  Eigen::VectorXd sigma;
};

NormTerms norm_terms(const Eigen::VectorXd& p, const InteractionMatrix& g);

Eigen::VectorXd alpha(const CovariateBundle& cov, const Parameters& params);

// n x peer_count() matrix of peer columns evaluated at p.
Eigen::MatrixXd peer_columns(const Eigen::VectorXd& p, const ModelFamily& family,
                             const Network& net, const InteractionMatrix& g);

// Pre-link index for every node.
Eigen::VectorXd best_response_index(const Eigen::VectorXd& p,
                                    const Parameters& params, const Network& net,
                                    const InteractionMatrix& g,
                                    const CovariateBundle& cov);

// Gamma(p) = F(index(p)). Isolated nodes receive F(alpha_i).
Eigen::VectorXd best_response(const Eigen::VectorXd& p, const Parameters& params,
                              const Network& net, const InteractionMatrix& g,
                              const CovariateBundle& cov);

// The index Jacobian of every family has the form
//   d index_i / d p_j = a g_ij + b (2 pbar_i g_ij + g_ij^2 (1 - 2 p_j)) + c w_ij
// on non-isolated rows.
struct IndexCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

IndexCoefficients index_coefficients(const Parameters& params);

// d index_i / d p_j as a dense n x n matrix (no link density factor).
Eigen::MatrixXd index_jacobian(const Eigen::VectorXd& p, const Parameters& params,
                               const Network& net, const InteractionMatrix& g);

// d Gamma_i / d p_j = f(index_i) * d index_i / d p_j.
Eigen::MatrixXd jacobian_wrt_p(const Eigen::VectorXd& p, const Parameters& params,
                               const Network& net, const InteractionMatrix& g,
                               const CovariateBundle& cov);

// d index_i / d pbar_i holding the variance part of s_i fixed; for the
// heterogeneous family this is beta_h + dbeta * pbar_i on non-isolated nodes.
Eigen::VectorXd norm_slope(const Eigen::VectorXd& p, const Parameters& params,
                           const Network& net, const InteractionMatrix& g);

struct Certificate {
  double bound_value = 0.0;
  bool satisfied = false;
};

// Lipschitz bound of Gamma in the sup norm. For het_conformity this is
// (|beta_h| + 1.5 |dbeta|) * max f; satisfied iff strictly below one.
// `max_weight_row_sum` only matters for the aggregate family on raw adjacency.
Certificate contraction_bound(const Parameters& params,
                              double max_weight_row_sum = 1.0);

// Largest |beta_h| + 1.5 |dbeta| for which the certificate holds: 4 for the
// logistic link, sqrt(2 pi) for the standard normal.
double certificate_threshold(LinkFunction link) noexcept;

// Rows k_i = (m_i, x_i, xbar_i, c_i(p)); k_i' theta reproduces the index.
Eigen::MatrixXd regressor_matrix(const Eigen::VectorXd& p, const Parameters& params,
                                 const Network& net, const InteractionMatrix& g,
                                 const CovariateBundle& cov);

}  // namespace peerconf
