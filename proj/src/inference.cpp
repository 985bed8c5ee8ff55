#include "peerconf/inference.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "peerconf/error.hpp"

namespace peerconf {

double chi_square_survival(double x, int dof) {
  if (dof < 1) throw Error("chi-square degrees of freedom must be at least 1");
  if (!(x >= 0.0)) throw Error("chi-square statistic must be nonnegative");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

std::string_view significance_stars(double p_value) noexcept {
  if (p_value < 0.001) return "***";
  if (p_value < 0.01) return "**";
  if (p_value < 0.05) return "*";
  return "";
}

TestResult lr_test(double loglik_restricted, double loglik_full, int dof, double alpha) {
  double stat = 2.0 * (loglik_full - loglik_restricted);
  if (!std::isfinite(stat)) throw Error("likelihood-ratio statistic is not finite");
  if (stat < -1e-8) {
    std::ostringstream msg;
    msg << "likelihood-ratio statistic " << stat
        << " is negative: the restricted model is not nested in the full model";
    throw IdentificationError(msg.str());
  }
  stat = std::max(stat, 0.0);
  TestResult t;
  t.statistic = stat;
  t.dof = dof;
  t.p_value = chi_square_survival(stat, dof);
  t.null_description = "restricted model holds";
  t.alpha = alpha;
  return t;
}

TestResult lr_test_normalized(double loglik_restricted, double loglik_full,
                              std::size_t networks, int dof, double alpha) {
  const double m = static_cast<double>(networks);
  return lr_test(m * loglik_restricted, m * loglik_full, dof, alpha);
}

TestResult wald_linear_restriction(const Eigen::VectorXd& theta,
                                   const Eigen::MatrixXd& vcov, const Eigen::MatrixXd& R,
                                   const Eigen::VectorXd& r,
                                   std::string null_description, double alpha) {
  if (R.cols() != theta.size() || vcov.rows() != theta.size() ||
      vcov.cols() != theta.size() || r.size() != R.rows() || R.rows() == 0) {
    throw DimensionError("Wald test: restriction, covariance and estimate do not conform");
  }
  const Eigen::VectorXd diff = R * theta - r;
  const Eigen::MatrixXd middle = R * vcov * R.transpose();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(middle);
  if (!lu.isInvertible() || lu.rank() < R.rows()) {
    throw IdentificationError("Wald test: R V R' is singular for restriction '" +
                              (null_description.empty() ? std::string("unnamed")
                                                        : null_description) +
                              "'");
  }
  TestResult t;
  t.statistic = std::max(0.0, diff.dot(lu.solve(diff)));
  t.dof = static_cast<int>(R.rows());
  t.p_value = chi_square_survival(t.statistic, t.dof);
  t.null_description = std::move(null_description);
  t.alpha = alpha;
  return t;
}

double wald_z(double estimate, double se, double null_value) {
  if (!(se > 0.0)) throw Error("standard error must be positive");
  return (estimate - null_value) / se;
}

std::string_view spillover_test_caveat() noexcept {
  return "beta3 = 0 is also implied by conformity with a linear or aggregate "
         "distance function, so this test does not tell those models apart from "
         "the spillover model";
}

SpecificationTests specification_tests(const EstimationResult& fit, double alpha) {
  if (fit.theta_hat.family.tag != FamilyTag::generalized) {
    throw Error("specification tests need a fit of the generalized family");
  }
  const auto p = static_cast<Eigen::Index>(fit.theta_hat.size());
  if (fit.vcov.rows() != p) throw Error("specification tests need a covariance matrix");
  const Eigen::VectorXd theta = fit.theta_hat.to_vector();
  const Eigen::Index b1 = p - 3;
  const Eigen::Index b2 = p - 2;
  const Eigen::Index b3 = p - 1;

  SpecificationTests out;
  Eigen::MatrixXd rc = Eigen::MatrixXd::Zero(1, p);
  rc(0, b1) = 1.0;
  rc(0, b2) = 2.0;
  out.conformity = wald_linear_restriction(theta, fit.vcov, rc, Eigen::VectorXd::Zero(1),
                                           "beta1 = -2*beta2", alpha);
  Eigen::MatrixXd rs = Eigen::MatrixXd::Zero(1, p);
  rs(0, b3) = 1.0;
  out.spillover = wald_linear_restriction(theta, fit.vcov, rs, Eigen::VectorXd::Zero(1),
                                          "beta3 = 0", alpha);

  std::ostringstream level;
  level << alpha * 100.0 << "%";
  const bool conf_ok = !out.conformity.reject();
  const bool spill_ok = !out.spillover.reject();
  out.conformity_conclusion =
      conf_ok ? "The conformity model is consistent with the data (beta1 = -2*beta2 not "
                "rejected at the " + level.str() + " level)."
              : "The conformity model is rejected (beta1 = -2*beta2 rejected at the " +
                    level.str() + " level).";
  out.spillover_conclusion =
      spill_ok ? "The spillover model is consistent with the data (beta3 = 0 not rejected "
                 "at the " + level.str() + " level)."
               : "The spillover model is rejected (beta3 = 0 rejected at the " +
                     level.str() + " level).";
  if (conf_ok && !spill_ok) {
    out.overall_conclusion = "Only the conformity model is consistent with the data.";
  } else if (!conf_ok && spill_ok) {
    out.overall_conclusion = "Only the spillover model is consistent with the data.";
  } else if (conf_ok && spill_ok) {
    out.overall_conclusion = "Neither model is rejected; the data do not discriminate.";
  } else {
    out.overall_conclusion = "Both models are rejected.";
  }
  out.caveat = std::string(spillover_test_caveat());
  return out;
}

double norm_derivative(double beta_h, double delta_beta, double pbar, double p) noexcept {
  return (beta_h + delta_beta * pbar) * p * (1.0 - p);
}

namespace {

void require_logistic(const Parameters& theta) {
  if (theta.link.tag() != LinkTag::logistic) {
    throw Error("marginal effects of the norm are available for the logistic link only");
  }
}

}  // namespace

NormEffects marginal_effect_of_norm(const Parameters& theta, const Eigen::VectorXd& p_hat,
                                    const Network& net, const InteractionMatrix& g,
                                    const CovariateBundle& cov) {
  require_logistic(theta);
  const Eigen::VectorXd slope = norm_slope(p_hat, theta, net, g);
  const Eigen::VectorXd prob = best_response(p_hat, theta, net, g, cov);
  NormEffects e;
  const auto n = p_hat.size();
  e.derivative = Eigen::VectorXd::Zero(n);
  e.one_friend = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (net.isolated(iu)) continue;
    e.derivative[i] = slope[i] * prob[i] * (1.0 - prob[i]);
    e.one_friend[i] = e.derivative[i] / static_cast<double>(net.degree(iu));
    e.average_derivative += e.derivative[i];
    e.average_one_friend += e.one_friend[i];
    ++e.non_isolated;
  }
  if (e.non_isolated > 0) {
    e.average_derivative /= static_cast<double>(e.non_isolated);
    e.average_one_friend /= static_cast<double>(e.non_isolated);
  }
  e.average_derivative_se = e.average_one_friend_se =
      std::numeric_limits<double>::quiet_NaN();
  return e;
}

NormEffects marginal_effect_of_norm(const Parameters& theta, const Beliefs& p_hat,
                                    const Dataset& data, const Eigen::MatrixXd& vcov) {
  require_logistic(theta);
  if (p_hat.size() != data.network_count()) {
    throw DimensionError("one belief vector per network required");
  }
  const auto dim = static_cast<Eigen::Index>(theta.size());
  const bool with_se = vcov.size() != 0;
  if (with_se && (vcov.rows() != dim || vcov.cols() != dim)) {
    throw DimensionError("covariance matrix does not match the parameter vector");
  }
  const auto q = static_cast<Eigen::Index>(theta.family.peer_count());
  NormEffects total;
  Eigen::Index nodes = 0;
  for (const auto& nd : data.networks) nodes += static_cast<Eigen::Index>(nd.size());
  total.derivative.resize(nodes);
  total.one_friend.resize(nodes);
  Eigen::VectorXd grad_avg = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd grad_one = Eigen::VectorXd::Zero(dim);
  Eigen::Index offset = 0;
  for (std::size_t m = 0; m < data.network_count(); ++m) {
    const auto& nd = data.networks[m];
    const auto e = marginal_effect_of_norm(theta, p_hat[m], nd.net, nd.g, nd.cov);
    const auto n = static_cast<Eigen::Index>(nd.size());
    total.derivative.segment(offset, n) = e.derivative;
    total.one_friend.segment(offset, n) = e.one_friend;
    offset += n;
    total.average_derivative += e.average_derivative * static_cast<double>(e.non_isolated);
    total.average_one_friend += e.average_one_friend * static_cast<double>(e.non_isolated);
    total.non_isolated += e.non_isolated;
    if (!with_se) continue;
    // The slope is linear in the peer coefficients, so unit steps give exact
    // partial derivatives.
    const Eigen::VectorXd slope = norm_slope(p_hat[m], theta, nd.net, nd.g);
    Eigen::MatrixXd dslope(n, q);
    for (Eigen::Index j = 0; j < q; ++j) {
      Parameters moved = theta;
      Eigen::VectorXd peer = theta.peer();
      peer[j] += 1.0;
      moved.set_peer(peer);
      dslope.col(j) = norm_slope(p_hat[m], moved, nd.net, nd.g) - slope;
    }
    const Eigen::MatrixXd k = regressor_matrix(p_hat[m], theta, nd.net, nd.g, nd.cov);
    const Eigen::VectorXd prob = best_response(p_hat[m], theta, nd.net, nd.g, nd.cov);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (nd.net.isolated(static_cast<std::size_t>(i))) continue;
      const double v = prob[i] * (1.0 - prob[i]);
      Eigen::VectorXd gi = slope[i] * (1.0 - 2.0 * prob[i]) * v * k.row(i).transpose();
      gi.tail(q) += v * dslope.row(i).transpose();
      grad_avg += gi;
      grad_one += gi / static_cast<double>(nd.net.degree(static_cast<std::size_t>(i)));
    }
  }
  if (total.non_isolated > 0) {
    const double c = static_cast<double>(total.non_isolated);
    total.average_derivative /= c;
    total.average_one_friend /= c;
    grad_avg /= c;
    grad_one /= c;
  }
  if (with_se && total.non_isolated > 0) {
    total.average_derivative_se = std::sqrt(std::max(0.0, grad_avg.dot(vcov * grad_avg)));
    total.average_one_friend_se = std::sqrt(std::max(0.0, grad_one.dot(vcov * grad_one)));
  } else {
    total.average_derivative_se = total.average_one_friend_se =
        std::numeric_limits<double>::quiet_NaN();
  }
  return total;
}

}  // namespace peerconf
