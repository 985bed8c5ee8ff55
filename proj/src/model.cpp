#include "peerconf/model.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "peerconf/error.hpp"

namespace peerconf {

// ---------------------------------------------------------------------------
// Link functions

std::string_view LinkFunction::name() const noexcept {
  return tag_ == LinkTag::logistic ? "logistic" : "standard_normal";
}

LinkFunction LinkFunction::parse(std::string_view name) {
  if (name == "logistic" || name == "logit") return LinkFunction(LinkTag::logistic);
  if (name == "standard_normal" || name == "normal" || name == "probit") {
    return LinkFunction(LinkTag::standard_normal);
  }
  throw ParseError("unknown link function '" + std::string(name) + "'");
}

double LinkFunction::cdf(double u) const noexcept {
  if (tag_ == LinkTag::logistic) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
  }
  return 0.5 * std::erfc(-u / std::numbers::sqrt2);
}

double LinkFunction::pdf(double u) const noexcept {
  if (tag_ == LinkTag::logistic) {
    const double e = std::exp(-std::abs(u));
    return e / ((1.0 + e) * (1.0 + e));
  }
  return std::exp(-0.5 * u * u) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

double LinkFunction::max_density() const noexcept {
  if (tag_ == LinkTag::logistic) return 0.25;
  return 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
}

double LinkFunction::quantile(double q) const {
  if (!(q > 0.0 && q < 1.0)) throw Error("link quantile requires q in (0, 1)");
  if (tag_ == LinkTag::logistic) return std::log(q / (1.0 - q));
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
}

double certificate_threshold(LinkFunction link) noexcept {
  return 1.0 / link.max_density();
}

// ---------------------------------------------------------------------------
// Families and parameters

std::string_view family_name(FamilyTag tag) noexcept {
  switch (tag) {
    case FamilyTag::het_conformity: return "het_conformity";
    case FamilyTag::hom_conformity: return "hom_conformity";
    case FamilyTag::spillover: return "spillover";
    case FamilyTag::generalized: return "generalized";
    case FamilyTag::aggregate_conformity: return "aggregate_conformity";
    case FamilyTag::linear_conformity: return "linear_conformity";
  }
  return "unknown";
}

ModelFamily ModelFamily::parse(std::string_view name) {
  for (auto tag : {FamilyTag::het_conformity, FamilyTag::hom_conformity,
                   FamilyTag::spillover, FamilyTag::generalized,
                   FamilyTag::aggregate_conformity, FamilyTag::linear_conformity}) {
    if (family_name(tag) == name) return ModelFamily{tag};
  }
  if (name == "aggregate_conformity_adjacency") {
    ModelFamily f{FamilyTag::aggregate_conformity};
    f.weights = AggregateWeights::adjacency;
    return f;
  }
  throw ParseError("unknown model family '" + std::string(name) + "'");
}

std::size_t ModelFamily::peer_count() const noexcept {
  switch (tag) {
    case FamilyTag::hom_conformity: return 1;
    case FamilyTag::generalized: return 3;
    default: return 2;
  }
}

std::vector<std::string> ModelFamily::peer_names() const {
  switch (tag) {
    case FamilyTag::hom_conformity: return {"beta"};
    case FamilyTag::generalized: return {"beta1", "beta2", "beta3"};
    default: return {"beta_h", "delta_beta"};
  }
}

Parameters Parameters::zeros(std::size_t networks, std::size_t covariates,
                             ModelFamily family, LinkFunction link) {
  Parameters p;
  p.gamma0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(networks));
  p.gamma1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(covariates));
  p.gamma2 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(covariates));
  p.family = family;
  p.link = link;
  return p;
}

Eigen::VectorXd Parameters::peer() const {
  switch (family.tag) {
    case FamilyTag::hom_conformity: return Eigen::VectorXd::Constant(1, beta_h);
    case FamilyTag::generalized:
      return Eigen::Vector3d(family.beta1, family.beta2, family.beta3);
    default: return Eigen::Vector2d(beta_h, delta_beta);
  }
}

void Parameters::set_peer(const Eigen::VectorXd& values) {
  if (static_cast<std::size_t>(values.size()) != family.peer_count()) {
    throw DimensionError("family '" + std::string(family.name()) + "' expects " +
                         std::to_string(family.peer_count()) +
                         " peer coefficients");
  }
  switch (family.tag) {
    case FamilyTag::hom_conformity:
      beta_h = values[0];
      delta_beta = 0.0;
      break;
    case FamilyTag::generalized:
      family.beta1 = values[0];
      family.beta2 = values[1];
      family.beta3 = values[2];
      break;
    default:
      beta_h = values[0];
      delta_beta = values[1];
  }
}

std::size_t Parameters::size() const noexcept {
  return static_cast<std::size_t>(gamma0.size() + gamma1.size() + gamma2.size()) +
         family.peer_count();
}

Eigen::VectorXd Parameters::to_vector() const {
  Eigen::VectorXd theta(static_cast<Eigen::Index>(size()));
  theta << gamma0, gamma1, gamma2, peer();
  return theta;
}

void Parameters::assign(const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != size()) {
    throw DimensionError("parameter vector has " + std::to_string(theta.size()) +
                         " entries, expected " + std::to_string(size()));
  }
  const auto m = gamma0.size();
  const auto k = gamma1.size();
  gamma0 = theta.segment(0, m);
  gamma1 = theta.segment(m, k);
  gamma2 = theta.segment(m + k, k);
  set_peer(theta.tail(static_cast<Eigen::Index>(family.peer_count())));
}

std::vector<std::string> Parameters::names(
    const std::vector<std::string>& network_ids,
    const std::vector<std::string>& covariates) const {
  std::vector<std::string> out;
  out.reserve(size());
  for (Eigen::Index m = 0; m < gamma0.size(); ++m) {
    const auto idx = static_cast<std::size_t>(m);
    out.push_back("gamma0[" +
                  (idx < network_ids.size() ? network_ids[idx] : std::to_string(m)) +
                  "]");
  }
  for (const char* prefix : {"gamma1[", "gamma2["}) {
    for (Eigen::Index k = 0; k < gamma1.size(); ++k) {
      const auto idx = static_cast<std::size_t>(k);
      out.push_back(prefix +
                    (idx < covariates.size() ? covariates[idx]
                                             : "x" + std::to_string(k + 1)) +
                    "]");
    }
  }
  for (auto& n : family.peer_names()) out.push_back(n);
  return out;
}

void Parameters::validate() const {
  if (gamma1.size() != gamma2.size()) {
    throw DimensionError("gamma1 and gamma2 must have the same length");
  }
}

// ---------------------------------------------------------------------------
// Covariates and the index

CovariateBundle CovariateBundle::build(std::size_t network_index,
                                       std::size_t network_count,
                                       Eigen::MatrixXd x,
                                       const InteractionMatrix& g) {
  if (network_index >= network_count) {
    throw DimensionError("network index out of range");
  }
  if (static_cast<std::size_t>(x.rows()) != g.size()) {
    throw DimensionError("covariate rows do not match network size");
  }
  CovariateBundle c;
  c.network_index = network_index;
  c.network_count = network_count;
  c.xbar = g.multiply(x);
  c.x = std::move(x);
  return c;
}

NormTerms norm_terms(const Eigen::VectorXd& p, const InteractionMatrix& g) {
  const auto n = static_cast<std::size_t>(p.size());
  if (n != g.size()) throw DimensionError("belief vector does not match network size");
  Eigen::VectorXd v = p.array() * (1.0 - p.array());
  NormTerms t{Eigen::VectorXd(p.size()), Eigen::VectorXd(p.size())};
  Eigen::VectorXd second(p.size());
  g.row_moments({p.data(), n}, {v.data(), n}, {t.pbar.data(), n},
                {second.data(), n});
  t.sigma = t.pbar.array().square() + second.array();
  return t;
}

Eigen::VectorXd alpha(const CovariateBundle& cov, const Parameters& params) {
  if (params.network_count() != cov.network_count) {
    throw DimensionError("gamma0 has " + std::to_string(params.network_count()) +
                         " entries but data has " +
                         std::to_string(cov.network_count) + " networks");
  }
  if (params.covariate_count() != cov.covariate_count() ||
      params.gamma2.size() != params.gamma1.size()) {
    throw DimensionError("covariate coefficient length does not match data");
  }
  Eigen::VectorXd a = cov.x * params.gamma1 + cov.xbar * params.gamma2;
  a.array() += params.gamma0[static_cast<Eigen::Index>(cov.network_index)];
  return a;
}

namespace {

Eigen::VectorXd indicator(const Network& net) {
  Eigen::VectorXd ind(static_cast<Eigen::Index>(net.size()));
  for (std::size_t i = 0; i < net.size(); ++i) {
    ind[static_cast<Eigen::Index>(i)] = net.isolated(i) ? 0.0 : 1.0;
  }
  return ind;
}

Eigen::VectorXd weighted_sum(const Eigen::VectorXd& p, const ModelFamily& family,
                             const Network& net, const InteractionMatrix& g) {
  const auto n = static_cast<std::size_t>(p.size());
  Eigen::VectorXd wp(p.size());
  if (family.weights == AggregateWeights::adjacency) {
    adjacency_weights(net).multiply({p.data(), n}, {wp.data(), n});
  } else {
    g.multiply({p.data(), n}, {wp.data(), n});
  }
  return wp;
}

}  // namespace

IndexCoefficients index_coefficients(const Parameters& params) {
  const double bh = params.beta_h;
  const double db = params.delta_beta;
  switch (params.family.tag) {
    case FamilyTag::het_conformity: return {bh, 0.5 * db, 0.0};
    case FamilyTag::hom_conformity: return {bh, 0.0, 0.0};
    case FamilyTag::spillover:
    case FamilyTag::linear_conformity: return {2.0 * bh + db, 0.0, 0.0};
    case FamilyTag::generalized:
      return {params.family.beta1, params.family.beta3, 0.0};
    case FamilyTag::aggregate_conformity: return {0.0, 0.0, bh + 0.5 * db};
  }
  throw Error("unknown model family tag");
}

namespace {

void check_beliefs(const Eigen::VectorXd& p, const Network& net,
                   const InteractionMatrix& g) {
  if (static_cast<std::size_t>(p.size()) != net.size() || g.size() != net.size()) {
    throw DimensionError("belief vector, network and interaction matrix sizes differ");
  }
}

}  // namespace

Eigen::MatrixXd peer_columns(const Eigen::VectorXd& p, const ModelFamily& family,
                             const Network& net, const InteractionMatrix& g) {
  check_beliefs(p, net, g);
  const Eigen::VectorXd ind = indicator(net);
  const auto n = p.size();
  Eigen::MatrixXd c(n, static_cast<Eigen::Index>(family.peer_count()));
  if (family.tag == FamilyTag::aggregate_conformity) {
    const Eigen::VectorXd wp = weighted_sum(p, family, net, g);
    c.col(0) = wp - 0.5 * ind;
    c.col(1) = 0.5 * wp;
    return c;
  }
  const NormTerms t = norm_terms(p, g);
  switch (family.tag) {
    case FamilyTag::het_conformity:
      c.col(0) = ind.cwiseProduct((t.pbar.array() - 0.5).matrix());
      c.col(1) = 0.5 * t.sigma;
      break;
    case FamilyTag::hom_conformity:
      c.col(0) = ind.cwiseProduct((t.pbar.array() - 0.5).matrix());
      break;
    case FamilyTag::spillover:
      c.col(0) = 2.0 * t.pbar - ind;
      c.col(1) = t.pbar - ind;
      break;
    case FamilyTag::generalized:
      c.col(0) = t.pbar;
      c.col(1) = ind;
      c.col(2) = t.sigma;
      break;
    case FamilyTag::linear_conformity:
      c.col(0) = 2.0 * t.pbar - ind;
      c.col(1) = t.pbar;
      break;
    default: throw Error("unknown model family tag");
  }
  return c;
}

Eigen::VectorXd best_response_index(const Eigen::VectorXd& p,
                                    const Parameters& params, const Network& net,
                                    const InteractionMatrix& g,
                                    const CovariateBundle& cov) {
  Eigen::VectorXd idx = alpha(cov, params);
  if (static_cast<std::size_t>(idx.size()) != net.size()) {
    throw DimensionError("covariates do not match network size");
  }
  idx += peer_columns(p, params.family, net, g) * params.peer();
  return idx;
}

Eigen::VectorXd best_response(const Eigen::VectorXd& p, const Parameters& params,
                              const Network& net, const InteractionMatrix& g,
                              const CovariateBundle& cov) {
  Eigen::VectorXd idx = best_response_index(p, params, net, g, cov);
  for (Eigen::Index i = 0; i < idx.size(); ++i) idx[i] = params.link.cdf(idx[i]);
  return idx;
}

Eigen::MatrixXd index_jacobian(const Eigen::VectorXd& p, const Parameters& params,
                               const Network& net, const InteractionMatrix& g) {
  check_beliefs(p, net, g);
  const auto n = static_cast<std::size_t>(p.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(p.size(), p.size());
  const auto co = index_coefficients(params);
  if (co.c != 0.0) {
    const InteractionMatrix w = params.family.weights == AggregateWeights::adjacency
                                    ? adjacency_weights(net)
                                    : g;
    for (std::size_t i = 0; i < n; ++i) {
      const auto cols = w.row_cols(i);
      const auto vals = w.row_vals(i);
      for (std::size_t k = 0; k < cols.size(); ++k) {
        jac(static_cast<Eigen::Index>(i), cols[k]) = co.c * vals[k];
      }
    }
    return jac;
  }
  Eigen::VectorXd pbar(p.size());
  g.multiply({p.data(), n}, {pbar.data(), n});
  for (std::size_t i = 0; i < n; ++i) {
    const auto cols = g.row_cols(i);
    const auto vals = g.row_vals(i);
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double gij = vals[k];
      const double pj = p[cols[k]];
      jac(ii, cols[k]) =
          co.a * gij + co.b * (2.0 * pbar[ii] * gij + gij * gij * (1.0 - 2.0 * pj));
    }
  }
  return jac;
}

Eigen::MatrixXd jacobian_wrt_p(const Eigen::VectorXd& p, const Parameters& params,
                               const Network& net, const InteractionMatrix& g,
                               const CovariateBundle& cov) {
  const Eigen::VectorXd idx = best_response_index(p, params, net, g, cov);
  Eigen::MatrixXd jac = index_jacobian(p, params, net, g);
  for (Eigen::Index i = 0; i < idx.size(); ++i) jac.row(i) *= params.link.pdf(idx[i]);
  return jac;
}

Eigen::VectorXd norm_slope(const Eigen::VectorXd& p, const Parameters& params,
                           const Network& net, const InteractionMatrix& g) {
  check_beliefs(p, net, g);
  const auto co = index_coefficients(params);
  const NormTerms t = norm_terms(p, g);
  Eigen::VectorXd slope(p.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (net.isolated(i)) {
      slope[ii] = 0.0;
      continue;
    }
    const double w_scale =
        params.family.weights == AggregateWeights::adjacency
            ? static_cast<double>(net.degree(i))
            : 1.0;
    slope[ii] = co.a + 2.0 * co.b * t.pbar[ii] + co.c * w_scale;
  }
  return slope;
}

Certificate contraction_bound(const Parameters& params, double max_weight_row_sum) {
  const auto co = index_coefficients(params);
  const double row_sum = params.family.tag == FamilyTag::aggregate_conformity &&
                                 params.family.weights == AggregateWeights::adjacency
                             ? max_weight_row_sum
                             : 1.0;
  const double lipschitz =
      std::abs(co.a) + 3.0 * std::abs(co.b) + std::abs(co.c) * row_sum;
  Certificate c;
  c.bound_value = lipschitz * params.link.max_density();
  c.satisfied = c.bound_value < 1.0;
  return c;
}

Eigen::MatrixXd regressor_matrix(const Eigen::VectorXd& p, const Parameters& params,
                                 const Network& net, const InteractionMatrix& g,
                                 const CovariateBundle& cov) {
  const auto n = p.size();
  if (static_cast<std::size_t>(n) != cov.size()) {
    throw DimensionError("covariates do not match network size");
  }
  const auto m = static_cast<Eigen::Index>(cov.network_count);
  const auto k = static_cast<Eigen::Index>(cov.covariate_count());
  const auto q = static_cast<Eigen::Index>(params.family.peer_count());
  Eigen::MatrixXd reg = Eigen::MatrixXd::Zero(n, m + 2 * k + q);
  reg.col(static_cast<Eigen::Index>(cov.network_index)).setOnes();
  reg.middleCols(m, k) = cov.x;
  reg.middleCols(m + k, k) = cov.xbar;
  reg.rightCols(q) = peer_columns(p, params.family, net, g);
  return reg;
}

}  // namespace peerconf
