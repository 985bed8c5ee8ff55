#include "peerconf/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "parallel.hpp"
#include "peerconf/error.hpp"

namespace peerconf {
namespace {

// Columns of one network's regressors without the other networks' zero
// fixed-effect columns: (1, x, xbar, peer columns).
Eigen::MatrixXd local_regressors(const Eigen::VectorXd& p, const ModelFamily& family,
                                 const NetworkData& nd) {
  const auto n = static_cast<Eigen::Index>(nd.size());
  const auto k = static_cast<Eigen::Index>(nd.cov.covariate_count());
  const auto q = static_cast<Eigen::Index>(family.peer_count());
  Eigen::MatrixXd kl(n, 1 + 2 * k + q);
  kl.col(0).setOnes();
  kl.middleCols(1, k) = nd.cov.x;
  kl.middleCols(1 + k, k) = nd.cov.xbar;
  kl.rightCols(q) = peer_columns(p, family, nd.net, nd.g);
  return kl;
}

Eigen::VectorXd local_theta(const Parameters& th, std::size_t m) {
  const auto shared = static_cast<Eigen::Index>(th.size() - th.network_count());
  Eigen::VectorXd v(1 + shared);
  v[0] = th.gamma0[static_cast<Eigen::Index>(m)];
  v.tail(shared) = th.to_vector().tail(shared);
  return v;
}

void check_shapes(const Parameters& th, const Beliefs& p, const Dataset& data) {
  th.validate();
  if (th.network_count() != data.network_count()) {
    throw DimensionError("parameters carry " + std::to_string(th.network_count()) +
                         " fixed effects for " + std::to_string(data.network_count()) +
                         " networks");
  }
  if (th.covariate_count() != data.covariate_count()) {
    throw DimensionError("parameters carry " + std::to_string(th.covariate_count()) +
                         " covariate coefficients for " +
                         std::to_string(data.covariate_count()) + " covariates");
  }
  if (p.size() != data.network_count()) {
    throw DimensionError("one belief vector per network required");
  }
  for (std::size_t m = 0; m < p.size(); ++m) {
    if (static_cast<std::size_t>(p[m].size()) != data.networks[m].size()) {
      throw DimensionError("belief vector of network '" + data.networks[m].net.id() +
                           "' has the wrong length");
    }
  }
  if (!data.has_outcomes()) throw Error("estimation requires observed outcomes");
}

struct NodeTerms {
  double ll = 0.0;
  Eigen::VectorXd score;   // d ll_i / d index_i
  Eigen::VectorXd weight;  // E[score^2]
  Eigen::VectorXd density;
};

NodeTerms node_terms(const Eigen::VectorXd& idx, const Eigen::VectorXd& y,
                     LinkFunction link) {
  NodeTerms t;
  const auto n = idx.size();
  t.score.resize(n);
  t.weight.resize(n);
  t.density.resize(n);
  const bool logistic = link.tag() == LinkTag::logistic;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double F = link.cdf(idx[i]);
    const double f = link.pdf(idx[i]);
    const double Fc = std::clamp(F, kProbabilityClamp, 1.0 - kProbabilityClamp);
    t.ll += y[i] == 1.0 ? std::log(Fc) : std::log1p(-Fc);
    t.density[i] = f;
    if (logistic) {
      t.score[i] = y[i] - F;
      t.weight[i] = f;
    } else {
      const double v = Fc * (1.0 - Fc);
      t.score[i] = (y[i] - F) * f / v;
      t.weight[i] = f * f / v;
    }
  }
  return t;
}

// Symmetric system with one diagonal fixed-effect block:
//   [ diag(d)  c ] [df]   [gf]
//   [ c'       b ] [ds] = [gs]
struct Arrow {
  Eigen::VectorXd d;
  Eigen::MatrixXd c;
  Eigen::MatrixXd b;
  Eigen::VectorXd gf;
  Eigen::VectorXd gs;
  double ll = 0.0;

  Arrow(Eigen::Index m, Eigen::Index s)
      : d(Eigen::VectorXd::Zero(m)),
        c(Eigen::MatrixXd::Zero(m, s)),
        b(Eigen::MatrixXd::Zero(s, s)),
        gf(Eigen::VectorXd::Zero(m)),
        gs(Eigen::VectorXd::Zero(s)) {}

  void add(Eigen::Index m, const Eigen::MatrixXd& info, const Eigen::VectorXd& grad) {
    const auto s = b.rows();
    d[m] += info(0, 0);
    c.row(m) += info.block(0, 1, 1, s);
    b += info.bottomRightCorner(s, s);
    gf[m] += grad[0];
    gs += grad.tail(s);
  }

  double gradient_norm() const {
    double g = gf.size() ? gf.cwiseAbs().maxCoeff() : 0.0;
    if (gs.size()) g = std::max(g, gs.cwiseAbs().maxCoeff());
    return g;
  }

  Eigen::MatrixXd schur() const {
    const Eigen::VectorXd dinv = d.cwiseInverse();
    return b - c.transpose() * dinv.asDiagonal() * c;
  }

  // Newton direction; false if the system is not positive definite.
  bool solve(Eigen::VectorXd& step) const {
    if ((d.array() <= 0.0).any()) return false;
    const Eigen::VectorXd dinv = d.cwiseInverse();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(schur());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    const Eigen::VectorXd ds =
        ldlt.solve(gs - c.transpose() * dinv.cwiseProduct(gf));
    if (!ds.allFinite()) return false;
    step.resize(d.size() + ds.size());
    step.head(d.size()) = dinv.cwiseProduct(gf - c * ds);
    step.tail(ds.size()) = ds;
    return step.allFinite();
  }

  Eigen::MatrixXd dense() const {
    const auto m = d.size();
    const auto s = b.rows();
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(m + s, m + s);
    full.topLeftCorner(m, m) = d.asDiagonal();
    full.topRightCorner(m, s) = c;
    full.bottomLeftCorner(s, m) = c.transpose();
    full.bottomRightCorner(s, s) = b;
    return full;
  }

  // Inverse through the Schur complement.
  Eigen::MatrixXd inverse() const {
    const auto m = d.size();
    const auto s = b.rows();
    const Eigen::VectorXd dinv = d.cwiseInverse();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(schur());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw IdentificationError("information matrix is singular");
    }
    const Eigen::MatrixXd sinv = ldlt.solve(Eigen::MatrixXd::Identity(s, s));
    const Eigen::MatrixXd dc = dinv.asDiagonal() * c;  // D^{-1} C
    Eigen::MatrixXd inv(m + s, m + s);
    inv.topLeftCorner(m, m) = dc * sinv * dc.transpose();
    inv.topLeftCorner(m, m).diagonal() += dinv;
    inv.topRightCorner(m, s) = -dc * sinv;
    inv.bottomLeftCorner(s, m) = inv.topRightCorner(m, s).transpose();
    inv.bottomRightCorner(s, s) = sinv;
    return inv;
  }
};

// Per-network pieces reduced in network order for bit-stable sums.
struct NetworkContribution {
  double ll = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;
};

Arrow reduce(const std::vector<NetworkContribution>& parts, Eigen::Index shared) {
  Arrow a(static_cast<Eigen::Index>(parts.size()), shared);
  for (std::size_t m = 0; m < parts.size(); ++m) {
    a.ll += parts[m].ll;
    if (parts[m].grad.size()) a.add(static_cast<Eigen::Index>(m), parts[m].info, parts[m].grad);
  }
  return a;
}

Eigen::Index shared_count(const Parameters& th) {
  return static_cast<Eigen::Index>(th.size() - th.network_count());
}

// Unnormalized log-likelihood, score and information at fixed beliefs.
Arrow pseudo_system(const Parameters& th, const Beliefs& p, const Dataset& data,
                    bool derivatives) {
  std::vector<NetworkContribution> parts(data.network_count());
  detail::parallel_for(parts.size(), [&](std::size_t m) {
    const auto& nd = data.networks[m];
    const Eigen::MatrixXd kl = local_regressors(p[m], th.family, nd);
    const Eigen::VectorXd idx = kl * local_theta(th, m);
    const NodeTerms t = node_terms(idx, nd.y, th.link);
    parts[m].ll = t.ll;
    if (derivatives) {
      parts[m].grad = kl.transpose() * t.score;
      parts[m].info = kl.transpose() * t.weight.asDiagonal() * kl;
    }
  });
  return reduce(parts, shared_count(th));
}

double total_loglik(const Parameters& th, const Beliefs& p, const Dataset& data) {
  return pseudo_system(th, p, data, false).ll;
}

std::vector<std::string> parameter_names(const Parameters& th, const Dataset& data) {
  return th.names(data.network_ids(), data.covariate_names);
}

// Rank test on the unweighted cross product, using the fixed-effect block
// structure: full rank iff the within-network Schur complement is.
void require_full_rank(const Parameters& th, const Beliefs& p, const Dataset& data) {
  const Eigen::Index s = shared_count(th);
  Arrow a(static_cast<Eigen::Index>(data.network_count()), s);
  for (std::size_t m = 0; m < data.network_count(); ++m) {
    const Eigen::MatrixXd kl = local_regressors(p[m], th.family, data.networks[m]);
    a.add(static_cast<Eigen::Index>(m), kl.transpose() * kl, Eigen::VectorXd::Zero(1 + s));
  }
  const auto names = parameter_names(th, data);
  const auto m = static_cast<std::size_t>(a.d.size());
  for (Eigen::Index j = 0; j < a.d.size(); ++j) {
    if (a.d[j] <= 0.0) {
      throw IdentificationError("network '" + data.networks[static_cast<std::size_t>(j)].net.id() +
                                "' has no nodes");
    }
  }
  if (s == 0) return;
  const Eigen::MatrixXd sc = a.schur();
  Eigen::VectorXd scale(s);
  for (Eigen::Index j = 0; j < s; ++j) {
    const double tol = 1e-12 * std::max(1.0, a.b(j, j));
    if (sc(j, j) <= tol) {
      throw IdentificationError("regressor '" + names[m + static_cast<std::size_t>(j)] +
                                "' does not vary within networks; it is collinear with "
                                "the fixed effects (run `diagnose` for details)");
    }
    scale[j] = 1.0 / std::sqrt(sc(j, j));
  }
  const Eigen::MatrixXd corr = scale.asDiagonal() * sc * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  if (eig.eigenvalues()[0] < 1e-10) {
    Eigen::Index worst = 0;
    eig.eigenvectors().col(0).cwiseAbs().maxCoeff(&worst);
    throw IdentificationError(
        "regressors are rank deficient (smallest scaled eigenvalue " +
        std::to_string(eig.eigenvalues()[0]) + "); '" +
        names[m + static_cast<std::size_t>(worst)] +
        "' is a linear combination of other columns (run `diagnose` for details)");
  }
}

Parameters start_parameters(const Dataset& data, const EstimationOptions& opts) {
  if (!opts.theta0) return parameters_for(data, opts.family, opts.link);
  const Parameters& given = *opts.theta0;
  if (given.network_count() != data.network_count() ||
      given.covariate_count() != data.covariate_count()) {
    throw DimensionError("starting parameters do not match the data");
  }
  Parameters th = given;
  th.family = opts.family;
  th.link = opts.link;
  // Peer coefficients carry over only within the same family.
  if (given.family.tag == opts.family.tag) {
    th.set_peer(given.peer());
  } else {
    th.beta_h = th.delta_beta = 0.0;
    th.set_peer(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(th.family.peer_count())));
  }
  return th;
}

Beliefs update_beliefs(const Parameters& th, const Beliefs& p, const Dataset& data) {
  Beliefs out(p.size());
  detail::parallel_for(p.size(), [&](std::size_t m) {
    const auto& nd = data.networks[m];
    out[m] = best_response(p[m], th, nd.net, nd.g, nd.cov);
  });
  return out;
}

double sup_distance(const Beliefs& a, const Beliefs& b) {
  double d = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    if (a[m].size()) d = std::max(d, (a[m] - b[m]).lpNorm<Eigen::Infinity>());
  }
  return d;
}

void finalize(EstimationResult& r, const Dataset& data, double ll_total,
              bool diagnostics) {
  const double m = static_cast<double>(data.network_count());
  r.network_count = data.network_count();
  r.node_count = data.node_count();
  r.loglik_total = ll_total;
  r.loglik = ll_total / m;
  r.loglik_per_obs = ll_total / static_cast<double>(std::max<std::size_t>(1, r.node_count));
  r.names = parameter_names(r.theta_hat, data);
  const auto tag = r.theta_hat.family.tag;
  r.beta_l_hat = tag == FamilyTag::generalized ? std::numeric_limits<double>::quiet_NaN()
                                               : r.theta_hat.beta_l();
  r.std_errors = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(r.theta_hat.size()),
                                           std::numeric_limits<double>::quiet_NaN());
  r.beta_l_se = std::numeric_limits<double>::quiet_NaN();
  if (r.vcov.size()) {
    r.std_errors = r.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
    r.beta_l_se = beta_l_standard_error(r.theta_hat, r.vcov);
  }
  if (diagnostics) {
    r.diagnostics = identification_diagnostics(data, r.p_hat, r.theta_hat.family, r.theta_hat);
  }
}

}  // namespace

double pseudo_loglik(const Parameters& theta, const Beliefs& p, const Dataset& data) {
  check_shapes(theta, p, data);
  return total_loglik(theta, p, data) / static_cast<double>(data.network_count());
}

Eigen::VectorXd pseudo_score(const Parameters& theta, const Beliefs& p,
                             const Dataset& data) {
  check_shapes(theta, p, data);
  const Arrow a = pseudo_system(theta, p, data, true);
  Eigen::VectorXd g(a.gf.size() + a.gs.size());
  g << a.gf, a.gs;
  return g / static_cast<double>(data.network_count());
}

InnerResult inner_maximize(const Beliefs& p_fixed, const Dataset& data,
                           const Parameters& theta0, const InnerOptions& opts) {
  check_shapes(theta0, p_fixed, data);
  require_full_rank(theta0, p_fixed, data);
  const double m = static_cast<double>(data.network_count());
  InnerResult r;
  r.theta = theta0;
  Eigen::VectorXd theta = theta0.to_vector();
  Parameters cand = theta0;
  for (;;) {
    const Arrow a = pseudo_system(r.theta, p_fixed, data, true);
    r.loglik = a.ll / m;
    r.gradient_norm = a.gradient_norm() / m;
    if (r.gradient_norm < opts.grad_tol) return r;
    if (r.iterations >= opts.max_iter) break;
    Eigen::VectorXd step;
    if (!a.solve(step)) {
      throw IdentificationError("information matrix is singular at the current estimate");
    }
    bool accepted = false;
    double t = 1.0;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      cand.assign(theta + t * step);
      const double ll = total_loglik(cand, p_fixed, data);
      if (std::isfinite(ll) && ll >= a.ll - 1e-13 * std::abs(a.ll)) {
        accepted = true;
        break;
      }
    }
    ++r.iterations;
    if (!accepted) break;
    theta = cand.to_vector();
    r.theta = cand;
  }
  std::ostringstream msg;
  msg << "pseudo-likelihood maximization stopped after " << r.iterations
      << " steps with gradient norm " << r.gradient_norm;
  throw ConvergenceError(msg.str());
}

std::size_t IdentificationReport::total_triads() const noexcept {
  std::size_t t = 0;
  for (auto c : triad_counts) t += c;
  return t;
}

IdentificationReport identification_diagnostics(const Dataset& data, const Beliefs& p,
                                                ModelFamily family,
                                                const std::optional<Parameters>& fitted) {
  IdentificationReport rep;
  Parameters shape = parameters_for(data, family);
  if (fitted) shape.family = fitted->family;
  rep.parameter_count = shape.size();
  const Eigen::Index s = shared_count(shape);
  Arrow a(static_cast<Eigen::Index>(data.network_count()), s);
  std::size_t deg2 = 0;
  for (std::size_t m = 0; m < data.network_count(); ++m) {
    const auto& nd = data.networks[m];
    const Eigen::VectorXd pm =
        m < p.size() && static_cast<std::size_t>(p[m].size()) == nd.size()
            ? p[m]
            : Eigen::VectorXd::Constant(static_cast<Eigen::Index>(nd.size()), 0.5);
    const Eigen::MatrixXd kl = local_regressors(pm, shape.family, nd);
    a.add(static_cast<Eigen::Index>(m), kl.transpose() * kl, Eigen::VectorXd::Zero(1 + s));
    const auto triads = intransitive_start_indicator(nd.net);
    rep.triad_counts.push_back(triads.triad_count);
    std::size_t starts = 0;
    for (auto v : triads.starts) starts += v;
    rep.triad_starts.push_back(starts);
    rep.isolated_counts.push_back(nd.net.isolated_count());
    rep.non_isolated_nodes += nd.size() - nd.net.isolated_count();
    if (nd.net.max_degree() >= 2) ++deg2;
  }
  const Eigen::MatrixXd xtx = a.dense();
  // Symmetric positive semidefinite: singular values are |eigenvalues|.
  const Eigen::VectorXd sv =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(xtx, Eigen::EigenvaluesOnly)
          .eigenvalues()
          .cwiseAbs();
  rep.max_singular_value = sv.size() ? sv.maxCoeff() : 0.0;
  rep.min_singular_value = sv.size() ? sv.minCoeff() : 0.0;
  const double threshold = 1e-8 * rep.max_singular_value;
  rep.regressor_rank = static_cast<std::size_t>((sv.array() > threshold).count());

  if (rep.non_isolated_nodes == 0) {
    rep.notes.emplace_back("no non-isolated nodes; peer parameters unidentified");
  }
  if (deg2 == 0) {
    rep.notes.emplace_back("no node has more than one friend; the norm and variance "
                           "terms are collinear");
  }
  if (rep.total_triads() == 0) {
    rep.notes.emplace_back("no intransitive triads; contextual and endogenous effects "
                           "are not separated by network structure");
  }
  if (!rep.full_rank()) {
    rep.notes.emplace_back("regressor cross product is rank deficient (rank " +
                           std::to_string(rep.regressor_rank) + " of " +
                           std::to_string(rep.parameter_count) + ")");
  }
  if (family.tag == FamilyTag::aggregate_conformity ||
      family.tag == FamilyTag::linear_conformity) {
    std::size_t iso = 0;
    for (auto c : rep.isolated_counts) iso += c;
    if (iso == 0) {
      rep.notes.emplace_back("this family separates beta_h from beta_l only through "
                             "isolated nodes, and the sample has none");
    }
  }
  if (fitted) {
    for (Eigen::Index k = 0; k < fitted->gamma1.size(); ++k) {
      const double g1 = fitted->gamma1[k];
      const double g2 = fitted->gamma2[k];
      rep.condition3.push_back(g1 * g2 >= 0.0 && g2 != 0.0);
    }
  }
  return rep;
}

EstimationResult npl_estimate(const Dataset& data, const EstimationOptions& opts) {
  EstimationResult r;
  r.method = "npl";
  Beliefs p = opts.p0 ? *opts.p0 : data.outcome_mean_beliefs();
  Parameters theta = start_parameters(data, opts);
  check_shapes(theta, p, data);
  InnerResult inner;
  for (std::size_t k = 1; k <= opts.max_outer; ++k) {
    inner = inner_maximize(p, data, theta, opts.inner);
    theta = inner.theta;
    Beliefs next = update_beliefs(theta, p, data);
    const double change = sup_distance(next, p);
    r.trace.push_back({k, change, inner.loglik});
    r.outer_iterations = k;
    if (change < opts.outer_tol) {
      r.converged = true;
      break;
    }
    p = std::move(next);
  }
  if (!r.converged) {
    // The last inner step was taken at the current p; keep the pair aligned.
    inner = inner_maximize(p, data, theta, opts.inner);
    theta = inner.theta;
  }
  r.theta_hat = theta;
  r.p_hat = std::move(p);
  if (opts.compute_variance) {
    try {
      r.vcov = npl_variance(r.theta_hat, r.p_hat, data);
    } catch (const Error& e) {
      r.vcov.resize(0, 0);
      r.diagnostics.notes.emplace_back(std::string("variance unavailable: ") + e.what());
    }
  }
  auto notes = std::move(r.diagnostics.notes);
  finalize(r, data, inner.loglik * static_cast<double>(data.network_count()),
           opts.compute_diagnostics);
  r.diagnostics.notes.insert(r.diagnostics.notes.end(), notes.begin(), notes.end());
  return r;
}

namespace {

struct NfxpState {
  Parameters theta;
  Beliefs p_star;
  double ll = 0.0;  // unnormalized
};

bool certified_everywhere(const Parameters& th, const Dataset& data) {
  for (const auto& nd : data.networks) {
    if (!network_certificate(th, nd.net).satisfied) return false;
  }
  return true;
}

// Solves every network warm-started from `warm`; false on solver failure.
bool solve_state(NfxpState& st, const Dataset& data, const Beliefs& warm,
                 const SolverOptions& solver) {
  st.p_star.assign(data.network_count(), {});
  bool ok = true;
  detail::parallel_for(data.network_count(), [&](std::size_t m) {
    const auto& nd = data.networks[m];
    SolverOptions o = solver;
    o.verify_uncertified = false;
    o.p0 = warm[m];
    try {
      st.p_star[m] = solve_fixed_point(st.theta, nd.net, nd.g, nd.cov, o).p_star;
    } catch (const ConvergenceError&) {
      ok = false;
    }
  });
  if (!ok) return false;
  st.ll = total_loglik(st.theta, st.p_star, data);
  return std::isfinite(st.ll);
}

// Score and information of the full likelihood: the regressors are replaced by
// the total derivative of the index, k_i + c_i' (I - J)^{-1} diag(f) K.
Arrow nfxp_system(const Parameters& th, const Beliefs& p_star, const Dataset& data) {
  std::vector<NetworkContribution> parts(data.network_count());
  detail::parallel_for(parts.size(), [&](std::size_t m) {
    const auto& nd = data.networks[m];
    const Eigen::MatrixXd kl = local_regressors(p_star[m], th.family, nd);
    const Eigen::VectorXd idx = kl * local_theta(th, m);
    const NodeTerms t = node_terms(idx, nd.y, th.link);
    const Eigen::MatrixXd cidx = index_jacobian(p_star[m], th, nd.net, nd.g);
    Eigen::MatrixXd a = -(t.density.asDiagonal() * cidx);
    a.diagonal().array() += 1.0;
    const Eigen::MatrixXd dp =
        Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(t.density.asDiagonal() * kl);
    const Eigen::MatrixXd total = kl + cidx * dp;
    parts[m].ll = t.ll;
    parts[m].grad = total.transpose() * t.score;
    parts[m].info = total.transpose() * t.weight.asDiagonal() * total;
  });
  return reduce(parts, shared_count(th));
}

}  // namespace

EstimationResult nfxp_estimate(const Dataset& data, const EstimationOptions& opts) {
  EstimationResult r;
  r.method = "nfxp";
  const Beliefs p0 = opts.p0 ? *opts.p0 : data.outcome_mean_beliefs();
  const double m = static_cast<double>(data.network_count());
  SolverOptions solver = opts.solver;
  solver.tol = std::min(solver.tol, 1e-12);

  NfxpState st;
  st.theta = opts.theta0 ? start_parameters(data, opts)
                         : inner_maximize(p0, data, start_parameters(data, opts), opts.inner)
                               .theta;
  check_shapes(st.theta, p0, data);
  // Pull the start into the certified region along the peer coefficients.
  for (int shrink = 0; shrink < 60 && !certified_everywhere(st.theta, data); ++shrink) {
    st.theta.set_peer(0.5 * st.theta.peer());
  }
  if (!certified_everywhere(st.theta, data)) {
    throw CertificateError("no certified starting point for the nested fixed-point search");
  }
  if (!solve_state(st, data, p0, solver)) {
    throw ConvergenceError("equilibrium solve failed at the starting parameters");
  }

  NfxpState cand;
  for (std::size_t it = 1; it <= opts.inner.max_iter; ++it) {
    const Arrow a = nfxp_system(st.theta, st.p_star, data);
    const double gnorm = a.gradient_norm() / m;
    r.outer_iterations = it - 1;
    if (gnorm < opts.inner.grad_tol) {
      r.converged = true;
      break;
    }
    Eigen::VectorXd step;
    if (!a.solve(step)) {
      throw IdentificationError("full-likelihood information matrix is singular");
    }
    const Eigen::VectorXd base = st.theta.to_vector();
    bool accepted = false;
    double t = 1.0;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      cand.theta = st.theta;
      cand.theta.assign(base + t * step);
      if (!certified_everywhere(cand.theta, data)) continue;
      if (!solve_state(cand, data, st.p_star, solver)) continue;
      if (cand.ll >= st.ll - 1e-13 * std::abs(st.ll)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Flat to rounding: accept the point if the gradient is already small.
      r.converged = gnorm < 1e3 * opts.inner.grad_tol;
      break;
    }
    r.trace.push_back({it, t * step.lpNorm<Eigen::Infinity>(), cand.ll / m});
    std::swap(st, cand);
  }
  if (!r.converged && r.outer_iterations + 1 >= opts.inner.max_iter) {
    r.outer_iterations = opts.inner.max_iter;
  }
  if (!r.converged) {
    double bound = 0.0;
    for (const auto& nd : data.networks) {
      bound = std::max(bound, network_certificate(st.theta, nd.net).bound_value);
    }
    if (bound > 1.0 - 1e-6) {
      r.diagnostics.notes.emplace_back(
          "the likelihood rises toward the boundary of the certified region (bound " +
          std::to_string(bound) + "); no interior maximum");
    }
  }
  r.theta_hat = st.theta;
  r.p_hat = st.p_star;
  if (opts.compute_variance) {
    try {
      r.vcov = nfxp_variance(r.theta_hat, r.p_hat, data);
    } catch (const Error& e) {
      r.vcov.resize(0, 0);
      r.diagnostics.notes.emplace_back(std::string("variance unavailable: ") + e.what());
    }
  }
  auto notes = std::move(r.diagnostics.notes);
  finalize(r, data, st.ll, opts.compute_diagnostics);
  r.diagnostics.notes.insert(r.diagnostics.notes.end(), notes.begin(), notes.end());
  return r;
}

Eigen::MatrixXd npl_variance(const Parameters& theta_hat, const Beliefs& p_hat,
                             const Dataset& data, bool include_feedback) {
  check_shapes(theta_hat, p_hat, data);
  const auto mcount = static_cast<Eigen::Index>(data.network_count());
  const Eigen::Index s = shared_count(theta_hat);
  const Eigen::Index dim = mcount + s;
  struct Part {
    Eigen::MatrixXd omega;
    Eigen::MatrixXd feedback;
  };
  std::vector<Part> parts(data.network_count());
  detail::parallel_for(parts.size(), [&](std::size_t m) {
    const auto& nd = data.networks[m];
    const Eigen::MatrixXd kl = local_regressors(p_hat[m], theta_hat.family, nd);
    const Eigen::VectorXd idx = kl * local_theta(theta_hat, m);
    const NodeTerms t = node_terms(idx, nd.y, theta_hat.link);
    const Eigen::MatrixXd wk = t.weight.asDiagonal() * kl;
    parts[m].omega = kl.transpose() * wk;
    if (!include_feedback) return;
    const Eigen::MatrixXd cidx = index_jacobian(p_hat[m], theta_hat, nd.net, nd.g);
    Eigen::MatrixXd a = -(t.density.asDiagonal() * cidx);
    a.diagonal().array() += 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) {
      throw CertificateError("I - grad_p Gamma is singular in network '" + nd.net.id() + "'");
    }
    const Eigen::MatrixXd dp = lu.solve(t.density.asDiagonal() * kl);
    parts[m].feedback = wk.transpose() * cidx * dp;
  });
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  // Local index 0 is the network's own fixed effect, 1.. are shared.
  auto scatter = [&](Eigen::MatrixXd& target, const Eigen::MatrixXd& local, Eigen::Index m) {
    target(m, m) += local(0, 0);
    target.block(m, mcount, 1, s) += local.block(0, 1, 1, s);
    target.block(mcount, m, s, 1) += local.block(1, 0, s, 1);
    target.bottomRightCorner(s, s) += local.bottomRightCorner(s, s);
  };
  for (std::size_t m = 0; m < parts.size(); ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    scatter(omega, parts[m].omega, mi);
    if (include_feedback) scatter(h, parts[m].feedback, mi);
  }
  h += omega;
  // H has a diagonal fixed-effect block, so its inverse is
  //   H^{-1} = L + A S^{-1} B,  L = diag(Dh^{-1}, 0),  S = Bh - Eh Dh^{-1} Ch,
  //   A = [Dh^{-1} Ch; -I],  B = [Eh Dh^{-1}, -I],
  // and the sandwich costs O(P^2 S) instead of O(P^3).
  const Eigen::VectorXd dh = h.diagonal().head(mcount);
  if ((dh.array() == 0.0).any()) {
    throw IdentificationError("NPL variance: a fixed-effect block of the bread matrix is zero");
  }
  const Eigen::VectorXd dinv = dh.cwiseInverse();
  const Eigen::MatrixXd ch = h.topRightCorner(mcount, s);
  const Eigen::MatrixXd eh = h.bottomLeftCorner(s, mcount);
  const Eigen::MatrixXd schur = h.bottomRightCorner(s, s) - eh * dinv.asDiagonal() * ch;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(schur);
  if (s > 0 && !lu.isInvertible()) {
    throw IdentificationError("NPL variance: the sandwich bread matrix is singular");
  }
  const Eigen::MatrixXd sinv = s > 0 ? lu.inverse() : Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd a(dim, s);
  a.topRows(mcount) = dinv.asDiagonal() * ch;
  a.bottomRows(s) = -Eigen::MatrixXd::Identity(s, s);
  Eigen::MatrixXd b(s, dim);
  b.leftCols(mcount) = eh * dinv.asDiagonal();
  b.rightCols(s) = -Eigen::MatrixXd::Identity(s, s);
  const Eigen::MatrixXd as = a * sinv;
  // y = H^{-1} Omega
  Eigen::MatrixXd y = as * (b * omega);
  y.topRows(mcount) += dinv.asDiagonal() * omega.topRows(mcount);
  // v = y H^{-T}
  Eigen::MatrixXd v = (y * b.transpose()) * as.transpose();
  v.leftCols(mcount) += y.leftCols(mcount) * dinv.asDiagonal();
  return 0.5 * (v + v.transpose());
}

Eigen::MatrixXd nfxp_variance(const Parameters& theta_hat, const Beliefs& p_star,
                              const Dataset& data) {
  check_shapes(theta_hat, p_star, data);
  const Eigen::MatrixXd v = nfxp_system(theta_hat, p_star, data).inverse();
  return 0.5 * (v + v.transpose());
}

double beta_l_standard_error(const Parameters& theta, const Eigen::MatrixXd& vcov) {
  const auto p = static_cast<Eigen::Index>(theta.size());
  if (vcov.rows() != p || vcov.cols() != p) {
    throw DimensionError("covariance matrix does not match the parameter vector");
  }
  switch (theta.family.tag) {
    case FamilyTag::generalized: return std::numeric_limits<double>::quiet_NaN();
    case FamilyTag::hom_conformity: return std::sqrt(std::max(0.0, vcov(p - 1, p - 1)));
    default: {
      Eigen::Vector2d grad(1.0, 1.0);
      const double var = grad.dot(vcov.bottomRightCorner(2, 2) * grad);
      return std::sqrt(std::max(0.0, var));
    }
  }
}

}  // namespace peerconf
