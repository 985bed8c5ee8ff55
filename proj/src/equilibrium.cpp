#include "peerconf/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "parallel.hpp"
#include "peerconf/error.hpp"

namespace peerconf {

Certificate network_certificate(const Parameters& params, const Network& net) {
  return contraction_bound(params, static_cast<double>(net.max_degree()));
}

EquilibriumProfile solve_fixed_point(const Parameters& params, const Network& net,
                                     const InteractionMatrix& g,
                                     const CovariateBundle& cov,
                                     const SolverOptions& opts) {
  const auto n = static_cast<Eigen::Index>(net.size());
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) {
    throw Error("damping must lie in (0, 1]");
  }
  Eigen::VectorXd p = opts.p0 ? *opts.p0 : Eigen::VectorXd::Constant(n, 0.5);
  if (p.size() != n) throw DimensionError("starting beliefs do not match network size");
  if ((p.array() < 0.0).any() || (p.array() > 1.0).any()) {
    throw Error("starting beliefs must lie in [0, 1]");
  }

  EquilibriumProfile prof;
  prof.family = params.family;
  prof.certificate = network_certificate(params, net);
  double r = 0.0;
  bool done = false;
  for (std::size_t it = 0; it <= opts.max_iter; ++it) {
    Eigen::VectorXd q = best_response(p, params, net, g, cov);
    r = n == 0 ? 0.0 : (q - p).lpNorm<Eigen::Infinity>();
    if (r < opts.tol) {
      done = true;
      break;
    }
    if (it == opts.max_iter) break;
    if (opts.damping == 1.0) {
      p.swap(q);
    } else {
      p += opts.damping * (q - p);
    }
    ++prof.iterations;
    if (opts.record_steps) prof.step_norms.push_back(opts.damping * r);
  }
  if (!done) {
    std::ostringstream msg;
    msg << "network '" << net.id() << "': fixed point not reached after "
        << opts.max_iter << " iterations (residual " << r << ", "
        << prof.label() << ", bound " << prof.certificate.bound_value << ")";
    throw ConvergenceError(msg.str());
  }
  prof.p_star = std::move(p);
  prof.residual = r;
  if (!prof.certificate.satisfied && opts.verify_uncertified && opts.verify_starts > 0) {
    prof.uniqueness =
        verify_uniqueness(params, net, g, cov, opts.verify_starts, opts.verify_seed, opts);
  }
  return prof;
}

std::vector<EquilibriumProfile> solve_all(const Parameters& params,
                                          const Dataset& data,
                                          const SolverOptions& opts) {
  std::vector<EquilibriumProfile> out(data.network_count());
  detail::parallel_for(out.size(), [&](std::size_t m) {
    const auto& nd = data.networks[m];
    out[m] = solve_fixed_point(params, nd.net, nd.g, nd.cov, opts);
  });
  return out;
}

UniquenessReport verify_uniqueness(const Parameters& params, const Network& net,
                                   const InteractionMatrix& g,
                                   const CovariateBundle& cov, std::size_t n_starts,
                                   std::uint64_t seed, const SolverOptions& opts) {
  UniquenessReport rep;
  rep.starts = n_starts;
  if (n_starts == 0) {
    rep.agree = true;
    return rep;
  }
  const auto n = static_cast<Eigen::Index>(net.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SolverOptions inner = opts;
  inner.verify_uncertified = false;
  inner.record_steps = false;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  for (std::size_t s = 0; s < n_starts; ++s) {
    Eigen::VectorXd p0(n);
    for (Eigen::Index i = 0; i < n; ++i) p0[i] = unif(rng);
    inner.p0 = std::move(p0);
    const auto prof = solve_fixed_point(params, net, g, cov, inner);
    if (s == 0) {
      lo = hi = prof.p_star;
    } else {
      lo = lo.cwiseMin(prof.p_star);
      hi = hi.cwiseMax(prof.p_star);
    }
  }
  rep.max_spread = n == 0 ? 0.0 : (hi - lo).maxCoeff();
  rep.agree = rep.max_spread < 1e-7;
  return rep;
}

namespace {

void require_certified(const Parameters& params, const Network& net,
                       std::string_view which) {
  const auto c = network_certificate(params, net);
  if (!c.satisfied) {
    std::ostringstream msg;
    msg << which << " parameters violate the contraction certificate (bound "
        << c.bound_value << ")";
    throw CertificateError(msg.str());
  }
}

}  // namespace

ComparativeStatics comparative_statics_check(const Parameters& params,
                                             Perturbation perturbation,
                                             const Network& net,
                                             const InteractionMatrix& g,
                                             const CovariateBundle& cov,
                                             double step,
                                             const SolverOptions& opts) {
  const auto tag = params.family.tag;
  if (tag == FamilyTag::generalized ||
      (tag == FamilyTag::hom_conformity && perturbation != Perturbation::norm_shift)) {
    throw Error("comparative statics need a family parameterized by (beta_h, dbeta)");
  }
  require_certified(params, net, "baseline");
  ComparativeStatics cs;
  cs.perturbation = perturbation;
  cs.step = step;
  const auto base = solve_fixed_point(params, net, g, cov, opts);
  const auto n = base.p_star.size();

  if (perturbation != Perturbation::norm_shift) {
    Parameters moved = params;
    if (perturbation == Perturbation::beta_l_up) {
      moved.delta_beta += step;
    } else {
      moved.beta_h += step;
      moved.delta_beta -= step;
    }
    require_certified(moved, net, "perturbed");
    SolverOptions warm = opts;
    warm.p0 = base.p_star;
    const auto after = solve_fixed_point(moved, net, g, cov, warm);
    cs.difference = after.p_star - base.p_star;
    cs.checked_nodes = static_cast<std::size_t>(n);
    if (n == 0) {
      cs.verdict = true;
    } else if (perturbation == Perturbation::beta_l_up) {
      cs.verdict = cs.difference.minCoeff() >= -1e-10;
    } else {
      cs.verdict = cs.difference.maxCoeff() <= 1e-10;
    }
    return cs;
  }

  // Partial equilibrium: move every local norm by `step` with beliefs at p*.
  const auto co = index_coefficients(params);
  const NormTerms t = norm_terms(base.p_star, g);
  const Eigen::VectorXd slope = norm_slope(base.p_star, params, net, g);
  const Eigen::VectorXd idx = best_response_index(base.p_star, params, net, g, cov);
  cs.difference = Eigen::VectorXd::Zero(n);
  cs.predicted_sign = Eigen::VectorXd::Zero(n);
  cs.verdict = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    if (net.isolated(iu)) continue;
    const double shift = slope[i] * step + co.b * step * step;
    cs.difference[i] = params.link.cdf(idx[i] + shift) - params.link.cdf(idx[i]);
    cs.predicted_sign[i] = (slope[i] > 0.0) - (slope[i] < 0.0);
    if (t.pbar[i] <= 0.05 || t.pbar[i] >= 0.95) continue;
    // Skip nodes where the predicted effect is below rounding.
    if (std::abs(slope[i] * step) < 1e-12) continue;
    ++cs.checked_nodes;
    const double observed = (cs.difference[i] > 0.0) - (cs.difference[i] < 0.0);
    if (observed != cs.predicted_sign[i] * (step > 0.0 ? 1.0 : -1.0)) cs.verdict = false;
  }
  return cs;
}

}  // namespace peerconf
