#pragma once

// Bayes-Nash fixed point p* = Gamma(p*) of one network, its uniqueness
// certificate and numerical comparative statics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "peerconf/dataset.hpp"
#include "peerconf/model.hpp"

namespace peerconf {

struct SolverOptions {
  double tol = 1e-10;  // on the sup norm of Gamma(p) - p
  std::size_t max_iter = 10000;
  // Weight on the new iterate; 1 is plain Picard iteration.
  double damping = 1.0;
  // Starting beliefs; 0.5 everywhere when unset.
  std::optional<Eigen::VectorXd> p0;
  // Keep ||p^{k+1} - p^k|| for every applied update.
  bool record_steps = false;
  // Multi-start check run automatically when the certificate fails.
  bool verify_uncertified = true;
  std::size_t verify_starts = 10;
  std::uint64_t verify_seed = 0x5eed;
};

struct UniquenessReport {
  bool agree = false;
  double max_spread = 0.0;
  std::size_t starts = 0;
};

struct EquilibriumProfile {
  Eigen::VectorXd p_star;
  double residual = 0.0;
  std::size_t iterations = 0;
  Certificate certificate;
  ModelFamily family;
  std::vector<double> step_norms;
  std::optional<UniquenessReport> uniqueness;

  std::string_view label() const noexcept {
    return certificate.satisfied ? "certified" : "uncertified";
  }
};

// Certificate for `params` on this network (the raw-adjacency aggregate family
// needs the largest degree).
Certificate network_certificate(const Parameters& params, const Network& net);

// Throws ConvergenceError when max_iter updates do not bring the residual
// below tol; the message carries the last residual and certificate status.
EquilibriumProfile solve_fixed_point(const Parameters& params, const Network& net,
                                     const InteractionMatrix& g,
                                     const CovariateBundle& cov,
                                     const SolverOptions& opts = {});

// Solves every network of `data`; networks run in parallel.
std::vector<EquilibriumProfile> solve_all(const Parameters& params,
                                          const Dataset& data,
                                          const SolverOptions& opts = {});

// Largest sup-distance between profiles converged from `n_starts` uniform
// random starting points; agree iff below 1e-7.
UniquenessReport verify_uniqueness(const Parameters& params, const Network& net,
                                   const InteractionMatrix& g,
                                   const CovariateBundle& cov, std::size_t n_starts,
                                   std::uint64_t seed,
                                   const SolverOptions& opts = {});

enum class Perturbation { beta_l_up, beta_h_up, norm_shift };

struct ComparativeStatics {
  Perturbation perturbation = Perturbation::beta_l_up;
  double step = 0.0;
  // beta_l_up / beta_h_up: p*(perturbed) - p*(baseline).
  // norm_shift: Gamma_i with pbar_i moved by `step` minus Gamma_i at p*,
  // beliefs held at p*.
  Eigen::VectorXd difference;
  // norm_shift only: sign of d index_i / d pbar_i at p*, zero on isolated nodes.
  Eigen::VectorXd predicted_sign;
  // beta_l_up: min difference >= -1e-10; beta_h_up: max difference <= 1e-10;
  // norm_shift: observed signs match predicted ones on nodes whose norm lies
  // in (0.05, 0.95).
  bool verdict = false;
  std::size_t checked_nodes = 0;
};

// beta_l_up raises beta_l by `step` with beta_h fixed; beta_h_up raises beta_h
// with beta_l fixed. Only families parameterized by (beta_h, dbeta) apply.
// Throws CertificateError if the baseline or perturbed parameters are
// uncertified.
ComparativeStatics comparative_statics_check(const Parameters& params,
                                             Perturbation perturbation,
                                             const Network& net,
                                             const InteractionMatrix& g,
                                             const CovariateBundle& cov,
                                             double step = 0.2,
                                             const SolverOptions& opts = {});

}  // namespace peerconf
