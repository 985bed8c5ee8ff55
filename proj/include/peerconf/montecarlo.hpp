#pragma once

// Replicated simulate-and-estimate experiments: parameter recovery, CI
// coverage and rejection rates of the specification and heterogeneity tests.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "peerconf/estimate.hpp"
#include "peerconf/io.hpp"
#include "peerconf/simulate.hpp"

namespace peerconf {

struct MonteCarloConfig {
  std::size_t replications = 100;
  std::uint64_t seed = 1;
  // Conformity DGP. The spillover section reuses it with the spillover
  // family; the null section sets beta_l = beta_h under the homogeneous family.
  SimulationDesign design{};

  bool conformity_section = true;
  bool spillover_section = true;
  bool null_section = true;

  // Per section: recovery fits the generating family, specification fits the
  // generalized family and runs both Wald tests.
  bool recovery = true;
  bool specification = true;
  // Also fit the conformity DGP by NFXP and report NPL/NFXP agreement.
  bool compare_nfxp = false;
  // Null section: NFXP fits of both families and the likelihood-ratio test.
  bool null_lr = true;

  double alpha = 0.05;
  double coverage_level = 0.95;
  EstimationOptions estimation{};
};

struct ParameterSummary {
  std::string name;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double mean_bias = 0.0;
  double mse = 0.0;
  double sd = 0.0;
  double mean_se = 0.0;
  double coverage = 0.0;
  std::size_t count = 0;
};

struct RateSummary {
  std::string name;
  double rate = 0.0;
  std::size_t rejections = 0;
  std::size_t count = 0;
};

struct SectionReport {
  std::string name;  // conformity, spillover, null
  std::size_t replications = 0;
  std::size_t failures = 0;
  std::vector<std::string> failure_messages;  // first few, in replication order
  std::vector<ParameterSummary> npl;
  std::vector<ParameterSummary> nfxp;
  std::vector<RateSummary> rates;
  // NPL vs NFXP: largest absolute coefficient gap per replication.
  std::vector<double> agreement_gaps;
  // Null section: (LR p-value, Wald p-value) for Delta beta = 0 from the same
  // NFXP fits.
  std::vector<std::pair<double, double>> paired_p_values;
};

struct MonteCarloReport {
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  std::vector<SectionReport> sections;

  std::size_t failures() const noexcept;
  const SectionReport* section(const std::string& name) const noexcept;
  KeyValues records() const;
};

// Deterministic given config.seed: replication r of a section uses its own
// seed family and results are aggregated in replication order. Replications
// run in parallel. Failed replications are counted and skipped. Throws Error
// for zero replications or an uncertified generating design.
MonteCarloReport run_montecarlo(const MonteCarloConfig& config);

const ParameterSummary* find_summary(const std::vector<ParameterSummary>& rows,
                                     const std::string& name) noexcept;
const RateSummary* find_rate(const std::vector<RateSummary>& rows,
                             const std::string& name) noexcept;

}  // namespace peerconf
