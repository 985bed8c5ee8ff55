#include "peerconf/montecarlo.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "parallel.hpp"
#include "peerconf/error.hpp"
#include "peerconf/inference.hpp"
#include "peerconf/random.hpp"

namespace peerconf {
namespace {

constexpr std::size_t kKeptMessages = 5;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// One replication's draws for one summarized coefficient.
struct Draw {
  double estimate = kNaN;
  double se = kNaN;
};

struct Tracked {
  std::string name;
  double truth = kNaN;
};

// Coefficients summarized for a fit: gamma1, gamma2 and the peer block, plus
// beta_l for two-parameter conformity-style families.
std::vector<Tracked> tracked_coefficients(const Parameters& truth,
                                          const std::vector<std::string>& covariates) {
  std::vector<Tracked> out;
  const auto names = truth.names({}, covariates);
  const Eigen::VectorXd theta = truth.to_vector();
  const auto skip = static_cast<std::size_t>(truth.gamma0.size());
  for (std::size_t j = skip; j < names.size(); ++j) {
    out.push_back({names[j], theta[static_cast<Eigen::Index>(j)]});
  }
  if (truth.family.peer_count() == 2) out.push_back({"beta_l", truth.beta_l()});
  return out;
}

std::vector<Draw> extract(const EstimationResult& fit) {
  std::vector<Draw> out;
  const Eigen::VectorXd theta = fit.theta_hat.to_vector();
  const auto skip = fit.theta_hat.gamma0.size();
  for (Eigen::Index j = skip; j < theta.size(); ++j) {
    const double se = fit.std_errors.size() == theta.size() ? fit.std_errors[j] : kNaN;
    out.push_back({theta[j], se});
  }
  if (fit.theta_hat.family.peer_count() == 2) out.push_back({fit.beta_l_hat, fit.beta_l_se});
  return out;
}

std::vector<ParameterSummary> summarize(const std::vector<Tracked>& tracked,
                                        const std::vector<std::vector<Draw>>& draws,
                                        double z) {
  std::vector<ParameterSummary> out;
  for (std::size_t j = 0; j < tracked.size(); ++j) {
    ParameterSummary s;
    s.name = tracked[j].name;
    s.truth = tracked[j].truth;
    double sum = 0.0, sum_sq = 0.0, se_sum = 0.0, sq_err = 0.0;
    std::size_t covered = 0;
    for (const auto& rep : draws) {
      if (rep.empty()) continue;
      const Draw& d = rep[j];
      sum += d.estimate;
      sum_sq += d.estimate * d.estimate;
      se_sum += d.se;
      sq_err += (d.estimate - s.truth) * (d.estimate - s.truth);
      if (std::abs(d.estimate - s.truth) <= z * d.se) ++covered;
      ++s.count;
    }
    if (s.count == 0) {
      s.mean_estimate = s.mean_bias = s.mse = s.sd = s.mean_se = s.coverage = kNaN;
    } else {
      const double n = static_cast<double>(s.count);
      s.mean_estimate = sum / n;
      s.mean_bias = s.mean_estimate - s.truth;
      s.mse = sq_err / n;
      s.sd = s.count > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * s.mean_estimate *
                                                                 s.mean_estimate) /
                                                        (n - 1.0)))
                         : 0.0;
      s.mean_se = se_sum / n;
      s.coverage = static_cast<double>(covered) / n;
    }
    out.push_back(std::move(s));
  }
  return out;
}

RateSummary rate(std::string name, const std::vector<std::optional<bool>>& outcomes) {
  RateSummary r;
  r.name = std::move(name);
  for (const auto& o : outcomes) {
    if (!o) continue;
    ++r.count;
    if (*o) ++r.rejections;
  }
  r.rate = r.count > 0 ? static_cast<double>(r.rejections) / static_cast<double>(r.count)
                       : kNaN;
  return r;
}

enum class SectionKind { conformity, spillover, null };

// Everything one replication produces; empty members were not requested.
struct Replication {
  bool failed = false;
  std::string message;
  std::vector<Draw> npl;
  std::vector<Draw> nfxp;
  double gap = kNaN;
  std::optional<bool> wald_conformity, wald_spillover, wald_delta_beta, lr_delta_beta;
  double lr_p = kNaN;
  double wald_p = kNaN;
};

std::vector<std::string> sim_covariate_names(const SimulationDesign& design) {
  std::vector<std::string> names;
  for (const auto& c : design.covariates) names.push_back(c.name);
  return names;
}

SimulationDesign section_design(const SimulationDesign& base, SectionKind kind) {
  SimulationDesign d = base;
  switch (kind) {
    case SectionKind::conformity: d.family.tag = FamilyTag::het_conformity; break;
    case SectionKind::spillover: d.family.tag = FamilyTag::spillover; break;
    case SectionKind::null:
      d.family.tag = FamilyTag::hom_conformity;
      d.beta_l = d.beta_h;
      break;
  }
  return d;
}

EstimationOptions fit_options(const MonteCarloConfig& cfg, FamilyTag tag) {
  EstimationOptions o = cfg.estimation;
  o.family = ModelFamily{};
  o.family.tag = tag;
  o.link = cfg.design.link;
  o.compute_diagnostics = false;
  o.theta0.reset();
  o.p0.reset();
  return o;
}

EstimationResult require_converged(EstimationResult fit, const char* what) {
  if (!fit.converged) {
    std::string msg = std::string(what) + " did not converge";
    for (const auto& note : fit.diagnostics.notes) msg += "; " + note;
    throw ConvergenceError(msg);
  }
  return fit;
}

Replication replicate(const MonteCarloConfig& cfg, SectionKind kind,
                      const SimulationDesign& design, std::uint64_t seed) {
  Replication rep;
  const SyntheticDataset sim = simulate_dataset(design, seed);
  const Dataset& data = sim.data;

  if (cfg.recovery) {
    const FamilyTag tag =
        kind == SectionKind::spillover ? FamilyTag::spillover : FamilyTag::het_conformity;
    const auto npl = require_converged(npl_estimate(data, fit_options(cfg, tag)), "NPL");
    rep.npl = extract(npl);
    if (kind == SectionKind::null) {
      const double z = wald_z(npl.theta_hat.delta_beta,
                              npl.std_errors[npl.std_errors.size() - 1]);
      rep.wald_delta_beta = chi_square_survival(z * z, 1) < cfg.alpha;
    }
    if (kind == SectionKind::conformity && cfg.compare_nfxp) {
      auto o = fit_options(cfg, tag);
      o.theta0 = npl.theta_hat;
      const auto nfxp = require_converged(nfxp_estimate(data, o), "NFXP");
      rep.nfxp = extract(nfxp);
      rep.gap = (npl.theta_hat.to_vector() - nfxp.theta_hat.to_vector()).cwiseAbs().maxCoeff();
    }
  }

  if (cfg.specification && kind != SectionKind::null) {
    const auto gen = require_converged(
        npl_estimate(data, fit_options(cfg, FamilyTag::generalized)), "NPL (generalized)");
    const auto tests = specification_tests(gen, cfg.alpha);
    rep.wald_conformity = tests.conformity.reject();
    rep.wald_spillover = tests.spillover.reject();
  }

  if (cfg.null_lr && kind == SectionKind::null) {
    const auto hom = require_converged(
        nfxp_estimate(data, fit_options(cfg, FamilyTag::hom_conformity)), "NFXP (hom)");
    // Starting the unrestricted fit at the restricted optimum keeps the
    // ascent path above the restricted log-likelihood.
    auto o = fit_options(cfg, FamilyTag::het_conformity);
    Parameters start = hom.theta_hat;
    start.family = o.family;
    start.delta_beta = 0.0;
    o.theta0 = start;
    const auto het = require_converged(nfxp_estimate(data, o), "NFXP (het)");
    const auto lr = lr_test(hom.loglik_total, het.loglik_total, 1, cfg.alpha);
    rep.lr_delta_beta = lr.reject();
    rep.lr_p = lr.p_value;
    const double z =
        wald_z(het.theta_hat.delta_beta, het.std_errors[het.std_errors.size() - 1]);
    rep.wald_p = chi_square_survival(z * z, 1);
  }
  return rep;
}

SectionReport run_section(const MonteCarloConfig& cfg, SectionKind kind, std::uint64_t index) {
  static const char* const kNames[] = {"conformity", "spillover", "null"};
  SectionReport out;
  out.name = kNames[static_cast<int>(kind)];
  out.replications = cfg.replications;

  const SimulationDesign design = section_design(cfg.design, kind);
  const Parameters truth = design_parameters(design, cfg.seed);
  const Certificate cert = contraction_bound(truth);
  if (!cert.satisfied) {
    throw CertificateError("Monte Carlo " + out.name +
                           " design is outside the certified region (bound " +
                           format_number(cert.bound_value) + ")");
  }

  const std::uint64_t family_seed = derive_seed(cfg.seed, Stream::replication, index);
  std::vector<Replication> reps(cfg.replications);
  detail::parallel_for(cfg.replications, [&](std::size_t r) {
    try {
      reps[r] = replicate(cfg, kind, design, derive_seed(family_seed, Stream::replication, r));
    } catch (const std::exception& e) {
      reps[r] = Replication{};
      reps[r].failed = true;
      reps[r].message = "replication " + std::to_string(r) + ": " + e.what();
    }
  });

  std::vector<std::vector<Draw>> npl, nfxp;
  std::vector<std::optional<bool>> wc, ws, wd, lr;
  for (auto& rep : reps) {
    if (rep.failed) {
      ++out.failures;
      if (out.failure_messages.size() < kKeptMessages) out.failure_messages.push_back(rep.message);
      continue;
    }
    npl.push_back(std::move(rep.npl));
    nfxp.push_back(std::move(rep.nfxp));
    if (!std::isnan(rep.gap)) out.agreement_gaps.push_back(rep.gap);
    wc.push_back(rep.wald_conformity);
    ws.push_back(rep.wald_spillover);
    wd.push_back(rep.wald_delta_beta);
    lr.push_back(rep.lr_delta_beta);
    if (!std::isnan(rep.lr_p)) out.paired_p_values.emplace_back(rep.lr_p, rep.wald_p);
  }

  const double z = LinkFunction(LinkTag::standard_normal).quantile(0.5 + 0.5 * cfg.coverage_level);
  if (cfg.recovery) {
    Parameters fitted_truth = truth;
    if (kind == SectionKind::null) fitted_truth.family.tag = FamilyTag::het_conformity;
    const auto tracked = tracked_coefficients(fitted_truth, sim_covariate_names(design));
    out.npl = summarize(tracked, npl, z);
    if (kind == SectionKind::conformity && cfg.compare_nfxp) out.nfxp = summarize(tracked, nfxp, z);
  }
  if (cfg.specification && kind != SectionKind::null) {
    out.rates.push_back(rate("wald_conformity", wc));
    out.rates.push_back(rate("wald_spillover", ws));
  }
  if (cfg.recovery && kind == SectionKind::null) out.rates.push_back(rate("wald_delta_beta", wd));
  if (cfg.null_lr && kind == SectionKind::null) out.rates.push_back(rate("lr_delta_beta", lr));
  return out;
}

}  // namespace

std::size_t MonteCarloReport::failures() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sections) n += s.failures;
  return n;
}

const SectionReport* MonteCarloReport::section(const std::string& name) const noexcept {
  for (const auto& s : sections) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const ParameterSummary* find_summary(const std::vector<ParameterSummary>& rows,
                                     const std::string& name) noexcept {
  for (const auto& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

const RateSummary* find_rate(const std::vector<RateSummary>& rows,
                             const std::string& name) noexcept {
  for (const auto& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

KeyValues MonteCarloReport::records() const {
  KeyValues kv;
  kv.emplace_back("replications", std::to_string(replications));
  kv.emplace_back("seed", std::to_string(seed));
  kv.emplace_back("failures", std::to_string(failures()));
  for (const auto& s : sections) {
    const std::string p = s.name + ".";
    kv.emplace_back(p + "replications", std::to_string(s.replications));
    kv.emplace_back(p + "failures", std::to_string(s.failures));
    for (std::size_t i = 0; i < s.failure_messages.size(); ++i) {
      std::string msg = s.failure_messages[i];
      for (char& c : msg) {
        if (c == ',' || c == '\n') c = ' ';
      }
      kv.emplace_back(p + "failure" + std::to_string(i + 1), msg);
    }
    for (const auto& [label, rows] : {std::pair{"npl.", &s.npl}, std::pair{"nfxp.", &s.nfxp}}) {
      for (const auto& r : *rows) {
        const std::string q = p + label + r.name + ".";
        kv.emplace_back(q + "truth", format_number(r.truth));
        kv.emplace_back(q + "mean", format_number(r.mean_estimate));
        kv.emplace_back(q + "bias", format_number(r.mean_bias));
        kv.emplace_back(q + "mse", format_number(r.mse));
        kv.emplace_back(q + "sd", format_number(r.sd));
        kv.emplace_back(q + "mean_se", format_number(r.mean_se));
        kv.emplace_back(q + "coverage", format_number(r.coverage));
        kv.emplace_back(q + "count", std::to_string(r.count));
      }
    }
    for (const auto& r : s.rates) {
      kv.emplace_back(p + r.name + ".rate", format_number(r.rate));
      kv.emplace_back(p + r.name + ".count", std::to_string(r.count));
    }
    if (!s.agreement_gaps.empty()) {
      double worst = 0.0;
      std::size_t within = 0;
      for (double g : s.agreement_gaps) {
        worst = std::max(worst, g);
        if (g < 1e-3) ++within;
      }
      kv.emplace_back(p + "agreement.max_gap", format_number(worst));
      kv.emplace_back(p + "agreement.within_1e-3",
                      format_number(static_cast<double>(within) /
                                    static_cast<double>(s.agreement_gaps.size())));
    }
  }
  return kv;
}

MonteCarloReport run_montecarlo(const MonteCarloConfig& config) {
  if (config.replications == 0) throw Error("Monte Carlo report is empty: zero replications");
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
  if (!(config.coverage_level > 0.0 && config.coverage_level < 1.0)) {
    throw Error("coverage level must lie in (0, 1)");
  }
  MonteCarloReport report;
  report.replications = config.replications;
  report.seed = config.seed;
  if (config.conformity_section) {
    report.sections.push_back(run_section(config, SectionKind::conformity, 1));
  }
  if (config.spillover_section) {
    report.sections.push_back(run_section(config, SectionKind::spillover, 2));
  }
  if (config.null_section) report.sections.push_back(run_section(config, SectionKind::null, 3));
  if (report.sections.empty()) throw Error("Monte Carlo report is empty: no section selected");
  return report;
}

}  // namespace peerconf
