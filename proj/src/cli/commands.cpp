#include "peerconf/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "peerconf/error.hpp"
#include "peerconf/estimate.hpp"
#include "peerconf/inference.hpp"
#include "peerconf/io.hpp"
#include "peerconf/kernels.hpp"
#include "peerconf/montecarlo.hpp"
#include "peerconf/simulate.hpp"

namespace peerconf {
namespace {

namespace fs = std::filesystem;

// Options shared by the commands that read a sample from disk.
struct InputArgs {
  std::string edges;
  std::string nodes;
  std::vector<std::string> covariates;
  bool undirected = false;
};

void add_input_options(CLI::App* cmd, InputArgs& in, bool outcomes_required) {
  cmd->add_option("--edges", in.edges, "Edge file: network_id,source,target")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--nodes", in.nodes,
                  outcomes_required ? "Node file: network_id,node_id,y,x..."
                                    : "Node file: network_id,node_id[,y][,x...]")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--covariates", in.covariates,
                  "Covariate columns to use, comma separated (default: all)")
      ->delimiter(',');
  cmd->add_flag("--undirected", in.undirected, "Treat every edge as mutual");
}

IngestResult load(const InputArgs& in, bool require_outcomes, std::ostream& err) {
  IngestOptions o;
  o.covariates = in.covariates;
  o.undirected = in.undirected;
  o.require_outcomes = require_outcomes;
  auto r = ingest(fs::path(in.edges), fs::path(in.nodes), o);
  for (const auto& w : r.warnings) err << "warning: " << w << '\n';
  return r;
}

std::string sanitize(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n') c = ';';
  }
  return s;
}

std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "nan";
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string p_value_text(double p) {
  if (p < 0.001) return "<0.001";
  return fixed(p, 3);
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

void write_report(const std::string& path, const KeyValues& kv) {
  std::ostringstream s;
  write_key_values(s, kv);
  write_file(path, s.str());
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::size_t networks = 100;
  std::string size = "50";
  std::string edges = "er:0.05";
  std::vector<std::string> covariate_kinds{"gaussian", "poisson:2"};
  double beta_h = 1.0;
  double beta_l = 2.0;
  std::vector<double> gamma1{-0.4, 0.2};
  std::vector<double> gamma2{0.5, 0.3};
  std::vector<double> gamma0_range{-1.5, -0.5};
  std::string family = "het_conformity";
  std::string link = "logistic";
  std::string weights = "row_normalized";
  std::uint64_t seed = 0;
  std::string out_dir;
};

std::vector<CovariateColumn> parse_covariate_kinds(const std::vector<std::string>& kinds) {
  std::vector<CovariateColumn> out;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    CovariateColumn c;
    c.name = "x" + std::to_string(k + 1);
    const std::string& s = kinds[k];
    if (s == "gaussian") {
      c.kind = CovariateKind::gaussian;
    } else if (s.rfind("poisson", 0) == 0) {
      c.kind = CovariateKind::poisson;
      if (s.size() > 7) {
        if (s[7] != ':') throw ParseError("covariate kind '" + s + "': expected poisson:MEAN");
        char* end = nullptr;
        c.poisson_mean = std::strtod(s.c_str() + 8, &end);
        if (*end != '\0' || !(c.poisson_mean > 0.0)) {
          throw ParseError("covariate kind '" + s + "': Poisson mean must be positive");
        }
      }
    } else {
      throw ParseError("unknown covariate kind '" + s + "' (gaussian or poisson[:mean])");
    }
    out.push_back(c);
  }
  return out;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ModelFamily family_with_weights(const std::string& family, const std::string& weights) {
  ModelFamily f = ModelFamily::parse(family);
  if (weights == "adjacency") {
    f.weights = AggregateWeights::adjacency;
  } else if (weights != "row_normalized") {
    throw ParseError("weights must be 'row_normalized' or 'adjacency'");
  }
  return f;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  SimulationDesign d;
  d.networks = a.networks;
  d.sizes = SizeRange::parse(a.size);
  d.edges = EdgeRule::parse(a.edges);
  d.covariates = parse_covariate_kinds(a.covariate_kinds);
  if (a.gamma1.size() != d.covariates.size() || a.gamma2.size() != d.covariates.size()) {
    throw ParseError("--gamma1 and --gamma2 need one value per covariate (" +
                     std::to_string(d.covariates.size()) + ")");
  }
  if (a.gamma0_range.size() != 2 || !(a.gamma0_range[0] <= a.gamma0_range[1])) {
    throw ParseError("--gamma0-range expects LOW,HIGH with LOW <= HIGH");
  }
  d.gamma1 = to_eigen(a.gamma1);
  d.gamma2 = to_eigen(a.gamma2);
  d.gamma0_low = a.gamma0_range[0];
  d.gamma0_high = a.gamma0_range[1];
  d.beta_h = a.beta_h;
  d.beta_l = a.beta_l;
  d.family = family_with_weights(a.family, a.weights);
  if (d.family.tag == FamilyTag::generalized) {
    throw ParseError("simulate needs a structural family, not the generalized reduced form");
  }
  d.link = LinkFunction::parse(a.link);

  const auto sim = simulate_dataset(d, a.seed);
  for (const auto& w : sim.warnings) err << "warning: " << w << '\n';

  const fs::path dir(a.out_dir);
  std::ostringstream edges, nodes, truth, pstar;
  write_edges(edges, sim.data);
  write_nodes(nodes, sim.data);
  KeyValues kv = parameter_records(sim.truth, sim.data);
  kv.emplace_back("seed", std::to_string(a.seed));
  write_key_values(truth, kv);
  std::vector<Eigen::VectorXd> p;
  for (const auto& e : sim.equilibria) p.push_back(e.p_star);
  write_equilibrium(pstar, sim.data, p);
  write_file(dir / "edges.csv", edges.str());
  write_file(dir / "nodes.csv", nodes.str());
  write_file(dir / "truth.csv", truth.str());
  write_file(dir / "p_star.csv", pstar.str());

  const Certificate cert = contraction_bound(sim.truth);
  out << "simulated " << sim.data.network_count() << " networks, "
      << sim.data.node_count() << " nodes (seed " << a.seed << ")\n"
      << "family " << sim.truth.family.name() << ", link " << sim.truth.link.name()
      << ", contraction bound " << fixed(cert.bound_value) << " ("
      << (cert.satisfied ? "certified" : "uncertified") << ")\n"
      << "wrote edges.csv, nodes.csv, truth.csv, p_star.csv to " << dir.string() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------------- solve

struct SolveArgs {
  InputArgs in;
  std::string params;
  std::string output;
  double tol = 1e-10;
  std::size_t max_iter = 10000;
  double damping = 1.0;
};

int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  const auto r = load(a.in, false, err);
  const Parameters params = parameters_from_records(read_key_value_file(a.params), r.data);
  SolverOptions o;
  o.tol = a.tol;
  o.max_iter = a.max_iter;
  o.damping = a.damping;
  const auto eq = solve_all(params, r.data, o);
  std::vector<Eigen::VectorXd> p;
  for (const auto& e : eq) p.push_back(e.p_star);
  std::ostringstream csv;
  write_equilibrium(csv, r.data, p);
  if (a.output.empty()) {
    out << csv.str();
    return kExitOk;
  }
  write_file(a.output, csv.str());
  out << "network       nodes  iterations      residual  status\n";
  for (std::size_t m = 0; m < eq.size(); ++m) {
    out << std::left << std::setw(12) << r.data.networks[m].net.id() << std::right
        << std::setw(7) << r.data.networks[m].size() << std::setw(12) << eq[m].iterations
        << std::setw(14) << std::scientific << std::setprecision(2) << eq[m].residual
        << std::defaultfloat << "  " << eq[m].label();
    if (eq[m].uniqueness) {
      out << (eq[m].uniqueness->agree ? " (multi-start agrees)" : " (multi-start DISAGREES)");
    }
    out << '\n';
  }
  out << "wrote " << a.output << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- estimate

struct EstimateArgs {
  InputArgs in;
  std::string method = "npl";
  std::string family = "het_conformity";
  std::string weights = "row_normalized";
  std::string link = "logistic";
  double outer_tol = 1e-6;
  std::size_t max_outer = 500;
  double inner_tol = 1e-8;
  std::size_t max_inner = 200;
  bool no_variance = false;
  bool show_fixed_effects = false;
  std::string report;
};

EstimationOptions estimation_options(const EstimateArgs& a) {
  EstimationOptions o;
  o.family = family_with_weights(a.family, a.weights);
  o.link = LinkFunction::parse(a.link);
  o.outer_tol = a.outer_tol;
  o.max_outer = a.max_outer;
  o.inner.grad_tol = a.inner_tol;
  o.inner.max_iter = a.max_inner;
  o.compute_variance = !a.no_variance;
  return o;
}

EstimationResult fit(const Dataset& data, const std::string& method,
                     const EstimationOptions& o) {
  if (method == "npl") return npl_estimate(data, o);
  if (method == "nfxp") return nfxp_estimate(data, o);
  throw ParseError("method must be 'npl' or 'nfxp', got '" + method + "'");
}

void print_fit(std::ostream& out, const EstimationResult& r, bool fixed_effects) {
  out << "Method: " << r.method << "   Family: " << r.theta_hat.family.name()
      << "   Link: " << r.theta_hat.link.name() << '\n'
      << "Networks: " << r.network_count << "   Nodes: " << r.node_count << '\n'
      << "Converged: " << (r.converged ? "yes" : "NO") << " after " << r.outer_iterations
      << " outer iterations\n"
      << "Log-likelihood: " << fixed(r.loglik_total, 3) << " (per network "
      << fixed(r.loglik, 4) << ", per node " << fixed(r.loglik_per_obs, 4) << ")\n\n";

  const Eigen::VectorXd theta = r.theta_hat.to_vector();
  const bool with_se = r.std_errors.size() == theta.size();
  out << std::left << std::setw(24) << "coefficient" << std::right << std::setw(12)
      << "estimate" << std::setw(12) << "std.err" << std::setw(10) << "z" << std::setw(10)
      << "p-value" << '\n';
  auto row = [&](const std::string& name, double est, double se) {
    out << std::left << std::setw(24) << name << std::right << std::setw(12) << fixed(est);
    if (with_se && se > 0.0) {
      const double z = est / se;
      const double p = chi_square_survival(z * z, 1);
      out << std::setw(12) << fixed(se) << std::setw(10) << fixed(z, 2) << std::setw(10)
          << p_value_text(p) << ' ' << significance_stars(p);
    }
    out << '\n';
  };
  const auto skip = static_cast<std::size_t>(r.theta_hat.gamma0.size());
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    if (j < skip && !fixed_effects) continue;
    const auto jj = static_cast<Eigen::Index>(j);
    row(r.names[j], theta[jj], with_se ? r.std_errors[jj] : 0.0);
  }
  if (r.theta_hat.family.tag != FamilyTag::generalized) {
    row("beta_l", r.beta_l_hat, r.beta_l_se);
  }
  if (!fixed_effects) out << "(" << skip << " network fixed effects not shown)\n";

  const auto& d = r.diagnostics;
  out << "\nIdentification: regressor rank " << d.regressor_rank << " of "
      << d.parameter_count << ", intransitive triads " << d.total_triads()
      << ", non-isolated nodes " << d.non_isolated_nodes << '\n';
  for (const auto& note : d.notes) out << "  note: " << note << '\n';
  for (std::size_t k = 0; k < d.condition3.size(); ++k) {
    if (!d.condition3[k]) {
      out << "  note: gamma1 and gamma2 of covariate " << k + 1
          << " do not share a sign with gamma2 != 0\n";
    }
  }
  out << "\nTrace:\n";
  for (const auto& t : r.trace) {
    out << "  " << std::setw(4) << t.iteration << "  step " << std::scientific
        << std::setprecision(3) << t.p_change << std::defaultfloat << "  loglik "
        << fixed(t.loglik, 6) << '\n';
  }
}

KeyValues fit_records(const EstimationResult& r) {
  KeyValues kv;
  kv.emplace_back("method", r.method);
  kv.emplace_back("family", std::string(r.theta_hat.family.name()));
  kv.emplace_back("link", std::string(r.theta_hat.link.name()));
  kv.emplace_back("converged", bool_text(r.converged));
  kv.emplace_back("outer_iterations", std::to_string(r.outer_iterations));
  kv.emplace_back("networks", std::to_string(r.network_count));
  kv.emplace_back("nodes", std::to_string(r.node_count));
  kv.emplace_back("loglik", format_number(r.loglik));
  kv.emplace_back("loglik_total", format_number(r.loglik_total));
  kv.emplace_back("loglik_per_obs", format_number(r.loglik_per_obs));
  const Eigen::VectorXd theta = r.theta_hat.to_vector();
  const bool with_se = r.std_errors.size() == theta.size();
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    kv.emplace_back(r.names[j], format_number(theta[jj]));
    if (with_se) kv.emplace_back(r.names[j] + ".se", format_number(r.std_errors[jj]));
  }
  if (r.theta_hat.family.tag != FamilyTag::generalized) {
    kv.emplace_back("beta_l", format_number(r.beta_l_hat));
    if (with_se) kv.emplace_back("beta_l.se", format_number(r.beta_l_se));
  }
  const auto& d = r.diagnostics;
  kv.emplace_back("diagnostics.parameters", std::to_string(d.parameter_count));
  kv.emplace_back("diagnostics.rank", std::to_string(d.regressor_rank));
  kv.emplace_back("diagnostics.min_singular_value", format_number(d.min_singular_value));
  kv.emplace_back("diagnostics.max_singular_value", format_number(d.max_singular_value));
  kv.emplace_back("diagnostics.triads", std::to_string(d.total_triads()));
  kv.emplace_back("diagnostics.non_isolated_nodes", std::to_string(d.non_isolated_nodes));
  for (std::size_t i = 0; i < d.notes.size(); ++i) {
    kv.emplace_back("diagnostics.note" + std::to_string(i + 1), sanitize(d.notes[i]));
  }
  for (const auto& t : r.trace) {
    const std::string p = "trace." + std::to_string(t.iteration) + ".";
    kv.emplace_back(p + "step", format_number(t.p_change));
    kv.emplace_back(p + "loglik", format_number(t.loglik));
  }
  return kv;
}

int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  const auto r = load(a.in, true, err);
  const auto result = fit(r.data, a.method, estimation_options(a));
  print_fit(out, result, a.show_fixed_effects);
  if (!a.report.empty()) {
    write_report(a.report, fit_records(result));
    out << "\nwrote " << a.report << '\n';
  }
  if (!result.converged) {
    err << "error: estimation did not converge within " << a.max_outer << " iterations\n";
    return kExitConvergence;
  }
  return kExitOk;
}

// --------------------------------------------------------------- spec-test

struct SpecTestArgs {
  EstimateArgs est;
  double alpha = 0.05;
  bool lr = false;
};

void print_test(std::ostream& out, const std::string& label, const TestResult& t) {
  out << std::left << std::setw(38) << label << std::right << "chi2(" << t.dof
      << ") = " << std::setw(10) << fixed(t.statistic, 3) << "   p = "
      << std::setw(7) << p_value_text(t.p_value) << ' ' << significance_stars(t.p_value)
      << '\n';
}

void add_test_records(KeyValues& kv, const std::string& prefix, const TestResult& t) {
  kv.emplace_back(prefix + ".null", sanitize(t.null_description));
  kv.emplace_back(prefix + ".statistic", format_number(t.statistic));
  kv.emplace_back(prefix + ".dof", std::to_string(t.dof));
  kv.emplace_back(prefix + ".p_value", format_number(t.p_value));
  kv.emplace_back(prefix + ".reject", bool_text(t.reject()));
}

int cmd_spec_test(const SpecTestArgs& a, std::ostream& out, std::ostream& err) {
  const auto r = load(a.est.in, true, err);
  auto o = estimation_options(a.est);
  o.family = ModelFamily{};
  o.family.tag = FamilyTag::generalized;
  o.compute_variance = true;
  const auto gen = fit(r.data, a.est.method, o);
  if (!gen.converged) {
    err << "error: generalized fit did not converge\n";
    return kExitConvergence;
  }
  const auto tests = specification_tests(gen, a.alpha);

  const Eigen::VectorXd peer = gen.theta_hat.peer();
  const auto q = gen.std_errors.size() - 3;
  out << "Generalized reduced form (" << gen.method << "), " << gen.network_count
      << " networks, " << gen.node_count << " nodes\n";
  for (int j = 0; j < 3; ++j) {
    out << "  beta" << j + 1 << " = " << std::setw(9) << fixed(peer[j])
        << "  (se " << fixed(gen.std_errors[q + j]) << ")\n";
  }
  out << '\n';
  print_test(out, "Wald  beta1 = -2*beta2 (conformity)", tests.conformity);
  print_test(out, "Wald  beta3 = 0 (spillover)", tests.spillover);

  KeyValues kv;
  kv.emplace_back("method", gen.method);
  kv.emplace_back("alpha", format_number(a.alpha));
  kv.emplace_back("beta1", format_number(peer[0]));
  kv.emplace_back("beta2", format_number(peer[1]));
  kv.emplace_back("beta3", format_number(peer[2]));
  add_test_records(kv, "conformity", tests.conformity);
  add_test_records(kv, "spillover", tests.spillover);

  if (a.lr) {
    auto base = estimation_options(a.est);
    base.compute_variance = false;
    base.compute_diagnostics = false;
    base.family = ModelFamily{};
    base.family.tag = FamilyTag::hom_conformity;
    const auto hom = nfxp_estimate(r.data, base);
    auto full = base;
    full.family.tag = FamilyTag::het_conformity;
    Parameters start = hom.theta_hat;
    start.family = full.family;
    start.delta_beta = 0.0;
    full.theta0 = start;
    const auto het = nfxp_estimate(r.data, full);
    if (!hom.converged || !het.converged) {
      err << "error: NFXP fits for the likelihood-ratio test did not converge\n";
      return kExitConvergence;
    }
    auto lr = lr_test(hom.loglik_total, het.loglik_total, 1, a.alpha);
    lr.null_description = "dbeta = 0 (homogeneous conformity)";
    print_test(out, "LR    dbeta = 0 (NFXP het vs hom)", lr);
    out << "  loglik hom " << fixed(hom.loglik_total, 3) << ", het "
        << fixed(het.loglik_total, 3) << '\n';
    add_test_records(kv, "lr", lr);
    kv.emplace_back("lr.loglik_restricted", format_number(hom.loglik_total));
    kv.emplace_back("lr.loglik_full", format_number(het.loglik_total));
  }

  out << '\n'
      << tests.conformity_conclusion << '\n'
      << tests.spillover_conclusion << '\n'
      << tests.overall_conclusion << '\n'
      << "Caveat: " << tests.caveat << '\n';
  kv.emplace_back("conclusion.conformity", sanitize(tests.conformity_conclusion));
  kv.emplace_back("conclusion.spillover", sanitize(tests.spillover_conclusion));
  kv.emplace_back("conclusion.overall", sanitize(tests.overall_conclusion));
  if (!a.est.report.empty()) {
    write_report(a.est.report, kv);
    out << "\nwrote " << a.est.report << '\n';
  }
  return kExitOk;
}

// -------------------------------------------------------------- montecarlo

struct MonteCarloArgs {
  std::size_t replications = 100;
  std::uint64_t seed = 0;
  std::size_t networks = 100;
  std::string size = "50";
  std::string edges = "er:0.05";
  double beta_h = 1.0;
  double beta_l = 2.0;
  std::string link = "logistic";
  std::vector<std::string> sections{"conformity", "spillover", "null"};
  bool nfxp = false;
  bool no_recovery = false;
  bool no_spec = false;
  bool no_lr = false;
  double alpha = 0.05;
  std::string report;
};

int cmd_montecarlo(const MonteCarloArgs& a, std::ostream& out, std::ostream&) {
  MonteCarloConfig c;
  c.replications = a.replications;
  c.seed = a.seed;
  c.design.networks = a.networks;
  c.design.sizes = SizeRange::parse(a.size);
  c.design.edges = EdgeRule::parse(a.edges);
  c.design.beta_h = a.beta_h;
  c.design.beta_l = a.beta_l;
  c.design.link = LinkFunction::parse(a.link);
  c.conformity_section = c.spillover_section = c.null_section = false;
  for (const auto& s : a.sections) {
    if (s == "conformity") {
      c.conformity_section = true;
    } else if (s == "spillover") {
      c.spillover_section = true;
    } else if (s == "null") {
      c.null_section = true;
    } else {
      throw ParseError("unknown Monte Carlo section '" + s +
                       "' (conformity, spillover, null)");
    }
  }
  c.compare_nfxp = a.nfxp;
  c.recovery = !a.no_recovery;
  c.specification = !a.no_spec;
  c.null_lr = !a.no_lr;
  c.alpha = a.alpha;
  const auto report = run_montecarlo(c);
  std::ostringstream s;
  write_key_values(s, report.records());
  if (a.report.empty()) {
    out << s.str();
  } else {
    write_file(a.report, s.str());
    out << "Monte Carlo: " << report.replications << " replications per section, "
        << report.failures() << " failed\n";
    for (const auto& sec : report.sections) {
      out << "[" << sec.name << "]\n";
      for (const auto& p : sec.npl) {
        out << "  " << std::left << std::setw(16) << p.name << std::right << " bias "
            << std::setw(8) << fixed(p.mean_bias) << "  sd " << fixed(p.sd) << "  mean se "
            << fixed(p.mean_se) << "  coverage " << fixed(p.coverage, 3) << '\n';
      }
      for (const auto& r : sec.rates) {
        out << "  " << std::left << std::setw(16) << r.name << std::right
            << " rejection rate " << fixed(r.rate, 3) << " (" << r.count << ")\n";
      }
    }
    out << "wrote " << a.report << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
  InputArgs in;
  std::string family = "het_conformity";
  std::string weights = "row_normalized";
  std::string link = "logistic";
  std::string report;
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out, std::ostream& err) {
  const auto r = load(a.in, false, err);
  const Dataset& data = r.data;
  const ModelFamily family = family_with_weights(a.family, a.weights);
  const LinkFunction link = LinkFunction::parse(a.link);
  const Beliefs p0 = data.has_outcomes() ? data.outcome_mean_beliefs()
                                         : data.constant_beliefs(0.5);
  const auto diag = identification_diagnostics(data, p0, family);

  out << "network       nodes  edges  max_degree  isolated  triads\n";
  std::size_t max_degree = 0;
  KeyValues kv;
  kv.emplace_back("networks", std::to_string(data.network_count()));
  kv.emplace_back("nodes", std::to_string(data.node_count()));
  for (std::size_t m = 0; m < data.network_count(); ++m) {
    const auto& net = data.networks[m].net;
    max_degree = std::max(max_degree, net.max_degree());
    out << std::left << std::setw(12) << net.id() << std::right << std::setw(7)
        << net.size() << std::setw(7) << net.edge_count() << std::setw(12)
        << net.max_degree() << std::setw(10) << diag.isolated_counts[m] << std::setw(8)
        << diag.triad_counts[m] << '\n';
    const std::string p = "network." + net.id() + ".";
    kv.emplace_back(p + "size", std::to_string(net.size()));
    kv.emplace_back(p + "max_degree", std::to_string(net.max_degree()));
    kv.emplace_back(p + "isolated", std::to_string(diag.isolated_counts[m]));
    kv.emplace_back(p + "triads", std::to_string(diag.triad_counts[m]));
  }
  std::size_t isolated = 0;
  for (auto c : diag.isolated_counts) isolated += c;
  const char* threshold =
      link.tag() == LinkTag::logistic ? "4" : "\xE2\x88\x9A(2\xCF\x80)";
  out << "\nTotal: " << data.network_count() << " networks, " << data.node_count()
      << " nodes, " << isolated << " isolated, " << diag.total_triads()
      << " intransitive triads, max degree " << max_degree << '\n'
      << "Regressor rank at p0 (" << (data.has_outcomes() ? "outcome means" : "0.5")
      << ", family " << family.name() << "): " << diag.regressor_rank << " of "
      << diag.parameter_count << '\n'
      << "Certificate region (" << link.name() << " link): |beta_h| + 1.5 |beta_l - beta_h| < "
      << threshold << '\n';
  for (const auto& note : diag.notes) err << "warning: " << note << '\n';

  kv.emplace_back("isolated", std::to_string(isolated));
  kv.emplace_back("triads", std::to_string(diag.total_triads()));
  kv.emplace_back("max_degree", std::to_string(max_degree));
  kv.emplace_back("rank", std::to_string(diag.regressor_rank));
  kv.emplace_back("parameters", std::to_string(diag.parameter_count));
  kv.emplace_back("certificate_threshold", format_number(certificate_threshold(link)));
  for (std::size_t i = 0; i < diag.notes.size(); ++i) {
    kv.emplace_back("note" + std::to_string(i + 1), sanitize(diag.notes[i]));
  }
  if (!a.report.empty()) write_report(a.report, kv);
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConvergenceError*>(&e)) return kExitConvergence;
  if (dynamic_cast<const IdentificationError*>(&e)) return kExitIdentification;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DimensionError*>(&e) ||
      dynamic_cast<const CertificateError*>(&e)) {
    return kExitInvalid;
  }
  return kExitFailure;
}

void add_estimation_options(CLI::App* cmd, EstimateArgs& a, bool with_family) {
  add_input_options(cmd, a.in, true);
  cmd->add_option("--method", a.method, "npl or nfxp")
      ->check(CLI::IsMember({"npl", "nfxp"}))
      ->capture_default_str();
  if (with_family) {
    cmd->add_option("--family", a.family,
                    "het_conformity, hom_conformity, spillover, generalized, "
                    "aggregate_conformity or linear_conformity")
        ->capture_default_str();
    cmd->add_option("--weights", a.weights,
                    "Aggregate family weights: row_normalized or adjacency")
        ->capture_default_str();
  }
  cmd->add_option("--link", a.link, "logistic or normal")->capture_default_str();
  cmd->add_option("--outer-tol", a.outer_tol, "NPL belief tolerance")->capture_default_str();
  cmd->add_option("--max-outer", a.max_outer, "Outer iteration limit")->capture_default_str();
  cmd->add_option("--inner-tol", a.inner_tol, "Score tolerance of the inner maximization")
      ->capture_default_str();
  cmd->add_option("--max-inner", a.max_inner, "Inner iteration limit")->capture_default_str();
  cmd->add_option("--report", a.report, "Write name,value records to this file");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Action-specific conformity peer effects on networks"};
  app.name("peerconf");
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (INI or TOML); command-line flags override it");
  std::string isa = "auto";
  app.add_option("--isa", isa, "Kernel variant: auto, scalar, avx2 or neon")
      ->check(CLI::IsMember({"auto", "scalar", "avx2", "neon"}));
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: all cores)");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Draw a synthetic sample and write it to files");
  c_sim->add_option("--networks", sim.networks, "Number of networks")->capture_default_str();
  c_sim->add_option("--size", sim.size, "Nodes per network, N or MIN-MAX")->capture_default_str();
  c_sim->add_option("--edges", sim.edges, "Edge rule: er:P or out:D")->capture_default_str();
  c_sim->add_option("--covariate-kinds", sim.covariate_kinds,
                    "Covariate draws, comma separated: gaussian or poisson[:mean]")
      ->delimiter(',');
  c_sim->add_option("--beta-h", sim.beta_h, "Upward deviation penalty")->capture_default_str();
  c_sim->add_option("--beta-l", sim.beta_l, "Downward deviation penalty")->capture_default_str();
  c_sim->add_option("--gamma1", sim.gamma1, "Own-characteristic coefficients")->delimiter(',');
  c_sim->add_option("--gamma2", sim.gamma2, "Contextual coefficients")->delimiter(',');
  c_sim->add_option("--gamma0-range", sim.gamma0_range, "Fixed effects drawn from U[LOW,HIGH]")
      ->delimiter(',');
  c_sim->add_option("--family", sim.family, "Generating family")->capture_default_str();
  c_sim->add_option("--weights", sim.weights, "Aggregate family weights")->capture_default_str();
  c_sim->add_option("--link", sim.link, "logistic or normal")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Random seed")->required();
  c_sim->add_option("--out-dir", sim.out_dir, "Output directory")->required();

  SolveArgs sol;
  auto* c_sol = app.add_subcommand("solve", "Compute the equilibrium beliefs p*");
  add_input_options(c_sol, sol.in, false);
  c_sol->add_option("--params", sol.params, "Parameter file (name,value), e.g. truth.csv")
      ->required()
      ->check(CLI::ExistingFile);
  c_sol->add_option("--output", sol.output, "Write network_id,node_id,p_star here (default stdout)");
  c_sol->add_option("--tol", sol.tol, "Residual tolerance")->capture_default_str();
  c_sol->add_option("--max-iter", sol.max_iter, "Iteration limit")->capture_default_str();
  c_sol->add_option("--damping", sol.damping, "Weight on the new iterate")->capture_default_str();

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Estimate the model by NPL or NFXP");
  add_estimation_options(c_est, est, true);
  c_est->add_flag("--no-variance", est.no_variance, "Skip standard errors");
  c_est->add_flag("--show-fixed-effects", est.show_fixed_effects,
                  "Print the network fixed effects");

  SpecTestArgs spec;
  auto* c_spec = app.add_subcommand("spec-test", "Conformity and spillover specification tests");
  add_estimation_options(c_spec, spec.est, false);
  c_spec->add_option("--alpha", spec.alpha, "Test level")->capture_default_str();
  c_spec->add_flag("--lr", spec.lr,
                   "Also run the likelihood-ratio test of dbeta = 0 (NFXP fits)");

  MonteCarloArgs mc;
  auto* c_mc = app.add_subcommand("montecarlo", "Replicated simulate-and-estimate experiment");
  c_mc->add_option("--replications", mc.replications, "Replications per section")
      ->capture_default_str();
  c_mc->add_option("--seed", mc.seed, "Random seed")->required();
  c_mc->add_option("--networks", mc.networks, "Networks per sample")->capture_default_str();
  c_mc->add_option("--size", mc.size, "Nodes per network, N or MIN-MAX")->capture_default_str();
  c_mc->add_option("--edges", mc.edges, "Edge rule: er:P or out:D")->capture_default_str();
  c_mc->add_option("--beta-h", mc.beta_h, "Upward deviation penalty")->capture_default_str();
  c_mc->add_option("--beta-l", mc.beta_l, "Downward deviation penalty")->capture_default_str();
  c_mc->add_option("--link", mc.link, "logistic or normal")->capture_default_str();
  c_mc->add_option("--sections", mc.sections, "conformity, spillover, null")->delimiter(',');
  c_mc->add_flag("--nfxp", mc.nfxp, "Also fit by NFXP and report NPL/NFXP agreement");
  c_mc->add_flag("--no-recovery", mc.no_recovery, "Skip parameter recovery fits");
  c_mc->add_flag("--no-spec", mc.no_spec, "Skip specification tests");
  c_mc->add_flag("--no-lr", mc.no_lr, "Skip the likelihood-ratio test in the null section");
  c_mc->add_option("--alpha", mc.alpha, "Test level")->capture_default_str();
  c_mc->add_option("--report", mc.report, "Write name,value records here (default stdout)");

  DiagnoseArgs dia;
  auto* c_dia = app.add_subcommand("diagnose", "Identification and certificate summary");
  add_input_options(c_dia, dia.in, false);
  c_dia->add_option("--family", dia.family, "Model family")->capture_default_str();
  c_dia->add_option("--weights", dia.weights, "Aggregate family weights")->capture_default_str();
  c_dia->add_option("--link", dia.link, "logistic or normal")->capture_default_str();
  c_dia->add_option("--report", dia.report, "Write name,value records here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (isa != "auto") {
      kernels::select(isa == "scalar" ? kernels::Isa::scalar
                      : isa == "avx2" ? kernels::Isa::avx2
                                      : kernels::Isa::neon);
    }
    if (threads > 0) ::setenv("PEERCONF_THREADS", std::to_string(threads).c_str(), 1);
    if (c_sim->parsed()) return cmd_simulate(sim, out, err);
    if (c_sol->parsed()) return cmd_solve(sol, out, err);
    if (c_est->parsed()) return cmd_estimate(est, out, err);
    if (c_spec->parsed()) return cmd_spec_test(spec, out, err);
    if (c_mc->parsed()) return cmd_montecarlo(mc, out, err);
    if (c_dia->parsed()) return cmd_diagnose(dia, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitFailure;
}

}  // namespace peerconf
