#include "peerconf/simulate.hpp"

#include <charconv>
#include <numeric>
#include <sstream>

#include "csv.hpp"
#include "parallel.hpp"
#include "peerconf/error.hpp"
#include "peerconf/random.hpp"

namespace peerconf {

EdgeRule EdgeRule::erdos_renyi(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("link probability must lie in [0, 1]");
  EdgeRule r;
  r.kind = Kind::erdos_renyi;
  r.p_link = p;
  return r;
}

EdgeRule EdgeRule::fixed_out_degree(std::size_t d) {
  EdgeRule r;
  r.kind = Kind::fixed_out_degree;
  r.out_degree = d;
  return r;
}

namespace {

template <class T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("invalid " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

EdgeRule EdgeRule::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError("edge rule must look like 'er:0.05' or 'out:3'");
  }
  const auto kind = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  if (kind == "er") return erdos_renyi(parse_number<double>(arg, "link probability"));
  if (kind == "out") return fixed_out_degree(parse_number<std::size_t>(arg, "out-degree"));
  throw ParseError("unknown edge rule '" + std::string(kind) + "'");
}

std::string EdgeRule::to_string() const {
  if (kind == Kind::erdos_renyi) return "er:" + csv::format_double(p_link);
  return "out:" + std::to_string(out_degree);
}

SizeRange SizeRange::parse(std::string_view text) {
  const auto dash = text.find('-');
  SizeRange r;
  if (dash == std::string_view::npos) {
    r.min = r.max = parse_number<std::size_t>(text, "network size");
  } else {
    r.min = parse_number<std::size_t>(text.substr(0, dash), "network size");
    r.max = parse_number<std::size_t>(text.substr(dash + 1), "network size");
  }
  if (r.min == 0 || r.min > r.max) throw ParseError("invalid network size range");
  return r;
}

namespace {

Network draw_network(std::size_t m, SizeRange sizes, const EdgeRule& rule,
                     std::uint64_t seed) {
  Rng rng = make_stream(seed, Stream::graph, m);
  std::size_t n = sizes.min;
  if (sizes.max > sizes.min) {
    n = std::uniform_int_distribution<std::size_t>(sizes.min, sizes.max)(rng);
  }
  std::vector<Edge> edges;
  if (rule.kind == EdgeRule::Kind::erdos_renyi) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        if (open_unit(rng) < rule.p_link) edges.emplace_back(i, j);
      }
    }
  } else {
    if (rule.out_degree >= n) {
      throw Error("out-degree " + std::to_string(rule.out_degree) +
                  " is infeasible in a network of " + std::to_string(n) + " nodes");
    }
    std::vector<std::size_t> others(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      std::iota(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(i), 0);
      std::iota(others.begin() + static_cast<std::ptrdiff_t>(i), others.end(), i + 1);
      // Partial Fisher-Yates: the first d slots become a uniform subset.
      for (std::size_t k = 0; k < rule.out_degree; ++k) {
        const auto pick =
            std::uniform_int_distribution<std::size_t>(k, others.size() - 1)(rng);
        std::swap(others[k], others[pick]);
        edges.emplace_back(i, others[k]);
      }
    }
  }
  return Network::from_edges("net" + std::to_string(m + 1), n, edges);
}

}  // namespace

std::vector<Network> generate_networks(std::size_t count, SizeRange sizes,
                                       EdgeRule rule, std::uint64_t seed) {
  if (count == 0) throw Error("at least one network is required");
  if (sizes.min == 0 || sizes.min > sizes.max) throw Error("invalid network size range");
  if (rule.kind == EdgeRule::Kind::fixed_out_degree && rule.out_degree >= sizes.min) {
    throw Error("out-degree " + std::to_string(rule.out_degree) +
                " is infeasible for networks of " + std::to_string(sizes.min) + " nodes");
  }
  constexpr std::size_t kMaxRedraws = 1000;
  std::uint64_t family_seed = seed;
  for (std::size_t attempt = 0; attempt < kMaxRedraws; ++attempt) {
    std::vector<Network> nets(count);
    detail::parallel_for(count, [&](std::size_t m) {
      nets[m] = draw_network(m, sizes, rule, family_seed);
    });
    for (const auto& net : nets) {
      if (net.max_degree() >= 2) return nets;
    }
    family_seed = derive_seed(seed, Stream::graph, count + attempt + 1);
  }
  throw Error("could not draw a sample where some node has two or more friends");
}

Dataset draw_covariates(std::vector<Network> nets,
                        const std::vector<CovariateColumn>& columns,
                        std::uint64_t seed) {
  std::vector<Eigen::MatrixXd> x(nets.size());
  std::vector<std::string> names;
  for (const auto& c : columns) names.push_back(c.name);
  detail::parallel_for(nets.size(), [&](std::size_t m) {
    Rng rng = make_stream(seed, Stream::covariates, m);
    const auto n = static_cast<Eigen::Index>(nets[m].size());
    Eigen::MatrixXd xm(n, static_cast<Eigen::Index>(columns.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < columns.size(); ++k) {
        const auto& col = columns[k];
        double v = 0.0;
        if (col.kind == CovariateKind::gaussian) {
          v = std::normal_distribution<double>(0.0, 1.0)(rng);
        } else {
          v = static_cast<double>(std::poisson_distribution<int>(col.poisson_mean)(rng));
        }
        xm(i, static_cast<Eigen::Index>(k)) = v;
      }
    }
    x[m] = std::move(xm);
  });
  return Dataset::assemble(std::move(nets), std::move(x), {}, std::move(names));
}

SimulatedOutcomes simulate_outcomes(const Parameters& params, const Dataset& data,
                                    std::uint64_t seed, const SolverOptions& opts) {
  SimulatedOutcomes out;
  const std::size_t m_count = data.network_count();
  out.y.resize(m_count);
  out.equilibria.resize(m_count);
  detail::parallel_for(m_count, [&](std::size_t m) {
    const auto& nd = data.networks[m];
    auto prof = solve_fixed_point(params, nd.net, nd.g, nd.cov, opts);
    const Eigen::VectorXd idx = best_response_index(prof.p_star, params, nd.net, nd.g, nd.cov);
    Rng rng = make_stream(seed, Stream::outcomes, m);
    Eigen::VectorXd y(idx.size());
    for (Eigen::Index i = 0; i < idx.size(); ++i) {
      const double eta = params.link.quantile(open_unit(rng));
      y[i] = idx[i] - eta > 0.0 ? 1.0 : 0.0;
    }
    out.y[m] = std::move(y);
    out.equilibria[m] = std::move(prof);
  });
  for (const auto& prof : out.equilibria) {
    if (!prof.certificate.satisfied) {
      std::ostringstream msg;
      msg << "parameters are outside the certified region (bound "
          << prof.certificate.bound_value << "); equilibrium may not be unique";
      out.warnings.push_back(msg.str());
      break;
    }
  }
  return out;
}

std::vector<Eigen::VectorXd> bernoulli_outcomes(
    const std::vector<EquilibriumProfile>& equilibria, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> y(equilibria.size());
  for (std::size_t m = 0; m < equilibria.size(); ++m) {
    const auto& p = equilibria[m].p_star;
    Rng rng = make_stream(seed, Stream::bernoulli, m);
    y[m].resize(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) y[m][i] = open_unit(rng) < p[i] ? 1.0 : 0.0;
  }
  return y;
}

Parameters design_parameters(const SimulationDesign& design, std::uint64_t seed) {
  const std::size_t k = design.covariates.size();
  if (static_cast<std::size_t>(design.gamma1.size()) != k ||
      static_cast<std::size_t>(design.gamma2.size()) != k) {
    throw DimensionError("gamma1 and gamma2 need one entry per covariate column");
  }
  if (design.gamma0_low > design.gamma0_high) throw Error("invalid fixed-effect range");
  Parameters p = Parameters::zeros(design.networks, k, design.family, design.link);
  p.gamma1 = design.gamma1;
  p.gamma2 = design.gamma2;
  p.beta_h = design.beta_h;
  p.delta_beta = design.beta_l - design.beta_h;
  for (std::size_t m = 0; m < design.networks; ++m) {
    Rng rng = make_stream(seed, Stream::fixed_effects, m);
    p.gamma0[static_cast<Eigen::Index>(m)] =
        design.gamma0_low + (design.gamma0_high - design.gamma0_low) * open_unit(rng);
  }
  return p;
}

SyntheticDataset simulate_dataset(const SimulationDesign& design, std::uint64_t seed,
                                  const SolverOptions& opts) {
  SyntheticDataset s;
  s.seed = seed;
  s.truth = design_parameters(design, seed);
  s.data = draw_covariates(generate_networks(design.networks, design.sizes, design.edges, seed),
                           design.covariates, seed);
  auto sim = simulate_outcomes(s.truth, s.data, seed, opts);
  for (std::size_t m = 0; m < s.data.network_count(); ++m) {
    s.data.networks[m].y = std::move(sim.y[m]);
  }
  s.equilibria = std::move(sim.equilibria);
  s.warnings = std::move(sim.warnings);
  return s;
}

}  // namespace peerconf
