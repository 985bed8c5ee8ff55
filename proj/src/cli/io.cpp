#include "peerconf/io.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "csv.hpp"
#include "peerconf/error.hpp"

namespace peerconf {
namespace {

struct PendingNetwork {
  std::string id;
  std::vector<std::string> node_ids;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  std::vector<Edge> edges;
};

}  // namespace

IngestResult ingest(std::istream& edges, std::istream& nodes, const IngestOptions& opts) {
  csv::Reader nr(nodes, "nodes");
  std::vector<std::string> f;
  if (!nr.next(f)) nr.fail("empty nodes file");
  if (f.size() < 2 || f[0] != "network_id" || f[1] != "node_id") {
    nr.fail("expected header starting with 'network_id,node_id'");
  }
  const std::size_t width = f.size();
  const bool has_y = width > 2 && f[2] == "y";
  const std::size_t first_x = has_y ? 3 : 2;
  if (opts.require_outcomes && !has_y) nr.fail("outcome column 'y' is required");

  std::vector<std::string> names;
  std::vector<std::size_t> columns;
  if (opts.covariates.empty()) {
    for (std::size_t c = first_x; c < width; ++c) {
      names.push_back(f[c]);
      columns.push_back(c);
    }
  } else {
    for (const auto& want : opts.covariates) {
      std::size_t c = first_x;
      while (c < width && f[c] != want) ++c;
      if (c == width) nr.fail("covariate column '" + want + "' not found");
      names.push_back(want);
      columns.push_back(c);
    }
  }

  std::vector<PendingNetwork> nets;
  std::unordered_map<std::string, std::size_t> net_index;
  while (nr.next(f)) {
    if (f.size() != width) {
      nr.fail("expected " + std::to_string(width) + " fields, got " + std::to_string(f.size()));
    }
    auto [it, fresh] = net_index.emplace(f[0], nets.size());
    if (fresh) nets.push_back(PendingNetwork{f[0], {}, {}, {}, {}, {}});
    auto& pn = nets[it->second];
    if (!pn.index.emplace(f[1], pn.node_ids.size()).second) {
      nr.fail("duplicate node '" + f[1] + "' in network '" + f[0] + "'");
    }
    pn.node_ids.push_back(f[1]);
    if (has_y) {
      const double y = csv::parse_double(f[2], nr, "y");
      if (y != 0.0 && y != 1.0) nr.fail("outcome must be 0 or 1, got '" + f[2] + "'");
      pn.y.push_back(y);
    }
    std::vector<double> row;
    row.reserve(columns.size());
    for (std::size_t k = 0; k < columns.size(); ++k) {
      row.push_back(csv::parse_double(f[columns[k]], nr, names[k]));
    }
    pn.x.push_back(std::move(row));
  }
  if (nets.empty()) nr.fail("nodes file has no rows");

  csv::Reader er(edges, "edges");
  if (!er.next(f)) er.fail("empty edges file");
  if (f.size() != 3 || f[0] != "network_id" || f[1] != "source" || f[2] != "target") {
    er.fail("expected header 'network_id,source,target'");
  }
  while (er.next(f)) {
    if (f.size() != 3) er.fail("expected 3 fields, got " + std::to_string(f.size()));
    const auto nit = net_index.find(f[0]);
    if (nit == net_index.end()) er.fail("network '" + f[0] + "' is not in the nodes file");
    auto& pn = nets[nit->second];
    const auto s = pn.index.find(f[1]);
    if (s == pn.index.end()) {
      er.fail("unknown node '" + f[1] + "' in network '" + f[0] + "'");
    }
    const auto t = pn.index.find(f[2]);
    if (t == pn.index.end()) {
      er.fail("unknown node '" + f[2] + "' in network '" + f[0] + "'");
    }
    pn.edges.emplace_back(s->second, t->second);
  }

  IngestResult out;
  std::vector<Network> graphs;
  std::vector<Eigen::MatrixXd> xs;
  std::vector<Eigen::VectorXd> ys;
  for (auto& pn : nets) {
    const std::size_t n = pn.node_ids.size();
    graphs.push_back(Network::from_edges(pn.id, n, pn.edges, std::move(pn.node_ids),
                                         opts.undirected));
    if (graphs.back().dropped_self_loops() > 0) {
      out.warnings.push_back("network '" + pn.id + "': dropped " +
                             std::to_string(graphs.back().dropped_self_loops()) +
                             " self-loop(s)");
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(names.size()));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < names.size(); ++k) {
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = pn.x[i][k];
      }
    }
    xs.push_back(std::move(x));
    if (has_y) ys.push_back(Eigen::Map<const Eigen::VectorXd>(pn.y.data(), pn.y.size()));
  }
  out.data = Dataset::assemble(std::move(graphs), std::move(xs), std::move(ys),
                               std::move(names));
  return out;
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

IngestResult ingest(const std::filesystem::path& edges_path,
                    const std::filesystem::path& nodes_path, const IngestOptions& opts) {
  auto e = open_input(edges_path);
  auto n = open_input(nodes_path);
  try {
    return ingest(e, n, opts);
  } catch (const ParseError& err) {
    // Replace the generic stream labels with the actual paths.
    std::string what = err.what();
    if (what.rfind("edges:", 0) == 0) what = edges_path.string() + what.substr(5);
    if (what.rfind("nodes:", 0) == 0) what = nodes_path.string() + what.substr(5);
    throw ParseError(what);
  }
}

std::string format_number(double v) { return csv::format_double(v); }

void write_edges(std::ostream& out, const Dataset& data) {
  out << "network_id,source,target\n";
  for (const auto& nd : data.networks) {
    const auto& ids = nd.net.node_ids();
    for (const auto& [i, j] : nd.net.edges()) {
      out << nd.net.id() << ',' << ids[i] << ',' << ids[j] << '\n';
    }
  }
}

void write_nodes(std::ostream& out, const Dataset& data) {
  const bool has_y = data.has_outcomes();
  out << "network_id,node_id";
  if (has_y) out << ",y";
  for (const auto& name : data.covariate_names) out << ',' << name;
  out << '\n';
  for (const auto& nd : data.networks) {
    const auto& ids = nd.net.node_ids();
    for (std::size_t i = 0; i < nd.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      out << nd.net.id() << ',' << ids[i];
      if (has_y) out << ',' << format_number(nd.y[ii]);
      for (Eigen::Index k = 0; k < nd.cov.x.cols(); ++k) {
        out << ',' << format_number(nd.cov.x(ii, k));
      }
      out << '\n';
    }
  }
}

void write_equilibrium(std::ostream& out, const Dataset& data,
                       const std::vector<Eigen::VectorXd>& p_star) {
  if (p_star.size() != data.network_count()) {
    throw DimensionError("one equilibrium vector per network required");
  }
  out << "network_id,node_id,p_star\n";
  for (std::size_t m = 0; m < p_star.size(); ++m) {
    const auto& nd = data.networks[m];
    for (std::size_t i = 0; i < nd.size(); ++i) {
      out << nd.net.id() << ',' << nd.net.node_ids()[i] << ','
          << format_number(p_star[m][static_cast<Eigen::Index>(i)]) << '\n';
    }
  }
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  out << "name,value\n";
  for (const auto& [k, v] : kv) out << k << ',' << v << '\n';
}

KeyValues read_key_values(std::istream& in, const std::string& source) {
  csv::Reader r(in, source);
  std::vector<std::string> f;
  if (!r.next(f)) r.fail("empty file");
  if (f.size() != 2 || f[0] != "name" || f[1] != "value") {
    r.fail("expected header 'name,value'");
  }
  KeyValues kv;
  while (r.next(f)) {
    if (f.size() != 2) r.fail("expected 2 fields, got " + std::to_string(f.size()));
    kv.emplace_back(f[0], f[1]);
  }
  return kv;
}

KeyValues parameter_records(const Parameters& params, const Dataset& data) {
  KeyValues kv;
  kv.emplace_back("family", std::string(params.family.name()));
  if (params.family.tag == FamilyTag::aggregate_conformity) {
    kv.emplace_back("weights", params.family.weights == AggregateWeights::adjacency
                                   ? "adjacency"
                                   : "row_normalized");
  }
  kv.emplace_back("link", std::string(params.link.name()));
  const auto names = params.names(data.network_ids(), data.covariate_names);
  const Eigen::VectorXd theta = params.to_vector();
  for (std::size_t j = 0; j < names.size(); ++j) {
    kv.emplace_back(names[j], format_number(theta[static_cast<Eigen::Index>(j)]));
  }
  if (params.family.tag != FamilyTag::generalized) {
    kv.emplace_back("beta_l", format_number(params.beta_l()));
  }
  return kv;
}

Parameters parameters_from_records(const KeyValues& kv, const Dataset& data) {
  std::map<std::string, std::string> map(kv.begin(), kv.end());
  ModelFamily family;
  LinkFunction link;
  if (auto it = map.find("family"); it != map.end()) family = ModelFamily::parse(it->second);
  if (auto it = map.find("weights"); it != map.end() && it->second == "adjacency") {
    family.weights = AggregateWeights::adjacency;
  }
  if (auto it = map.find("link"); it != map.end()) link = LinkFunction::parse(it->second);
  Parameters p = parameters_for(data, family, link);
  const auto names = p.names(data.network_ids(), data.covariate_names);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto it = map.find(names[j]);
    if (it == map.end()) throw ParseError("parameter file is missing '" + names[j] + "'");
    double v = 0.0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ParseError("parameter '" + names[j] + "': not a number: '" + s + "'");
    }
    theta[static_cast<Eigen::Index>(j)] = v;
  }
  p.assign(theta);
  return p;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw ParseError("failed writing '" + path.string() + "'");
}

KeyValues read_key_value_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_key_values(in, path.string());
}

}  // namespace peerconf
