#include "peerconf/graph.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <unordered_map>

#include "csv.hpp"
#include "peerconf/error.hpp"
#include "peerconf/kernels.hpp"

namespace peerconf {

Network Network::from_edges(std::string id, std::size_t n,
                            std::span<const Edge> edges,
                            std::vector<std::string> node_ids,
                            bool undirected) {
  Network net;
  net.id_ = std::move(id);
  net.n_ = n;
  if (node_ids.empty()) {
    node_ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) node_ids.push_back(std::to_string(i));
  } else if (node_ids.size() != n) {
    throw DimensionError("network '" + net.id_ + "': " +
                         std::to_string(node_ids.size()) + " node ids for " +
                         std::to_string(n) + " nodes");
  }
  net.node_ids_ = std::move(node_ids);

  std::vector<std::vector<std::uint32_t>> rows(n);
  auto add = [&](std::size_t s, std::size_t t) {
    if (s >= n || t >= n) {
      throw DimensionError("network '" + net.id_ + "': edge endpoint out of range");
    }
    if (s == t) {
      ++net.dropped_self_loops_;
      return;
    }
    rows[s].push_back(static_cast<std::uint32_t>(t));
  };
  for (const auto& [s, t] : edges) {
    add(s, t);
    if (undirected && s != t) add(t, s);
  }
  net.row_ptr_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = rows[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    net.row_ptr_[i + 1] = net.row_ptr_[i] + r.size();
  }
  net.cols_.reserve(net.row_ptr_[n]);
  for (const auto& r : rows) net.cols_.insert(net.cols_.end(), r.begin(), r.end());
  return net;
}

Network Network::from_adjacency(std::string id, std::size_t n,
                                std::span<const std::uint8_t> adjacency) {
  if (adjacency.size() != n * n) {
    throw DimensionError("adjacency matrix must have n*n entries");
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto a = adjacency[i * n + j];
      if (a > 1) throw ParseError("adjacency entries must be 0 or 1");
      if (a == 1) edges.emplace_back(i, j);
    }
  }
  return from_edges(std::move(id), n, edges);
}

std::vector<std::size_t> Network::degrees() const {
  std::vector<std::size_t> d(n_);
  for (std::size_t i = 0; i < n_; ++i) d[i] = degree(i);
  return d;
}

std::size_t Network::isolated_count() const noexcept {
  std::size_t c = 0;
  for (std::size_t i = 0; i < n_; ++i) c += isolated(i) ? 1 : 0;
  return c;
}

std::size_t Network::max_degree() const noexcept {
  std::size_t m = 0;
  for (std::size_t i = 0; i < n_; ++i) m = std::max(m, degree(i));
  return m;
}

bool Network::has_edge(std::size_t i, std::size_t j) const noexcept {
  const auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), static_cast<std::uint32_t>(j));
}

std::vector<Edge> Network::edges() const {
  std::vector<Edge> out;
  out.reserve(cols_.size());
  for (std::size_t i = 0; i < n_; ++i) {
    for (auto j : neighbors(i)) out.emplace_back(i, j);
  }
  return out;
}

Eigen::MatrixXd Network::adjacency_matrix() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_, n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (auto j : neighbors(i)) a(i, j) = 1.0;
  }
  return a;
}

InteractionMatrix::InteractionMatrix(std::size_t n,
                                     std::vector<std::size_t> row_ptr,
                                     std::vector<std::uint32_t> cols,
                                     std::vector<double> vals,
                                     std::size_t dense_threshold)
    : n_(n),
      row_ptr_(std::move(row_ptr)),
      cols_(std::move(cols)),
      vals_(std::move(vals)) {
  if (row_ptr_.size() != n_ + 1 || cols_.size() != vals_.size() ||
      row_ptr_.back() != cols_.size()) {
    throw DimensionError("inconsistent CSR layout for interaction matrix");
  }
  if (n_ > 0 && n_ <= dense_threshold) {
    dense_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        dense_[i * n_ + cols_[k]] = vals_[k];
      }
    }
  }
}

double InteractionMatrix::entry(std::size_t i, std::size_t j) const noexcept {
  if (!dense_.empty()) return dense_[i * n_ + j];
  const auto c = row_cols(i);
  const auto it = std::lower_bound(c.begin(), c.end(), static_cast<std::uint32_t>(j));
  if (it == c.end() || *it != j) return 0.0;
  return row_vals(i)[static_cast<std::size_t>(it - c.begin())];
}

double InteractionMatrix::row_sum(std::size_t i) const noexcept {
  double s = 0.0;
  for (double v : row_vals(i)) s += v;
  return s;
}

double InteractionMatrix::max_row_sum() const noexcept {
  double m = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (double v : row_vals(i)) s += std::abs(v);
    m = std::max(m, s);
  }
  return m;
}

void InteractionMatrix::row_moments(std::span<const double> p,
                                    std::span<const double> v,
                                    std::span<double> first,
                                    std::span<double> second) const {
  if (p.size() != n_ || v.size() != n_ || first.size() != n_ ||
      second.size() != n_) {
    throw DimensionError("row_moments: vector length does not match matrix");
  }
  if (!dense_.empty()) {
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < n_; ++i) {
      if (row_empty(i)) {
        first[i] = second[i] = 0.0;
        continue;
      }
      const auto m = k.row_moments(dense_.data() + i * n_, p.data(), v.data(), n_);
      first[i] = m.first;
      second[i] = m.second;
    }
    return;
  }
  for (std::size_t i = 0; i < n_; ++i) {
    double f = 0.0;
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      const double g = vals_[k];
      f += g * p[cols_[k]];
      s += g * g * v[cols_[k]];
    }
    first[i] = f;
    second[i] = s;
  }
}

void InteractionMatrix::multiply(std::span<const double> x,
                                 std::span<double> out) const {
  if (x.size() != n_ || out.size() != n_) {
    throw DimensionError("multiply: vector length does not match matrix");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (!dense_.empty()) {
      out[i] = row_empty(i) ? 0.0 : kernels::dot(dense_row(i), x);
      continue;
    }
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      s += vals_[k] * x[cols_[k]];
    }
    out[i] = s;
  }
}

Eigen::MatrixXd InteractionMatrix::multiply(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.rows()) != n_) {
    throw DimensionError("multiply: matrix rows do not match interaction matrix");
  }
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    multiply(std::span<const double>(x.col(c).data(), n_),
             std::span<double>(out.col(c).data(), n_));
  }
  return out;
}

Eigen::MatrixXd InteractionMatrix::to_dense() const {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n_, n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      g(i, cols_[k]) = vals_[k];
    }
  }
  return g;
}

namespace {

InteractionMatrix weights_from(const Network& net, bool normalize,
                               std::size_t dense_threshold) {
  const std::size_t n = net.size();
  std::vector<std::size_t> row_ptr(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<double> vals;
  cols.reserve(net.edge_count());
  vals.reserve(net.edge_count());
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = net.neighbors(i);
    const double w = normalize && !nb.empty() ? 1.0 / static_cast<double>(nb.size()) : 1.0;
    for (auto j : nb) {
      cols.push_back(j);
      vals.push_back(w);
    }
    row_ptr[i + 1] = cols.size();
  }
  return {n, std::move(row_ptr), std::move(cols), std::move(vals), dense_threshold};
}

}  // namespace

InteractionMatrix row_normalize(const Network& net, std::size_t dense_threshold) {
  return weights_from(net, true, dense_threshold);
}

InteractionMatrix adjacency_weights(const Network& net,
                                    std::size_t dense_threshold) {
  return weights_from(net, false, dense_threshold);
}

TriadReport intransitive_start_indicator(const Network& net) {
  const std::size_t n = net.size();
  TriadReport rep;
  rep.starts.assign(n, 0);
  std::vector<std::uint8_t> direct(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = net.neighbors(i);
    for (auto j : nb) direct[j] = 1;
    for (auto j : nb) {
      for (auto k : net.neighbors(j)) {
        if (k == i || direct[k]) continue;
        rep.starts[i] = 1;
        ++rep.triad_count;
      }
    }
    for (auto j : nb) direct[j] = 0;
  }
  return rep;
}

double sigma_quadratic_form(std::span<const double> g_row,
                            std::span<const double> p) {
  if (g_row.size() != p.size()) {
    throw DimensionError("sigma_quadratic_form: weight row has " +
                         std::to_string(g_row.size()) + " entries, p has " +
                         std::to_string(p.size()));
  }
  std::vector<double> v(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) v[j] = p[j] * (1.0 - p[j]);
  const auto m = kernels::row_moments(g_row, p, v);
  return m.first * m.first + m.second;
}

std::vector<Network> read_edge_list(std::istream& in, bool undirected) {
  csv::Reader reader(in, "edges");
  std::vector<std::string> f;
  if (!reader.next(f)) reader.fail("empty edge list");
  if (f.size() < 3 || f[0] != "network_id" || f[1] != "source" || f[2] != "target") {
    reader.fail("expected header 'network_id,source,target'");
  }
  struct Pending {
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> index;
    std::vector<Edge> edges;
  };
  std::vector<std::string> order;
  std::map<std::string, Pending> nets;
  auto node = [](Pending& p, const std::string& id) {
    auto [it, inserted] = p.index.emplace(id, p.ids.size());
    if (inserted) p.ids.push_back(id);
    return it->second;
  };
  while (reader.next(f)) {
    if (f.size() != 3) reader.fail("expected 3 fields, got " + std::to_string(f.size()));
    auto [it, inserted] = nets.try_emplace(f[0]);
    if (inserted) order.push_back(f[0]);
    const std::size_t s = node(it->second, f[1]);
    const std::size_t t = node(it->second, f[2]);
    it->second.edges.emplace_back(s, t);
  }
  std::vector<Network> out;
  out.reserve(order.size());
  for (const auto& id : order) {
    auto& p = nets[id];
    const std::size_t n = p.ids.size();
    out.push_back(Network::from_edges(id, n, p.edges, std::move(p.ids), undirected));
  }
  return out;
}

}  // namespace peerconf
