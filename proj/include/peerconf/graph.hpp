#pragma once

// Interaction structure of one sub-population: binary directed adjacency,
// degrees, row-normalized weights and the intransitive-triad diagnostic.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace peerconf {

// Networks with more nodes than this keep only the sparse row layout.
inline constexpr std::size_t kDenseThreshold = 2000;

using Edge = std::pair<std::size_t, std::size_t>;

// Directed binary graph. Invariants: no self-loops, entries in {0,1},
// degree(i) equals the number of out-neighbours of i.
class Network {
 public:
  Network() = default;

  // Self-loops are dropped (counted in dropped_self_loops()); duplicate edges
  // collapse. With `undirected` every edge is mirrored.
  static Network from_edges(std::string id, std::size_t n,
                            std::span<const Edge> edges,
                            std::vector<std::string> node_ids = {},
                            bool undirected = false);

  // Row-major n*n 0/1 matrix; nonzero diagonal entries are dropped.
  static Network from_adjacency(std::string id, std::size_t n,
                                std::span<const std::uint8_t> adjacency);

  const std::string& id() const noexcept { return id_; }
  std::size_t size() const noexcept { return n_; }
  const std::vector<std::string>& node_ids() const noexcept { return node_ids_; }

  std::size_t degree(std::size_t i) const noexcept {
    return row_ptr_[i + 1] - row_ptr_[i];
  }
  std::vector<std::size_t> degrees() const;
  bool isolated(std::size_t i) const noexcept { return degree(i) == 0; }
  std::size_t isolated_count() const noexcept;
  std::size_t max_degree() const noexcept;

  // Sorted out-neighbours of i.
  std::span<const std::uint32_t> neighbors(std::size_t i) const noexcept {
    return {cols_.data() + row_ptr_[i], degree(i)};
  }
  bool has_edge(std::size_t i, std::size_t j) const noexcept;
  std::size_t edge_count() const noexcept { return cols_.size(); }
  std::size_t dropped_self_loops() const noexcept { return dropped_self_loops_; }

  std::vector<Edge> edges() const;
  Eigen::MatrixXd adjacency_matrix() const;

 private:
  std::string id_;
  std::size_t n_ = 0;
  std::vector<std::string> node_ids_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> cols_;
  std::size_t dropped_self_loops_ = 0;
};

// Nonnegative n*n weights stored as CSR rows, plus a dense row-major copy for
// networks up to kDenseThreshold nodes so row products run through the SIMD
// kernels.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  InteractionMatrix(std::size_t n, std::vector<std::size_t> row_ptr,
                    std::vector<std::uint32_t> cols, std::vector<double> vals,
                    std::size_t dense_threshold = kDenseThreshold);

  std::size_t size() const noexcept { return n_; }
  bool is_dense() const noexcept { return !dense_.empty() || n_ == 0; }

  std::span<const std::uint32_t> row_cols(std::size_t i) const noexcept {
    return {cols_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  std::span<const double> row_vals(std::size_t i) const noexcept {
    return {vals_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
  }
  // Full row i; only valid when is_dense().
  std::span<const double> dense_row(std::size_t i) const noexcept {
    return {dense_.data() + i * n_, n_};
  }
  bool row_empty(std::size_t i) const noexcept {
    return row_ptr_[i + 1] == row_ptr_[i];
  }
  double entry(std::size_t i, std::size_t j) const noexcept;
  double row_sum(std::size_t i) const noexcept;
  double max_row_sum() const noexcept;

  // first_i = sum_j w_ij p_j, second_i = sum_j w_ij^2 v_j for every row.
  void row_moments(std::span<const double> p, std::span<const double> v,
                   std::span<double> first, std::span<double> second) const;

  void multiply(std::span<const double> x, std::span<double> out) const;
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd to_dense() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> cols_;
  std::vector<double> vals_;
  std::vector<double> dense_;
};

// g_ij = a_ij / d_i; isolated nodes keep an all-zero row.
InteractionMatrix row_normalize(const Network& net,
                                std::size_t dense_threshold = kDenseThreshold);

// Unnormalized weights w_ij = a_ij.
InteractionMatrix adjacency_weights(const Network& net,
                                    std::size_t dense_threshold = kDenseThreshold);

struct TriadReport {
  // starts[i] == 1 iff i -> j -> k with k != i and no edge i -> k.
  std::vector<std::uint8_t> starts;
  // Number of ordered intransitive triples (i, j, k).
  std::size_t triad_count = 0;
};

TriadReport intransitive_start_indicator(const Network& net);

// g Sigma g' with Sigma = p p' + diag(p o (1 - p)), evaluated in O(n) as
// (g.p)^2 + sum_j g_j^2 p_j (1 - p_j). Throws DimensionError on size mismatch.
double sigma_quadratic_form(std::span<const double> g_row,
                            std::span<const double> p);

// Reads `network_id,source,target` text (header required). Node ids map to
// dense indices per network in order of first appearance; networks appear in
// order of first appearance as well.
std::vector<Network> read_edge_list(std::istream& in, bool undirected = false);

}  // namespace peerconf
