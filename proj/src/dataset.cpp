#include "peerconf/dataset.hpp"

#include <algorithm>

#include "peerconf/error.hpp"

namespace peerconf {

Dataset Dataset::assemble(std::vector<Network> nets, std::vector<Eigen::MatrixXd> x,
                          std::vector<Eigen::VectorXd> y,
                          std::vector<std::string> covariate_names) {
  const std::size_t m = nets.size();
  if (m == 0) throw DimensionError("dataset must contain at least one network");
  if (x.size() != m) throw DimensionError("one covariate matrix per network required");
  if (!y.empty() && y.size() != m) {
    throw DimensionError("one outcome vector per network required");
  }
  const auto k = static_cast<std::size_t>(x.front().cols());
  if (covariate_names.empty()) {
    for (std::size_t c = 0; c < k; ++c) covariate_names.push_back("x" + std::to_string(c + 1));
  }
  if (covariate_names.size() != k) {
    throw DimensionError("covariate name count does not match covariate columns");
  }
  Dataset d;
  d.covariate_names = std::move(covariate_names);
  d.networks.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (static_cast<std::size_t>(x[i].cols()) != k) {
      throw DimensionError("network '" + nets[i].id() + "' has " +
                           std::to_string(x[i].cols()) + " covariates, expected " +
                           std::to_string(k));
    }
    NetworkData nd;
    nd.g = row_normalize(nets[i]);
    nd.cov = CovariateBundle::build(i, m, std::move(x[i]), nd.g);
    if (!y.empty()) {
      if (static_cast<std::size_t>(y[i].size()) != nets[i].size()) {
        throw DimensionError("network '" + nets[i].id() + "': outcome length mismatch");
      }
      for (Eigen::Index j = 0; j < y[i].size(); ++j) {
        if (y[i][j] != 0.0 && y[i][j] != 1.0) {
          throw ParseError("network '" + nets[i].id() + "': outcomes must be 0 or 1");
        }
      }
      nd.y = std::move(y[i]);
    }
    nd.net = std::move(nets[i]);
    d.networks.push_back(std::move(nd));
  }
  return d;
}

std::size_t Dataset::node_count() const noexcept {
  std::size_t n = 0;
  for (const auto& nd : networks) n += nd.size();
  return n;
}

bool Dataset::has_outcomes() const noexcept {
  if (networks.empty()) return false;
  for (const auto& nd : networks) {
    if (static_cast<std::size_t>(nd.y.size()) != nd.size()) return false;
  }
  return true;
}

std::vector<std::string> Dataset::network_ids() const {
  std::vector<std::string> ids;
  ids.reserve(networks.size());
  for (const auto& nd : networks) ids.push_back(nd.net.id());
  return ids;
}

std::vector<Eigen::VectorXd> Dataset::outcome_mean_beliefs() const {
  if (!has_outcomes()) throw Error("outcome means requested but outcomes are missing");
  std::vector<Eigen::VectorXd> p;
  p.reserve(networks.size());
  for (const auto& nd : networks) {
    // Keep the start strictly inside (0, 1) even for all-0 or all-1 networks.
    const double mean = std::clamp(nd.y.mean(), 0.01, 0.99);
    p.push_back(Eigen::VectorXd::Constant(nd.y.size(), mean));
  }
  return p;
}

std::vector<Eigen::VectorXd> Dataset::constant_beliefs(double value) const {
  std::vector<Eigen::VectorXd> p;
  p.reserve(networks.size());
  for (const auto& nd : networks) {
    p.push_back(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(nd.size()), value));
  }
  return p;
}

Parameters parameters_for(const Dataset& data, ModelFamily family, LinkFunction link) {
  return Parameters::zeros(data.network_count(), data.covariate_count(), family, link);
}

}  // namespace peerconf
