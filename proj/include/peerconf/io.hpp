#pragma once

// Text file formats:
//   edges   network_id,source,target
//   nodes   network_id,node_id[,y][,x...]
//   p*      network_id,node_id,p_star
//   reports name,value
// Numbers are written in the shortest form that reads back to the same
// double, so write -> read -> write is byte-identical.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "peerconf/dataset.hpp"
#include "peerconf/equilibrium.hpp"
#include "peerconf/model.hpp"

namespace peerconf {

struct IngestOptions {
  // Covariate columns to keep, in this order; all non-outcome columns if empty.
  std::vector<std::string> covariates;
  bool undirected = false;
  bool require_outcomes = false;
};

struct IngestResult {
  Dataset data;
  std::vector<std::string> warnings;  // dropped self-loops and the like
};

// Node order within a network and network order follow the nodes file. Every
// edge endpoint must appear in the nodes file of the same network.
IngestResult ingest(std::istream& edges, std::istream& nodes,
                    const IngestOptions& opts = {});
IngestResult ingest(const std::filesystem::path& edges_path,
                    const std::filesystem::path& nodes_path,
                    const IngestOptions& opts = {});

void write_edges(std::ostream& out, const Dataset& data);
void write_nodes(std::ostream& out, const Dataset& data);
void write_equilibrium(std::ostream& out, const Dataset& data,
                       const std::vector<Eigen::VectorXd>& p_star);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

void write_key_values(std::ostream& out, const KeyValues& kv);
KeyValues read_key_values(std::istream& in, const std::string& source = "report");
std::string format_number(double v);

// name,value rows for every coefficient plus family, link and beta_l.
KeyValues parameter_records(const Parameters& params, const Dataset& data);

// Inverse of parameter_records: coefficients are matched by name against the
// shape of `data`. Family and link come from the records unless overridden.
Parameters parameters_from_records(const KeyValues& kv, const Dataset& data);

// Convenience wrappers that open files and report the path on failure.
void write_file(const std::filesystem::path& path, const std::string& contents);
KeyValues read_key_value_file(const std::filesystem::path& path);

}  // namespace peerconf
