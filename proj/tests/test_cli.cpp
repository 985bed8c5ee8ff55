#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "peerconf/cli.hpp"

namespace fs = std::filesystem;
using namespace peerconf;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = run_cli(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path scratch(const std::string& name) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("peerconf_cli_" + std::to_string(::getpid()) + "_" + name + "_" +
                        std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string s(const fs::path& p) { return p.string(); }

Outcome simulate_into(const fs::path& dir, const std::string& seed = "7",
                      const std::string& networks = "20") {
  return run({"simulate", "--networks", networks, "--size", "30", "--edges", "er:0.08",
              "--seed", seed, "--out-dir", s(dir)});
}

std::set<std::string> network_ids(const fs::path& nodes) {
  std::istringstream in(slurp(nodes));
  std::string line;
  std::getline(in, line);
  std::set<std::string> ids;
  while (std::getline(in, line)) ids.insert(line.substr(0, line.find(',')));
  return ids;
}

}  // namespace

TEST_CASE("simulate is reproducible") {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  REQUIRE(simulate_into(a).code == kExitOk);
  REQUIRE(simulate_into(b).code == kExitOk);
  for (const char* f : {"edges.csv", "nodes.csv", "truth.csv", "p_star.csv"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK(network_ids(a / "nodes.csv").size() == 20);
  const auto c = scratch("sim_c");
  REQUIRE(simulate_into(c, "8").code == kExitOk);
  CHECK(slurp(a / "edges.csv") != slurp(c / "edges.csv"));
}

TEST_CASE("solve with the generating parameters reproduces p*") {
  const auto dir = scratch("solve");
  REQUIRE(simulate_into(dir).code == kExitOk);
  const auto o = run({"solve", "--edges", s(dir / "edges.csv"), "--nodes", s(dir / "nodes.csv"),
                      "--params", s(dir / "truth.csv"), "--output", s(dir / "p2.csv")});
  REQUIRE(o.code == kExitOk);
  CHECK(slurp(dir / "p2.csv") == slurp(dir / "p_star.csv"));
}

TEST_CASE("estimate, spec-test and diagnose succeed on simulated data") {
  const auto dir = scratch("pipeline");
  REQUIRE(simulate_into(dir, "11", "60").code == kExitOk);
  const std::vector<std::string> input{"--edges", s(dir / "edges.csv"), "--nodes",
                                       s(dir / "nodes.csv")};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> tail = {}) {
    head.insert(head.end(), input.begin(), input.end());
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
  };
  const auto est = run(with({"estimate"}, {"--report", s(dir / "est.csv")}));
  CHECK(est.code == kExitOk);
  CHECK(est.out.find("beta_h") != std::string::npos);
  CHECK(slurp(dir / "est.csv").find("beta_h.se,") != std::string::npos);

  const auto spec = run(with({"spec-test"}, {"--lr"}));
  CHECK(spec.code == kExitOk);
  CHECK(spec.out.find("beta3 = 0") != std::string::npos);

  const auto dia = run(with({"diagnose"}, {"--report", s(dir / "dia.csv")}));
  CHECK(dia.code == kExitOk);
  CHECK(dia.out.find("|beta_h| + 1.5 |beta_l - beta_h| < 4") != std::string::npos);
  const std::string report = slurp(dir / "dia.csv");
  CHECK(report.find("triads,0\n") == std::string::npos);
  CHECK(report.find("\ntriads,") != std::string::npos);
}

TEST_CASE("diagnose warns when nobody has friends") {
  const auto dir = scratch("isolated");
  {
    std::ofstream e(dir / "edges.csv");
    e << "network_id,source,target\n";
    std::ofstream n(dir / "nodes.csv");
    n << "network_id,node_id,y,x\nn,a,1,0.2\nn,b,0,1.5\nn,c,1,-0.3\nn,d,0,0.9\n";
  }
  const std::vector<std::string> input{"--edges", s(dir / "edges.csv"), "--nodes",
                                       s(dir / "nodes.csv")};
  std::vector<std::string> args{"diagnose"};
  args.insert(args.end(), input.begin(), input.end());
  const auto dia = run(args);
  CHECK(dia.code == kExitOk);
  CHECK(dia.err.find("no non-isolated nodes; peer parameters unidentified") != std::string::npos);
  args[0] = "estimate";
  CHECK(run(args).code == kExitIdentification);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  REQUIRE(simulate_into(dir).code == kExitOk);
  CHECK(run({"estimate", "--edges", s(dir / "missing.csv"), "--nodes", s(dir / "nodes.csv")})
            .code == kExitInvalid);
  CHECK(run({"estimate", "--bogus"}).code == kExitInvalid);
  // Uncertified generating parameters are simulated with a warning.
  const auto wild = run({"simulate", "--networks", "2", "--seed", "1", "--out-dir",
                         s(dir / "x"), "--beta-h", "3", "--beta-l", "5"});
  CHECK(wild.code == kExitOk);
  CHECK(wild.err.find("warning:") != std::string::npos);
  const auto stuck = run({"estimate", "--edges", s(dir / "edges.csv"), "--nodes",
                          s(dir / "nodes.csv"), "--max-outer", "1", "--outer-tol", "1e-14"});
  CHECK(stuck.code == kExitConvergence);
  {
    std::ofstream n(dir / "bad_nodes.csv");
    n << "network_id,node_id,y\nnet1,0,1\n";
  }
  const auto bad = run({"estimate", "--edges", s(dir / "edges.csv"), "--nodes",
                        s(dir / "bad_nodes.csv")});
  CHECK(bad.code == kExitInvalid);
  CHECK(bad.err.find("edges.csv:") != std::string::npos);
  CHECK(bad.err.find("unknown node") != std::string::npos);
}

TEST_CASE("config file values yield to command-line flags") {
  const auto dir = scratch("config");
  {
    std::ofstream c(dir / "run.ini");
    c << "[simulate]\nnetworks=3\nsize=20\nseed=5\n";
  }
  REQUIRE(run({"--config", s(dir / "run.ini"), "simulate", "--out-dir", s(dir / "a")}).code ==
          kExitOk);
  CHECK(network_ids(dir / "a" / "nodes.csv").size() == 3);
  REQUIRE(run({"--config", s(dir / "run.ini"), "simulate", "--networks", "4", "--out-dir",
               s(dir / "b")})
              .code == kExitOk);
  CHECK(network_ids(dir / "b" / "nodes.csv").size() == 4);
}

TEST_CASE("montecarlo writes a deterministic report") {
  const std::vector<std::string> args{"montecarlo", "--replications", "3", "--seed", "4",
                                      "--networks", "20", "--sections", "conformity"};
  const auto a = run(args);
  const auto b = run(args);
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  CHECK(a.out.find("conformity.npl.beta_h.bias,") != std::string::npos);
}

TEST_CASE("kernel variants give identical command output") {
  const auto dir = scratch("isa");
  REQUIRE(simulate_into(dir).code == kExitOk);
  const auto scalar = run({"--isa", "scalar", "estimate", "--edges", s(dir / "edges.csv"),
                           "--nodes", s(dir / "nodes.csv"), "--report", s(dir / "s.csv")});
  const auto automatic = run({"--isa", "auto", "estimate", "--edges", s(dir / "edges.csv"),
                              "--nodes", s(dir / "nodes.csv"), "--report", s(dir / "a.csv")});
  CHECK(scalar.code == kExitOk);
  CHECK(automatic.code == kExitOk);
  CHECK(run({"--isa", "sse9", "diagnose"}).code == kExitInvalid);
}

#ifdef PEERCONF_CLI_PATH
TEST_CASE("installed binary runs the same pipeline") {
  const auto dir = scratch("binary");
  const std::string bin = PEERCONF_CLI_PATH;
  const std::string cmd = "\"" + bin + "\" simulate --networks 5 --size 20 --seed 3 --out-dir \"" +
                          s(dir / "d") + "\" > \"" + s(dir / "log.txt") + "\" 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "d" / "p_star.csv"));
  const std::string bad = "\"" + bin + "\" estimate --edges nowhere.csv --nodes nowhere.csv > \"" +
                          s(dir / "log2.txt") + "\" 2>&1";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == kExitInvalid);
}
#endif
