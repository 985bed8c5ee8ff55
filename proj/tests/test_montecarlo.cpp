#include <doctest.h>

#include <sstream>

#include "peerconf/error.hpp"
#include "peerconf/montecarlo.hpp"

using namespace peerconf;

namespace {

MonteCarloConfig quick_config(std::size_t reps, std::uint64_t seed) {
  MonteCarloConfig c;
  c.replications = reps;
  c.seed = seed;
  c.design.networks = 30;
  c.estimation.compute_variance = true;
  return c;
}

std::string serialize(const MonteCarloReport& r) {
  std::ostringstream out;
  write_key_values(out, r.records());
  return out.str();
}

}  // namespace

TEST_CASE("zero replications is an error") {
  CHECK_THROWS_AS(run_montecarlo(quick_config(0, 1)), Error);
}

TEST_CASE("an uncertified design is refused") {
  auto c = quick_config(2, 1);
  c.design.beta_h = 3.0;
  c.design.beta_l = 5.0;
  CHECK_THROWS_AS(run_montecarlo(c), CertificateError);
}

TEST_CASE("same seed, same report") {
  auto c = quick_config(4, 77);
  c.compare_nfxp = true;
  const auto a = run_montecarlo(c);
  const auto b = run_montecarlo(c);
  CHECK(serialize(a) == serialize(b));
  const auto d = run_montecarlo(quick_config(4, 78));
  CHECK(serialize(a) != serialize(d));
  REQUIRE(a.section("conformity") != nullptr);
  CHECK(a.section("conformity")->agreement_gaps.size() == 4);
  CHECK(a.section("null")->paired_p_values.size() == 4);
  CHECK(a.section("nonexistent") == nullptr);
}

TEST_CASE("sections can be switched off") {
  auto c = quick_config(2, 3);
  c.spillover_section = false;
  c.null_section = false;
  c.specification = false;
  const auto r = run_montecarlo(c);
  CHECK(r.sections.size() == 1);
  CHECK(r.sections.front().name == "conformity");
  CHECK(r.sections.front().rates.empty());
}

TEST_CASE("recovery summaries are sane on a small run") {
  auto c = quick_config(20, 5);
  c.design.networks = 80;
  c.spillover_section = false;
  c.null_section = false;
  const auto r = run_montecarlo(c);
  CHECK(r.failures() == 0);
  const auto* sec = r.section("conformity");
  REQUIRE(sec != nullptr);
  const auto* bh = find_summary(sec->npl, "beta_h");
  const auto* bl = find_summary(sec->npl, "beta_l");
  REQUIRE(bh != nullptr);
  REQUIRE(bl != nullptr);
  CHECK(bh->truth == 1.0);
  CHECK(bl->truth == 2.0);
  CHECK(bh->count == 20);
  CHECK(std::abs(bh->mean_bias) <= 4.0 * bh->sd / std::sqrt(20.0) + 0.05);
  CHECK(bh->coverage >= 0.7);
  CHECK(bh->mse == doctest::Approx(bh->mean_bias * bh->mean_bias + bh->sd * bh->sd * 19.0 / 20.0)
                       .epsilon(1e-9));
  REQUIRE(find_rate(sec->rates, "wald_spillover") != nullptr);
}
