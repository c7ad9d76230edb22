#include <algorithm>
#include <set>

#include "doctest.h"
#include "dlab/verify.hpp"

using namespace dlab;
using namespace dlab::verify;

namespace {

TheoryOptions small_options() {
  TheoryOptions o;
  o.gap_instances = 100;
  o.metric_instances = 500;
  o.kernel_instances = 20;
  o.chain_instances = 12;
  o.recovery_instances = 10;
  o.meanfield_instances = 20;
  o.k_max = 30;
  return o;
}

const PropertyResult& find(const TheoryReport& r, const std::string& name) {
  const auto it = std::find_if(r.properties.begin(), r.properties.end(), [&](const auto& p) { return p.name == name; });
  REQUIRE(it != r.properties.end());
  return *it;
}

const ChainVerification& chain_named(const TheoryReport& r, const std::string& name) {
  const auto it = std::find_if(r.chains.begin(), r.chains.end(), [&](const auto& c) { return c.configuration == name; });
  REQUIRE(it != r.chains.end());
  return *it;
}

}  // namespace

TEST_CASE("theory suite: coverage and determinism") {
  const auto opts = small_options();
  const auto a = run_theory_suite(opts);
  const auto b = run_theory_suite(opts);
  REQUIRE(a.properties.size() == b.properties.size());
  for (std::size_t k = 0; k < a.properties.size(); ++k) {
    CHECK(a.properties[k].name == b.properties[k].name);
    CHECK(a.properties[k].failures == b.properties[k].failures);
    CHECK(a.properties[k].worst == b.properties[k].worst);
    CHECK(a.properties[k].instances > 0);
  }
  std::set<std::string> suites;
  for (const auto& p : a.properties) suites.insert(p.suite);
  CHECK(suites == std::set<std::string>{"gap_decomposition", "metrics", "kernel", "dobrushin", "contraction", "mixing",
                                        "invariance", "recovery", "runtime"});
  CHECK(a.all_passed() == std::all_of(a.properties.begin(), a.properties.end(), [](auto& p) { return p.passed; }));
}

TEST_CASE("theory suite: identities that hold unconditionally") {
  const auto r = run_theory_suite(small_options());
  for (const auto& p : r.properties) {
    if (p.suite == "contraction" || p.suite == "mixing" || p.suite == "recovery") continue;
    INFO(p.suite << "/" << p.name << ": " << p.detail);
    CHECK(p.passed);
  }
  CHECK(find(r, "target_invariant_under_realizable_constructions").worst < 1e-10);
  CHECK(find(r, "one_step_mean_field_gap_equals_tc").worst < 1e-10);
}

TEST_CASE("theory suite: aggregated counts match the per-chain records") {
  const auto r = run_theory_suite(small_options());
  std::size_t checked = 0, violating = 0, mixing_entries = 0, mixing_fail = 0, recovery = 0, recovery_fail = 0;
  for (const auto& c : r.chains) {
    if (c.status != chain::CheckStatus::checked) {
      CHECK(c.alpha >= 1.0);
      continue;
    }
    CHECK(c.alpha < 1.0);
    if (!c.mixing.empty()) {
      ++checked;
      if (!c.contraction_holds()) ++violating;
    }
    for (const auto& m : c.mixing) {
      ++mixing_entries;
      if (!m.holds) ++mixing_fail;
    }
    const bool constructed = c.configuration.starts_with("independent/") || c.configuration.starts_with("gibbs/");
    if (constructed && c.recovery_tv) {
      ++recovery;
      if (*c.recovery_tv > 1e-8) ++recovery_fail;
    }
  }
  const auto& con = find(r, "tv_contraction_from_point_masses");
  CHECK(con.instances == checked);
  CHECK(con.failures == violating);
  CHECK(con.passed == (violating == 0));
  const auto& mix = find(r, "empirical_mixing_within_bound");
  CHECK(mix.instances == mixing_entries);
  CHECK(mix.failures == mixing_fail);
  const auto& rec = find(r, "stationary_equals_target");
  CHECK(rec.instances == recovery);
  CHECK(rec.failures == recovery_fail);
}

TEST_CASE("correlated bits: full policy holds, random scan does not") {
  const auto r = run_theory_suite(small_options());
  const auto& full = chain_named(r, "correlated_bits/full");
  CHECK(full.alpha == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(full.contraction_holds());
  CHECK(full.mixing_holds());
  CHECK(full.unique_stationary);

  const auto& rs = chain_named(r, "correlated_bits/random_scan");
  CHECK(rs.alpha == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(rs.max_self_influence == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rs.recovery_tv.value() <= 1e-8);
  CHECK(rs.invariance_defect.value() <= 1e-12);
  CHECK_FALSE(rs.contraction_holds());
  CHECK_FALSE(rs.mixing_holds());
}

TEST_CASE("verify_chain: rank-one kernels mix in one step") {
  const auto p = chain::Predictor::constant({{0.3, 0.7}, {0.6, 0.4}});
  const auto c = verify_chain("constant", p, chain::SelectionPolicy::full(), std::nullopt, small_options());
  CHECK(c.status == chain::CheckStatus::checked);
  CHECK(c.alpha == 0.0);
  CHECK(c.contraction_holds());
  REQUIRE(c.mixing.size() == 3);
  for (const auto& m : c.mixing) {
    CHECK(m.bound == 1);
    CHECK(m.empirical == std::optional<std::size_t>(1));
  }

  // Nothing is ever edited, so the kernel is the identity. Cross-site
  // influence is still zero; only the self-influence reveals the frozen chain.
  const auto id = verify_chain("frozen", p, chain::SelectionPolicy::threshold(2.0), std::nullopt, small_options());
  CHECK(id.alpha == 0.0);
  CHECK(id.max_self_influence == 1.0);
  CHECK_FALSE(id.unique_stationary);
  for (const auto& m : id.mixing) CHECK_FALSE(m.empirical.has_value());
  CHECK_FALSE(id.mixing_holds());
}
