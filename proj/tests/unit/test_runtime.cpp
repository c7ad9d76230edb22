#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dlab/error.hpp"
#include "dlab/runtime.hpp"

using namespace dlab;
using namespace dlab::runtime;

namespace {

RuntimeSpec flat(int m0, double alpha) {
  return RuntimeSpec({{1, 1.0}, {m0, 1.0}}, m0, {{1, {alpha, "test"}}});
}

/// Smallest k with d0 * alpha^k <= delta, counted one round at a time.
std::size_t rounds_by_iteration(double alpha, double d0, double delta) {
  std::size_t k = 0;
  long double bound = d0;
  while (bound > delta) {
    bound *= alpha;
    ++k;
  }
  return k;
}

}  // namespace

TEST_CASE("edit_rounds: worked values") {
  CHECK(edit_rounds(flat(8, 0.5), 1, 0.01) == 7);
  CHECK(edit_rounds(flat(8, 0.9), 1, 0.1) == 22);
  CHECK(edit_rounds(flat(8, 0.5), 1, 1.0) == 0);
  CHECK(edit_rounds(flat(8, 0.0), 1, 1e-6) == 1);
  CHECK_THROWS_AS(edit_rounds(flat(8, 0.5), 2, 0.1), UnsupportedConfigError);
  const auto missing = RuntimeSpec({{1, 1.0}}, 1, {{1, {std::nullopt, "not measured"}}});
  CHECK_THROWS_AS(edit_rounds(missing, 1, 0.1), UnsupportedConfigError);
}

TEST_CASE("no_slowdown: worked values") {
  const auto yes = no_slowdown(flat(8, 0.5), 1, 0.01);
  CHECK(yes.k_rounds == 7);
  CHECK(yes.t_edit == 7.0);
  CHECK(yes.t_base == 8.0);
  CHECK(yes.no_slowdown);
  CHECK(yes.binding_inequality.find("7 * 1 = 7 <= m0 * T_step(m0) = 8 * 1 = 8") != std::string::npos);

  const auto no = no_slowdown(flat(4, 0.5), 1, 0.01);
  CHECK(no.t_base == 4.0);
  CHECK_FALSE(no.no_slowdown);
}

TEST_CASE("spec validation") {
  // Fewer stages (smaller m) may not be slower per stage.
  CHECK_THROWS_AS(RuntimeSpec({{1, 2.0}, {8, 1.0}}, 8, {}), ValidationError);
  CHECK_NOTHROW(RuntimeSpec({{1, 1.0}, {8, 2.0}}, 8, {}));
  CHECK_THROWS_AS(RuntimeSpec({{1, 0.0}}, 1, {}), ValidationError);
  CHECK_THROWS_AS(RuntimeSpec({{1, 1.0}}, 2, {}), ValidationError);
  CHECK_THROWS_AS(RuntimeSpec({{1, 1.0}}, 1, {{1, {1.0, "x"}}}), ValidationError);
  CHECK_THROWS_AS(RuntimeSpec({{1, 1.0}}, 1, {}, 0.0), ValidationError);
}

TEST_CASE("measured alpha bridge") {
  chain::DobrushinReport r;
  r.alpha = 0.8;
  const auto e = measured_alpha_bridge(r, "bits/full");
  CHECK(e.alpha == 0.8);
  CHECK(e.provenance == "bits/full");
  CHECK(edit_rounds(flat(8, 0.5).with_alpha(1, e), 1, 0.01) == 21);
  r.alpha = 1.0;
  CHECK_THROWS_AS(measured_alpha_bridge(r, "x"), UnsupportedConfigError);
}

TEST_CASE("spec file parsing") {
  std::istringstream in("# trade-off\nt_step 1 0.5\nt_step 4 2  # slower stage\nalpha 1 0.5\nalpha 4 unavailable\nm0 4\nd0 0.5\n");
  const auto spec = read_runtime_spec(in);
  CHECK(spec.m0() == 4);
  CHECK(spec.d0() == 0.5);
  CHECK(spec.step_time(4) == 2.0);
  CHECK_FALSE(spec.alpha_of_m().at(4).alpha.has_value());
  CHECK(edit_rounds(spec, 1, 0.01) == 6);

  std::istringstream bad("t_step 1 1\nbogus 3\nm0 1\n");
  try {
    read_runtime_spec(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream no_m0("t_step 1 1\n");
  CHECK_THROWS_AS(read_runtime_spec(no_m0), ParseError);
  std::istringstream bad_alpha("t_step 1 1\nalpha 1 0.5x\nm0 1\n");
  CHECK_THROWS_AS(read_runtime_spec(bad_alpha), ParseError);
}

TEST_CASE("property: round counts match repeated contraction") {
  Rng rng(13);
  std::uniform_real_distribution<double> a(0.01, 0.99), d(1e-6, 0.9);
  for (int trial = 0; trial < 5000; ++trial) {
    const double alpha = a(rng), delta = d(rng);
    const auto spec = flat(8, alpha);
    CHECK(edit_rounds(spec, 1, delta) == rounds_by_iteration(alpha, 1.0, delta));
    const auto half = edit_rounds(spec, 1, delta / 2);
    CHECK(half >= edit_rounds(spec, 1, delta));
    CHECK(half <= edit_rounds(spec, 1, delta) +
                      static_cast<std::size_t>(std::ceil(std::log(2.0) / std::log(1.0 / alpha))) + 1);
  }
}

TEST_CASE("property: speeding up the edited stage never breaks no-slowdown") {
  Rng rng(31);
  std::uniform_real_distribution<double> u(0.05, 5.0), a(0.05, 0.95);
  for (int trial = 0; trial < 3000; ++trial) {
    const int m0 = std::uniform_int_distribution<int>(2, 64)(rng);
    const double t0 = u(rng) + 1.0, t1 = std::min(t0, u(rng));
    const double faster = t1 * std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    const double alpha = a(rng);
    const RuntimeSpec slow({{1, t1}, {m0, t0}}, m0, {{1, {alpha, "p"}}});
    const RuntimeSpec quick({{1, faster}, {m0, t0}}, m0, {{1, {alpha, "p"}}});
    const auto r_slow = no_slowdown(slow, 1, 0.01);
    const auto r_quick = no_slowdown(quick, 1, 0.01);
    if (r_slow.no_slowdown) CHECK(r_quick.no_slowdown);
    CHECK(r_slow.t_edit == static_cast<double>(r_slow.k_rounds) * t1);
    CHECK(r_slow.t_base == m0 * t0);
  }
}
