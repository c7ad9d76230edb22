#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "dlab/chain.hpp"
#include "dlab/error.hpp"

using namespace dlab;
using namespace dlab::chain;
using dist::JointTable;

namespace {

const JointTable kBits(2, 2, {0.45, 0.05, 0.05, 0.45}, "bits");
using Matrix = std::vector<std::vector<double>>;

double tv(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += std::abs(p[k] - q[k]);
  return 0.5 * s;
}

std::vector<double> times(const std::vector<double>& p, const Matrix& m) {
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (std::size_t c = 0; c < m.size(); ++c) out[c] += p[r] * m[r][c];
  }
  return out;
}

Matrix dense(const EditKernel& k) {
  Matrix m;
  for (std::size_t r = 0; r < k.states(); ++r) m.push_back(k.dense_row(r));
  return m;
}

/// Per-site update law mu_i(. | y), straight from its definition.
std::vector<double> update_law(const Predictor& p, const SelectionPolicy& policy, std::size_t y, int i) {
  const auto q = p.predict(y);
  const auto digits = dist::decode_state(y, p.vocab(), p.length());
  std::vector<double> mu(static_cast<std::size_t>(p.vocab()), 0.0);
  for (const auto& w : edit_set(confidence(q), policy)) {
    if (w.sites.contains(i)) {
      for (int v = 0; v < p.vocab(); ++v) mu[static_cast<std::size_t>(v)] += w.weight * q.site(i)[static_cast<std::size_t>(v)];
    } else {
      mu[static_cast<std::size_t>(digits[static_cast<std::size_t>(i)])] += w.weight;
    }
  }
  return mu;
}

/// Worst-case influence matrix by enumerating every pair of states.
Matrix oracle_influence(const Predictor& p, const SelectionPolicy& policy) {
  const int l = p.length();
  Matrix a(static_cast<std::size_t>(l), std::vector<double>(static_cast<std::size_t>(l), 0.0));
  for (std::size_t y = 0; y < p.states(); ++y) {
    const auto dy = dist::decode_state(y, p.vocab(), l);
    for (std::size_t z = 0; z < p.states(); ++z) {
      const auto dz = dist::decode_state(z, p.vocab(), l);
      int diff = -1, count = 0;
      for (int j = 0; j < l; ++j) {
        if (dy[static_cast<std::size_t>(j)] != dz[static_cast<std::size_t>(j)]) {
          diff = j;
          ++count;
        }
      }
      if (count != 1) continue;
      for (int i = 0; i < l; ++i) {
        if (i == diff) continue;
        auto& cell = a[static_cast<std::size_t>(i)][static_cast<std::size_t>(diff)];
        cell = std::max(cell, tv(update_law(p, policy, y, i), update_law(p, policy, z, i)));
      }
    }
  }
  return a;
}

}  // namespace

TEST_CASE("confidence: worked values") {
  const auto uniform = Predictor::constant({{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
  for (double s : confidence(uniform, std::vector<int>{0, 3})) CHECK(s == 0.25);
  const auto point = Predictor::constant({{0.0, 1.0}, {1.0, 0.0}, {0.0, 1.0}});
  for (double s : confidence(point, std::vector<int>{0, 0, 0})) CHECK(s == 1.0);
  const auto s = confidence(Predictor::full_conditional(kBits), std::vector<int>{0, 0});
  CHECK(s[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("predictors: recipes and validation") {
  const auto mf = Predictor::mean_field(kBits);
  const auto q = mf.predict(std::vector<int>{1, 1});
  CHECK(q.site(0)[0] == doctest::Approx(0.5));
  CHECK(mf.recipe() == "mean_field");
  CHECK_THROWS_AS(Predictor::perturbed(mf, 1, 1.5), DomainError);
  CHECK_THROWS_AS(Predictor::constant({{0.5, 0.6}}), ValidationError);

  const auto pert = Predictor::perturbed(Predictor::full_conditional(kBits), 42, 0.3);
  for (std::size_t y = 0; y < 4; ++y) {
    const auto a = pert.predict(y);
    const auto b = pert.predict(y);
    for (int i = 0; i < 2; ++i) {
      double sum = 0.0;
      for (double x : a.site(i)) sum += x;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(a.site(i)[0] == b.site(i)[0]);
    }
  }
  // Zero-mass conditioning events fall back to uniform.
  const JointTable sparse(2, 2, {0.5, 0.5, 0.0, 0.0});
  const auto fc = Predictor::full_conditional(sparse).predict(std::vector<int>{1, 0});
  CHECK(fc.site(1)[0] == 0.5);
}

TEST_CASE("edit_set: worked values") {
  const std::vector<double> s{0.9, 0.3};
  auto e = edit_set(s, SelectionPolicy::threshold(0.5));
  REQUIRE(e.size() == 1);
  CHECK(e[0].sites.members(2) == std::vector<int>{0});
  CHECK(edit_set(s, SelectionPolicy::threshold(0.0))[0].sites == SiteSet::all(2));
  CHECK(edit_set(std::vector<double>{0.6, 0.6}, SelectionPolicy::top1())[0].sites.members(2) == std::vector<int>{0});
  CHECK(edit_set(std::vector<double>{0.5, 0.5}, SelectionPolicy::threshold(0.5))[0].sites == SiteSet::all(2));

  const auto rs = edit_set(std::vector<double>{0.1, 0.2, 0.3}, SelectionPolicy::random_scan_singleton());
  REQUIRE(rs.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(rs[static_cast<std::size_t>(i)].weight == doctest::Approx(1.0 / 3.0));
    CHECK(rs[static_cast<std::size_t>(i)].sites.members(3) == std::vector<int>{i});
  }
  const int fixed_sites[] = {1, 2};
  CHECK(edit_set(s, SelectionPolicy::fixed(SiteSet::of(fixed_sites)))[0].sites.members(2) == std::vector<int>{1});
}

TEST_CASE("build_kernel: worked instances") {
  const auto cst = Predictor::constant({{0.2, 0.8}, {0.7, 0.3}});
  const auto k = build_kernel(cst, SelectionPolicy::full());
  const std::vector<double> prod{0.14, 0.06, 0.56, 0.24};
  for (std::size_t r = 0; r < 4; ++r) {
    const auto row = k.dense_row(r);
    for (std::size_t c = 0; c < 4; ++c) CHECK(row[c] == doctest::Approx(prod[c]).epsilon(1e-15));
  }

  const auto id = build_kernel(Predictor::full_conditional(kBits), SelectionPolicy::threshold(1.5));
  for (std::size_t r = 0; r < 4; ++r) {
    const auto row = id.dense_row(r);
    for (std::size_t c = 0; c < 4; ++c) CHECK(row[c] == (r == c ? 1.0 : 0.0));
  }

  // Random-scan Gibbs on the correlated bits, mixed by hand from the two single-site moves.
  const Matrix expect{{0.90, 0.05, 0.05, 0.00},
                      {0.45, 0.10, 0.00, 0.45},
                      {0.45, 0.00, 0.10, 0.45},
                      {0.00, 0.05, 0.05, 0.90}};
  const auto gibbs = dense(build_kernel(Predictor::full_conditional(kBits), SelectionPolicy::random_scan_singleton()));
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(gibbs[r][c] == doctest::Approx(expect[r][c]).epsilon(1e-14));
  }
  CHECK(id.policy() == "threshold(1.5)");
  CHECK(k.predictor_recipe() == "constant");
}

TEST_CASE("property: kernels are stochastic and respect frozen coordinates") {
  Rng rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    const int v = std::uniform_int_distribution<int>(2, 3)(rng);
    const int l = std::uniform_int_distribution<int>(1, 4)(rng);
    const auto joint = dist::random_joint(v, l, rng);
    const Predictor preds[] = {Predictor::full_conditional(joint), Predictor::mean_field(joint),
                               Predictor::perturbed(Predictor::full_conditional(joint), rng(), 0.5)};
    const SelectionPolicy pols[] = {SelectionPolicy::threshold(std::uniform_real_distribution<double>(0, 1)(rng)),
                                    SelectionPolicy::top1(), SelectionPolicy::full(),
                                    SelectionPolicy::random_scan_singleton()};
    for (const auto& p : preds) {
      for (const auto& pol : pols) {
        const auto k = build_kernel(p, pol);
        for (std::size_t y = 0; y < k.states(); ++y) {
          const auto row = k.dense_row(y);
          double sum = 0.0;
          for (double x : row) sum += x;
          CHECK(std::abs(sum - 1.0) <= 1e-10);
          if (pol.randomized()) continue;
          const auto set = edit_set(confidence(p.predict(y)), pol)[0].sites;
          const auto src = dist::decode_state(y, v, l);
          const auto q = p.predict(y);
          for (std::size_t t = 0; t < row.size(); ++t) {
            const auto dst = dist::decode_state(t, v, l);
            double expect = 1.0;
            for (int i = 0; i < l; ++i) {
              const auto ii = static_cast<std::size_t>(i);
              expect *= set.contains(i) ? q.site(i)[static_cast<std::size_t>(dst[ii])] : (dst[ii] == src[ii] ? 1.0 : 0.0);
            }
            CHECK(row[t] == doctest::Approx(expect).epsilon(1e-13));
          }
        }
      }
    }
  }
}

TEST_CASE("dobrushin: worked instances") {
  const auto cst = dobrushin(Predictor::constant({{0.2, 0.8}, {0.7, 0.3}}), SelectionPolicy::full());
  CHECK(cst.alpha == 0.0);
  const auto ind = product_table(dist::ProductFamily({{0.3, 0.7}, {0.1, 0.9}}));
  const auto d_ind = dobrushin(Predictor::full_conditional(ind), SelectionPolicy::full());
  CHECK(d_ind.alpha == doctest::Approx(0.0).epsilon(1e-15));

  const auto d = dobrushin(Predictor::full_conditional(kBits), SelectionPolicy::full());
  CHECK(std::abs(d.at(0, 1) - 0.8) <= 1e-15);
  CHECK(std::abs(d.at(1, 0) - 0.8) <= 1e-15);
  CHECK(d.at(0, 0) == 0.0);
  CHECK(std::abs(d.alpha - 0.8) <= 1e-15);

  const auto rs = dobrushin(Predictor::full_conditional(kBits), SelectionPolicy::random_scan_singleton());
  CHECK(rs.alpha == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(rs.self_influence[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("property: influence matrix matches pairwise enumeration") {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int v = std::uniform_int_distribution<int>(2, 3)(rng);
    const int l = std::uniform_int_distribution<int>(2, 3)(rng);
    const auto joint = dist::random_joint(v, l, rng);
    const Predictor p = trial % 2 ? Predictor::full_conditional(joint)
                                  : Predictor::perturbed(Predictor::full_conditional(joint), rng(), 0.4);
    const SelectionPolicy pol = trial % 3 == 0   ? SelectionPolicy::random_scan_singleton()
                                : trial % 3 == 1 ? SelectionPolicy::threshold(0.4)
                                                 : SelectionPolicy::top1();
    const auto rep = dobrushin(p, pol);
    const auto a = oracle_influence(p, pol);
    double alpha = 0.0;
    for (int i = 0; i < l; ++i) {
      double row = 0.0;
      for (int j = 0; j < l; ++j) {
        const double x = rep.at(i, j);
        CHECK(x >= 0.0);
        CHECK(x <= 1.0 + 1e-15);
        CHECK(x == doctest::Approx(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]).epsilon(1e-13));
        row += x;
      }
      alpha = std::max(alpha, row);
    }
    CHECK(rep.alpha == doctest::Approx(alpha).epsilon(1e-13));
  }
}

TEST_CASE("property: constant predictors have zero influence under deterministic policies") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto fam = dist::random_family(3, 3, rng);
    const auto p = Predictor::constant(fam.sites());
    for (const auto& pol : {SelectionPolicy::threshold(0.4), SelectionPolicy::top1(), SelectionPolicy::full()}) {
      const auto rep = dobrushin(p, pol);
      CHECK(*std::max_element(rep.influence.begin(), rep.influence.end()) == 0.0);
    }
  }
}

TEST_CASE("stationary: worked instances") {
  const auto id = build_kernel(Predictor::full_conditional(kBits), SelectionPolicy::threshold(2.0));
  const auto st_id = stationary(id);
  CHECK_FALSE(st_id.unique());
  for (std::size_t k = 0; k < 4; ++k) CHECK(st_id.distribution[k] == 0.25);

  const auto cst = build_kernel(Predictor::constant({{0.2, 0.8}, {0.7, 0.3}}), SelectionPolicy::full());
  const auto st_c = stationary(cst);
  CHECK(st_c.unique());
  CHECK(st_c.distribution[2] == doctest::Approx(0.56).epsilon(1e-14));

  const auto gibbs = build_kernel(Predictor::full_conditional(kBits), SelectionPolicy::random_scan_singleton());
  const auto st_g = stationary(gibbs);
  CHECK(st_g.unique());
  CHECK(dist::total_variation(st_g.distribution.probs(), kBits.probs()) <= 1e-8);
}

TEST_CASE("stationary: oscillating kernel exhausts the iteration cap") {
  const JointTable anti(2, 2, {0.0, 0.5, 0.5, 0.0});
  const auto k = build_kernel(Predictor::full_conditional(anti), SelectionPolicy::full());
  try {
    stationary(k, {1e-12, 50, 3});
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_gap() > 1e-12);
  }
}

TEST_CASE("contraction: trivial cases") {
  const auto gibbs = build_kernel(Predictor::full_conditional(kBits), SelectionPolicy::random_scan_singleton());
  const auto at_limit = contraction_check(gibbs, 0.4, {std::vector<double>(kBits.probs().begin(), kBits.probs().end())}, 50);
  CHECK(at_limit.status == CheckStatus::checked);
  CHECK(at_limit.holds);
  CHECK(at_limit.worst_ratio == doctest::Approx(0.0).epsilon(1e-9));

  const auto rank_one = build_kernel(Predictor::constant({{0.2, 0.8}, {0.7, 0.3}}), SelectionPolicy::full());
  std::vector<std::vector<double>> initials;
  for (std::size_t y = 0; y < 4; ++y) initials.push_back(point_mass(4, y));
  const auto r1 = contraction_check(rank_one, 0.0, initials, 10);
  CHECK(r1.holds);
  CHECK(r1.violations == 0);

  const auto skipped = contraction_check(gibbs, 1.0, initials, 10);
  CHECK(skipped.status == CheckStatus::skipped);
}

TEST_CASE("contraction: full-policy correlated bits satisfy the alpha^k bound") {
  const auto p = Predictor::full_conditional(kBits);
  const auto k = build_kernel(p, SelectionPolicy::full());
  const auto alpha = dobrushin(p, SelectionPolicy::full()).alpha;
  std::vector<std::vector<double>> initials;
  for (std::size_t y = 0; y < 4; ++y) initials.push_back(point_mass(4, y));
  const auto rep = contraction_check(k, alpha, initials, 50);
  CHECK(rep.holds);
  CHECK(rep.worst_ratio <= 1.0);
}

TEST_CASE("contraction: random-scan Gibbs on correlated bits exceeds alpha at the first step") {
  // alpha counts only cross-site influence (0.4 here); a single-site move
  // also keeps half its mass on the current value, which alpha ignores.
  const auto p = Predictor::full_conditional(kBits);
  const auto pol = SelectionPolicy::random_scan_singleton();
  const auto k = build_kernel(p, pol);
  const double alpha = dobrushin(p, pol).alpha;
  const std::vector<double> limit(kBits.probs().begin(), kBits.probs().end());

  const auto q0 = point_mass(4, 0);
  const auto q1 = times(q0, dense(k));
  CHECK(tv(q0, limit) == doctest::Approx(0.55).epsilon(1e-14));
  CHECK(tv(q1, limit) == doctest::Approx(0.45).epsilon(1e-14));

  const auto rep = contraction_check(k, alpha, {q0}, 1, limit);
  CHECK(rep.status == CheckStatus::checked);
  CHECK_FALSE(rep.holds);
  CHECK(rep.worst_ratio == doctest::Approx((0.45 / 0.55) / 0.4).epsilon(1e-12));
}

TEST_CASE("geometric_round_bound") {
  CHECK(geometric_round_bound(0.5, 1.0, 0.01) == 7);
  CHECK(geometric_round_bound(0.9, 1.0, 0.1) == 22);
  CHECK(geometric_round_bound(0.5, 1.0, 0.25) == 2);
  CHECK(geometric_round_bound(0.5, 1.0, 1.0) == 0);
  CHECK(geometric_round_bound(0.0, 1.0, 1e-9) == 1);
  CHECK_THROWS_AS(geometric_round_bound(1.0, 1.0, 0.1), UnsupportedConfigError);
  CHECK_THROWS_AS(geometric_round_bound(0.5, 1.0, 0.0), DomainError);
}

TEST_CASE("mixing_time: empirical value matches dense matrix powers") {
  const auto p = Predictor::full_conditional(kBits);
  for (const auto& pol : {SelectionPolicy::full(), SelectionPolicy::random_scan_singleton()}) {
    const auto k = build_kernel(p, pol);
    const double alpha = dobrushin(p, pol).alpha;
    const auto st = stationary(k).distribution;
    const std::vector<double> limit(st.probs().begin(), st.probs().end());
    const auto m = dense(k);
    double d0 = 0.0;
    for (std::size_t y = 0; y < 4; ++y) d0 = std::max(d0, tv(point_mass(4, y), limit));
    for (double delta : {1e-1, 1e-2, 1e-3}) {
      std::vector<std::vector<double>> rows;
      for (std::size_t y = 0; y < 4; ++y) rows.push_back(point_mass(4, y));
      std::size_t steps = 0;
      auto worst = [&] {
        double w = 0.0;
        for (const auto& r : rows) w = std::max(w, tv(r, limit));
        return w;
      };
      while (worst() > delta) {
        for (auto& r : rows) r = times(r, m);
        ++steps;
      }
      const auto rep = mixing_time(k, alpha, delta, limit);
      REQUIRE(rep.empirical.has_value());
      CHECK(*rep.empirical == steps);
      CHECK(rep.d0 == doctest::Approx(d0));
      CHECK(rep.bound == geometric_round_bound(alpha, d0, delta));
      CHECK(rep.holds == (steps <= rep.bound));
      // Random-scan Gibbs mixes far slower than alpha = 0.4 would suggest.
      if (pol.randomized()) CHECK(steps > 3 * rep.bound);
    }
  }
  const auto k = build_kernel(p, SelectionPolicy::full());
  const std::vector<double> limit(kBits.probs().begin(), kBits.probs().end());
  CHECK(mixing_time(k, 0.8, 0.96, limit).empirical == std::optional<std::size_t>(0));
  CHECK(mixing_time(k, 0.8, 0.96, limit).bound == 0);
  CHECK(mixing_time(k, 1.2, 0.1, limit).status == CheckStatus::skipped);
  CHECK_THROWS_AS(mixing_time(k, 0.5, 1.0, limit), DomainError);
}

TEST_CASE("invariance: realizable constructions leave the target fixed") {
  Rng rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const auto fam = dist::random_family(3, 2, rng);
    const auto ind = dist::product_table(fam);
    for (double tau : {0.0, 0.2, 0.4, 0.6, 0.8, 1.1}) {
      CHECK(invariance_check(build_kernel(Predictor::mean_field(ind), SelectionPolicy::threshold(tau)), ind) < 1e-10);
    }
    const auto joint = dist::random_joint(3, 2, rng);
    CHECK(invariance_check(build_kernel(Predictor::full_conditional(joint), SelectionPolicy::random_scan_singleton()),
                           joint) < 1e-10);
    const auto pert = Predictor::perturbed(Predictor::full_conditional(joint), 9, 0.5);
    CHECK(invariance_check(build_kernel(pert, SelectionPolicy::full()), joint) > 0.0);
  }
}

TEST_CASE("property: threshold 0 with mean field reaches the product of marginals in one step") {
  Rng rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    const auto joint = dist::random_joint(3, 3, rng);
    const auto k = build_kernel(Predictor::mean_field(joint), SelectionPolicy::threshold(0.0));
    const auto target = dist::product_table(dist::site_marginals(joint));
    const auto y = std::uniform_int_distribution<std::size_t>(0, joint.size() - 1)(rng);
    const auto out = k.step(point_mass(joint.size(), y));
    CHECK(dist::total_variation(out, target.probs()) <= 1e-14);
    const auto gap = dist::kl(joint.probs(), out);
    CHECK(std::abs(gap.nats - dist::total_correlation(joint)) <= 1e-10);
  }
}

TEST_CASE("text exports") {
  std::ostringstream k;
  write_kernel_text(k, build_kernel(Predictor::constant({{0.5, 0.5}}), SelectionPolicy::full()));
  CHECK(k.str() == "2 1\nrows 2\n0.5 0.5\n0.5 0.5\n");
  std::ostringstream d;
  write_dobrushin_text(d, dobrushin(Predictor::full_conditional(kBits), SelectionPolicy::full()));
  CHECK(d.str() == "rows 2\n0 0.80000000000000004\n0.80000000000000004 0\n");
}
