#include "dlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "dlab/dist.hpp"
#include "dlab/error.hpp"
#include "dlab/metrics.hpp"
#include "dlab/runtime.hpp"

namespace dlab::verify {
namespace {

using chain::Predictor;
using chain::SelectionPolicy;
using dist::JointTable;

struct Tally {
  PropertyResult r;

  Tally(std::string suite, std::string name) {
    r.suite = std::move(suite);
    r.name = std::move(name);
  }
  void record(bool ok, double measure = 0.0) {
    ++r.instances;
    if (!ok) ++r.failures;
    if (!std::isnan(measure)) r.worst = std::max(r.worst, measure);
  }
  PropertyResult done(std::string detail = {}) {
    r.passed = r.failures == 0 && r.instances > 0;
    r.detail = std::move(detail);
    return r;
  }
};

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

/// Up to `count` distinct state indices, ascending; all of them when there are fewer.
std::vector<std::size_t> pick_states(std::size_t states, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> idx(states);
  std::iota(idx.begin(), idx.end(), 0);
  if (states > count) {
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

std::vector<std::vector<double>> pick_initials(std::size_t states, std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  for (auto y : pick_states(states, count, seed)) out.push_back(chain::point_mass(states, y));
  return out;
}

// ---------------------------------------------------------------- dist-lab

void gap_suite(const TheoryOptions& o, TheoryReport& rep) {
  Tally identity("gap_decomposition", "kl_joint_equals_tc_plus_marginal_kl");
  Tally lower("gap_decomposition", "kl_joint_at_least_tc");
  Rng rng(derive_seed(o.seed, 1));
  for (std::size_t n = 0; n < o.gap_instances; ++n) {
    const int v = uniform_int(rng, 2, 4);
    const int l = uniform_int(rng, 1, 3);
    const auto joint = dist::random_joint(v, l, rng);
    const auto family = dist::random_family(v, l, rng);
    const auto g = dist::factorization_gap(joint, family);
    const bool finite = !g.kl_joint.infinite && !g.marginal_kl_sum.infinite;
    identity.record(finite && std::abs(g.residual) <= 1e-10, finite ? std::abs(g.residual) : 0.0);
    lower.record(g.lower_bound_holds(), finite ? std::max(0.0, g.tc - g.kl_joint.nats) : 0.0);
  }
  rep.properties.push_back(identity.done("worst = max |residual| (nats), tolerance 1e-10"));
  rep.properties.push_back(lower.done("worst = max (tc - kl_joint), tolerance 1e-12"));
}

// ---------------------------------------------------------------- metrics

void metric_suite(const TheoryOptions& o, TheoryReport& rep) {
  Tally afp("metrics", "afp_matches_distinct_step_count");
  Tally tau("metrics", "kendall_tau_matches_pair_enumeration");
  Tally fixed("metrics", "autoregressive_fixed_points");
  Rng rng(derive_seed(o.seed, 2));
  for (std::size_t k = 0; k < o.metric_instances; ++k) {
    const int n = uniform_int(rng, 2, 50);
    const int max_step = uniform_int(rng, 1, n);
    std::vector<std::int64_t> c(static_cast<std::size_t>(n));
    for (auto& x : c) x = uniform_int(rng, 1, max_step);

    const std::set<std::int64_t> distinct(c.begin(), c.end());
    const auto a = metrics::afp(c);
    afp.record(a == metrics::Rational::make(n, static_cast<std::int64_t>(distinct.size())));

    std::int64_t concordant = 0;
    std::int64_t discordant = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const auto si = c[static_cast<std::size_t>(i)];
        const auto sj = c[static_cast<std::size_t>(j)];
        if (sj > si) ++concordant;
        if (sj < si) ++discordant;
      }
    }
    const double expect = static_cast<double>(concordant - discordant) / (0.5 * n * (n - 1));
    const double err = std::abs(metrics::kendall_tau(c) - expect);
    tau.record(err <= 1e-12, err);

    std::vector<std::int64_t> ar(static_cast<std::size_t>(n));
    std::iota(ar.begin(), ar.end(), 1);
    fixed.record(metrics::afp(ar) == metrics::Rational::make(1, 1) && metrics::kendall_tau(ar) == 1.0);
  }
  rep.properties.push_back(afp.done("exact rational comparison"));
  rep.properties.push_back(tau.done("worst = max |tau - oracle|, tolerance 1e-12"));
  rep.properties.push_back(fixed.done("steps 1..n give AFP = 1 and tau = 1"));
}

// ---------------------------------------------------------------- editing chain

Predictor random_predictor(const JointTable& joint, Rng& rng, int kind) {
  switch (kind) {
    case 0: return Predictor::full_conditional(joint);
    case 1: return Predictor::mean_field(joint);
    case 2: return Predictor::perturbed(Predictor::full_conditional(joint), rng(), 0.3);
    default: return Predictor::constant(dist::random_family(joint.vocab(), joint.length(), rng).sites());
  }
}

SelectionPolicy random_policy(int length, Rng& rng, int kind) {
  switch (kind) {
    case 0: return SelectionPolicy::threshold(std::uniform_real_distribution<double>(0.2, 0.9)(rng));
    case 1: return SelectionPolicy::top1();
    case 2: return SelectionPolicy::full();
    case 3: {
      chain::SiteSet s;
      while (s.empty()) s = chain::SiteSet(static_cast<std::uint32_t>(rng()) & chain::SiteSet::all(length).bits());
      return SelectionPolicy::fixed(s);
    }
    default: return SelectionPolicy::random_scan_singleton();
  }
}

/// Row of the kernel recomputed from the defining product formula.
std::vector<double> oracle_row(const Predictor& p, const SelectionPolicy& policy, std::size_t y) {
  const int v = p.vocab();
  const int l = p.length();
  const auto states = p.states();
  const auto q = p.predict(y);
  const auto src = dist::decode_state(y, v, l);
  std::vector<double> row(states, 0.0);
  for (const auto& w : chain::edit_set(chain::confidence(q), policy)) {
    for (std::size_t t = 0; t < states; ++t) {
      const auto dst = dist::decode_state(t, v, l);
      double prob = w.weight;
      for (int i = 0; i < l && prob != 0.0; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        if (w.sites.contains(i)) prob *= q.site(i)[static_cast<std::size_t>(dst[ii])];
        else if (dst[ii] != src[ii]) prob = 0.0;
      }
      row[t] += prob;
    }
  }
  return row;
}

void kernel_suite(const TheoryOptions& o, TheoryReport& rep) {
  Tally stochastic("kernel", "rows_sum_to_one");
  Tally frozen("kernel", "frozen_coordinates_and_product_law");
  Rng rng(derive_seed(o.seed, 3));
  for (std::size_t n = 0; n < o.kernel_instances; ++n) {
    // Every tenth instance is one of the largest shapes (V^L up to 4096).
    static constexpr std::pair<int, int> kLarge[] = {{2, 12}, {4, 6}, {3, 7}, {2, 11}};
    int v = uniform_int(rng, 2, 4);
    int l = uniform_int(rng, 1, v == 2 ? 6 : (v == 3 ? 4 : 3));
    if (n % 10 == 9) std::tie(v, l) = kLarge[(n / 10) % std::size(kLarge)];
    const auto joint = dist::random_joint(v, l, rng);
    const auto pred = random_predictor(joint, rng, uniform_int(rng, 0, 3));
    const auto policy = random_policy(l, rng, uniform_int(rng, 0, 4));
    const auto kernel = chain::build_kernel(pred, policy);
    // The product-formula oracle is quadratic in the state count, so large kernels sample 64 rows.
    std::vector<char> compare(kernel.states(), 0);
    for (auto y : pick_states(kernel.states(), 64, derive_seed(o.seed, 100 + n))) compare[y] = 1;
    double worst_sum = 0.0;
    double worst_entry = 0.0;
    for (std::size_t y = 0; y < kernel.states(); ++y) {
      const auto row = kernel.dense_row(y);
      worst_sum = std::max(worst_sum, std::abs(dist::stable_sum(row) - 1.0));
      if (!compare[y]) continue;
      const auto expect = oracle_row(pred, policy, y);
      for (std::size_t t = 0; t < row.size(); ++t) worst_entry = std::max(worst_entry, std::abs(row[t] - expect[t]));
    }
    stochastic.record(worst_sum <= 1e-10, worst_sum);
    frozen.record(worst_entry <= 1e-12, worst_entry);
  }
  rep.properties.push_back(stochastic.done("worst = max |row sum - 1|, tolerance 1e-10"));
  rep.properties.push_back(frozen.done("worst = max |entry - product formula|, all rows up to 64 states, 64 sampled rows above"));
}

void dobrushin_suite(TheoryReport& rep) {
  Tally worked("dobrushin", "correlated_bits_full_policy");
  const auto d = chain::dobrushin(Predictor::full_conditional(correlated_bits()), SelectionPolicy::full());
  const double err = std::max({std::abs(d.at(0, 1) - 0.8), std::abs(d.at(1, 0) - 0.8), std::abs(d.alpha - 0.8)});
  worked.record(err <= 1e-12, err);
  rep.properties.push_back(worked.done(fmt::format("A_01 = {:.15g}, A_10 = {:.15g}, alpha = {:.15g}", d.at(0, 1),
                                                   d.at(1, 0), d.alpha)));

  Tally constant("dobrushin", "constant_predictor_has_zero_influence");
  Rng rng(derive_seed(kDefaultSeed, 4));
  for (int n = 0; n < 20; ++n) {
    const int v = uniform_int(rng, 2, 3);
    const int l = uniform_int(rng, 2, 3);
    const auto p = Predictor::constant(dist::random_family(v, l, rng).sites());
    for (int kind = 0; kind < 4; ++kind) {
      const auto r = chain::dobrushin(p, random_policy(l, rng, kind));
      const double m = *std::max_element(r.influence.begin(), r.influence.end());
      constant.record(m == 0.0, m);
    }
  }
  rep.properties.push_back(constant.done("deterministic policies only"));
}

void chain_suite(const TheoryOptions& o, TheoryReport& rep) {
  const auto bits = correlated_bits();
  rep.chains.push_back(verify_chain("correlated_bits/full", Predictor::full_conditional(bits), SelectionPolicy::full(),
                                    std::nullopt, o));
  rep.chains.push_back(verify_chain("correlated_bits/random_scan", Predictor::full_conditional(bits),
                                    SelectionPolicy::random_scan_singleton(), bits, o));

  Rng rng(derive_seed(o.seed, 5));
  for (std::size_t n = 0; n < o.chain_instances; ++n) {
    const int v = uniform_int(rng, 2, 3);
    const int l = uniform_int(rng, 2, 3);
    const auto joint = dist::random_joint(v, l, rng);
    const auto pred = random_predictor(joint, rng, uniform_int(rng, 0, 3));
    const auto policy = random_policy(l, rng, uniform_int(rng, 0, 4));
    rep.chains.push_back(verify_chain(fmt::format("random/{}", n), pred, policy, std::nullopt, o));
  }

  Tally unique("contraction", "unique_stationary_when_alpha_below_one");
  Tally contraction("contraction", "tv_contraction_from_point_masses");
  Tally mixing("mixing", "empirical_mixing_within_bound");
  for (const auto& c : rep.chains) {
    if (c.status != chain::CheckStatus::checked) continue;
    unique.record(c.unique_stationary);
    contraction.record(c.contraction_holds(), c.worst_contraction_ratio);
    for (const auto& m : c.mixing) {
      const double excess = m.empirical ? static_cast<double>(*m.empirical) - static_cast<double>(m.bound) : INFINITY;
      mixing.record(m.holds, excess);
    }
  }
  rep.properties.push_back(unique.done("dual-start power iteration agreement"));
  rep.properties.push_back(contraction.done(fmt::format(
      "k <= {}, {} point-mass initials, additive slack 1e-9; worst = max TV_k / (alpha^k TV_0)", o.k_max, o.initials)));
  rep.properties.push_back(mixing.done("worst = max (empirical - bound) steps, inf when the step cap was reached first"));
}

void recovery_suite(const TheoryOptions& o, TheoryReport& rep) {
  Tally invariance("invariance", "target_invariant_under_realizable_constructions");
  Tally recovery("recovery", "stationary_equals_target");
  Rng rng(derive_seed(o.seed, 6));
  const auto account = [&](const ChainVerification& c) {
    invariance.record(c.invariance_defect.value_or(1.0) < 1e-10, c.invariance_defect.value_or(1.0));
    if (c.status == chain::CheckStatus::checked && c.recovery_tv) {
      recovery.record(*c.recovery_tv <= 1e-8, *c.recovery_tv);
    }
  };
  TheoryOptions light = o;
  light.deltas.clear();
  light.k_max = 0;

  for (std::size_t n = 0; n < o.recovery_instances; ++n) {
    const int v = uniform_int(rng, 2, 3);
    const int l = uniform_int(rng, 2, 3);
    const auto family = dist::random_family(v, l, rng);
    const auto joint = dist::product_table(family);
    for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      auto c = verify_chain(fmt::format("independent/{}/tau={}", n, tau), Predictor::mean_field(joint),
                            SelectionPolicy::threshold(tau), joint, light);
      account(c);
      rep.chains.push_back(std::move(c));
    }
  }
  for (std::size_t n = 0; n < o.recovery_instances; ++n) {
    const int v = uniform_int(rng, 2, 3);
    const int l = uniform_int(rng, 2, 3);
    const auto joint = dist::random_joint(v, l, rng);
    auto c = verify_chain(fmt::format("gibbs/{}", n), Predictor::full_conditional(joint),
                          SelectionPolicy::random_scan_singleton(), joint, light);
    account(c);
    rep.chains.push_back(std::move(c));
  }
  rep.properties.push_back(invariance.done("worst = max TV(P* K, P*), tolerance 1e-10"));
  rep.properties.push_back(recovery.done("asserted only where alpha < 1; worst = max TV(stationary, P*), tolerance 1e-8"));
}

void one_step_suite(const TheoryOptions& o, TheoryReport& rep) {
  Tally gap("gap_decomposition", "one_step_mean_field_gap_equals_tc");
  Rng rng(derive_seed(o.seed, 7));
  for (std::size_t n = 0; n < o.meanfield_instances; ++n) {
    const int v = uniform_int(rng, 2, 4);
    const int l = uniform_int(rng, 2, 3);
    const auto joint = dist::random_joint(v, l, rng);
    const auto kernel = chain::build_kernel(Predictor::mean_field(joint), SelectionPolicy::threshold(0.0));
    const auto start = std::uniform_int_distribution<std::size_t>(0, joint.size() - 1)(rng);
    const auto out = kernel.step(chain::point_mass(joint.size(), start));
    const auto d = dist::kl(joint.probs(), out);
    const double err = d.infinite ? 1.0 : std::abs(d.nats - dist::total_correlation(joint));
    gap.record(err <= 1e-10, err);
  }
  rep.properties.push_back(gap.done("threshold 0, one step from a point mass; worst = max |KL - TC|"));
}

void runtime_suite(TheoryReport& rep) {
  Tally worked("runtime", "worked_no_slowdown_example");
  const runtime::RuntimeSpec spec8({{1, 1.0}, {8, 1.0}}, 8, {{1, {0.5, "worked example"}}});
  const runtime::RuntimeSpec spec4({{1, 1.0}, {4, 1.0}}, 4, {{1, {0.5, "worked example"}}});
  const auto a = runtime::no_slowdown(spec8, 1, 0.01);
  const auto b = runtime::no_slowdown(spec4, 1, 0.01);
  worked.record(a.k_rounds == 7 && a.no_slowdown && b.k_rounds == 7 && !b.no_slowdown);
  rep.properties.push_back(worked.done(fmt::format("K = {}, m0 = 8 -> {}, m0 = 4 -> {}", a.k_rounds, a.no_slowdown,
                                                   b.no_slowdown)));
}

}  // namespace

bool ChainVerification::mixing_holds() const {
  return std::all_of(mixing.begin(), mixing.end(), [](const MixingEntry& m) { return m.holds; });
}

bool TheoryReport::all_passed() const {
  return std::all_of(properties.begin(), properties.end(), [](const PropertyResult& p) { return p.passed; });
}

JointTable correlated_bits() { return JointTable(2, 2, {0.45, 0.05, 0.05, 0.45}, "correlated_bits"); }

ChainVerification verify_chain(std::string configuration, const Predictor& predictor, const SelectionPolicy& policy,
                               const std::optional<JointTable>& target, const TheoryOptions& options) {
  ChainVerification c;
  c.configuration = std::move(configuration);
  c.predictor = predictor.recipe();
  c.policy = policy.describe();
  const auto kernel = chain::build_kernel(predictor, policy);
  c.states = kernel.states();
  const auto d = chain::dobrushin(predictor, policy);
  c.alpha = d.alpha;
  c.max_self_influence = *std::max_element(d.self_influence.begin(), d.self_influence.end());
  if (target) c.invariance_defect = chain::invariance_check(kernel, *target);
  if (!(c.alpha < 1.0)) return c;

  c.status = chain::CheckStatus::checked;
  const auto st = chain::stationary(kernel, {1e-12, 100000, options.seed});
  c.unique_stationary = st.unique();
  const auto limit = st.distribution.probs();
  if (target) c.recovery_tv = dist::total_variation(limit, target->probs());
  if (options.k_max > 0) {
    const auto initials = pick_initials(c.states, options.initials, derive_seed(options.seed, c.states));
    const auto con = chain::contraction_check(kernel, c.alpha, initials, options.k_max, limit);
    c.worst_contraction_ratio = con.worst_ratio;
    c.contraction_violations = con.violations;
  }
  for (double delta : options.deltas) {
    const auto m = chain::mixing_time(kernel, c.alpha, delta, limit, options.mixing_step_cap);
    c.mixing.push_back({delta, m.empirical, m.bound, m.holds});
  }
  return c;
}

TheoryReport run_theory_suite(const TheoryOptions& options) {
  TheoryReport rep;
  gap_suite(options, rep);
  one_step_suite(options, rep);
  metric_suite(options, rep);
  kernel_suite(options, rep);
  dobrushin_suite(rep);
  chain_suite(options, rep);
  recovery_suite(options, rep);
  runtime_suite(rep);
  return rep;
}

}  // namespace dlab::verify
