#include "dlab/chain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "dlab/error.hpp"

namespace dlab::chain {
namespace {

constexpr const char* kModule = "editing-chain";

void check_site_dist(std::span<const double> q, const char* what) {
  double s = 0.0;
  for (double x : q) {
    if (!std::isfinite(x) || x < 0.0) throw ValidationError(kModule, what, "distribution", "entries must be >= 0");
    s += x;
  }
  if (std::abs(s - 1.0) > dist::kSumTolerance) {
    throw ValidationError(kModule, what, "distribution", fmt::format("sums to {:.17g}", s));
  }
}

void normalize_or_uniform(std::span<double> q) {
  double s = 0.0;
  for (double x : q) s += x;
  if (s <= 0.0) {
    std::fill(q.begin(), q.end(), 1.0 / static_cast<double>(q.size()));
    return;
  }
  for (auto& x : q) x /= s;
}

}  // namespace

// ---------------------------------------------------------------- Predictor

Predictor::Predictor(int vocab, int length, std::string context_id, Recipe recipe)
    : vocab_(vocab),
      length_(length),
      states_(dist::state_count(vocab, length)),
      context_id_(std::move(context_id)),
      recipe_(std::move(recipe)) {}

Predictor Predictor::full_conditional(JointTable joint) {
  const int v = joint.vocab(), l = joint.length();
  auto ctx = joint.context_id();
  return Predictor(v, l, std::move(ctx), FullConditional{std::make_shared<const JointTable>(std::move(joint))});
}

Predictor Predictor::mean_field(const JointTable& joint) {
  const auto fam = dist::site_marginals(joint);
  std::vector<double> flat;
  for (const auto& q : fam.sites()) flat.insert(flat.end(), q.begin(), q.end());
  return Predictor(joint.vocab(), joint.length(), joint.context_id(), MeanField{std::move(flat)});
}

Predictor Predictor::perturbed(Predictor base, std::uint64_t seed, double magnitude) {
  if (!(magnitude >= 0.0 && magnitude <= 1.0)) throw DomainError(kModule, "perturbation magnitude must lie in [0, 1]");
  const int v = base.vocab_, l = base.length_;
  auto ctx = base.context_id_;
  return Predictor(v, l, std::move(ctx), Perturbed{std::make_shared<const Predictor>(std::move(base)), seed, magnitude});
}

Predictor Predictor::constant(std::vector<std::vector<double>> sites, std::string context_id) {
  if (sites.empty()) throw ValidationError(kModule, "constant", "sites", "need at least one site");
  const auto v = sites.front().size();
  std::vector<double> flat;
  for (const auto& q : sites) {
    if (q.size() != v || v < 2) throw ValidationError(kModule, "constant", "sites", "all sites need the same V >= 2");
    check_site_dist(q, "constant");
    flat.insert(flat.end(), q.begin(), q.end());
  }
  return Predictor(static_cast<int>(v), static_cast<int>(sites.size()), std::move(context_id), Constant{std::move(flat)});
}

std::string Predictor::recipe() const {
  return std::visit(
      [](const auto& r) -> std::string {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, FullConditional>) {
          return "full_conditional";
        } else if constexpr (std::is_same_v<T, MeanField>) {
          return "mean_field";
        } else if constexpr (std::is_same_v<T, Perturbed>) {
          return fmt::format("perturbed({},seed={},magnitude={:g})", r.base->recipe(), r.seed, r.magnitude);
        } else {
          return "constant";
        }
      },
      recipe_);
}

SiteDistributions Predictor::predict(std::size_t state) const {
  SiteDistributions out(vocab_, length_);
  const auto vs = static_cast<std::size_t>(vocab_);
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, FullConditional>) {
          const auto digits = dist::decode_state(state, vocab_, length_);
          for (int i = 0; i < length_; ++i) {
            const auto stride = dist::site_stride(vocab_, length_, i);
            const auto base = state - static_cast<std::size_t>(digits[static_cast<std::size_t>(i)]) * stride;
            auto q = out.site(i);
            for (std::size_t v = 0; v < vs; ++v) q[v] = (*r.joint)[base + v * stride];
            normalize_or_uniform(q);
          }
        } else if constexpr (std::is_same_v<T, Perturbed>) {
          const auto base = r.base->predict(state);
          std::vector<double> noise(vs);
          for (int i = 0; i < length_; ++i) {
            double total = 0.0;
            for (std::size_t v = 0; v < vs; ++v) {
              noise[v] = 0.05 + hash_unit({r.seed, state, static_cast<std::uint64_t>(i), v});
              total += noise[v];
            }
            auto q = out.site(i);
            const auto b = base.site(i);
            for (std::size_t v = 0; v < vs; ++v) q[v] = (1.0 - r.magnitude) * b[v] + r.magnitude * noise[v] / total;
          }
        } else {
          const auto& flat = [&]() -> const std::vector<double>& {
            if constexpr (std::is_same_v<T, MeanField>) {
              return r.marginals;
            } else {
              return r.sites;
            }
          }();
          for (int i = 0; i < length_; ++i) {
            auto q = out.site(i);
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(i) * vs), vs, q.begin());
          }
        }
      },
      recipe_);
  return out;
}

SiteDistributions Predictor::predict(std::span<const int> y) const {
  if (static_cast<int>(y.size()) != length_) throw DomainError(kModule, "sequence length does not match the predictor");
  for (int d : y) {
    if (d < 0 || d >= vocab_) throw DomainError(kModule, "token outside the vocabulary");
  }
  return predict(dist::encode_state(y, vocab_));
}

std::vector<double> confidence(const SiteDistributions& q) {
  std::vector<double> s(static_cast<std::size_t>(q.length()));
  for (int i = 0; i < q.length(); ++i) {
    const auto d = q.site(i);
    s[static_cast<std::size_t>(i)] = *std::max_element(d.begin(), d.end());
  }
  return s;
}

std::vector<double> confidence(const Predictor& predictor, std::span<const int> y) {
  return confidence(predictor.predict(y));
}

// ---------------------------------------------------------------- edit sets

SiteSet SiteSet::of(std::span<const int> sites) {
  SiteSet s;
  for (int i : sites) {
    if (i < 0 || i >= 32) throw DomainError(kModule, "site index out of range");
    s.insert(i);
  }
  return s;
}

int SiteSet::size() const { return std::popcount(bits_); }

std::vector<int> SiteSet::members(int length) const {
  std::vector<int> out;
  for (int i = 0; i < length; ++i) {
    if (contains(i)) out.push_back(i);
  }
  return out;
}

std::string SelectionPolicy::describe() const {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Threshold>) {
          return fmt::format("threshold({:g})", p.tau);
        } else if constexpr (std::is_same_v<T, Top1>) {
          return "top1";
        } else if constexpr (std::is_same_v<T, Full>) {
          return "full";
        } else if constexpr (std::is_same_v<T, Fixed>) {
          return fmt::format("fixed(0x{:x})", p.sites.bits());
        } else {
          return "random_scan_singleton";
        }
      },
      variant_);
}

std::vector<WeightedEditSet> edit_set(std::span<const double> s, const SelectionPolicy& policy) {
  const int l = static_cast<int>(s.size());
  return std::visit(
      [&](const auto& p) -> std::vector<WeightedEditSet> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SelectionPolicy::Threshold>) {
          SiteSet set;
          for (int i = 0; i < l; ++i) {
            if (s[static_cast<std::size_t>(i)] >= p.tau) set.insert(i);
          }
          return {{1.0, set}};
        } else if constexpr (std::is_same_v<T, SelectionPolicy::Top1>) {
          SiteSet set;
          if (l > 0) set.insert(static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin()));
          return {{1.0, set}};
        } else if constexpr (std::is_same_v<T, SelectionPolicy::Full>) {
          return {{1.0, SiteSet::all(l)}};
        } else if constexpr (std::is_same_v<T, SelectionPolicy::Fixed>) {
          return {{1.0, SiteSet(p.sites.bits() & SiteSet::all(l).bits())}};
        } else {
          std::vector<WeightedEditSet> sets;
          for (int i = 0; i < l; ++i) sets.push_back({1.0 / static_cast<double>(l), SiteSet(1u << i)});
          return sets;
        }
      },
      policy.variant());
}

// ---------------------------------------------------------------- kernel

std::span<const std::uint32_t> EditKernel::row_columns(std::size_t row) const {
  return {columns_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

std::span<const double> EditKernel::row_values(std::size_t row) const {
  return {values_.data() + offsets_[row], offsets_[row + 1] - offsets_[row]};
}

std::vector<double> EditKernel::dense_row(std::size_t row) const {
  std::vector<double> out(states(), 0.0);
  const auto cols = row_columns(row);
  const auto vals = row_values(row);
  for (std::size_t k = 0; k < cols.size(); ++k) out[cols[k]] += vals[k];
  return out;
}

std::vector<double> EditKernel::step(std::span<const double> dist) const {
  if (dist.size() != states()) throw DomainError(kModule, "distribution size does not match the kernel");
  std::vector<double> out(states(), 0.0);
  for (std::size_t r = 0; r < states(); ++r) {
    const double w = dist[r];
    if (w == 0.0) continue;
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) out[columns_[k]] += w * values_[k];
  }
  return out;
}

EditKernel build_kernel(const Predictor& predictor, const SelectionPolicy& policy) {
  const int v = predictor.vocab(), l = predictor.length();
  const auto n = predictor.states();
  EditKernel k;
  k.vocab_ = v;
  k.length_ = l;
  k.context_id_ = predictor.context_id();
  k.predictor_recipe_ = predictor.recipe();
  k.policy_ = policy.describe();
  k.offsets_.reserve(n + 1);

  std::vector<std::size_t> strides(static_cast<std::size_t>(l));
  for (int i = 0; i < l; ++i) strides[static_cast<std::size_t>(i)] = dist::site_stride(v, l, i);

  std::vector<std::pair<std::uint32_t, double>> row;
  for (std::size_t s = 0; s < n; ++s) {
    const auto digits = dist::decode_state(s, v, l);
    const auto q = predictor.predict(s);
    const auto sets = edit_set(confidence(q), policy);
    row.clear();
    for (const auto& [weight, set] : sets) {
      const auto sites = set.members(l);
      std::size_t base = s;
      for (int i : sites) base -= static_cast<std::size_t>(digits[static_cast<std::size_t>(i)]) * strides[static_cast<std::size_t>(i)];
      // Odometer over the edited sites; last site varies fastest so targets ascend.
      std::vector<int> odo(sites.size(), 0);
      while (true) {
        double p = weight;
        std::size_t target = base;
        for (std::size_t m = 0; m < sites.size(); ++m) {
          const auto i = static_cast<std::size_t>(sites[m]);
          p *= q.site(sites[m])[static_cast<std::size_t>(odo[m])];
          target += static_cast<std::size_t>(odo[m]) * strides[i];
        }
        if (p > 0.0) row.emplace_back(static_cast<std::uint32_t>(target), p);
        std::size_t m = sites.size();
        while (m > 0 && ++odo[m - 1] == v) odo[--m] = 0;
        if (m == 0) break;
      }
    }
    if (sets.size() > 1) {
      std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t w = 0;
      for (std::size_t r = 0; r < row.size(); ++r) {
        if (w > 0 && row[w - 1].first == row[r].first) {
          row[w - 1].second += row[r].second;
        } else {
          row[w++] = row[r];
        }
      }
      row.resize(w);
    }
    for (const auto& [c, p] : row) {
      k.columns_.push_back(c);
      k.values_.push_back(p);
    }
    k.offsets_.push_back(k.columns_.size());
  }
  return k;
}

// ---------------------------------------------------------------- Dobrushin

DobrushinReport dobrushin(const Predictor& predictor, const SelectionPolicy& policy) {
  const int v = predictor.vocab(), l = predictor.length();
  const auto vs = static_cast<std::size_t>(v);
  const auto ls = static_cast<std::size_t>(l);
  const auto n = predictor.states();
  DobrushinReport rep;
  rep.length = l;
  rep.influence.assign(ls * ls, 0.0);
  rep.self_influence.assign(ls, 0.0);

  // mu_i(. | y): q_i on edited sites, a point mass at y_i otherwise, averaged over the policy's edit sets.
  auto update_law = [&](std::size_t state, std::vector<double>& mu) {
    const auto digits = dist::decode_state(state, v, l);
    const auto q = predictor.predict(state);
    const auto sets = edit_set(confidence(q), policy);
    std::fill(mu.begin(), mu.end(), 0.0);
    for (const auto& [w, set] : sets) {
      for (int i = 0; i < l; ++i) {
        double* row = mu.data() + static_cast<std::size_t>(i) * vs;
        if (set.contains(i)) {
          const auto qi = q.site(i);
          for (std::size_t x = 0; x < vs; ++x) row[x] += w * qi[x];
        } else {
          row[static_cast<std::size_t>(digits[static_cast<std::size_t>(i)])] += w;
        }
      }
    }
  };

  // Each "line" is the V states that agree everywhere except at site j.
  std::vector<std::vector<double>> line(vs, std::vector<double>(ls * vs));
  for (int j = 0; j < l; ++j) {
    const auto stride = dist::site_stride(v, l, j);
    for (std::size_t s = 0; s < n; ++s) {
      if ((s / stride) % vs != 0) continue;  // visit each line once, from its y_j = 0 member
      for (std::size_t x = 0; x < vs; ++x) update_law(s + x * stride, line[x]);
      for (std::size_t a = 0; a < vs; ++a) {
        for (std::size_t b = a + 1; b < vs; ++b) {
          for (int i = 0; i < l; ++i) {
            const auto off = static_cast<std::size_t>(i) * vs;
            const double tv = dist::total_variation({line[a].data() + off, vs}, {line[b].data() + off, vs});
            if (i == j) {
              auto& d = rep.self_influence[static_cast<std::size_t>(i)];
              d = std::max(d, tv);
            } else {
              auto& a_ij = rep.influence[static_cast<std::size_t>(i) * ls + static_cast<std::size_t>(j)];
              a_ij = std::max(a_ij, tv);
            }
          }
        }
      }
    }
  }
  for (int i = 0; i < l; ++i) {
    double row = 0.0;
    for (int j = 0; j < l; ++j) {
      if (j != i) row += rep.at(i, j);
    }
    rep.alpha = std::max(rep.alpha, row);
  }
  return rep;
}

// ---------------------------------------------------------------- stationary

StationaryResult stationary(const EditKernel& kernel, const StationaryOptions& options) {
  const auto n = kernel.states();
  auto iterate = [&](std::vector<double> q) {
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t it = 1; it <= options.max_iterations; ++it) {
      auto next = kernel.step(q);
      const double s = dist::stable_sum(next);
      for (auto& x : next) x /= s;
      gap = dist::total_variation(next, q);
      q = std::move(next);
      if (gap < options.tolerance) return std::make_pair(std::move(q), it);
    }
    throw ConvergenceError(kModule,
                           fmt::format("power iteration did not converge in {} iterations (last TV gap {:.3e})",
                                       options.max_iterations, gap),
                           gap);
  };

  auto [fixed, iterations] = iterate(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  Rng rng(options.seed);
  auto [other, other_iterations] = iterate(dirichlet(n, 1.0, rng));
  (void)other_iterations;

  StationaryResult result{JointTable(kernel.vocab(), kernel.length(), fixed, kernel.context_id()), iterations,
                          dist::total_variation(fixed, other), std::nullopt};
  if (result.restart_gap > 10.0 * options.tolerance) {
    result.warning = fmt::format(
        "non-unique stationary distribution: uniform and random starts differ by TV {:.3e}", result.restart_gap);
  }
  return result;
}

// ---------------------------------------------------------------- contraction & mixing

std::vector<double> point_mass(std::size_t states, std::size_t at) {
  std::vector<double> p(states, 0.0);
  p.at(at) = 1.0;
  return p;
}

ContractionReport contraction_check(const EditKernel& kernel, double alpha,
                                    const std::vector<std::vector<double>>& initials, int k_max,
                                    std::span<const double> limit) {
  ContractionReport rep;
  if (!(alpha < 1.0)) return rep;
  rep.status = CheckStatus::checked;
  for (std::size_t idx = 0; idx < initials.size(); ++idx) {
    auto q = initials[idx];
    const double d0 = dist::total_variation(q, limit);
    for (int k = 1; k <= k_max; ++k) {
      q = kernel.step(q);
      const double d = dist::total_variation(q, limit);
      const double bound = std::pow(alpha, k) * d0;
      ++rep.checks;
      const bool violated = d > bound + 1e-9;
      if (violated) {
        ++rep.violations;
        rep.holds = false;
      }
      double ratio = 0.0;
      if (bound > 1e-12) {
        ratio = d / bound;
      } else if (violated) {
        ratio = std::numeric_limits<double>::infinity();
      }
      if (ratio > rep.worst_ratio) {
        rep.worst_ratio = ratio;
        rep.worst_k = k;
        rep.worst_initial = idx;
      }
    }
  }
  return rep;
}

ContractionReport contraction_check(const EditKernel& kernel, double alpha,
                                    const std::vector<std::vector<double>>& initials, int k_max) {
  if (!(alpha < 1.0)) return {};
  const auto st = stationary(kernel);
  return contraction_check(kernel, alpha, initials, k_max, st.distribution.probs());
}

std::size_t geometric_round_bound(double alpha, double d0, double delta) {
  if (!(delta > 0.0)) throw DomainError(kModule, "delta must be positive");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw UnsupportedConfigError(kModule, "the geometric bound needs 0 <= alpha < 1");
  if (delta >= d0) return 0;
  if (alpha == 0.0) return 1;
  const double x = std::log(d0 / delta) / std::log(1.0 / alpha);
  const double r = std::round(x);
  // Absorb rounding noise when the ratio is an exact integer.
  return static_cast<std::size_t>(std::abs(x - r) < 1e-9 ? r : std::ceil(x));
}

MixingReport mixing_time(const EditKernel& kernel, double alpha, double delta, std::span<const double> limit,
                         std::size_t max_steps) {
  MixingReport rep;
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError(kModule, "delta must lie in (0, 1)");
  if (!(alpha < 1.0)) return rep;
  const auto n = kernel.states();
  if (n > 4096) throw ResourceError(kModule, "mixing_time evaluates all point masses densely; V^L must be <= 4096");
  rep.status = CheckStatus::checked;
  for (double p : limit) rep.d0 = std::max(rep.d0, 1.0 - p);
  rep.bound = geometric_round_bound(alpha, rep.d0, delta);

  std::vector<std::vector<double>> rows(n);
  for (std::size_t y = 0; y < n; ++y) rows[y] = point_mass(n, y);
  double worst = rep.d0;
  std::size_t k = 0;
  while (worst > delta && k < max_steps) {
    ++k;
    worst = 0.0;
    for (auto& r : rows) {
      r = kernel.step(r);
      worst = std::max(worst, dist::total_variation(r, limit));
    }
  }
  if (worst <= delta) rep.empirical = k;
  rep.holds = rep.empirical.has_value() && *rep.empirical <= rep.bound;
  return rep;
}

double invariance_check(const EditKernel& kernel, const JointTable& candidate) {
  if (candidate.size() != kernel.states()) throw DomainError(kModule, "candidate shape does not match the kernel");
  const auto next = kernel.step(candidate.probs());
  return dist::total_variation(next, candidate.probs());
}

void write_kernel_text(std::ostream& out, const EditKernel& kernel) {
  out << kernel.vocab() << ' ' << kernel.length() << '\n' << "rows " << kernel.states() << '\n';
  for (std::size_t r = 0; r < kernel.states(); ++r) {
    const auto row = kernel.dense_row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << fmt::format("{:.17g}", row[c]) << (c + 1 == row.size() ? '\n' : ' ');
  }
}

void write_dobrushin_text(std::ostream& out, const DobrushinReport& report) {
  out << "rows " << report.length << '\n';
  for (int i = 0; i < report.length; ++i) {
    for (int j = 0; j < report.length; ++j) out << fmt::format("{:.17g}", report.at(i, j)) << (j + 1 == report.length ? '\n' : ' ');
  }
}

}  // namespace dlab::chain
