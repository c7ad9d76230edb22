#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dlab/dist.hpp"

namespace dlab::chain {

using dist::JointTable;

/// Per-site predictive distributions at one state, stored site-major (L x V).
class SiteDistributions {
 public:
  SiteDistributions(int vocab, int length)
      : vocab_(vocab), length_(length), data_(static_cast<std::size_t>(vocab) * static_cast<std::size_t>(length), 0.0) {}

  int vocab() const { return vocab_; }
  int length() const { return length_; }
  std::span<double> site(int i) { return {data_.data() + offset(i), static_cast<std::size_t>(vocab_)}; }
  std::span<const double> site(int i) const { return {data_.data() + offset(i), static_cast<std::size_t>(vocab_)}; }

 private:
  std::size_t offset(int i) const { return static_cast<std::size_t>(i) * static_cast<std::size_t>(vocab_); }

  int vocab_;
  int length_;
  std::vector<double> data_;
};

/// q(. | y): deterministic map from the current sequence to per-site
/// distributions, built from one of four recipes.
class Predictor {
 public:
  /// q_i(. | y) = P*(y_i = . | y_without_i); uniform where the conditioning event has zero mass.
  static Predictor full_conditional(JointTable joint);
  /// q_i(. | y) = P*_i, ignoring y.
  static Predictor mean_field(const JointTable& joint);
  /// (1 - magnitude) * base + magnitude * r, with r a fixed pseudo-random
  /// distribution keyed by (seed, state, site). magnitude in [0, 1].
  static Predictor perturbed(Predictor base, std::uint64_t seed, double magnitude);
  /// The same list of L distributions at every state.
  static Predictor constant(std::vector<std::vector<double>> sites, std::string context_id = "constant");

  int vocab() const { return vocab_; }
  int length() const { return length_; }
  std::size_t states() const { return states_; }
  const std::string& context_id() const { return context_id_; }
  std::string recipe() const;

  SiteDistributions predict(std::size_t state) const;
  SiteDistributions predict(std::span<const int> y) const;

 private:
  struct FullConditional {
    std::shared_ptr<const JointTable> joint;
  };
  struct MeanField {
    std::vector<double> marginals;  // L x V
  };
  struct Perturbed {
    std::shared_ptr<const Predictor> base;
    std::uint64_t seed;
    double magnitude;
  };
  struct Constant {
    std::vector<double> sites;  // L x V
  };
  using Recipe = std::variant<FullConditional, MeanField, Perturbed, Constant>;

  Predictor(int vocab, int length, std::string context_id, Recipe recipe);

  int vocab_;
  int length_;
  std::size_t states_;
  std::string context_id_;
  Recipe recipe_;
};

/// s_i = max_v q_i(v | y).
std::vector<double> confidence(const SiteDistributions& q);
std::vector<double> confidence(const Predictor& predictor, std::span<const int> y);

/// Subset of sites as a bit set (L <= 17 is implied by the state cap).
class SiteSet {
 public:
  SiteSet() = default;
  explicit SiteSet(std::uint32_t bits) : bits_(bits) {}
  static SiteSet all(int length) { return SiteSet(length >= 32 ? ~0u : ((1u << length) - 1u)); }
  static SiteSet of(std::span<const int> sites);

  bool contains(int i) const { return (bits_ >> i) & 1u; }
  void insert(int i) { bits_ |= 1u << i; }
  int size() const;
  bool empty() const { return bits_ == 0; }
  std::uint32_t bits() const { return bits_; }
  std::vector<int> members(int length) const;

  bool operator==(const SiteSet&) const = default;

 private:
  std::uint32_t bits_ = 0;
};

struct WeightedEditSet {
  double weight = 1.0;
  SiteSet sites;
};

/// Rule choosing which sites are re-predicted in one chain step.
/// `threshold` is the editing rule {i : s_i >= tau}; the others are
/// extensions used to build realizable chains.
class SelectionPolicy {
 public:
  struct Threshold {
    double tau;
  };
  struct Top1 {};
  struct Full {};
  struct Fixed {
    SiteSet sites;
  };
  struct RandomScanSingleton {};
  using Variant = std::variant<Threshold, Top1, Full, Fixed, RandomScanSingleton>;

  static SelectionPolicy threshold(double tau) { return SelectionPolicy(Threshold{tau}); }
  static SelectionPolicy top1() { return SelectionPolicy(Top1{}); }
  static SelectionPolicy full() { return SelectionPolicy(Full{}); }
  static SelectionPolicy fixed(SiteSet sites) { return SelectionPolicy(Fixed{sites}); }
  static SelectionPolicy random_scan_singleton() { return SelectionPolicy(RandomScanSingleton{}); }

  const Variant& variant() const { return variant_; }
  bool randomized() const { return std::holds_alternative<RandomScanSingleton>(variant_); }
  std::string describe() const;

 private:
  explicit SelectionPolicy(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

/// Edit set(s) for the given confidences; deterministic policies return one
/// entry of weight 1, randomized ones a distribution over sets.
std::vector<WeightedEditSet> edit_set(std::span<const double> confidences, const SelectionPolicy& policy);

/// Row-stochastic transition matrix over V^L states in compressed row form.
class EditKernel {
 public:
  int vocab() const { return vocab_; }
  int length() const { return length_; }
  std::size_t states() const { return offsets_.size() - 1; }
  std::size_t nonzeros() const { return values_.size(); }
  const std::string& context_id() const { return context_id_; }
  const std::string& predictor_recipe() const { return predictor_recipe_; }
  const std::string& policy() const { return policy_; }

  std::span<const std::uint32_t> row_columns(std::size_t row) const;
  std::span<const double> row_values(std::size_t row) const;
  std::vector<double> dense_row(std::size_t row) const;

  /// One chain step of a distribution (row vector times kernel).
  std::vector<double> step(std::span<const double> dist) const;

 private:
  friend EditKernel build_kernel(const Predictor& predictor, const SelectionPolicy& policy);

  int vocab_ = 0;
  int length_ = 0;
  std::string context_id_;
  std::string predictor_recipe_;
  std::string policy_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> columns_;
  std::vector<double> values_;
};

EditKernel build_kernel(const Predictor& predictor, const SelectionPolicy& policy);

struct DobrushinReport {
  int length = 0;
  std::vector<double> influence;       // L x L, A_ij for i != j; diagonal zero
  std::vector<double> self_influence;  // TV of mu_i when site i itself changes (diagnostic)
  double alpha = 0.0;                  // max_i sum_{j != i} A_ij

  double at(int i, int j) const {
    return influence[static_cast<std::size_t>(i) * static_cast<std::size_t>(length) + static_cast<std::size_t>(j)];
  }
};

/// Influence coefficients by exhaustive enumeration of single-site neighbours.
DobrushinReport dobrushin(const Predictor& predictor, const SelectionPolicy& policy);

struct StationaryOptions {
  double tolerance = 1e-12;
  std::size_t max_iterations = 100000;
  std::uint64_t seed = kDefaultSeed;
};

struct StationaryResult {
  JointTable distribution;
  std::size_t iterations = 0;
  double restart_gap = 0.0;            // TV between the uniform-start and random-start fixed points
  std::optional<std::string> warning;  // set when the two starts disagree by > 10 x tolerance

  bool unique() const { return !warning.has_value(); }
};

/// Power iteration from the uniform distribution, cross-checked from a random start.
StationaryResult stationary(const EditKernel& kernel, const StationaryOptions& options = {});

enum class CheckStatus { checked, skipped };

struct ContractionReport {
  CheckStatus status = CheckStatus::skipped;
  bool holds = true;
  std::size_t checks = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max TV_k / (alpha^k TV_0) where the bound is non-negligible
  int worst_k = 0;
  std::size_t worst_initial = 0;
};

/// Checks TV(Q_k, Q_inf) <= alpha^k TV(Q_0, Q_inf) + 1e-9 for k = 1..k_max.
ContractionReport contraction_check(const EditKernel& kernel, double alpha,
                                    const std::vector<std::vector<double>>& initials, int k_max,
                                    std::span<const double> limit);
ContractionReport contraction_check(const EditKernel& kernel, double alpha,
                                    const std::vector<std::vector<double>>& initials, int k_max);

/// ceil(ln(d0 / delta) / ln(1 / alpha)); 0 when delta >= d0, 1 when alpha == 0.
std::size_t geometric_round_bound(double alpha, double d0, double delta);

struct MixingReport {
  CheckStatus status = CheckStatus::skipped;
  std::optional<std::size_t> empirical;  // empty if not reached within the step cap
  std::size_t bound = 0;
  double d0 = 0.0;
  bool holds = true;
};

/// Worst case over point-mass initials. Dense evaluation, V^L <= 4096.
MixingReport mixing_time(const EditKernel& kernel, double alpha, double delta, std::span<const double> limit,
                         std::size_t max_steps = 100000);

/// TV(candidate K, candidate).
double invariance_check(const EditKernel& kernel, const JointTable& candidate);

std::vector<double> point_mass(std::size_t states, std::size_t at);

void write_kernel_text(std::ostream& out, const EditKernel& kernel);
void write_dobrushin_text(std::ostream& out, const DobrushinReport& report);

}  // namespace dlab::chain
