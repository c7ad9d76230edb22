#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlab/chain.hpp"
#include "dlab/rng.hpp"

namespace dlab::verify {

/// Outcome of one property evaluated over a batch of random instances.
struct PropertyResult {
  std::string suite;
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest observed violation measure, property specific
  std::string detail;
};

struct MixingEntry {
  double delta = 0.0;
  std::optional<std::size_t> empirical;
  std::size_t bound = 0;
  bool holds = true;
};

/// Contraction, mixing and invariance figures for one chain configuration.
struct ChainVerification {
  std::string configuration;
  std::string predictor;
  std::string policy;
  std::size_t states = 0;
  double alpha = 0.0;
  double max_self_influence = 0.0;
  chain::CheckStatus status = chain::CheckStatus::skipped;
  bool unique_stationary = true;
  double worst_contraction_ratio = 0.0;
  std::size_t contraction_violations = 0;
  std::vector<MixingEntry> mixing;
  std::optional<double> invariance_defect;  // against the target joint, when one exists
  std::optional<double> recovery_tv;        // stationary vs target, for realizable constructions

  bool contraction_holds() const { return contraction_violations == 0; }
  bool mixing_holds() const;
};

struct TheoryOptions {
  std::uint64_t seed = kDefaultSeed;
  std::size_t gap_instances = 1000;
  std::size_t metric_instances = 10000;
  std::size_t kernel_instances = 100;
  std::size_t chain_instances = 30;
  std::size_t recovery_instances = 50;
  std::size_t meanfield_instances = 100;
  int k_max = 50;
  std::size_t initials = 20;
  std::vector<double> deltas{1e-1, 1e-2, 1e-3};
  std::size_t mixing_step_cap = 500;
};

struct TheoryReport {
  std::vector<PropertyResult> properties;
  std::vector<ChainVerification> chains;

  bool all_passed() const;
};

/// Runs every property suite. Deterministic for fixed options.
TheoryReport run_theory_suite(const TheoryOptions& options);

/// Contraction/mixing/invariance figures for one kernel. `target` is the
/// distribution the construction is meant to recover, if any.
ChainVerification verify_chain(std::string configuration, const chain::Predictor& predictor,
                               const chain::SelectionPolicy& policy, const std::optional<dist::JointTable>& target,
                               const TheoryOptions& options);

/// The 0.45/0.05 correlated-bit joint over {0,1}^2.
dist::JointTable correlated_bits();

}  // namespace dlab::verify
