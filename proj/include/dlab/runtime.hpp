#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "dlab/chain.hpp"

namespace dlab::runtime {

struct AlphaEntry {
  std::optional<double> alpha;  // empty: "unavailable"
  std::string provenance;
};

/// Inputs of the parallelism/editing runtime trade-off. All times share one
/// arbitrary unit.
class RuntimeSpec {
 public:
  /// Validates: times > 0, alpha in (0, 1) where present (0 allowed for
  /// rank-one chains), and per-stage time non-decreasing in the stage count m.
  RuntimeSpec(std::map<int, double> t_step, int m0, std::map<int, AlphaEntry> alpha_of_m, double d0 = 1.0);

  const std::map<int, double>& t_step() const { return t_step_; }
  int m0() const { return m0_; }
  const std::map<int, AlphaEntry>& alpha_of_m() const { return alpha_of_m_; }
  double d0() const { return d0_; }

  double step_time(int m) const;
  double alpha(int m) const;  // throws UnsupportedConfigError if missing or unavailable

  RuntimeSpec with_alpha(int m, AlphaEntry entry) const;

 private:
  std::map<int, double> t_step_;
  int m0_;
  std::map<int, AlphaEntry> alpha_of_m_;
  double d0_;
};

struct TradeoffReport {
  int m = 0;
  double delta = 0.0;
  double alpha = 0.0;
  std::size_t k_rounds = 0;
  double t_edit = 0.0;
  double t_base = 0.0;
  bool no_slowdown = false;
  std::string binding_inequality;
};

/// K = ceil(ln(d0/delta) / ln(1/alpha(m))); 0 when delta >= d0.
std::size_t edit_rounds(const RuntimeSpec& spec, int m, double delta);

/// t_edit = K * t_step(m) against t_base = m0 * t_step(m0).
TradeoffReport no_slowdown(const RuntimeSpec& spec, int m, double delta);

/// Turns a measured Dobrushin report into an alpha table entry.
AlphaEntry measured_alpha_bridge(const chain::DobrushinReport& report, std::string configuration_id);

/// Lines "t_step m value", "alpha m value|unavailable", "m0 value", "d0 value"; '#' comments.
RuntimeSpec read_runtime_spec(std::istream& in);

}  // namespace dlab::runtime
