#include "dlab/runtime.hpp"

#include <cmath>
#include <istream>
#include <sstream>

#include <fmt/format.h>

#include "dlab/error.hpp"

namespace dlab::runtime {
namespace {

constexpr const char* kModule = "runtime-model";

}  // namespace

RuntimeSpec::RuntimeSpec(std::map<int, double> t_step, int m0, std::map<int, AlphaEntry> alpha_of_m, double d0)
    : t_step_(std::move(t_step)), m0_(m0), alpha_of_m_(std::move(alpha_of_m)), d0_(d0) {
  if (t_step_.empty()) throw ValidationError(kModule, "RuntimeSpec", "t_step", "at least one stage count required");
  std::optional<double> prev;
  for (const auto& [m, t] : t_step_) {
    if (m < 1) throw ValidationError(kModule, "RuntimeSpec", "t_step", "stage counts must be >= 1");
    if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError(kModule, "RuntimeSpec", "t_step", "times must be positive");
    // Fewer sequential stages never makes a stage slower: m1 <= m2 implies t(m1) <= t(m2).
    if (prev && t < *prev) {
      throw ValidationError(kModule, "RuntimeSpec", "t_step",
                            fmt::format("per-stage time must not decrease as m grows (m={} has {:g} < {:g})", m, t, *prev));
    }
    prev = t;
  }
  if (!t_step_.contains(m0_)) throw ValidationError(kModule, "RuntimeSpec", "m0", "m0 needs a t_step entry");
  for (const auto& [m, e] : alpha_of_m_) {
    if (e.alpha && !(*e.alpha >= 0.0 && *e.alpha < 1.0)) {
      throw ValidationError(kModule, "RuntimeSpec", "alpha", fmt::format("alpha({}) = {:g} is outside [0, 1)", m, *e.alpha));
    }
  }
  if (!(d0_ > 0.0 && d0_ <= 1.0)) throw ValidationError(kModule, "RuntimeSpec", "d0", "d0 must lie in (0, 1]");
}

double RuntimeSpec::step_time(int m) const {
  auto it = t_step_.find(m);
  if (it == t_step_.end()) throw UnsupportedConfigError(kModule, fmt::format("no t_step entry for m = {}", m));
  return it->second;
}

double RuntimeSpec::alpha(int m) const {
  auto it = alpha_of_m_.find(m);
  if (it == alpha_of_m_.end() || !it->second.alpha) {
    throw UnsupportedConfigError(kModule, fmt::format("alpha is unavailable for m = {}", m));
  }
  return *it->second.alpha;
}

RuntimeSpec RuntimeSpec::with_alpha(int m, AlphaEntry entry) const {
  auto table = alpha_of_m_;
  table[m] = std::move(entry);
  return RuntimeSpec(t_step_, m0_, std::move(table), d0_);
}

std::size_t edit_rounds(const RuntimeSpec& spec, int m, double delta) {
  const double a = spec.alpha(m);
  if (!(delta > 0.0)) throw DomainError(kModule, "delta must be positive");
  return chain::geometric_round_bound(a, spec.d0(), delta);
}

TradeoffReport no_slowdown(const RuntimeSpec& spec, int m, double delta) {
  TradeoffReport r;
  r.m = m;
  r.delta = delta;
  r.alpha = spec.alpha(m);
  r.k_rounds = edit_rounds(spec, m, delta);
  const double t_m = spec.step_time(m);
  const double t_m0 = spec.step_time(spec.m0());
  r.t_edit = static_cast<double>(r.k_rounds) * t_m;
  r.t_base = static_cast<double>(spec.m0()) * t_m0;
  r.no_slowdown = r.t_edit <= r.t_base;
  r.binding_inequality = fmt::format(
      "K(delta={:g}; m={}) * T_step({}) = {} * {:g} = {:g} {} m0 * T_step(m0) = {} * {:g} = {:g}  "
      "[K = ceil(ln({:g}/{:g}) / ln(1/{:g}))]",
      delta, m, m, r.k_rounds, t_m, r.t_edit, r.no_slowdown ? "<=" : ">", spec.m0(), t_m0, r.t_base, spec.d0(), delta,
      r.alpha);
  return r;
}

AlphaEntry measured_alpha_bridge(const chain::DobrushinReport& report, std::string configuration_id) {
  if (!(report.alpha < 1.0)) {
    throw UnsupportedConfigError(kModule, fmt::format("measured alpha {:g} >= 1 gives no mixing bound", report.alpha));
  }
  return {report.alpha, std::move(configuration_id)};
}

RuntimeSpec read_runtime_spec(std::istream& in) {
  std::map<int, double> t_step;
  std::map<int, AlphaEntry> alpha;
  std::optional<int> m0;
  double d0 = 1.0;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    std::istringstream ls(text);
    std::string key;
    if (!(ls >> key)) continue;
    auto fail = [&](const std::string& why) { throw ParseError(kModule, line, why); };
    if (key == "t_step") {
      int m = 0;
      double t = 0.0;
      if (!(ls >> m >> t)) fail("expected \"t_step m value\"");
      t_step[m] = t;
    } else if (key == "alpha") {
      int m = 0;
      std::string value;
      if (!(ls >> m >> value)) fail("expected \"alpha m value\"");
      if (value == "unavailable") {
        alpha[m] = {std::nullopt, "spec file"};
      } else {
        try {
          std::size_t used = 0;
          alpha[m] = {std::stod(value, &used), "spec file"};
          if (used != value.size()) fail("bad alpha value \"" + value + "\"");
        } catch (const std::invalid_argument&) {
          fail("bad alpha value \"" + value + "\"");
        }
      }
    } else if (key == "m0") {
      int v = 0;
      if (!(ls >> v)) fail("expected \"m0 value\"");
      m0 = v;
    } else if (key == "d0") {
      if (!(ls >> d0)) fail("expected \"d0 value\"");
    } else {
      fail("unknown key \"" + key + "\"");
    }
    std::string extra;
    if (ls >> extra) fail("trailing token \"" + extra + "\"");
  }
  if (!m0) throw ParseError(kModule, 0, "missing \"m0\" line");
  return RuntimeSpec(std::move(t_step), *m0, std::move(alpha), d0);
}

}  // namespace dlab::runtime
