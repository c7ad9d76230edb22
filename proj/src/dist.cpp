#include "dlab/dist.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "dlab/error.hpp"
#include "dlab/text.hpp"

namespace dlab::dist {
namespace {

constexpr const char* kModule = "dist-lab";

void check_distribution(std::span<const double> p, const std::string& what) {
  for (double x : p) {
    if (!std::isfinite(x) || x < 0.0) throw ValidationError(kModule, what, "probs", "entries must be finite and >= 0");
  }
  const double s = stable_sum(p);
  if (std::abs(s - 1.0) > kSumTolerance) {
    throw ValidationError(kModule, what, "probs", fmt::format("entries sum to {:.17g}, not 1", s));
  }
}

}  // namespace

std::size_t state_count(int vocab, int length) {
  if (vocab < 1 || length < 1) throw DomainError(kModule, "vocab and length must be positive");
  std::size_t n = 1;
  for (int i = 0; i < length; ++i) {
    n *= static_cast<std::size_t>(vocab);
    if (n > kMaxStates) {
      throw ResourceError(kModule, fmt::format("V^L = {}^{} exceeds the dense cap of {}", vocab, length, kMaxStates));
    }
  }
  return n;
}

std::vector<int> decode_state(std::size_t index, int vocab, int length) {
  std::vector<int> digits(static_cast<std::size_t>(length));
  for (int i = length - 1; i >= 0; --i) {
    digits[static_cast<std::size_t>(i)] = static_cast<int>(index % static_cast<std::size_t>(vocab));
    index /= static_cast<std::size_t>(vocab);
  }
  return digits;
}

std::size_t encode_state(std::span<const int> digits, int vocab) {
  std::size_t index = 0;
  for (int d : digits) index = index * static_cast<std::size_t>(vocab) + static_cast<std::size_t>(d);
  return index;
}

std::size_t site_stride(int vocab, int length, int site) {
  std::size_t s = 1;
  for (int i = site + 1; i < length; ++i) s *= static_cast<std::size_t>(vocab);
  return s;
}

double stable_sum(std::span<const double> xs) {
  double sum = 0.0, comp = 0.0;
  for (double x : xs) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

JointTable::JointTable(int vocab, int length, std::vector<double> probs, std::string context_id)
    : vocab_(vocab), length_(length), probs_(std::move(probs)), context_id_(std::move(context_id)) {
  if (vocab < 2) throw ValidationError(kModule, "JointTable", "vocab", "vocabulary size must be >= 2");
  if (length < 1) throw ValidationError(kModule, "JointTable", "length", "length must be >= 1");
  if (probs_.size() != state_count(vocab, length)) {
    throw ValidationError(kModule, "JointTable", "probs",
                          fmt::format("expected {} entries, got {}", state_count(vocab, length), probs_.size()));
  }
  check_distribution(probs_, "JointTable");
}

JointTable JointTable::uniform(int vocab, int length, std::string context_id) {
  const auto n = state_count(vocab, length);
  return JointTable(vocab, length, std::vector<double>(n, 1.0 / static_cast<double>(n)), std::move(context_id));
}

ProductFamily::ProductFamily(std::vector<std::vector<double>> sites) : sites_(std::move(sites)) {
  if (sites_.empty()) throw ValidationError(kModule, "ProductFamily", "sites", "at least one site required");
  const auto v = sites_.front().size();
  for (const auto& q : sites_) {
    if (q.size() != v || v < 2) throw ValidationError(kModule, "ProductFamily", "sites", "all sites need the same V >= 2");
    check_distribution(q, "ProductFamily");
  }
}

JointTable marginal(const JointTable& joint, std::span<const int> sites_in) {
  if (sites_in.empty()) throw DomainError(kModule, "marginal over an empty site set");
  std::vector<int> sites(sites_in.begin(), sites_in.end());
  std::sort(sites.begin(), sites.end());
  if (std::adjacent_find(sites.begin(), sites.end()) != sites.end()) throw DomainError(kModule, "duplicate site in marginal");
  if (sites.front() < 0 || sites.back() >= joint.length()) throw DomainError(kModule, "marginal site out of range");

  const int v = joint.vocab();
  const int k = static_cast<int>(sites.size());
  std::vector<double> out(state_count(v, k), 0.0);
  for (std::size_t s = 0; s < joint.size(); ++s) {
    const auto digits = decode_state(s, v, joint.length());
    std::size_t idx = 0;
    for (int site : sites) idx = idx * static_cast<std::size_t>(v) + static_cast<std::size_t>(digits[static_cast<std::size_t>(site)]);
    out[idx] += joint[s];
  }
  return JointTable(v, k, std::move(out), joint.context_id());
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) {
    if (x > 0.0) h -= x * std::log(x);
  }
  return h;
}

double entropy(const JointTable& joint) { return entropy(joint.probs()); }

double total_correlation(const JointTable& joint) {
  if (joint.length() < 2) throw DomainError(kModule, "total correlation needs L >= 2");
  double sum_sites = 0.0;
  for (int i = 0; i < joint.length(); ++i) {
    const int site[] = {i};
    sum_sites += entropy(marginal(joint, site));
  }
  return sum_sites - entropy(joint);
}

Divergence kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError(kModule, "KL between distributions of different shapes");
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    if (q[k] <= 0.0) return Divergence::infinity();
    d += p[k] * std::log(p[k] / q[k]);
  }
  return {d, false};
}

Divergence kl(const JointTable& p, const JointTable& q) {
  if (p.vocab() != q.vocab() || p.length() != q.length()) throw DomainError(kModule, "KL between tables of different shapes");
  return kl(p.probs(), q.probs());
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError(kModule, "TV between distributions of different sizes");
  double d = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) d += std::abs(p[k] - q[k]);
  return 0.5 * d;
}

ProductFamily site_marginals(const JointTable& joint) {
  std::vector<std::vector<double>> sites;
  for (int i = 0; i < joint.length(); ++i) {
    const int site[] = {i};
    const auto m = marginal(joint, site);
    sites.emplace_back(m.probs().begin(), m.probs().end());
  }
  return ProductFamily(std::move(sites));
}

JointTable product_table(const ProductFamily& family, std::string context_id) {
  const int v = family.vocab(), l = family.length();
  std::vector<double> probs(state_count(v, l));
  for (std::size_t s = 0; s < probs.size(); ++s) {
    const auto digits = decode_state(s, v, l);
    double p = 1.0;
    for (int i = 0; i < l; ++i) p *= family.site(i)[static_cast<std::size_t>(digits[static_cast<std::size_t>(i)])];
    probs[s] = p;
  }
  return JointTable(v, l, std::move(probs), std::move(context_id));
}

GapReport factorization_gap(const JointTable& true_joint, const ProductFamily& family) {
  if (family.length() != true_joint.length() || family.vocab() != true_joint.vocab()) {
    throw DomainError(kModule, "product family must cover every site of the joint with the same vocabulary");
  }
  GapReport r;
  r.kl_joint = kl(true_joint, product_table(family, true_joint.context_id()));
  r.tc = true_joint.length() >= 2 ? total_correlation(true_joint) : 0.0;
  const auto marginals = site_marginals(true_joint);
  double sum = 0.0;
  for (int i = 0; i < true_joint.length(); ++i) {
    const auto d = kl(marginals.site(i), family.site(i));
    if (d.infinite) {
      r.marginal_kl_sum = Divergence::infinity();
      break;
    }
    sum += d.nats;
  }
  if (!r.marginal_kl_sum.infinite) r.marginal_kl_sum.nats = sum;
  r.residual = (r.kl_joint.infinite || r.marginal_kl_sum.infinite)
                   ? std::numeric_limits<double>::quiet_NaN()
                   : r.kl_joint.nats - r.tc - r.marginal_kl_sum.nats;
  return r;
}

JointTable read_joint_text(std::istream& raw, std::string context_id) {
  auto in = strip_comment_lines(raw);
  int v = 0, l = 0;
  if (!(in >> v >> l)) throw ParseError(kModule, 1, "expected header \"V L\"");
  const auto n = state_count(v, l);
  std::vector<double> probs(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!(in >> probs[k])) throw ParseError(kModule, 0, fmt::format("expected {} probabilities, read {}", n, k));
  }
  return JointTable(v, l, std::move(probs), std::move(context_id));
}

void write_joint_text(std::ostream& out, const JointTable& joint) {
  out << joint.vocab() << ' ' << joint.length() << '\n';
  for (std::size_t k = 0; k < joint.size(); ++k) {
    out << fmt::format("{:.17g}", joint[k]) << (k + 1 == joint.size() ? '\n' : ' ');
  }
}

JointTable random_joint(int vocab, int length, Rng& rng, double concentration, std::string context_id) {
  return JointTable(vocab, length, dirichlet(state_count(vocab, length), concentration, rng), std::move(context_id));
}

ProductFamily random_family(int vocab, int length, Rng& rng, double concentration) {
  std::vector<std::vector<double>> sites;
  for (int i = 0; i < length; ++i) sites.push_back(dirichlet(static_cast<std::size_t>(vocab), concentration, rng));
  return ProductFamily(std::move(sites));
}

}  // namespace dlab::dist
