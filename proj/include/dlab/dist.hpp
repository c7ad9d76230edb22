#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dlab/rng.hpp"

namespace dlab::dist {

/// Hard cap on V^L for every dense table in the library.
inline constexpr std::size_t kMaxStates = 200000;
inline constexpr double kSumTolerance = 1e-12;

/// V^L, throwing ResourceError past kMaxStates.
std::size_t state_count(int vocab, int length);

/// Lexicographic state coding: site 0 is the most significant digit.
std::vector<int> decode_state(std::size_t index, int vocab, int length);
std::size_t encode_state(std::span<const int> digits, int vocab);
/// V^(L-1-site): index distance between states differing by one at `site`.
std::size_t site_stride(int vocab, int length, int site);

/// Neumaier-compensated sum.
double stable_sum(std::span<const double> xs);

/// Exact distribution over V^L sequences for one frozen conditioning context.
class JointTable {
 public:
  JointTable(int vocab, int length, std::vector<double> probs, std::string context_id = {});

  static JointTable uniform(int vocab, int length, std::string context_id = {});

  int vocab() const { return vocab_; }
  int length() const { return length_; }
  std::size_t size() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t state) const { return probs_[state]; }
  const std::string& context_id() const { return context_id_; }

 private:
  int vocab_;
  int length_;
  std::vector<double> probs_;
  std::string context_id_;
};

/// Independent per-site distributions q_i over a common vocabulary.
class ProductFamily {
 public:
  explicit ProductFamily(std::vector<std::vector<double>> sites);

  int vocab() const { return static_cast<int>(sites_.front().size()); }
  int length() const { return static_cast<int>(sites_.size()); }
  std::span<const double> site(int i) const { return sites_[static_cast<std::size_t>(i)]; }
  const std::vector<std::vector<double>>& sites() const { return sites_; }

 private:
  std::vector<std::vector<double>> sites_;
};

/// KL value with an explicit marker for support violations.
struct Divergence {
  double nats = 0.0;
  bool infinite = false;

  static Divergence infinity() { return {0.0, true}; }
};

struct GapReport {
  Divergence kl_joint;      // KL(P* || prod q_i)
  double tc = 0.0;          // total correlation of P*
  Divergence marginal_kl_sum;
  double residual = 0.0;    // kl_joint - tc - marginal_kl_sum (NaN when infinite)

  bool lower_bound_holds() const { return kl_joint.infinite || kl_joint.nats >= tc - 1e-12; }
};

/// Marginal over the given sites (sorted ascending in the result).
JointTable marginal(const JointTable& joint, std::span<const int> sites);

/// Shannon entropy in nats; 0 log 0 = 0.
double entropy(std::span<const double> p);
double entropy(const JointTable& joint);

/// Sum of single-site entropies minus joint entropy (nats). Requires L >= 2.
double total_correlation(const JointTable& joint);

Divergence kl(std::span<const double> p, std::span<const double> q);
Divergence kl(const JointTable& p, const JointTable& q);

double total_variation(std::span<const double> p, std::span<const double> q);

ProductFamily site_marginals(const JointTable& joint);
JointTable product_table(const ProductFamily& family, std::string context_id = {});

GapReport factorization_gap(const JointTable& true_joint, const ProductFamily& family);

/// Text format: "V L" header, then V^L whitespace-separated probabilities.
JointTable read_joint_text(std::istream& in, std::string context_id = {});
void write_joint_text(std::ostream& out, const JointTable& joint);

JointTable random_joint(int vocab, int length, Rng& rng, double concentration = 1.0, std::string context_id = {});
ProductFamily random_family(int vocab, int length, Rng& rng, double concentration = 1.0);

}  // namespace dlab::dist
