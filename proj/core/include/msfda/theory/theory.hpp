#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msfda/numerics/matrix.hpp"
#include "msfda/numerics/rng.hpp"

namespace msfda::theory {

inline constexpr std::size_t kMaxInstanceSize = 16;
inline constexpr std::size_t kMaxClasses = 4;
inline constexpr double kSimplexTolerance = 1e-12;
inline constexpr double kNormalizationTolerance = 1e-9;
inline constexpr double kConditionTolerance = 1e-9;

/// Finite joint distributions over X x Y with |X| <= 16 and K <= 4.
struct DiscreteInstance {
  std::vector<double> target_marginal;      // P^t_X, length |X|
  Matrix target_conditional;                // P^t_{Y|X}, |X| x K, row-stochastic
  std::vector<Matrix> source_conditionals;  // P^{s_j}_{Y|X}
  std::vector<char> region;                 // X_{D_l} membership; empty = unset

  std::size_t instance_size() const { return target_marginal.size(); }
  std::size_t num_classes() const { return target_conditional.cols(); }

  /// Throws ValidationError unless sizes are within limits and every
  /// distribution lies on the simplex to 1e-12.
  void validate() const;
  /// Stable 64-bit digest of the instance contents, as hex.
  std::string digest() const;
};

/// Deterministic map X -> {0..K-1}.
using Hypothesis = std::vector<std::size_t>;

/// Product joint P_X(x) * P_{Y|X}(y|x), |X| x K.
Matrix product_joint(std::span<const double> marginal, const Matrix& conditional);

/// Marginal restricted to `region` and renormalized.
std::vector<double> restricted_marginal(std::span<const double> marginal, std::span<const char> region);

/// The pseudo-labeled joint for selective labeling on the instance's region
/// with source j: restricted marginal times the source conditional.
Matrix selective_joint(const DiscreteInstance& instance, std::size_t source);

/// sum P log(P/Q) with 0 log(0/q) = 0; +infinity when P > 0 where Q = 0.
/// Both inputs must sum to 1 within 1e-9.
double kl_joint(const Matrix& p, const Matrix& q);

/// D(P^s_{Y|X} || P^t_{Y|X} | P^t_X).
double unselective_bias(const DiscreteInstance& instance, std::size_t source);

struct SelectiveBias {
  double bias = 0.0;        // -log P^t_X(region)
  double bound_term = 0.0;  // sqrt(bias / 2)
};

/// Closed form valid when the source conditional equals the target
/// conditional on the region (checked to 1e-9).
SelectiveBias selective_bias(const DiscreteInstance& instance, std::size_t source = 0);

/// Expected zero-one loss of `h` under `joint`.
double zero_one_risk(const Matrix& joint, std::span<const std::size_t> h);

struct BoundCheckReport {
  double max_violation = 0.0;  // max over h of LHS - RHS (negative when slack)
  double kl = 0.0;
  double bound = 0.0;          // sqrt(kl / 2)
  std::size_t hypotheses_checked = 0;
  std::size_t violations = 0;  // count above 1e-12
  bool exhaustive = true;
  bool kl_infinite = false;    // inequality holds trivially

  bool passed() const { return violations == 0; }
};

inline constexpr double kViolationTolerance = 1e-12;
inline constexpr std::uint64_t kExhaustiveLimit = 1'000'000;
inline constexpr std::size_t kSampledHypotheses = 100'000;

/// Checks L(h, P^t) - L(h, P^{D_l}) <= sqrt(D(P^{D_l} || P^t) / 2) for every
/// hypothesis when K^|X| <= 1e6, otherwise for 1e5 uniformly sampled ones.
BoundCheckReport bias_bound_check(const Matrix& labeled_joint, const Matrix& target_joint,
                                  std::uint64_t seed = 0);

struct VarianceRow {
  std::size_t sample_size = 0;
  double gap_p95 = 0.0;
  double mean_gap = 0.0;
};

/// For each n in the grid, draws `trials` i.i.d. samples of size n from
/// `joint` and records the 95th percentile of |empirical - population| risk
/// of the fixed hypothesis `h`.
std::vector<VarianceRow> variance_decay_sim(const Matrix& joint, std::span<const std::size_t> h,
                                            std::span<const std::size_t> grid, std::size_t trials,
                                            std::uint64_t seed);

/// Row-wise argmax labeling of a conditional (ties to the smallest class).
Hypothesis bayes_hypothesis(const Matrix& conditional);

struct MajorityVoteReport {
  double satisfied_fraction = 1.0;  // among covered points; 1.0 when none covered
  double coverage = 0.0;            // covered / |region|
  std::size_t region_size = 0;
  std::size_t covered = 0;
  std::size_t satisfied = 0;
};

/// For each x in `region` (all of X when empty): a point is covered when
/// some label is the argmax of more than m/2 sources, and satisfied when
/// that label is also the target argmax.
MajorityVoteReport majority_vote_check(const DiscreteInstance& instance, std::span<const char> region);

/// Random instance with sparse conditionals (each entry zeroed with
/// probability `sparsity`, keeping at least one positive entry per row).
DiscreteInstance random_instance(Rng& rng, std::size_t instance_size, std::size_t classes,
                                 std::size_t sources, double sparsity = 0.3);

/// Structured text record: `op=<name> instance=<digest> key=value ... status=pass|fail`.
std::string format_record(const std::string& op, const std::string& digest,
                          const std::vector<std::pair<std::string, std::string>>& fields, bool pass);

}  // namespace msfda::theory
