#include "msfda/theory/theory.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "msfda/data/csv.hpp"
#include "msfda/error.hpp"

namespace msfda::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void fail(const std::string& what) { throw ValidationError("theory", what); }

double total(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

void check_simplex(std::span<const double> v, const std::string& what) {
  for (double x : v)
    if (!(x >= 0.0) || !std::isfinite(x)) fail(what + " has a negative or non-finite entry");
  if (std::abs(total(v) - 1.0) > kSimplexTolerance) fail(what + " does not sum to 1");
}

void check_conditional(const Matrix& c, std::size_t rows, std::size_t classes, const std::string& what) {
  if (c.rows() != rows || c.cols() != classes) fail(what + " has the wrong shape");
  for (std::size_t x = 0; x < rows; ++x) check_simplex(c.row(x), what + " row " + std::to_string(x));
}

void check_normalized(const Matrix& joint, const char* name) {
  for (double v : joint.values())
    if (!(v >= 0.0)) fail(std::string(name) + " has a negative entry");
  if (std::abs(total(joint.values()) - 1.0) > kNormalizationTolerance)
    fail(std::string(name) + " is not normalized");
}

double region_mass(std::span<const double> marginal, std::span<const char> region) {
  double mass = 0.0;
  for (std::size_t x = 0; x < marginal.size(); ++x)
    if (region[x]) mass += marginal[x];
  return mass;
}

}  // namespace

void DiscreteInstance::validate() const {
  const std::size_t n = instance_size();
  const std::size_t k = num_classes();
  if (n == 0 || n > kMaxInstanceSize) fail("instance size must lie in 1..16");
  if (k == 0 || k > kMaxClasses) fail("class count must lie in 1..4");
  check_simplex(target_marginal, "target marginal");
  check_conditional(target_conditional, n, k, "target conditional");
  for (std::size_t j = 0; j < source_conditionals.size(); ++j)
    check_conditional(source_conditionals[j], n, k, "source conditional " + std::to_string(j));
  if (!region.empty() && region.size() != n) fail("region mask has the wrong length");
}

std::string DiscreteInstance::digest() const {
  std::uint64_t h = fnv1a("instance");
  auto mix = [&h](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&bits), sizeof bits), h);
  };
  for (double v : target_marginal) mix(v);
  for (double v : target_conditional.values()) mix(v);
  for (const auto& s : source_conditionals)
    for (double v : s.values()) mix(v);
  for (char r : region) mix(r ? 1.0 : 0.0);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Matrix product_joint(std::span<const double> marginal, const Matrix& conditional) {
  if (marginal.size() != conditional.rows()) throw ShapeError("marginal and conditional disagree on |X|");
  Matrix joint(conditional.rows(), conditional.cols());
  for (std::size_t x = 0; x < joint.rows(); ++x)
    for (std::size_t y = 0; y < joint.cols(); ++y) joint(x, y) = marginal[x] * conditional(x, y);
  return joint;
}

std::vector<double> restricted_marginal(std::span<const double> marginal, std::span<const char> region) {
  if (region.size() != marginal.size()) fail("region mask has the wrong length");
  const double mass = region_mass(marginal, region);
  if (!(mass > 0.0)) fail("region has zero target mass");
  std::vector<double> out(marginal.size(), 0.0);
  for (std::size_t x = 0; x < out.size(); ++x)
    if (region[x]) out[x] = marginal[x] / mass;
  return out;
}

Matrix selective_joint(const DiscreteInstance& instance, std::size_t source) {
  instance.validate();
  if (source >= instance.source_conditionals.size()) fail("source index out of range");
  return product_joint(restricted_marginal(instance.target_marginal, instance.region),
                       instance.source_conditionals[source]);
}

double kl_joint(const Matrix& p, const Matrix& q) {
  if (!p.same_shape(q)) throw ShapeError("kl_joint: shapes differ");
  check_normalized(p, "P");
  check_normalized(q, "Q");
  double kl = 0.0;
  auto pv = p.values();
  auto qv = q.values();
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (pv[i] == 0.0) continue;
    if (qv[i] == 0.0) return kInf;
    kl += pv[i] * std::log(pv[i] / qv[i]);
  }
  return kl;
}

double unselective_bias(const DiscreteInstance& instance, std::size_t source) {
  instance.validate();
  if (source >= instance.source_conditionals.size()) fail("source index out of range");
  const Matrix& ps = instance.source_conditionals[source];
  const Matrix& pt = instance.target_conditional;
  double kl = 0.0;
  for (std::size_t x = 0; x < instance.instance_size(); ++x) {
    const double px = instance.target_marginal[x];
    if (px == 0.0) continue;
    for (std::size_t y = 0; y < instance.num_classes(); ++y) {
      if (ps(x, y) == 0.0) continue;
      if (pt(x, y) == 0.0) return kInf;
      kl += px * ps(x, y) * std::log(ps(x, y) / pt(x, y));
    }
  }
  return kl;
}

SelectiveBias selective_bias(const DiscreteInstance& instance, std::size_t source) {
  instance.validate();
  if (instance.region.empty()) fail("selective bias needs a pseudo-labeling region");
  if (source >= instance.source_conditionals.size()) fail("source index out of range");
  const double mass = region_mass(instance.target_marginal, instance.region);
  if (!(mass > 0.0)) fail("region has zero target mass");
  const Matrix& ps = instance.source_conditionals[source];
  for (std::size_t x = 0; x < instance.instance_size(); ++x) {
    if (!instance.region[x]) continue;
    for (std::size_t y = 0; y < instance.num_classes(); ++y)
      if (std::abs(ps(x, y) - instance.target_conditional(x, y)) > kConditionTolerance)
        fail("source and target conditionals differ inside the region at x=" + std::to_string(x));
  }
  SelectiveBias out;
  out.bias = -std::log(mass);
  out.bound_term = std::sqrt(0.5 * out.bias);
  return out;
}

double zero_one_risk(const Matrix& joint, std::span<const std::size_t> h) {
  if (h.size() != joint.rows()) throw ShapeError("hypothesis must label every instance");
  double risk = 0.0;
  for (std::size_t x = 0; x < joint.rows(); ++x)
    for (std::size_t y = 0; y < joint.cols(); ++y)
      if (h[x] != y) risk += joint(x, y);
  return risk;
}

BoundCheckReport bias_bound_check(const Matrix& labeled_joint, const Matrix& target_joint,
                                  std::uint64_t seed) {
  BoundCheckReport report;
  report.kl = kl_joint(labeled_joint, target_joint);
  report.kl_infinite = std::isinf(report.kl);
  report.bound = report.kl_infinite ? kInf : std::sqrt(0.5 * report.kl);

  const std::size_t n = target_joint.rows();
  const std::size_t k = target_joint.cols();
  std::uint64_t space = 1;
  bool exhaustive = true;
  for (std::size_t x = 0; x < n && exhaustive; ++x) {
    space *= k;
    if (space > kExhaustiveLimit) exhaustive = false;
  }
  report.exhaustive = exhaustive;
  report.max_violation = -kInf;

  Hypothesis h(n, 0);
  auto visit = [&] {
    const double gap = zero_one_risk(target_joint, h) - zero_one_risk(labeled_joint, h);
    const double violation = gap - report.bound;
    report.max_violation = std::max(report.max_violation, violation);
    if (violation > kViolationTolerance) ++report.violations;
    ++report.hypotheses_checked;
  };

  if (exhaustive) {
    for (;;) {
      visit();
      std::size_t x = 0;
      while (x < n && ++h[x] == k) h[x++] = 0;
      if (x == n) break;
    }
  } else {
    Rng rng = make_rng(seed, "hypotheses");
    std::uniform_int_distribution<std::size_t> label(0, k - 1);
    for (std::size_t s = 0; s < kSampledHypotheses; ++s) {
      for (auto& v : h) v = label(rng);
      visit();
    }
  }
  return report;
}

std::vector<VarianceRow> variance_decay_sim(const Matrix& joint, std::span<const std::size_t> h,
                                            std::span<const std::size_t> grid, std::size_t trials,
                                            std::uint64_t seed) {
  check_normalized(joint, "sampling joint");
  if (trials == 0) fail("variance simulation needs at least one trial");
  const double population = zero_one_risk(joint, h);
  std::vector<char> wrong(joint.size());
  for (std::size_t x = 0; x < joint.rows(); ++x)
    for (std::size_t y = 0; y < joint.cols(); ++y) wrong[x * joint.cols() + y] = h[x] != y;
  std::discrete_distribution<std::size_t> cell(joint.values().begin(), joint.values().end());

  std::vector<VarianceRow> rows;
  for (std::size_t n : grid) {
    if (n == 0) fail("variance grid sizes must be positive");
    Rng rng = make_rng(seed, "variance:" + std::to_string(n));
    std::vector<double> gaps(trials);
    double sum = 0.0;
    for (auto& gap : gaps) {
      std::size_t errors = 0;
      for (std::size_t i = 0; i < n; ++i) errors += wrong[cell(rng)];
      gap = std::abs(static_cast<double>(errors) / static_cast<double>(n) - population);
      sum += gap;
    }
    std::sort(gaps.begin(), gaps.end());
    // nearest-rank percentile
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(trials)));
    rows.push_back({n, gaps[std::max<std::size_t>(rank, 1) - 1], sum / static_cast<double>(trials)});
  }
  return rows;
}

Hypothesis bayes_hypothesis(const Matrix& conditional) {
  Hypothesis h(conditional.rows());
  for (std::size_t x = 0; x < h.size(); ++x) h[x] = argmax(conditional.row(x));
  return h;
}

MajorityVoteReport majority_vote_check(const DiscreteInstance& instance, std::span<const char> region) {
  instance.validate();
  const std::size_t m = instance.source_conditionals.size();
  if (m == 0) fail("majority vote needs at least one source");
  if (!region.empty() && region.size() != instance.instance_size()) fail("region mask has the wrong length");
  MajorityVoteReport report;
  std::vector<std::size_t> votes(instance.num_classes());
  for (std::size_t x = 0; x < instance.instance_size(); ++x) {
    if (!region.empty() && !region[x]) continue;
    ++report.region_size;
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& s : instance.source_conditionals) ++votes[argmax(s.row(x))];
    const std::size_t top = static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    if (2 * votes[top] <= m) continue;
    ++report.covered;
    if (top == argmax(instance.target_conditional.row(x))) ++report.satisfied;
  }
  if (report.region_size > 0)
    report.coverage = static_cast<double>(report.covered) / static_cast<double>(report.region_size);
  if (report.covered > 0)
    report.satisfied_fraction = static_cast<double>(report.satisfied) / static_cast<double>(report.covered);
  return report;
}

DiscreteInstance random_instance(Rng& rng, std::size_t instance_size, std::size_t classes,
                                 std::size_t sources, double sparsity) {
  std::exponential_distribution<double> mass(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, classes - 1);

  auto simplex = [&](std::span<double> v, bool sparse) {
    double s = 0.0;
    for (double& x : v) {
      x = (sparse && unit(rng) < sparsity) ? 0.0 : mass(rng);
      s += x;
    }
    if (s == 0.0) {
      v[pick(rng) % v.size()] = 1.0;
      s = 1.0;
    }
    for (double& x : v) x /= s;
  };

  DiscreteInstance inst;
  inst.target_marginal.resize(instance_size);
  simplex(inst.target_marginal, false);
  inst.target_conditional = Matrix(instance_size, classes);
  for (std::size_t x = 0; x < instance_size; ++x) simplex(inst.target_conditional.row(x), true);
  for (std::size_t j = 0; j < sources; ++j) {
    Matrix c(instance_size, classes);
    for (std::size_t x = 0; x < instance_size; ++x) simplex(c.row(x), true);
    inst.source_conditionals.push_back(std::move(c));
  }
  inst.region.assign(instance_size, 0);
  for (auto& r : inst.region) r = unit(rng) < 0.6;
  inst.region[std::uniform_int_distribution<std::size_t>(0, instance_size - 1)(rng)] = 1;
  return inst;
}

std::string format_record(const std::string& op, const std::string& digest,
                          const std::vector<std::pair<std::string, std::string>>& fields, bool pass) {
  std::ostringstream out;
  out << "op=" << op << " instance=" << digest;
  for (const auto& [key, value] : fields) out << ' ' << key << '=' << value;
  out << " status=" << (pass ? "pass" : "fail");
  return out.str();
}

}  // namespace msfda::theory
