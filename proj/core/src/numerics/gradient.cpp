#include "msfda/numerics/gradient.hpp"

#include <algorithm>
#include <cmath>

#include "msfda/error.hpp"

namespace msfda {

namespace {

ad::Var build(ad::Tape& tape, const LossBuilder& loss, std::span<const MlpParams> params,
              bool trainable, std::vector<MlpVars>& bound) {
  bound.clear();
  for (const auto& p : params) bound.push_back(bind(tape, p, trainable));
  ad::Var out = loss(tape, bound);
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("loss must be a 1x1 value");
  return out;
}

}  // namespace

double evaluate_loss(const LossBuilder& loss, std::span<const MlpParams> params) {
  ad::Tape tape;
  std::vector<MlpVars> bound;
  return build(tape, loss, params, false, bound).value()(0, 0);
}

GradResult grad(const LossBuilder& loss, std::span<const MlpParams> params) {
  ad::Tape tape;
  std::vector<MlpVars> bound;
  ad::Var out = build(tape, loss, params, true, bound);
  tape.backward(out);
  GradResult result;
  result.value = out.value()(0, 0);
  for (const auto& vars : bound) result.gradients.push_back(collect_gradients(tape, vars));
  return result;
}

double finite_diff_check(const LossBuilder& loss, std::span<const MlpParams> params,
                         double step) {
  if (!(step > 0.0)) throw ValidationError("numerics", "finite-difference step must be positive");
  const GradResult analytic = grad(loss, params);
  std::vector<MlpParams> probe(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t s = 0; s < probe.size(); ++s) {
    for (std::size_t l = 0; l < probe[s].layers.size(); ++l) {
      auto check = [&](Matrix& target, const Matrix& g) {
        auto values = target.values();
        for (std::size_t k = 0; k < values.size(); ++k) {
          const double saved = values[k];
          values[k] = saved + step;
          const double up = evaluate_loss(loss, probe);
          values[k] = saved - step;
          const double down = evaluate_loss(loss, probe);
          values[k] = saved;
          const double central = (up - down) / (2.0 * step);
          const double a = g.values()[k];
          worst = std::max(worst, std::abs(a - central) / (std::abs(a) + std::abs(central) + 1e-12));
        }
      };
      check(probe[s].layers[l].weight, analytic.gradients[s].layers[l].weight);
      check(probe[s].layers[l].bias, analytic.gradients[s].layers[l].bias);
    }
  }
  return worst;
}

}  // namespace msfda
