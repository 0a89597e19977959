#pragma once

#include <array>
#include <span>
#include <stdexcept>
#include <vector>

namespace biopay::loss {

class LossError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Delta4 = std::array<double, 4>;  // x, y, w, h

inline constexpr double kProbabilityClamp = 1e-12;

struct ScalarGrad {
  double value;
  double grad;
};

struct VectorGrad {
  double value;
  std::vector<double> grad;
};

// Binary log loss on an objectness probability; p is clamped into
// [1e-12, 1 - 1e-12]. grad is d/dp.
ScalarGrad bce_objectness(double p, int p_star);

double smooth_l1(double x);
double smooth_l1_grad(double x);

// Σ smooth_l1(t_i − t*_i); grad is with respect to t.
VectorGrad rpn_reg_loss(const Delta4& t, const Delta4& t_star);

// −ln softmax(logits)[u]; grad is softmax − onehot(u).
VectorGrad softmax_ce(std::span<const double> logits, int u);

// Class 0 is background; the regression term only applies for u >= 1.
struct FastRcnnInputs {
  std::vector<double> logits;
  int u = 0;
  Delta4 t_u{};
  Delta4 v{};
  double lambda = 1.0;
};

double fast_rcnn_loss(const FastRcnnInputs& in);
// Same value; grad is over (logits..., t_u[0..3]).
VectorGrad fast_rcnn_loss_grad(const FastRcnnInputs& in);

struct LossComponents {
  double rpn_cls = 0.0;
  double rpn_reg = 0.0;
  double box_cls = 0.0;
  double box_reg = 0.0;
};

using LossWeights = std::array<double, 4>;

double total_loss(const LossComponents& c, const LossWeights& weights = {1.0, 1.0, 1.0, 1.0});

std::vector<double> relu(std::span<const double> x);

template <typename F>
std::vector<double> numerical_gradient(F&& f, std::span<const double> x, double h = 1e-5) {
  if (!(h > 0.0)) throw LossError("numerical_gradient: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = probe[i];
    probe[i] = xi + h;
    const double up = f(std::span<const double>(probe));
    probe[i] = xi - h;
    const double down = f(std::span<const double>(probe));
    probe[i] = xi;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace biopay::loss
