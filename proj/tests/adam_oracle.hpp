// Scalar transcription of the standard Adam recursion, with the L2 term added
// to the gradient before the moment updates.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

namespace pico::test {

struct ScalarAdam {
  double lr, beta1, beta2, eps, l2 = 0.0;
  double m = 0.0, v = 0.0;
  int t = 0;

  double step(double theta, double grad) {
    grad += l2 * theta;
    ++t;
    m = beta1 * m + (1 - beta1) * grad;
    v = beta2 * v + (1 - beta2) * grad * grad;
    const double m_hat = m / (1 - std::pow(beta1, t));
    const double v_hat = v / (1 - std::pow(beta2, t));
    return theta - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

// Iterates of the oracle on f(theta) = a (theta - c)^2.
inline std::vector<double> scalar_adam_trajectory(ScalarAdam adam, double theta0, double a, double c,
                                                  int steps) {
  std::vector<double> out;
  double theta = theta0;
  for (int i = 0; i < steps; ++i) {
    theta = adam.step(theta, 2 * a * (theta - c));
    out.push_back(theta);
  }
  return out;
}

}  // namespace pico::test
