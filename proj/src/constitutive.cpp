#include "cosserat/constitutive.hpp"

#include <cmath>

#include "cosserat/errors.hpp"

namespace cosserat {

double quad_form_Q(const KinematicState& s, double alpha, double beta, double xi) {
  double c = s.chi[0] * s.chi[0] + s.chi[1] * s.chi[1];
  double g = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) g += s.gamma[i][j] * s.gamma[i][j];
  return beta * beta * (alpha * alpha * c + xi * xi * g);
}

double quad_form_Qstar(const StressState& t, double alpha, double beta, double xi) {
  double m = t.m[0] * t.m[0] + t.m[1] * t.m[1];
  double f = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) f += t.tau[i][j] * t.tau[i][j];
  return beta * beta * (m / (alpha * alpha) + f / (xi * xi));
}

StressState stress_from_strain(const KinematicState& s, double alpha, double beta, double xi) {
  double q = quad_form_Q(s, alpha, beta, xi);
  double r = std::sqrt(q);
  if (r >= 1.0) throw StrainLimitError(q, "stress_from_strain: Q at or beyond the strain limit");
  double k = 1.0 / (1.0 - r);
  StressState t;
  for (int i = 0; i < 2; ++i) t.m[i] = alpha * alpha * s.chi[i] * k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) t.tau[i][j] = xi * xi * s.gamma[i][j] * k;
  return t;
}

KinematicState strain_from_stress(const StressState& t, double alpha, double beta, double xi) {
  double r = std::sqrt(quad_form_Qstar(t, alpha, beta, xi));
  double k = 1.0 / (1.0 + r);
  KinematicState s;
  for (int i = 0; i < 2; ++i) s.chi[i] = t.m[i] * k / (alpha * alpha);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s.gamma[i][j] = t.tau[i][j] * k / (xi * xi);
  return s;
}

double energy_W(const KinematicState& s, double alpha, double beta, double xi) {
  double q = quad_form_Q(s, alpha, beta, xi);
  double r = std::sqrt(q);
  if (r >= 1.0) throw StrainLimitError(q, "energy_W: Q at or beyond the strain limit");
  return -(r + std::log1p(-r)) / (beta * beta);
}

double energy_Wstar(const StressState& t, double alpha, double beta, double xi) {
  double r = std::sqrt(quad_form_Qstar(t, alpha, beta, xi));
  return (r - std::log1p(r)) / (beta * beta);
}

Eigen::Matrix<double, 6, 6> hessian_W(const KinematicState& s, double alpha, double beta,
                                      double xi) {
  double q = quad_form_Q(s, alpha, beta, xi);
  double r = std::sqrt(q);
  if (r >= 1.0) throw StrainLimitError(q, "hessian_W: Q at or beyond the strain limit");
  if (r == 0.0) throw StrainLimitError(q, "hessian_W: singular limit at Q = 0");
  double P = 1.0 / (r * (1.0 - r) * (1.0 - r));
  double R = 1.0 / (1.0 - r);
  double a2 = alpha * alpha, x2 = xi * xi, b2 = beta * beta;

  // w[k]: coefficient of the rank-one direction, order (chi1, chi2, g11, g12, g21, g22)
  double w[6] = {a2 * s.chi[0],      a2 * s.chi[1],      x2 * s.gamma[0][0],
                 x2 * s.gamma[0][1], x2 * s.gamma[1][0], x2 * s.gamma[1][1]};
  double d[6] = {a2 * R, a2 * R, x2 * R, x2 * R, x2 * R, x2 * R};

  Eigen::Matrix<double, 6, 6> H;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) H(i, j) = b2 * P * w[i] * w[j] + (i == j ? d[i] : 0.0);
  return H;
}

}  // namespace cosserat
