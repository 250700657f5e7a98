#pragma once

#include <Eigen/Dense>
#include <array>

namespace cosserat {

// Planar Cosserat strain state: chi[i] = chi_{i+1,3} (curvature), gamma[i][j] =
// gamma_{i+1,j+1} (micro-distortion).
struct KinematicState {
  std::array<double, 2> chi{};
  std::array<std::array<double, 2>, 2> gamma{};
};

// Conjugate stress state: m[i] = m_{i+1,3} (couple stress), tau[i][j] (force stress).
struct StressState {
  std::array<double, 2> m{};
  std::array<std::array<double, 2>, 2> tau{};
};

// Q(chi,gamma) = beta^2 (alpha^2 |chi|^2 + xi^2 sum_ij gamma_ij^2)
double quad_form_Q(const KinematicState& s, double alpha, double beta, double xi);

// Q*(m,tau) = beta^2 (|m|^2/alpha^2 + sum_ij tau_ij^2 / xi^2)
double quad_form_Qstar(const StressState& t, double alpha, double beta, double xi);

// m = alpha^2 chi / (1-sqrt(Q)), tau = xi^2 gamma / (1-sqrt(Q)); requires Q < 1,
// throws StrainLimitError otherwise (including sqrt(Q) rounding to 1).
StressState stress_from_strain(const KinematicState& s, double alpha, double beta, double xi);

// chi = m / (alpha^2 (1+sqrt(Q*))), gamma = tau / (xi^2 (1+sqrt(Q*))); total map,
// exact inverse of stress_from_strain, and the result satisfies Q < 1.
KinematicState strain_from_stress(const StressState& t, double alpha, double beta, double xi);

// W = -(sqrt(Q) + ln(1-sqrt(Q))) / beta^2, requires Q < 1
double energy_W(const KinematicState& s, double alpha, double beta, double xi);

// W* = (sqrt(Q*) - ln(1+sqrt(Q*))) / beta^2
double energy_Wstar(const StressState& t, double alpha, double beta, double xi);

// Hessian of W in the variable order (chi13, chi23, g11, g12, g21, g22).
// Positive semidefinite on 0 < Q < 1; throws at Q = 0 (singular limit) and Q >= 1.
Eigen::Matrix<double, 6, 6> hessian_W(const KinematicState& s, double alpha, double beta,
                                      double xi);

}  // namespace cosserat
