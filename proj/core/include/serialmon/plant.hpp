#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "serialmon/rng.hpp"

namespace serialmon::plant {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Discrete LTI plant x+ = A x + B u + nu, y = C x + eta with
/// nu ~ N(0, Q) and eta ~ N(0, R).
struct PlantModel {
  MatrixXd A;
  MatrixXd B;
  MatrixXd C;
  MatrixXd Q;
  MatrixXd R;
  double sample_time = 1.0;

  [[nodiscard]] Eigen::Index states() const { return A.rows(); }
  [[nodiscard]] Eigen::Index inputs() const { return B.cols(); }
  [[nodiscard]] Eigen::Index sensors() const { return C.rows(); }

  /// Throws ConfigError on inconsistent dimensions or non-symmetric / non-PSD noise.
  void validate() const;
};

/// Differential-drive UGV with state [v, theta, omega] and inputs [F_l, F_r].
/// Defaults are a plausible small-vehicle scale.
struct UgvParams {
  double mass = 10.0;                ///< kg
  double yaw_inertia = 1.2;          ///< kg m^2
  double width = 0.5;                ///< m
  double rolling_resistance = 5.0;   ///< N s / m
  double turning_resistance = 2.0;   ///< N m s
  double sample_time = 0.01;         ///< s
  double process_noise = 1e-4;       ///< Q = process_noise * I
  double velocity_noise = 1e-3;      ///< R(0, 0)
  double heading_noise = 1e-4;       ///< R(1, 1)

  void validate() const;
};

struct ContinuousModel {
  MatrixXd A;
  MatrixXd B;
};

ContinuousModel ugv_continuous(const UgvParams& params);

/// Zero-order-hold discretization with truncated series for exp(A t) and
/// int_0^t exp(A s) ds B. Terms are added until their max-abs norm < 1e-15.
ContinuousModel zoh_discretize(const ContinuousModel& continuous, double sample_time);

/// Discrete UGV plant; C measures v and theta (two sensors).
PlantModel discretize_ugv(const UgvParams& params);

/// Steady-state Kalman filter quantities.
struct EstimatorState {
  MatrixXd gain;                ///< L = P C^T Sigma^-1
  MatrixXd error_cov;           ///< P, fixed point of the Riccati recursion
  MatrixXd residual_cov;        ///< Sigma = C P C^T + R
  MatrixXd residual_cov_inv;
  MatrixXd residual_cov_sqrt;   ///< symmetric, Sigma_sqrt * Sigma_sqrt = Sigma
  VectorXd xhat;
  int iterations = 0;
};

struct DareOptions {
  double tolerance = 1e-12;
  int max_iterations = 100000;
};

/// Iterates P <- A (P - P C^T (C P C^T + R)^-1 C P) A^T + Q from P = Q.
/// Throws NumericError on non-convergence or a residual covariance that is
/// not numerically positive definite.
EstimatorState solve_dare(const PlantModel& model, const DareOptions& options = {});

/// Symmetric square root by eigendecomposition. Throws NumericError when an
/// eigenvalue is below `floor`.
MatrixXd symmetric_sqrt(const MatrixXd& spd, double floor = 1e-14);

/// Square root of a PSD matrix; eigenvalues below zero round-off are clamped to 0.
MatrixXd psd_sqrt(const MatrixXd& psd);

/// One draw of process and measurement noise, in that order.
struct NoiseDraw {
  VectorXd process;
  VectorXd measurement;
};

class NoiseModel {
 public:
  explicit NoiseModel(const PlantModel& model);
  NoiseDraw draw(NoiseSource& rng) const;

 private:
  MatrixXd process_factor_;
  MatrixXd measurement_factor_;
};

/// Everything observable about one simulation step.
struct SimStep {
  std::int64_t k = 0;
  VectorXd x;          ///< true state x_k
  VectorXd xhat;       ///< estimate x_hat_k (prior)
  VectorXd u;
  VectorXd y;          ///< C x_k + eta_k
  VectorXd y_tilde;    ///< y + xi
  VectorXd xi;         ///< attack vector
  VectorXd r;          ///< y_tilde - C xhat
  VectorXd e;          ///< x - xhat
  VectorXd x_next;
  VectorXd xhat_next;
};

/// Advances plant and steady-state filter one step with the given noise.
/// The estimate update is xhat+ = A (xhat + L r) + B u, i.e. the one-step
/// predictor whose innovation covariance is exactly Sigma.
SimStep step(const PlantModel& model, const EstimatorState& estimator, const VectorXd& x,
             const VectorXd& xhat, const VectorXd& u, const VectorXd& xi,
             const NoiseDraw& noise, std::int64_t k = 0);

/// Linear state-feedback tracking law u = K (ref - xhat).
struct Controller {
  MatrixXd gain;
  VectorXd reference;

  [[nodiscard]] VectorXd input(const VectorXd& xhat) const;
};

/// Stabilizing gains for the default UGV: common-mode force on velocity error,
/// differential force on heading and yaw-rate error.
Controller default_ugv_controller(const VectorXd& reference = VectorXd::Zero(3));

/// Stateful simulator that owns the true state and the filter estimate.
class Plant {
 public:
  Plant(PlantModel model, EstimatorState estimator, VectorXd x0);

  [[nodiscard]] const PlantModel& model() const { return model_; }
  [[nodiscard]] const EstimatorState& estimator() const { return estimator_; }
  [[nodiscard]] const VectorXd& state() const { return x_; }
  [[nodiscard]] const VectorXd& estimate() const { return xhat_; }
  [[nodiscard]] VectorXd estimation_error() const { return x_ - xhat_; }
  [[nodiscard]] std::int64_t time() const { return k_; }

  [[nodiscard]] NoiseDraw draw_noise(NoiseSource& rng) const { return noise_.draw(rng); }
  SimStep advance(const VectorXd& u, const VectorXd& xi, const NoiseDraw& noise);
  SimStep advance(const VectorXd& u, const VectorXd& xi, NoiseSource& rng) {
    return advance(u, xi, draw_noise(rng));
  }

 private:
  PlantModel model_;
  EstimatorState estimator_;
  NoiseModel noise_;
  VectorXd x_;
  VectorXd xhat_;
  std::int64_t k_ = 0;
};

}  // namespace serialmon::plant
