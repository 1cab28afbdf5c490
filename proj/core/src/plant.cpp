#include "serialmon/plant.hpp"

#include <cmath>
#include <string>

#include "serialmon/errors.hpp"

namespace serialmon::plant {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("plant: " + message);
}

bool symmetric(const MatrixXd& m, double tol = 1e-12) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + m.cwiseAbs().maxCoeff());
}

bool psd(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
}

}  // namespace

void PlantModel::validate() const {
  const auto n = A.rows();
  require(n > 0 && A.cols() == n, "A must be square and non-empty");
  require(B.rows() == n, "B must have as many rows as A");
  require(C.cols() == n && C.rows() > 0, "C must have as many columns as A");
  require(Q.rows() == n && Q.cols() == n, "Q must be n x n");
  require(R.rows() == C.rows() && R.cols() == C.rows(), "R must be s x s");
  require(symmetric(Q) && psd(Q), "Q must be symmetric positive semidefinite");
  require(symmetric(R) && psd(R), "R must be symmetric positive semidefinite");
  require(sample_time > 0.0, "sample_time must be positive");
  require(A.allFinite() && B.allFinite() && C.allFinite() && Q.allFinite() && R.allFinite(),
          "matrices must be finite");
}

void UgvParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("ugv: ") + name + " must be positive");
    }
  };
  positive(mass, "m");
  positive(yaw_inertia, "iz");
  positive(width, "w");
  positive(sample_time, "ts");
  positive(velocity_noise, "velocity_noise");
  positive(heading_noise, "heading_noise");
  if (!(rolling_resistance >= 0.0) || !(turning_resistance >= 0.0)) {
    throw ConfigError("ugv: resistances must be nonnegative");
  }
  if (!(process_noise >= 0.0)) throw ConfigError("ugv: process_noise must be nonnegative");
}

ContinuousModel ugv_continuous(const UgvParams& p) {
  p.validate();
  MatrixXd a = MatrixXd::Zero(3, 3);
  a(0, 0) = -p.rolling_resistance / p.mass;
  a(1, 2) = 1.0;
  a(2, 2) = -p.turning_resistance / p.yaw_inertia;
  MatrixXd b = MatrixXd::Zero(3, 2);
  b(0, 0) = 1.0 / p.mass;
  b(0, 1) = 1.0 / p.mass;
  b(2, 0) = 0.5 * p.width / p.yaw_inertia;
  b(2, 1) = -0.5 * p.width / p.yaw_inertia;
  return {a, b};
}

ContinuousModel zoh_discretize(const ContinuousModel& c, double sample_time) {
  const auto n = c.A.rows();
  const MatrixXd at = c.A * sample_time;
  // exp(A t) = sum (A t)^k / k!,  int_0^t exp(A s) ds = t * sum (A t)^k / (k + 1)!
  MatrixXd phi = MatrixXd::Identity(n, n);
  MatrixXd gamma = MatrixXd::Identity(n, n);
  MatrixXd power = MatrixXd::Identity(n, n);
  double factorial = 1.0;
  for (int k = 1; k < 200; ++k) {
    power = power * at;
    factorial *= k;
    const MatrixXd term = power / factorial;
    const MatrixXd integral_term = power / (factorial * (k + 1));
    phi += term;
    gamma += integral_term;
    const double size = n == 0 ? 0.0 : std::max(term.cwiseAbs().maxCoeff(),
                                                 integral_term.cwiseAbs().maxCoeff());
    if (size < 1e-15) break;
  }
  return {phi, gamma * sample_time * c.B};
}

PlantModel discretize_ugv(const UgvParams& params) {
  const ContinuousModel discrete = zoh_discretize(ugv_continuous(params), params.sample_time);
  PlantModel model;
  model.A = discrete.A;
  model.B = discrete.B;
  model.C = MatrixXd::Zero(2, 3);
  model.C(0, 0) = 1.0;
  model.C(1, 1) = 1.0;
  model.Q = params.process_noise * MatrixXd::Identity(3, 3);
  model.R = MatrixXd::Zero(2, 2);
  model.R(0, 0) = params.velocity_noise;
  model.R(1, 1) = params.heading_noise;
  model.sample_time = params.sample_time;
  return model;
}

MatrixXd symmetric_sqrt(const MatrixXd& spd, double floor) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (spd + spd.transpose()));
  if (eig.info() != Eigen::Success) throw NumericError("symmetric_sqrt: eigendecomposition failed");
  const VectorXd values = eig.eigenvalues();
  if (values.minCoeff() < floor) {
    throw NumericError("symmetric_sqrt: matrix is not positive definite (min eigenvalue " +
                       std::to_string(values.minCoeff()) + ")");
  }
  const MatrixXd& v = eig.eigenvectors();
  MatrixXd root = v * values.cwiseSqrt().asDiagonal() * v.transpose();
  return 0.5 * (root + root.transpose());
}

MatrixXd psd_sqrt(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (m + m.transpose()));
  if (eig.info() != Eigen::Success) throw NumericError("psd_sqrt: eigendecomposition failed");
  const VectorXd values = eig.eigenvalues().cwiseMax(0.0);
  const MatrixXd& v = eig.eigenvectors();
  return v * values.cwiseSqrt().asDiagonal() * v.transpose();
}

EstimatorState solve_dare(const PlantModel& model, const DareOptions& options) {
  model.validate();
  const MatrixXd& a = model.A;
  const MatrixXd& c = model.C;
  MatrixXd p = model.Q;
  int iter = 0;
  for (;; ++iter) {
    if (iter >= options.max_iterations) {
      throw NumericError("solve_dare: Riccati iteration did not converge after " +
                         std::to_string(iter) + " iterations; is (A, C) detectable?");
    }
    const MatrixXd s = c * p * c.transpose() + model.R;
    const MatrixXd pc = p * c.transpose();
    const MatrixXd correction = pc * s.ldlt().solve(pc.transpose());
    MatrixXd next = a * (p - correction) * a.transpose() + model.Q;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) throw NumericError("solve_dare: Riccati iteration diverged");
    const double update = (next - p).cwiseAbs().maxCoeff();
    p = std::move(next);
    if (update < options.tolerance) break;
  }

  EstimatorState est;
  est.error_cov = p;
  est.residual_cov = c * p * c.transpose() + model.R;
  est.residual_cov = 0.5 * (est.residual_cov + est.residual_cov.transpose());
  est.residual_cov_sqrt = symmetric_sqrt(est.residual_cov);
  est.residual_cov_inv = est.residual_cov.ldlt().solve(MatrixXd::Identity(c.rows(), c.rows()));
  est.residual_cov_inv = 0.5 * (est.residual_cov_inv + est.residual_cov_inv.transpose());
  est.gain = p * c.transpose() * est.residual_cov_inv;
  est.xhat = VectorXd::Zero(a.rows());
  est.iterations = iter + 1;
  return est;
}

NoiseModel::NoiseModel(const PlantModel& model)
    : process_factor_(psd_sqrt(model.Q)), measurement_factor_(psd_sqrt(model.R)) {}

NoiseDraw NoiseModel::draw(NoiseSource& rng) const {
  NoiseDraw draw;
  draw.process = process_factor_ * rng.normal_vector(process_factor_.rows());
  draw.measurement = measurement_factor_ * rng.normal_vector(measurement_factor_.rows());
  return draw;
}

SimStep step(const PlantModel& model, const EstimatorState& estimator, const VectorXd& x,
             const VectorXd& xhat, const VectorXd& u, const VectorXd& xi, const NoiseDraw& noise,
             std::int64_t k) {
  SimStep s;
  s.k = k;
  s.x = x;
  s.xhat = xhat;
  s.u = u;
  s.xi = xi;
  s.y = model.C * x + noise.measurement;
  s.y_tilde = s.y + xi;
  s.r = s.y_tilde - model.C * xhat;
  s.e = x - xhat;
  s.x_next = model.A * x + model.B * u + noise.process;
  s.xhat_next = model.A * (xhat + estimator.gain * s.r) + model.B * u;
  return s;
}

VectorXd Controller::input(const VectorXd& xhat) const { return gain * (reference - xhat); }

Controller default_ugv_controller(const VectorXd& reference) {
  constexpr double kv = 10.0;
  constexpr double ktheta = 4.0;
  constexpr double komega = 2.0;
  MatrixXd k(2, 3);
  k << kv, ktheta, komega,
       kv, -ktheta, -komega;
  return {k, reference};
}

Plant::Plant(PlantModel model, EstimatorState estimator, VectorXd x0)
    : model_(std::move(model)),
      estimator_(std::move(estimator)),
      noise_(model_),
      x_(std::move(x0)),
      xhat_(estimator_.xhat) {
  if (x_.size() != model_.states() || xhat_.size() != model_.states()) {
    throw ConfigError("plant: initial state dimension mismatch");
  }
}

SimStep Plant::advance(const VectorXd& u, const VectorXd& xi, const NoiseDraw& noise) {
  SimStep s = step(model_, estimator_, x_, xhat_, u, xi, noise, k_);
  x_ = s.x_next;
  xhat_ = s.xhat_next;
  ++k_;
  return s;
}

}  // namespace serialmon::plant
