#pragma once

// Bounded Levenberg-Marquardt for weighted nonlinear least squares.

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace ionpulse::estimation {

struct Parameter {
  std::string name;
  double initial = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

// Maps a parameter vector to the model prediction for every observation.
using ModelFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct FitProblem {
  std::vector<Parameter> params;
  ModelFn model;
  Eigen::VectorXd observed;
  Eigen::VectorXd weights;  // 1 / variance per observation

  Eigen::VectorXd initial() const;
  void validate() const;
};

struct LmOptions {
  int max_iterations = 500;
  double gradient_tol = 1e-10;
  double step_tol = 1e-12;
  double chi2_tol = 1e-14;
  double relative_step = 1e-6;  // central-difference step, relative to max(|x|, 1)
  double initial_damping = 1e-3;
};

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd values;
  Eigen::VectorXd std_errors;
  Eigen::MatrixXd covariance;
  double chi2 = 0.0;
  double reduced_chi2 = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int dof = 0;
  bool converged = false;
  bool singular = false;  // J^T W J rank-deficient, covariance is a pseudo-inverse

  // Throws std::out_of_range for unknown names.
  double value(const std::string& name) const;
  double error(const std::string& name) const;
};

// Local minimiser within the box bounds. Throws NotConverged when the
// iteration budget runs out.
FitResult least_squares(const FitProblem& problem, const LmOptions& options = {});

// Central-difference Jacobian of `model`, stencils clipped to the bounds.
Eigen::MatrixXd numeric_jacobian(const ModelFn& model, const Eigen::VectorXd& x,
                                 const std::vector<Parameter>& params,
                                 double relative_step = 1e-6);

// Runs least_squares from every start and keeps the lowest chi2. Ties within
// a relative 1e-9 go to the smaller value of parameter `tie_index`. Starts
// that fail to converge are skipped; if all fail the last error is rethrown.
FitResult multi_start(const FitProblem& problem, const std::vector<Eigen::VectorXd>& starts,
                      const LmOptions& options = {}, int tie_index = 0);

}  // namespace ionpulse::estimation
