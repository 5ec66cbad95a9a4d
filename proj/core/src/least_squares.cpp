#include "ionpulse/least_squares.hpp"

#include "ionpulse/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ionpulse::estimation {

namespace {

Eigen::VectorXd clamp_to_bounds(Eigen::VectorXd x, const std::vector<Parameter>& params) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    x(i) = std::clamp(x(i), params[i].lower, params[i].upper);
  return x;
}

struct Evaluation {
  Eigen::VectorXd residual;  // model - observed
  double chi2 = 0.0;
};

Evaluation evaluate(const FitProblem& problem, const Eigen::VectorXd& x) {
  Evaluation e;
  const Eigen::VectorXd predicted = problem.model(x);
  if (predicted.size() != problem.observed.size())
    throw std::invalid_argument("model returned the wrong number of observations");
  e.residual = predicted - problem.observed;
  if (!e.residual.allFinite()) throw std::domain_error("model returned non-finite values");
  e.chi2 = (e.residual.array().square() * problem.weights.array()).sum();
  return e;
}

// Parameters pinned at a bound with the descent direction pointing outward.
std::vector<bool> active_set(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                             const std::vector<Parameter>& params) {
  std::vector<bool> active(params.size(), false);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.lower == p.upper) active[i] = true;
    else if (x(i) <= p.lower && g(i) > 0.0) active[i] = true;
    else if (x(i) >= p.upper && g(i) < 0.0) active[i] = true;
  }
  return active;
}

void fill_covariance(FitResult& result, const Eigen::MatrixXd& jtwj) {
  const Eigen::Index k = jtwj.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jtwj);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double largest = lambda.cwiseAbs().maxCoeff();
  const double cutoff = std::max(largest * 1e-12, std::numeric_limits<double>::min());

  Eigen::VectorXd inv = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (lambda(i) > cutoff) inv(i) = 1.0 / lambda(i);
    else result.singular = true;
  }
  Eigen::MatrixXd cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose()).eval();
  result.covariance = cov * result.reduced_chi2;
  result.std_errors = result.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

Eigen::VectorXd FitProblem::initial() const {
  Eigen::VectorXd x(static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) x(i) = params[i].initial;
  return x;
}

void FitProblem::validate() const {
  if (params.empty()) throw std::invalid_argument("fit problem has no parameters");
  if (!model) throw std::invalid_argument("fit problem has no model");
  if (observed.size() == 0) throw std::invalid_argument("fit problem has no observations");
  if (weights.size() != observed.size())
    throw std::invalid_argument("weights and observations differ in length");
  if ((weights.array() <= 0.0).any() || !weights.allFinite())
    throw std::invalid_argument("weights must be positive and finite");
  for (const auto& p : params) {
    if (!(p.lower <= p.upper)) throw std::invalid_argument("parameter " + p.name + " has empty bounds");
    if (p.initial < p.lower || p.initial > p.upper)
      throw std::invalid_argument("initial value of " + p.name + " violates its bounds");
  }
}

double FitResult::value(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values(static_cast<Eigen::Index>(i));
  throw std::out_of_range("no fit parameter named " + name);
}

double FitResult::error(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return std_errors(static_cast<Eigen::Index>(i));
  throw std::out_of_range("no fit parameter named " + name);
}

Eigen::MatrixXd numeric_jacobian(const ModelFn& model, const Eigen::VectorXd& x,
                                 const std::vector<Parameter>& params, double relative_step) {
  Eigen::MatrixXd jac;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = relative_step * std::max(std::abs(x(j)), 1.0);
    const double a = std::max(params[j].lower, x(j) - h);
    const double b = std::min(params[j].upper, x(j) + h);
    Eigen::VectorXd xa = x, xb = x;
    xa(j) = a;
    xb(j) = b;
    const Eigen::VectorXd fa = model(xa);
    const Eigen::VectorXd fb = model(xb);
    if (jac.size() == 0) jac.resize(fa.size(), x.size());
    if (b > a) jac.col(j) = (fb - fa) / (b - a);
    else jac.col(j).setZero();
  }
  return jac;
}

FitResult least_squares(const FitProblem& problem, const LmOptions& options) {
  problem.validate();
  const auto& params = problem.params;
  const Eigen::Index k = static_cast<Eigen::Index>(params.size());
  const Eigen::VectorXd& w = problem.weights;

  Eigen::VectorXd x = problem.initial();
  Evaluation current = evaluate(problem, x);
  double mu = options.initial_damping;
  double nu = 2.0;

  FitResult result;
  for (const auto& p : params) result.names.push_back(p.name);

  Eigen::MatrixXd jac, jtwj;
  Eigen::VectorXd grad;
  int iteration = 0;
  bool converged = false;
  while (!converged) {
    if (iteration >= options.max_iterations)
      throw NotConverged("least_squares: no convergence after " +
                         std::to_string(options.max_iterations) + " iterations");
    ++iteration;

    jac = numeric_jacobian(problem.model, x, params, options.relative_step);
    jtwj = jac.transpose() * w.asDiagonal() * jac;
    grad = jac.transpose() * (w.array() * current.residual.array()).matrix();

    const auto active = active_set(x, grad, params);
    std::vector<Eigen::Index> free;
    double gnorm = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      if (active[i]) continue;
      free.push_back(i);
      gnorm = std::max(gnorm, std::abs(grad(i)));
    }
    result.gradient_norm = gnorm;
    if (free.empty() || gnorm <= options.gradient_tol * (1.0 + current.chi2)) {
      converged = true;
      break;
    }

    const Eigen::Index nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd a(nf, nf);
    Eigen::VectorXd g(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
      g(r) = grad(free[r]);
      for (Eigen::Index c = 0; c < nf; ++c) a(r, c) = jtwj(free[r], free[c]);
    }
    const double diag_floor = std::max(a.diagonal().maxCoeff() * 1e-12, 1e-300);

    // Inner loop: raise the damping until a step lowers chi2.
    while (true) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index r = 0; r < nf; ++r) damped(r, r) += mu * std::max(a(r, r), diag_floor);
      const Eigen::VectorXd df = damped.ldlt().solve(-g);

      Eigen::VectorXd trial = x;
      for (Eigen::Index r = 0; r < nf; ++r) trial(free[r]) += df(r);
      trial = clamp_to_bounds(trial, params);
      const Eigen::VectorXd step = trial - x;

      const Evaluation next = evaluate(problem, trial);
      const double predicted = -(2.0 * grad.dot(step) + step.dot(jtwj * step));
      if (next.chi2 < current.chi2) {
        const double rho = predicted > 0.0 ? (current.chi2 - next.chi2) / predicted : 1.0;
        mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        nu = 2.0;
        const double drop = current.chi2 - next.chi2;
        x = trial;
        current = next;
        if (step.norm() <= options.step_tol * (x.norm() + options.step_tol) ||
            drop <= options.chi2_tol * current.chi2)
          converged = true;
        break;
      }
      if (step.norm() <= options.step_tol * (x.norm() + options.step_tol)) {
        // No representable step improves chi2: x is a minimum to working precision.
        converged = true;
        break;
      }
      mu *= nu;
      nu *= 2.0;
      if (mu > 1e20) {
        converged = true;
        break;
      }
    }
  }

  jac = numeric_jacobian(problem.model, x, params, options.relative_step);
  jtwj = jac.transpose() * w.asDiagonal() * jac;

  result.values = x;
  result.chi2 = current.chi2;
  result.iterations = iteration;
  result.converged = converged;
  result.dof = std::max<int>(static_cast<int>(problem.observed.size()) - static_cast<int>(k), 1);
  result.reduced_chi2 = current.chi2 / result.dof;
  fill_covariance(result, jtwj);
  return result;
}

FitResult multi_start(const FitProblem& problem, const std::vector<Eigen::VectorXd>& starts,
                      const LmOptions& options, int tie_index) {
  if (starts.empty()) return least_squares(problem, options);

  FitResult best;
  bool have_best = false;
  std::string last_error;
  for (const auto& start : starts) {
    FitProblem trial = problem;
    for (std::size_t i = 0; i < trial.params.size(); ++i)
      trial.params[i].initial = std::clamp(start(static_cast<Eigen::Index>(i)),
                                           trial.params[i].lower, trial.params[i].upper);
    FitResult r;
    try {
      r = least_squares(trial, options);
    } catch (const NotConverged& e) {
      last_error = e.what();
      continue;
    }
    if (!have_best) {
      best = std::move(r);
      have_best = true;
      continue;
    }
    const double tol = 1e-9 * std::max(1.0, std::abs(best.chi2));
    if (r.chi2 < best.chi2 - tol ||
        (std::abs(r.chi2 - best.chi2) <= tol && r.values(tie_index) < best.values(tie_index)))
      best = std::move(r);
  }
  if (!have_best) throw NotConverged(last_error);
  return best;
}

}  // namespace ionpulse::estimation
