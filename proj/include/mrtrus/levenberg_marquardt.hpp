#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mrtrus/error.hpp"

namespace mrtrus {

struct LmOptions {
  int max_iterations = 200;
  double cost_tolerance = 1e-8;   // relative decrease of an accepted step
  double param_tolerance = 1e-6;  // step norm
  double lambda_init = 1e-3;
  double lambda_factor = 10.0;
};

enum class LmStop { CostTolerance, ParamTolerance, MaxIterations, Stalled, ZeroCost };

struct LmSummary {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// Cost after the start and after every accepted step.
  std::vector<double> cost_history;
  LmStop stop = LmStop::MaxIterations;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling on a sparse
/// Jacobian.
///
/// `Problem` supplies:
///   void evaluate(const State&, Eigen::VectorXd& r, Eigen::SparseMatrix<double>* J) const;
///   State retract(const State&, const Eigen::VectorXd& delta) const;
/// The cost is r.squaredNorm(). Only steps that strictly lower the cost are
/// accepted, so the recorded history is non-increasing.
template <class Problem, class State>
LmSummary levenberg_marquardt(const Problem& problem, State& state, const LmOptions& opt) {
  using SpMat = Eigen::SparseMatrix<double>;
  LmSummary summary;

  Eigen::VectorXd r;
  SpMat J;
  problem.evaluate(state, r, &J);
  if (!r.allFinite()) throw Error(ErrorKind::NonFinite, "residuals are not finite at the start point");
  double cost = r.squaredNorm();
  if (!std::isfinite(cost)) throw Error(ErrorKind::NonFinite, "energy overflows at the start point");
  summary.initial_cost = cost;
  summary.cost_history.push_back(cost);
  double lambda = opt.lambda_init;

  for (int it = 0; it < opt.max_iterations; ++it) {
    summary.iterations = it + 1;
    if (cost == 0.0) {
      summary.stop = LmStop::ZeroCost;
      break;
    }
    for (int k = 0; k < J.outerSize(); ++k)
      for (SpMat::InnerIterator iter(J, k); iter; ++iter)
        if (!std::isfinite(iter.value())) throw Error(ErrorKind::NonFinite, "Jacobian is not finite");

    const SpMat Jt = J.transpose();
    const SpMat A = Jt * J;
    const Eigen::VectorXd g = Jt * r;
    Eigen::VectorXd diag = A.diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) diag[i] = std::max(diag[i], 1e-9);

    bool accepted = false;
    bool done = false;
    while (!accepted) {
      SpMat damped = A;
      for (Eigen::Index i = 0; i < diag.size(); ++i) damped.coeffRef(i, i) += lambda * diag[i];
      Eigen::SimplicialLDLT<SpMat> solver(damped);
      Eigen::VectorXd delta;
      if (solver.info() == Eigen::Success) delta = solver.solve(-g);
      if (solver.info() != Eigen::Success || !delta.allFinite()) {
        lambda *= opt.lambda_factor;
        if (lambda > 1e16) {
          summary.stop = LmStop::Stalled;
          done = true;
          break;
        }
        continue;
      }
      if (delta.norm() < opt.param_tolerance) {
        summary.stop = LmStop::ParamTolerance;
        done = true;
        break;
      }
      State candidate = problem.retract(state, delta);
      Eigen::VectorXd r_new;
      problem.evaluate(candidate, r_new, nullptr);
      const double new_cost = r_new.allFinite() ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();
      if (new_cost < cost) {
        const double rel = (cost - new_cost) / cost;
        state = std::move(candidate);
        cost = new_cost;
        summary.cost_history.push_back(cost);
        lambda = std::max(lambda / opt.lambda_factor, 1e-12);
        accepted = true;
        if (rel < opt.cost_tolerance) {
          summary.stop = LmStop::CostTolerance;
          done = true;
        } else {
          problem.evaluate(state, r, &J);
        }
      } else {
        lambda *= opt.lambda_factor;
        if (lambda > 1e16) {
          summary.stop = LmStop::Stalled;
          done = true;
          break;
        }
      }
    }
    if (done) break;
  }
  summary.final_cost = cost;
  return summary;
}

}  // namespace mrtrus
