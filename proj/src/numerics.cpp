// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedstitch/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedstitch/errors.hpp"

namespace fedstitch::numerics {

namespace {

void require_paired_rows(const Matrix& x, const Matrix& y, const char* what) {
  if (x.rows() != y.rows()) {
    throw ShapeError(std::string(what) + ": row count mismatch (" + std::to_string(x.rows()) +
                     " vs " + std::to_string(y.rows()) + ")");
  }
  if (x.rows() < 2) {
    throw DegenerateError(std::string(what) + ": need at least 2 rows");
  }
}

// Unnormalized self-HSIC of an already centered matrix.
double unnormalized_self_hsic(const Matrix& xc) {
  const Matrix g = xc.transpose() * xc;
  return g.squaredNorm();
}

bool vanishes(const Matrix& xc, const Matrix& raw) {
  const double scale = raw.norm();
  return xc.norm() <= 1e-10 * std::max(scale, 1e-300);
}

}  // namespace

SvdResult svd(const Matrix& x) {
  Eigen::JacobiSVD<Matrix> solver(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return SvdResult{solver.matrixU(), solver.singularValues(), solver.matrixV().transpose()};
}

Matrix center_columns(const Matrix& x) {
  if (x.rows() < 2) {
    throw DegenerateError("center_columns: need at least 2 rows");
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return x.rowwise() - mean;
}

double linear_hsic(const Matrix& x, const Matrix& y) {
  require_paired_rows(x, y, "linear_hsic");
  const Matrix xc = center_columns(x);
  const Matrix yc = center_columns(y);
  const double denom = static_cast<double>(x.rows() - 1);
  return (yc.transpose() * xc).squaredNorm() / (denom * denom);
}

double cka(const Matrix& x, const Matrix& y) {
  require_paired_rows(x, y, "cka");
  const Matrix xc = center_columns(x);
  const Matrix yc = center_columns(y);
  if (vanishes(xc, x) || vanishes(yc, y)) {
    throw DegenerateError("cka: representation has no variation across samples");
  }
  // The (n-1)^2 normalization cancels in the ratio.
  const double hxy = (yc.transpose() * xc).squaredNorm();
  const double hxx = unnormalized_self_hsic(xc);
  const double hyy = unnormalized_self_hsic(yc);
  if (!(hxx > 0.0) || !(hyy > 0.0)) {
    throw DegenerateError("cka: zero self-HSIC");
  }
  const double value = hxy / std::sqrt(hxx * hyy);
  return std::clamp(value, 0.0, 1.0);
}

double default_rel_tol(const Matrix& x) {
  return 1e-10 * static_cast<double>(std::max(x.rows(), x.cols()));
}

Matrix pseudoinverse(const Matrix& x, double rel_tol) {
  if (!all_finite(x)) {
    throw DegenerateError("pseudoinverse: non-finite input");
  }
  if (x.size() == 0) {
    return Matrix::Zero(x.cols(), x.rows());
  }
  Eigen::JacobiSVD<Matrix> solver(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = solver.singularValues();
  const double cutoff = rel_tol * (s.size() > 0 ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) {
      inv(i) = 1.0 / s(i);
    }
  }
  return solver.matrixV() * inv.asDiagonal() * solver.matrixU().transpose();
}

Matrix pseudoinverse(const Matrix& x) { return pseudoinverse(x, default_rel_tol(x)); }

Matrix fit_adapter(const Matrix& x_out, const Matrix& y_in, double rel_tol) {
  if (x_out.rows() != y_in.rows()) {
    throw ShapeError("fit_adapter: row count mismatch (" + std::to_string(x_out.rows()) +
                     " vs " + std::to_string(y_in.rows()) + ")");
  }
  if (x_out.rows() < 2) {
    throw DegenerateError("fit_adapter: need at least 2 calibration rows");
  }
  const double tol = rel_tol > 0.0 ? rel_tol : default_rel_tol(x_out);
  return adapter_from_pinv(pseudoinverse(x_out, tol), y_in);
}

Matrix adapter_from_pinv(const Matrix& x_pinv, const Matrix& y_in) {
  if (x_pinv.cols() != y_in.rows()) {
    throw ShapeError("adapter_from_pinv: pseudoinverse spans " + std::to_string(x_pinv.cols()) +
                     " rows, targets have " + std::to_string(y_in.rows()));
  }
  // A^T = X^+ Y is the minimum-norm least-squares solution of X A^T = Y.
  return (x_pinv * y_in).transpose();
}

Matrix apply_adapter(const Matrix& adapter, const Matrix& x) {
  if (adapter.cols() != x.cols()) {
    throw ShapeError("apply_adapter: adapter expects " + std::to_string(adapter.cols()) +
                     " features, got " + std::to_string(x.cols()));
  }
  return x * adapter.transpose();
}

bool all_finite(const Matrix& x) { return x.allFinite(); }

}  // namespace fedstitch::numerics
