// Copyright 2026 The fedstitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

namespace fedstitch::numerics {

/// Activation matrices are laid out samples x features.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin SVD: x = u * diag(singular_values) * vt, singular values descending.
struct SvdResult {
  Matrix u;
  Vector singular_values;
  Matrix vt;
};

SvdResult svd(const Matrix& x);

/// Subtracts each column's mean. Requires at least two rows.
Matrix center_columns(const Matrix& x);

/// Linear-kernel HSIC in its feature-space form ||Yc^T Xc||_F^2 / (n-1)^2.
/// Equals tr(Kc Lc)/(n-1)^2 for K = XX^T, L = YY^T double-centered.
double linear_hsic(const Matrix& x, const Matrix& y);

/// Linear CKA, HSIC(x,y) / sqrt(HSIC(x,x) HSIC(y,y)).
/// Throws DegenerateError when either input has no variation across rows.
double cka(const Matrix& x, const Matrix& y);

/// Relative truncation tolerance used when callers do not override it.
double default_rel_tol(const Matrix& x);

/// Moore-Penrose pseudoinverse via SVD; singular values below
/// rel_tol * sigma_max are treated as zero.
Matrix pseudoinverse(const Matrix& x, double rel_tol);
Matrix pseudoinverse(const Matrix& x);

/// Least-squares adapter A (k x j) mapping incoming block outputs x_out (n x j)
/// onto the outgoing block's native inputs y_in (n x k): minimizes
/// ||x_out A^T - y_in||_F, i.e. A = y_in^T x_out (x_out^T x_out)^+.
/// rel_tol <= 0 selects default_rel_tol(x_out).
Matrix fit_adapter(const Matrix& x_out, const Matrix& y_in, double rel_tol = 0.0);

/// fit_adapter with the pseudoinverse of x_out already computed.
Matrix adapter_from_pinv(const Matrix& x_pinv, const Matrix& y_in);

/// Applies an adapter to row-major activations: x A^T.
Matrix apply_adapter(const Matrix& adapter, const Matrix& x);

bool all_finite(const Matrix& x);

}  // namespace fedstitch::numerics
