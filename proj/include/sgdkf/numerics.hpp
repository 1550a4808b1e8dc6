#pragma once

// Small dense kernel on top of Eigen: eigen-extremes by power iteration,
// the discrete Lyapunov solve, and central-difference Jacobians.
// Everything is a free function templated on the Eigen expression type.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "sgdkf/error.hpp"

namespace sgdkf::numerics {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline constexpr int kMaxPowerIterations = 10000;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m, typename Derived::Scalar tol = 1e-10) {
  if (m.rows() != m.cols()) return false;
  using Scalar = typename Derived::Scalar;
  const Scalar scale = std::max<Scalar>(Scalar(1), m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

template <typename Derived>
bool is_symmetric_positive_definite(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (!is_symmetric(m) || !m.allFinite()) return false;
  const MatrixX<Scalar> sym = (m + m.transpose()) / Scalar(2);
  Eigen::LLT<MatrixX<Scalar>> llt(sym);
  return llt.info() == Eigen::Success;
}

namespace detail {

// Dominant eigenvalue of a symmetric positive-semidefinite matrix by power
// iteration with a Rayleigh-quotient estimate.
template <typename Scalar>
Scalar dominant_eigenvalue_psd(const MatrixX<Scalar>& m) {
  const Eigen::Index n = m.rows();
  if (n == 0 || m.cwiseAbs().maxCoeff() == Scalar(0)) return Scalar(0);

  auto run = [&](VectorX<Scalar> x, bool& converged) {
    x.normalize();
    Scalar lambda = 0;
    Scalar last_change = std::numeric_limits<Scalar>::infinity();
    converged = false;
    for (int it = 0; it < kMaxPowerIterations; ++it) {
      const VectorX<Scalar> y = m * x;
      const Scalar ny = y.norm();
      if (ny == Scalar(0)) {
        converged = true;
        return Scalar(0);
      }
      const Scalar next = x.dot(y);
      x = y / ny;
      last_change = std::abs(next - lambda);
      lambda = next;
      if (it > 0 && last_change <= Scalar(1e-15) * std::abs(lambda)) {
        converged = true;
        return lambda;
      }
    }
    converged = last_change <= Scalar(1e-9) * std::abs(lambda);
    return lambda;
  };

  bool converged = false;
  Scalar lambda = run(VectorX<Scalar>::Ones(n), converged);

  // The all-ones start can be orthogonal to the dominant eigenvector. Any
  // diagonal entry is a lower bound on lambda_max; restart from the largest.
  Eigen::Index imax = 0;
  const Scalar dmax = m.diagonal().maxCoeff(&imax);
  if (lambda < dmax * (Scalar(1) - Scalar(1e-12))) {
    lambda = run(VectorX<Scalar>::Unit(n, imax), converged);
  }
  if (!converged) {
    throw Error(ErrorKind::NoConvergence, "power iteration did not converge");
  }
  return std::max(lambda, Scalar(0));
}

template <typename Scalar>
Scalar block_modulus(Scalar a, Scalar b, Scalar c, Scalar d) {
  const Scalar half_tr = (a + d) / Scalar(2);
  const Scalar disc = (a - d) * (a - d) / Scalar(4) + b * c;
  if (disc < Scalar(0)) {
    return std::sqrt(std::max(a * d - b * c, Scalar(0)));
  }
  return std::abs(half_tr) + std::sqrt(disc);
}

template <typename Scalar>
Scalar spectral_radius_from_blocks(const MatrixX<Scalar>& a) {
  const Eigen::Index n = a.rows();
  if (n == 1) return std::abs(a(0, 0));
  if (n == 2) return block_modulus(a(0, 0), a(0, 1), a(1, 0), a(1, 1));

  Eigen::RealSchur<MatrixX<Scalar>> schur(a, /*computeU=*/false);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "real Schur reduction failed");
  }
  const MatrixX<Scalar>& t = schur.matrixT();
  Scalar rho = 0;
  for (Eigen::Index i = 0; i < n;) {
    if (i + 1 < n && t(i + 1, i) != Scalar(0)) {
      rho = std::max(rho, block_modulus(t(i, i), t(i, i + 1), t(i + 1, i), t(i + 1, i + 1)));
      i += 2;
    } else {
      rho = std::max(rho, std::abs(t(i, i)));
      i += 1;
    }
  }
  return rho;
}

}  // namespace detail

/// Largest singular value.
template <typename Derived>
typename Derived::Scalar two_norm(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> gram = a.transpose() * a;
  return std::sqrt(detail::dominant_eigenvalue_psd<Scalar>(gram));
}

/// Largest absolute eigenvalue. Power iteration from the normalized all-ones
/// vector; when that fails to certify an eigenpair (complex or defective
/// dominant modes) the 1x1/2x2 blocks of the real Schur form are used.
template <typename Derived>
typename Derived::Scalar spectral_radius(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw Error(ErrorKind::BadSpec, "spectral_radius needs a non-empty square matrix");
  }
  if (!a.allFinite()) throw Error(ErrorKind::NonFiniteEvaluation, "non-finite matrix");
  const MatrixX<Scalar> m = a;
  // For symmetric matrices rho(A) = ||A||_2.
  if (is_symmetric(m, Scalar(1e-14))) return two_norm(m);

  const Eigen::Index n = m.rows();
  const Scalar scale = m.cwiseAbs().maxCoeff();
  VectorX<Scalar> x = VectorX<Scalar>::Ones(n).normalized();
  for (int it = 0; it < kMaxPowerIterations; ++it) {
    const VectorX<Scalar> y = m * x;
    const Scalar ny = y.norm();
    if (ny == Scalar(0)) break;
    x = y / ny;
    const VectorX<Scalar> ax = m * x;
    const Scalar rayleigh = x.dot(ax);
    if ((ax - rayleigh * x).norm() <= Scalar(1e-12) * scale) {
      return std::abs(rayleigh);
    }
  }
  return detail::spectral_radius_from_blocks<Scalar>(m);
}

/// Smallest eigenvalue of a symmetric matrix. For positive-definite input the
/// estimate comes from inverse iteration, which keeps relative accuracy when
/// eigenvalues span many decades; otherwise lambda_min = s - rho(sI - Q).
template <typename Derived>
typename Derived::Scalar lambda_min_symmetric(const Eigen::MatrixBase<Derived>& q) {
  using Scalar = typename Derived::Scalar;
  if (!is_symmetric(q)) throw Error(ErrorKind::NotSymmetric, "lambda_min_symmetric needs a symmetric matrix");
  const MatrixX<Scalar> sym = (q + q.transpose()) / Scalar(2);
  const Eigen::Index n = sym.rows();

  Eigen::LLT<MatrixX<Scalar>> llt(sym);
  if (llt.info() == Eigen::Success) {
    const MatrixX<Scalar> inv = llt.solve(MatrixX<Scalar>::Identity(n, n));
    const MatrixX<Scalar> inv_sym = (inv + inv.transpose()) / Scalar(2);
    return Scalar(1) / detail::dominant_eigenvalue_psd<Scalar>(inv_sym);
  }

  const Scalar s = two_norm(sym);
  const MatrixX<Scalar> shifted = s * MatrixX<Scalar>::Identity(n, n) - sym;
  return s - two_norm(shifted);
}

/// Solves A^T P A - P = -Q by Kronecker vectorization,
/// (I - A^T (x) A^T) vec(P) = vec(Q), with one refinement sweep.
template <typename DerivedA, typename DerivedQ>
typename DerivedA::PlainObject solve_discrete_lyapunov(const Eigen::MatrixBase<DerivedA>& a,
                                                       const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedA::Scalar;
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw Error(ErrorKind::BadSpec, "solve_discrete_lyapunov: shape mismatch");
  }
  if (n > 16) throw Error(ErrorKind::BadSpec, "solve_discrete_lyapunov supports n <= 16");
  if (!is_symmetric_positive_definite(q)) {
    throw Error(ErrorKind::NotSPD, "Lyapunov Q must be symmetric positive-definite");
  }
  const Scalar rho = spectral_radius(a);
  if (rho >= Scalar(1) - Scalar(1e-9)) {
    throw Error(ErrorKind::NotSchur, "spectral radius " + std::to_string(rho) + " is not below one");
  }

  const MatrixX<Scalar> at = a.transpose();
  const Eigen::Index nn = n * n;
  MatrixX<Scalar> system = MatrixX<Scalar>::Identity(nn, nn);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      system.block(i * n, j * n, n, n) -= at(i, j) * at;
    }
  }
  const MatrixX<Scalar> qd = q;
  const VectorX<Scalar> rhs = Eigen::Map<const VectorX<Scalar>>(qd.data(), nn);

  Eigen::PartialPivLU<MatrixX<Scalar>> lu(system);
  VectorX<Scalar> vec_p = lu.solve(rhs);
  vec_p += lu.solve(rhs - system * vec_p);

  MatrixX<Scalar> p = Eigen::Map<const MatrixX<Scalar>>(vec_p.data(), n, n);
  p = (p + p.transpose()) / Scalar(2);
  return p;
}

/// Central-difference Jacobian of f at x0 with per-coordinate step
/// rel_step * max(|x0_i|, 1).
template <typename F, typename Derived>
MatrixX<typename Derived::Scalar> numeric_jacobian(F&& f, const Eigen::MatrixBase<Derived>& x0,
                                                   typename Derived::Scalar rel_step = 1e-6) {
  using Scalar = typename Derived::Scalar;
  if (!(rel_step > Scalar(0) && rel_step <= Scalar(1e-2))) {
    throw Error(ErrorKind::BadSpec, "numeric_jacobian: rel_step must lie in (0, 1e-2]");
  }
  const VectorX<Scalar> base = x0;
  const Eigen::Index n = base.size();
  Eigen::Index m = -1;
  MatrixX<Scalar> jac;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar h = rel_step * std::max(std::abs(base(i)), Scalar(1));
    VectorX<Scalar> xp = base;
    VectorX<Scalar> xm = base;
    xp(i) += h;
    xm(i) -= h;
    const VectorX<Scalar> fp = f(xp);
    const VectorX<Scalar> fm = f(xm);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw Error(ErrorKind::NonFiniteEvaluation, "Jacobian probe returned a non-finite value");
    }
    if (m < 0) {
      m = fp.size();
      jac.resize(m, n);
    }
    jac.col(i) = (fp - fm) / (xp(i) - xm(i));
  }
  return jac;
}

}  // namespace sgdkf::numerics
