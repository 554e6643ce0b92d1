// Dense complex operator algebra for truncated bosonic/atomic Hilbert spaces.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

namespace wgscatter {

using Complex = std::complex<double>;
using Operator = Eigen::MatrixXcd;
using StateVector = Eigen::VectorXcd;
using RowVector = Eigen::RowVectorXcd;

constexpr Complex kI{0.0, 1.0};

inline Operator identity(Eigen::Index dim) { return Operator::Identity(dim, dim); }

// Lowering operator on an (n_max+1)-dimensional truncated space, <n-1|a|n> = sqrt(n).
inline Operator destroy(int n_max) {
  if (n_max < 1) throw std::invalid_argument("destroy: excitation cutoff must be >= 1");
  Operator a = Operator::Zero(n_max + 1, n_max + 1);
  for (int n = 1; n <= n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline Operator adjoint(const Operator& x) { return x.adjoint(); }

// Kronecker product; index (i1*dim2 + i2) labels |i1>|i2>.
inline Operator tensor(const Operator& x, const Operator& y) {
  const Eigen::Index dx = x.rows(), dy = y.rows();
  if (dx > 0 && dy > (1 << 20) / dx) throw std::invalid_argument("tensor: dimension overflow");
  Operator out(dx * dy, dx * dy);
  for (Eigen::Index i = 0; i < dx; ++i)
    for (Eigen::Index j = 0; j < dx; ++j) out.block(i * dy, j * dy, dy, dy) = x(i, j) * y;
  return out;
}

inline StateVector tensor(const StateVector& x, const StateVector& y) {
  StateVector out(x.size() * y.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out.segment(i * y.size(), y.size()) = x(i) * y;
  return out;
}

inline Operator commutator(const Operator& x, const Operator& y) { return x * y - y * x; }

inline StateVector fock_state(Eigen::Index dim, Eigen::Index n) {
  if (n < 0 || n >= dim) throw std::invalid_argument("fock_state: index out of range");
  StateVector v = StateVector::Zero(dim);
  v(n) = 1.0;
  return v;
}

inline bool entries_finite(const Operator& x) { return x.allFinite(); }

}  // namespace wgscatter
