#pragma once

#include <vector>

#include "jcas/cmat.hpp"

namespace jcas {

struct EigResult {
  std::vector<double> values;  // descending
  CMat vectors;                // unit-norm eigenvectors as columns
};

/// Eigendecomposition of a Hermitian matrix via cyclic Jacobi rotations.
/// Input must be Hermitian within 1e-10 * ||m||_F, otherwise throws.
EigResult hermitian_eig(const CMat& m);

/// Moore-Penrose pseudoinverse. Defined for every matrix; rank decided by a
/// relative singular-value cutoff.
CMat pseudo_inverse(const CMat& m);

/// Singular values of m, descending (square roots of Gram eigenvalues).
std::vector<double> singular_values(const CMat& m);

}  // namespace jcas
