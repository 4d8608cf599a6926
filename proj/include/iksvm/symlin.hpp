#pragma once

#include "iksvm/types.hpp"

namespace iksvm {

// Dense symmetric eigendecomposition, eigenvalues ascending.
EigenSystem eig(const SymmetricMatrix& a);

// Nearest positive semidefinite matrix in Frobenius norm: clamp negative
// eigenvalues to zero and reconstruct.
SymmetricMatrix psd_part(const SymmetricMatrix& a);
SymmetricMatrix psd_part(const EigenSystem& es);

// Eigendecomposition of X + rho * u * u' given the eigendecomposition of X,
// via the secular equation: O(n^2) work plus one n x m back-transformation
// product. Handles rho of either sign (negative rho goes through the mirrored
// problem) and deflates negligible or repeated components instead of failing.
EigenSystem rank_one_update_eig(const EigenSystem& base, const Vector& u, double rho);

}  // namespace iksvm
