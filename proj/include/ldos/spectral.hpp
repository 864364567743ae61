#pragma once

#include "ldos/linalg.hpp"

#include <vector>

namespace ldos {

// Eigenvalues ascending; column j of `vectors` belongs to values[j].
struct HermitianEigen {
    std::vector<double> values;
    CMatrix vectors;
};

// Householder tridiagonalization followed by implicit-shift QL.
HermitianEigen eig_hermitian(const CMatrix& h);

// Eigendecomposition of a unitary with the convention U v_j = exp(−i φ_j) v_j,
// φ_j ∈ [0, 2π), sorted ascending. Each eigenvector's first component with
// modulus above 1e-8 is made real and positive.
struct SpectralData {
    std::vector<double> phases;
    CMatrix vectors;

    std::size_t dimension() const { return phases.size(); }
    CVector vector(std::size_t j) const { return vectors.column(j); }
};

SpectralData eig_unitary(const UnitaryOperator& u);

// Largest ‖U v_j − e^{−iφ_j} v_j‖₂ over all eigenpairs.
double max_residual(const UnitaryOperator& u, const SpectralData& s);

// Σ_j e^{−iφ_j} v_j v_j†
CMatrix reconstruct(const SpectralData& s);

// exp(−i t H) from the spectral decomposition of H.
UnitaryOperator exp_minus_i(const CMatrix& hermitian, double t);

} // namespace ldos
