#include "ldos/spectral.hpp"

#include "ldos/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace ldos {
namespace {

// Reduces the Hermitian matrix `a` (overwritten) to tridiagonal form A = Q T Q†.
// Returns Q; the tridiagonal part is left in `a`.
CMatrix householder_tridiagonalize(CMatrix& a) {
    const std::size_t n = a.rows();
    CMatrix q = CMatrix::identity(n);
    CVector v(n), p(n), qv(n);

    for (std::size_t k = 0; k + 2 < n; ++k) {
        double xnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            xnorm2 += std::norm(a(i, k));
        }
        double tail2 = xnorm2 - std::norm(a(k + 1, k));
        if (tail2 <= std::numeric_limits<double>::min()) {
            continue; // already tridiagonal in this column
        }
        const double xnorm = std::sqrt(xnorm2);
        const cplx x0 = a(k + 1, k);
        const cplx phase = std::abs(x0) > 0.0 ? x0 / std::abs(x0) : cplx{1.0, 0.0};
        const cplx alpha = -phase * xnorm;

        std::fill(v.begin(), v.end(), cplx{});
        v[k + 1] = x0 - alpha;
        for (std::size_t i = k + 2; i < n; ++i) {
            v[i] = a(i, k);
        }
        const double vnorm = std::sqrt(std::norm(v[k + 1]) + tail2);
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] /= vnorm;
        }

        // A ← (I − 2vv†) A (I − 2vv†) on the trailing block
        double c = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            cplx acc{};
            auto row = a.row(i);
            for (std::size_t j = k + 1; j < n; ++j) {
                acc += row[j] * v[j];
            }
            p[i] = acc;
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            c += (std::conj(v[i]) * p[i]).real();
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            auto row = a.row(i);
            for (std::size_t j = k + 1; j < n; ++j) {
                row[j] += -2.0 * v[i] * std::conj(p[j]) - 2.0 * p[i] * std::conj(v[j]) +
                          4.0 * c * v[i] * std::conj(v[j]);
            }
        }
        a(k + 1, k) = alpha;
        a(k, k + 1) = std::conj(alpha);
        for (std::size_t i = k + 2; i < n; ++i) {
            a(i, k) = 0.0;
            a(k, i) = 0.0;
        }

        // Q ← Q (I − 2vv†)
        for (std::size_t r = 0; r < n; ++r) {
            auto row = q.row(r);
            cplx acc{};
            for (std::size_t j = k + 1; j < n; ++j) {
                acc += row[j] * v[j];
            }
            qv[r] = acc;
        }
        for (std::size_t r = 0; r < n; ++r) {
            auto row = q.row(r);
            for (std::size_t j = k + 1; j < n; ++j) {
                row[j] -= 2.0 * qv[r] * std::conj(v[j]);
            }
        }
    }
    return q;
}

// Implicit-shift QL on a real symmetric tridiagonal matrix. `d` holds the
// diagonal, `e[i]` couples rows i and i+1. `z` (n×n, row-major) accumulates the
// rotations and must start as the identity.
void tridiagonal_ql(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z) {
    const int n = static_cast<int>(d.size());
    if (n == 0) {
        return;
    }
    e.resize(n);
    e[n - 1] = 0.0;
    constexpr int kMaxIterations = 60;
    constexpr double kEps = std::numeric_limits<double>::epsilon();

    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m = l;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= kEps * dd) {
                    break;
                }
            }
            if (m != l) {
                if (iter++ == kMaxIterations) {
                    throw NumericalError("tridiagonal QL did not converge");
                }
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
                double s = 1.0;
                double c = 1.0;
                double p = 0.0;
                int i = m - 1;
                for (; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (int k = 0; k < n; ++k) {
                        double* zk = &z[static_cast<std::size_t>(k) * n];
                        f = zk[i + 1];
                        zk[i + 1] = s * zk[i] + c * f;
                        zk[i] = c * zk[i] - s * f;
                    }
                }
                if (r == 0.0 && i >= l) {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

double wrap_phase(double phi) {
    double w = std::fmod(phi, kTwoPi);
    if (w < 0.0) {
        w += kTwoPi;
    }
    // phases numerically indistinguishable from 2π are reported as 0
    if (w >= kTwoPi - 1e-12) {
        w = 0.0;
    }
    return w + 0.0; // drop negative zero
}

// Makes the first component with modulus above 1e-8 real and positive.
void fix_gauge(CMatrix& vecs, std::size_t col) {
    for (std::size_t i = 0; i < vecs.rows(); ++i) {
        const cplx x = vecs(i, col);
        if (std::abs(x) > 1e-8) {
            const cplx ph = std::conj(x) / std::abs(x);
            for (std::size_t r = 0; r < vecs.rows(); ++r) {
                vecs(r, col) *= ph;
            }
            vecs(i, col) = std::abs(x);
            return;
        }
    }
}

// Replaces the columns [lo, hi) of `vecs` by their rotation that diagonalizes
// the restriction of `op` to their span.
void diagonalize_within(CMatrix& vecs, std::size_t lo, std::size_t hi, const CMatrix& op,
                        std::vector<double>* restricted_values) {
    const std::size_t n = vecs.rows();
    const std::size_t c = hi - lo;
    CMatrix basis(n, c);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            basis(i, j) = vecs(i, lo + j);
        }
    }
    CMatrix restricted = basis.adjoint() * (op * basis);
    // exact hermitian symmetrization of the small block
    for (std::size_t i = 0; i < c; ++i) {
        restricted(i, i) = restricted(i, i).real();
        for (std::size_t j = i + 1; j < c; ++j) {
            const cplx avg = 0.5 * (restricted(i, j) + std::conj(restricted(j, i)));
            restricted(i, j) = avg;
            restricted(j, i) = std::conj(avg);
        }
    }
    HermitianEigen sub = eig_hermitian(restricted);
    CMatrix rotated = basis * sub.vectors;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            vecs(i, lo + j) = rotated(i, j);
        }
    }
    if (restricted_values != nullptr) {
        std::copy(sub.values.begin(), sub.values.end(), restricted_values->begin() + lo);
    }
}

template <typename F>
void for_each_cluster(const std::vector<double>& sorted_values, double tol, F&& fn) {
    std::size_t lo = 0;
    while (lo < sorted_values.size()) {
        std::size_t hi = lo + 1;
        while (hi < sorted_values.size() && sorted_values[hi] - sorted_values[hi - 1] <= tol) {
            ++hi;
        }
        if (hi - lo > 1) {
            fn(lo, hi);
        }
        lo = hi;
    }
}

struct UnitaryAttempt {
    SpectralData data;
    double residual = 0.0;
};

UnitaryAttempt eig_unitary_with_tolerance(const UnitaryOperator& u, const HermitianEigen& cos_part,
                                          const CMatrix& sin_part, const CMatrix& cos_matrix,
                                          double cluster_tol) {
    const std::size_t n = u.dimension();
    CMatrix vecs = cos_part.vectors;

    for_each_cluster(cos_part.values, cluster_tol, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> sin_values(n);
        diagonalize_within(vecs, lo, hi, sin_part, &sin_values);
        // states sharing (nearly) the same sine are split by the cosine part
        std::vector<double> local(sin_values.begin() + lo, sin_values.begin() + hi);
        for_each_cluster(local, cluster_tol, [&](std::size_t a, std::size_t b) {
            diagonalize_within(vecs, lo + a, lo + b, cos_matrix, nullptr);
        });
    });

    const CMatrix uv = u.matrix() * vecs;
    std::vector<double> phases(n);
    for (std::size_t j = 0; j < n; ++j) {
        cplx rq{};
        for (std::size_t i = 0; i < n; ++i) {
            rq += std::conj(vecs(i, j)) * uv(i, j);
        }
        phases[j] = wrap_phase(-std::arg(rq));
        fix_gauge(vecs, j);
    }

    // sort ascending by phase; exact ties by lexicographic |component| order
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (phases[a] != phases[b]) {
            return phases[a] < phases[b];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double xa = std::abs(vecs(i, a));
            const double xb = std::abs(vecs(i, b));
            const bool na = xa > 1e-8;
            const bool nb = xb > 1e-8;
            if (na != nb) {
                return na;
            }
            if (na && xa != xb) {
                return xa > xb;
            }
        }
        return a < b;
    });

    UnitaryAttempt out;
    out.data.phases.resize(n);
    out.data.vectors = CMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.data.phases[j] = phases[order[j]];
        for (std::size_t i = 0; i < n; ++i) {
            out.data.vectors(i, j) = vecs(i, order[j]);
        }
    }
    out.residual = max_residual(u, out.data);
    return out;
}

} // namespace

HermitianEigen eig_hermitian(const CMatrix& h) {
    if (!h.square() || h.rows() == 0) {
        throw ConfigError("eig_hermitian: matrix must be square and non-empty");
    }
    const std::size_t n = h.rows();
    CMatrix a = h;
    CMatrix q = householder_tridiagonalize(a);

    std::vector<double> d(n), e(n, 0.0);
    std::vector<cplx> gauge(n, cplx{1.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = a(i, i).real();
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const cplx off = a(i + 1, i);
        const double mag = std::abs(off);
        e[i] = mag;
        gauge[i + 1] = mag > 0.0 ? gauge[i] * off / mag : gauge[i];
    }

    std::vector<double> z(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        z[i * n + i] = 1.0;
    }
    tridiagonal_ql(d, e, z);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });

    // eigenvectors = Q · diag(gauge) · Z
    CMatrix dz(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            dz(i, j) = gauge[i] * z[i * n + order[j]];
        }
    }
    HermitianEigen out;
    out.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = d[order[j]];
    }
    out.vectors = q * dz;
    return out;
}

SpectralData eig_unitary(const UnitaryOperator& u) {
    const std::size_t n = u.dimension();
    const CMatrix& m = u.matrix();
    const CMatrix madj = m.adjoint();

    // U = Σ e^{−iφ} P  ⇒  (U+U†)/2 = Σ cos φ P,  (U−U†)/(2i) = Σ −sin φ P
    CMatrix cos_matrix = cplx{0.5, 0.0} * (m + madj);
    CMatrix sin_matrix = cplx{0.0, -0.5} * (m - madj);
    for (auto* mat : {&cos_matrix, &sin_matrix}) {
        for (std::size_t i = 0; i < n; ++i) {
            (*mat)(i, i) = (*mat)(i, i).real();
            for (std::size_t j = i + 1; j < n; ++j) {
                const cplx avg = 0.5 * ((*mat)(i, j) + std::conj((*mat)(j, i)));
                (*mat)(i, j) = avg;
                (*mat)(j, i) = std::conj(avg);
            }
        }
    }

    const HermitianEigen cos_part = eig_hermitian(cos_matrix);

    constexpr double kResidualLimit = 1e-9;
    constexpr std::array<double, 3> kClusterTolerances{1e-8, 1e-6, 1e-4};
    double worst = 0.0;
    for (double tol : kClusterTolerances) {
        UnitaryAttempt attempt = eig_unitary_with_tolerance(u, cos_part, sin_matrix, cos_matrix, tol);
        if (attempt.residual <= kResidualLimit) {
            return std::move(attempt.data);
        }
        worst = attempt.residual;
    }
    throw NumericalError("eig_unitary: worst eigen-residual " + std::to_string(worst) + " exceeds 1e-9");
}

double max_residual(const UnitaryOperator& u, const SpectralData& s) {
    const std::size_t n = u.dimension();
    const CMatrix uv = u.matrix() * s.vectors;
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const cplx ev = std::polar(1.0, -s.phases[j]);
        double r2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            r2 += std::norm(uv(i, j) - ev * s.vectors(i, j));
        }
        worst = std::max(worst, std::sqrt(r2));
    }
    return worst;
}

CMatrix reconstruct(const SpectralData& s) {
    const std::size_t n = s.dimension();
    CMatrix scaled = s.vectors;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            scaled(i, j) *= std::polar(1.0, -s.phases[j]);
        }
    }
    return scaled * s.vectors.adjoint();
}

UnitaryOperator exp_minus_i(const CMatrix& hermitian, double t) {
    const HermitianEigen eig = eig_hermitian(hermitian);
    const std::size_t n = hermitian.rows();
    CMatrix scaled = eig.vectors;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            scaled(i, j) *= std::polar(1.0, -t * eig.values[j]);
        }
    }
    return UnitaryOperator(scaled * eig.vectors.adjoint());
}

} // namespace ldos
