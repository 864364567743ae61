#include "ldos/linalg.hpp"

#include "ldos/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ldos {

CMatrix CMatrix::identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

CMatrix CMatrix::diagonal(std::span<const cplx> diag) {
    CMatrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
        m(i, i) = diag[i];
    }
    return m;
}

CVector CMatrix::column(std::size_t j) const {
    CVector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        out[i] = (*this)(i, j);
    }
    return out;
}

CMatrix CMatrix::adjoint() const {
    CMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            out(j, i) = std::conj((*this)(i, j));
        }
    }
    return out;
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ConfigError("matrix product: inner dimensions differ");
    }
    CMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out_row = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{}) {
                continue;
            }
            auto b_row = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    return out;
}

namespace {

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ConfigError(std::string(what) + ": shape mismatch");
    }
}

} // namespace

CMatrix operator+(const CMatrix& a, const CMatrix& b) {
    require_same_shape(a, b, "matrix sum");
    CMatrix out = a;
    auto d = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] += bd[i];
    }
    return out;
}

CMatrix operator-(const CMatrix& a, const CMatrix& b) {
    require_same_shape(a, b, "matrix difference");
    CMatrix out = a;
    auto d = out.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] -= bd[i];
    }
    return out;
}

CMatrix operator*(cplx s, const CMatrix& a) {
    CMatrix out = a;
    for (auto& x : out.data()) {
        x *= s;
    }
    return out;
}

CVector multiply(const CMatrix& a, std::span<const cplx> v) {
    if (a.cols() != v.size()) {
        throw ConfigError("matrix-vector product: dimension mismatch (" + std::to_string(a.cols()) +
                          " vs " + std::to_string(v.size()) + ")");
    }
    CVector out(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        cplx acc{};
        for (std::size_t j = 0; j < v.size(); ++j) {
            acc += r[j] * v[j];
        }
        out[i] = acc;
    }
    return out;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
        worst = std::max(worst, std::abs(ad[i] - bd[i]));
    }
    return worst;
}

double max_abs_diff(const RealMatrix& a, const RealMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ConfigError("max_abs_diff: shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

double unitarity_defect(const CMatrix& a) {
    if (!a.square()) {
        throw ConfigError("unitarity check on non-square matrix");
    }
    return max_abs_diff(a.adjoint() * a, CMatrix::identity(a.rows()));
}

double hermiticity_defect(const CMatrix& a) {
    if (!a.square()) {
        throw ConfigError("hermiticity check on non-square matrix");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = i; j < a.cols(); ++j) {
            worst = std::max(worst, std::abs(a(i, j) - std::conj(a(j, i))));
        }
    }
    return worst;
}

double norm2(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& x : v) {
        s += std::norm(x);
    }
    return std::sqrt(s);
}

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) {
        throw ConfigError("inner product: dimension mismatch");
    }
    cplx acc{};
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += std::conj(a[i]) * b[i];
    }
    return acc;
}

bool is_normalized(std::span<const cplx> v, double tol) {
    double s = 0.0;
    for (const auto& x : v) {
        s += std::norm(x);
    }
    return std::abs(s - 1.0) <= tol;
}

CVector basis_vector(std::size_t n, std::size_t k) {
    CVector v(n);
    v.at(k) = 1.0;
    return v;
}

UnitaryOperator::UnitaryOperator(CMatrix m) : m_(std::move(m)) {
    if (!m_.square() || m_.rows() == 0) {
        throw ConfigError("unitary operator must be a non-empty square matrix");
    }
    const double defect = unitarity_defect(m_);
    if (defect > kTolerance) {
        throw NumericalError("matrix is not unitary: ‖U†U − I‖_max = " + std::to_string(defect));
    }
}

UnitaryOperator UnitaryOperator::operator*(const UnitaryOperator& other) const {
    return UnitaryOperator(m_ * other.m_);
}

HermitianOperator::HermitianOperator(CMatrix m) : m_(std::move(m)) {
    if (!m_.square() || m_.rows() == 0) {
        throw ConfigError("hermitian operator must be a non-empty square matrix");
    }
    const double defect = hermiticity_defect(m_);
    if (defect > kTolerance) {
        throw NumericalError("matrix is not hermitian: ‖V − V†‖_max = " + std::to_string(defect));
    }
}

CVector apply(const UnitaryOperator& u, std::span<const cplx> v) {
    return multiply(u.matrix(), v);
}

UnitaryOperator dft(std::size_t m) {
    if (m < 2) {
        throw ConfigError("dft: size must be at least 2");
    }
    CMatrix f(m, m);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t k = 0; k < m; ++k) {
            // reduce jk mod M first so large products keep full phase accuracy
            const auto jk = (j * k) % m;
            const double angle = kTwoPi * static_cast<double>(jk) / static_cast<double>(m);
            f(j, k) = std::polar(scale, angle);
        }
    }
    return UnitaryOperator(std::move(f));
}

int wrap_offset(std::size_t l, std::size_t m, std::size_t bins) {
    const auto b = static_cast<long long>(bins);
    long long d = (static_cast<long long>(l) - static_cast<long long>(m)) % b;
    if (d < 0) {
        d += b;
    }
    if (d >= (b + 1) / 2) {
        d -= b;
    }
    return static_cast<int>(d);
}

double wrap_angle(double phi) {
    double w = std::fmod(phi + std::numbers::pi, kTwoPi);
    if (w < 0) {
        w += kTwoPi;
    }
    return w - std::numbers::pi;
}

} // namespace ldos
