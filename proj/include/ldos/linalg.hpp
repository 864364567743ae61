#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ldos {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Dense row-major complex matrix.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    static CMatrix identity(std::size_t n);
    static CMatrix diagonal(std::span<const cplx> diag);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    cplx& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const cplx& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<cplx> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const cplx> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    CVector column(std::size_t j) const;

    std::span<const cplx> data() const { return data_; }
    std::span<cplx> data() { return data_; }

    CMatrix adjoint() const;

    friend bool operator==(const CMatrix&, const CMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

// Dense row-major real matrix.
class RealMatrix {
public:
    RealMatrix() = default;
    RealMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    friend bool operator==(const RealMatrix&, const RealMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double max_abs_diff(const RealMatrix& a, const RealMatrix& b);

CMatrix operator*(const CMatrix& a, const CMatrix& b);
CMatrix operator+(const CMatrix& a, const CMatrix& b);
CMatrix operator-(const CMatrix& a, const CMatrix& b);
CMatrix operator*(cplx s, const CMatrix& a);

CVector multiply(const CMatrix& a, std::span<const cplx> v);

// max_ij |a_ij - b_ij|
double max_abs_diff(const CMatrix& a, const CMatrix& b);
// ‖A†A − I‖_max
double unitarity_defect(const CMatrix& a);
// ‖A − A†‖_max
double hermiticity_defect(const CMatrix& a);

double norm2(std::span<const cplx> v);
cplx inner(std::span<const cplx> a, std::span<const cplx> b); // ⟨a|b⟩, conjugate-linear in a
bool is_normalized(std::span<const cplx> v, double tol = 1e-12);

CVector basis_vector(std::size_t n, std::size_t k);

// Dense N×N matrix verified unitary on construction.
class UnitaryOperator {
public:
    static constexpr double kTolerance = 1e-10;

    explicit UnitaryOperator(CMatrix m);

    static UnitaryOperator identity(std::size_t n) { return UnitaryOperator(CMatrix::identity(n)); }

    std::size_t dimension() const { return m_.rows(); }
    const CMatrix& matrix() const { return m_; }

    UnitaryOperator operator*(const UnitaryOperator& other) const;

private:
    CMatrix m_;
};

// Dense N×N matrix verified Hermitian on construction.
class HermitianOperator {
public:
    static constexpr double kTolerance = 1e-12;

    explicit HermitianOperator(CMatrix m);

    std::size_t dimension() const { return m_.rows(); }
    const CMatrix& matrix() const { return m_; }

private:
    CMatrix m_;
};

CVector apply(const UnitaryOperator& u, std::span<const cplx> v);

// F_jk = M^{-1/2} exp(2πi jk/M)
UnitaryOperator dft(std::size_t m);

// (l − m) mod M mapped into [−⌊M/2⌋, ⌈M/2⌉).
int wrap_offset(std::size_t l, std::size_t m, std::size_t bins);

// Wraps an angle into [−π, π).
double wrap_angle(double phi);

} // namespace ldos
