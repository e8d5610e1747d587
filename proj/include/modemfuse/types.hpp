#pragma once

#include <complex>

#include <Eigen/Core>

namespace modemfuse {

template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;
template <typename Scalar>
using RealMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Complex = std::complex<double>;
using CMatrix = ComplexMatrix<double>;
using CVector = ComplexVector<double>;
using RMatrix = RealMatrix<double>;
using RVector = RealVector<double>;

// Read-only view onto a complex vector with arbitrary inner stride, so that
// rows of a column-major sample matrix bind without a copy.
using CVectorRef = Eigen::Ref<const CVector, 0, Eigen::InnerStride<>>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace modemfuse
