#pragma once

#include <span>

#include "rdaf/tensor.hpp"

namespace rdaf {

/// Complex-valued grid split into real/imaginary parts of identical shape.
/// Both parts are graph nodes when produced by fft2 on a grad-tracked input.
template <typename T>
struct ComplexGrid {
    Tensor<T> real;
    Tensor<T> imag;

    const Shape& shape() const { return real.shape(); }
};

/// Unnormalized forward 2D DFT applied per (n,c) plane.
/// Linear; the backward pass applies the adjoint (sign-flipped) transform to
/// the upstream complex gradient. Internally computed in double precision
/// (radix-2 for power-of-two extents, Bluestein otherwise).
template <typename T>
ComplexGrid<T> fft2(const Tensor<T>& input);

extern template ComplexGrid<float> fft2<float>(const Tensor<float>&);
extern template ComplexGrid<double> fft2<double>(const Tensor<double>&);

namespace detail {

/// One h-by-w complex plane, row-major; sign -1 = forward, +1 = adjoint.
void dft2_plane(std::span<double> re, std::span<double> im, i64 h, i64 w, int sign);

}  // namespace detail

}  // namespace rdaf
