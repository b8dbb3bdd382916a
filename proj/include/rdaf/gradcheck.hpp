#pragma once

#include <functional>
#include <string>

#include "rdaf/tensor.hpp"

namespace rdaf {

/// Central finite differences (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps) per
/// element. f must treat its argument as a fresh leaf.
template <typename T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x,
                           T eps = T(1e-5)) {
    RDAF_CHECK(eps > T(0), "finite_diff_grad: eps must be positive");
    std::vector<T> base(x.data().begin(), x.data().end());
    std::vector<T> grad(base.size());
    for (size_t i = 0; i < base.size(); ++i) {
        std::vector<T> plus = base, minus = base;
        plus[i] += eps;
        minus[i] -= eps;
        const T fp = f(Tensor<T>::from_data(x.shape(), std::move(plus)));
        const T fm = f(Tensor<T>::from_data(x.shape(), std::move(minus)));
        grad[i] = (fp - fm) / (T(2) * eps);
    }
    return Tensor<T>::from_data(x.shape(), std::move(grad));
}

/// Max elementwise relative error |a-b| / max(|a|,|b|); pairs whose
/// magnitudes both fall below `floor` count as exact.
template <typename T>
T max_rel_error(std::span<const T> analytic, std::span<const T> numeric, T floor = T(1e-8)) {
    RDAF_CHECK(analytic.size() == numeric.size(), "max_rel_error: length mismatch ",
               analytic.size(), " vs ", numeric.size());
    T worst = T(0);
    for (size_t i = 0; i < analytic.size(); ++i) {
        const T a = analytic[i], b = numeric[i];
        const T denom = std::max(std::abs(a), std::abs(b));
        if (denom <= floor) continue;
        worst = std::max(worst, std::abs(a - b) / denom);
    }
    return worst;
}

}  // namespace rdaf
