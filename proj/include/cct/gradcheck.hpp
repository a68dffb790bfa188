#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cct/tensor.hpp"

namespace cct {

// Central-difference check of analytic gradients for a tensor-to-scalar
// function. `f` must be deterministic (dropout disabled). Returns the
// maximum relative error over all elements, with relative error measured
// against max(|analytic|, |numeric|, 1e-8).
template <typename T>
double finite_difference_check(const std::function<Tensor<T>(Tensor<T>&)>& f, Tensor<T>& x,
                               T step = T(1e-6)) {
    x.set_requires_grad(true);
    x.zero_grad();
    {
        Tensor<T> loss = f(x);
        backward(loss);
    }
    std::vector<T> analytic = x.grad();

    double max_rel = 0.0;
    auto& vals = x.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const T saved = vals[i];
        vals[i] = saved + step;
        const T fp = f(x).item();
        vals[i] = saved - step;
        const T fm = f(x).item();
        vals[i] = saved;
        const double numeric = static_cast<double>(fp - fm) / (2.0 * static_cast<double>(step));
        const double a = static_cast<double>(analytic[i]);
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
    }
    return max_rel;
}

// Same check against several parameter tensors at once: `f` closes over the
// parameters and returns a scalar loss.
template <typename T>
double finite_difference_check_params(const std::function<Tensor<T>()>& f,
                                      std::vector<Tensor<T>> params, T step = T(1e-6)) {
    for (auto& p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }
    {
        Tensor<T> loss = f();
        backward(loss);
    }
    double max_rel = 0.0;
    for (auto& p : params) {
        std::vector<T> analytic = p.grad();
        auto& vals = p.values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const T saved = vals[i];
            vals[i] = saved + step;
            const T fp = f().item();
            vals[i] = saved - step;
            const T fm = f().item();
            vals[i] = saved;
            const double numeric =
                static_cast<double>(fp - fm) / (2.0 * static_cast<double>(step));
            const double a = static_cast<double>(analytic[i]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace cct
