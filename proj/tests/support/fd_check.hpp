#pragma once

// Central finite-difference gradient checking helpers shared by the unit and
// acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "cvsstext/rng.hpp"
#include "cvsstext/tensor.hpp"

namespace fd {

// Relative error with a guarded denominator: behaves like true relative error
// for gradients of normal magnitude and like absolute error near zero, where
// central differences bottom out at ~1e-11 noise.
inline double rel_err(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

// Checks grad entries of `t` against central differences of `forward`, which
// must recompute the scalar output from current tensor contents. Entries are
// sampled (deterministically) when the tensor is larger than `max_entries`.
// Returns the max relative error over checked entries.
inline double check_tensor(cvsstext::num::Tensor& t,
                           const std::function<double()>& forward,
                           double h = 1e-5, std::size_t max_entries = 0,
                           cvsstext::Rng* rng = nullptr) {
    std::vector<std::size_t> entries;
    if (max_entries == 0 || t.size() <= max_entries) {
        entries.resize(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) entries[i] = i;
    } else {
        for (std::size_t i = 0; i < max_entries; ++i)
            entries.push_back(static_cast<std::size_t>(rng->below(t.size())));
    }
    double worst = 0.0;
    for (std::size_t idx : entries) {
        const double saved = t.data()[idx];
        t.data()[idx] = saved + h;
        const double fp = forward();
        t.data()[idx] = saved - h;
        const double fm = forward();
        t.data()[idx] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        worst = std::max(worst, rel_err(t.grad()[idx], numeric));
    }
    return worst;
}

}  // namespace fd
