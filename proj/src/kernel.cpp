#include "ldos/kernel.hpp"

#include "ldos/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ldos {

Kernel make_kernel(RealMatrix joint) {
    if (joint.rows() != joint.cols() || joint.rows() == 0) {
        throw ConfigError("kernel: joint distribution must be a non-empty square matrix");
    }
    Kernel k;
    k.bins = joint.rows();
    k.conditional = RealMatrix(k.bins, k.bins);
    k.marginal.assign(k.bins, 0.0);
    for (std::size_t m = 0; m < k.bins; ++m) {
        double s = 0.0;
        for (double x : joint.row(m)) {
            s += x;
        }
        k.marginal[m] = s;
        if (s > Kernel::kEmptyMarginal) {
            for (std::size_t l = 0; l < k.bins; ++l) {
                k.conditional(m, l) = joint(m, l) / s;
            }
        }
    }
    k.joint = std::move(joint);
    return k;
}

Kernel make_kernel(const RealMatrix& conditional, const std::vector<double>& marginal) {
    const std::size_t bins = conditional.rows();
    if (conditional.cols() != bins || marginal.size() != bins) {
        throw ConfigError("kernel: shape mismatch between conditional rows and marginal");
    }
    Kernel k;
    k.bins = bins;
    k.joint = RealMatrix(bins, bins);
    k.conditional = RealMatrix(bins, bins);
    k.marginal = marginal;
    for (std::size_t m = 0; m < bins; ++m) {
        if (marginal[m] <= Kernel::kEmptyMarginal) {
            continue;
        }
        for (std::size_t l = 0; l < bins; ++l) {
            k.conditional(m, l) = conditional(m, l);
            k.joint(m, l) = marginal[m] * conditional(m, l);
        }
    }
    return k;
}

std::size_t band_index(double phase, std::size_t bins) {
    const double x = phase * static_cast<double>(bins) / kTwoPi + 0.5;
    const auto b = static_cast<long long>(bins);
    long long l = static_cast<long long>(std::floor(x)) % b;
    if (l < 0) {
        l += b;
    }
    return static_cast<std::size_t>(l);
}

std::vector<int> wrapped_offsets(std::size_t bins) {
    std::vector<int> out;
    const int lo = -static_cast<int>(bins / 2);
    const int hi = static_cast<int>((bins + 1) / 2);
    for (int k = lo; k < hi; ++k) {
        out.push_back(k);
    }
    return out;
}

double LdosProfile::phi(std::size_t i) const {
    return kTwoPi * static_cast<double>(offsets[i]) / static_cast<double>(bins);
}

double LdosProfile::weight_at(int offset) const {
    const auto it = std::find(offsets.begin(), offsets.end(), offset);
    if (it == offsets.end()) {
        throw ParameterError("offset " + std::to_string(offset) + " outside the wrapped range");
    }
    return weights[static_cast<std::size_t>(it - offsets.begin())];
}

namespace {

LdosProfile normalized_profile(std::size_t bins, std::vector<double> weights, std::optional<std::size_t> anchor) {
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    if (!(total > 0.0)) {
        throw DegenerateInputError("LDOS profile has no weight");
    }
    for (double& w : weights) {
        w /= total;
    }
    return LdosProfile{bins, wrapped_offsets(bins), std::move(weights), anchor};
}

std::size_t offset_slot(int offset, std::size_t bins) {
    return static_cast<std::size_t>(offset + static_cast<int>(bins / 2));
}

} // namespace

LdosProfile ldos_from_kernel(const Kernel& kernel, std::size_t m) {
    if (m >= kernel.bins) {
        throw ParameterError("anchor band out of range");
    }
    if (kernel.empty(m)) {
        throw DegenerateInputError("anchor band " + std::to_string(m) + " is empty");
    }
    std::vector<double> w(kernel.bins, 0.0);
    for (std::size_t l = 0; l < kernel.bins; ++l) {
        w[offset_slot(wrap_offset(l, m, kernel.bins), kernel.bins)] += kernel.conditional(m, l);
    }
    return normalized_profile(kernel.bins, std::move(w), m);
}

LdosProfile aggregated_ldos(const Kernel& kernel) {
    std::vector<double> w(kernel.bins, 0.0);
    for (std::size_t m = 0; m < kernel.bins; ++m) {
        if (kernel.empty(m)) {
            continue;
        }
        for (std::size_t l = 0; l < kernel.bins; ++l) {
            w[offset_slot(wrap_offset(l, m, kernel.bins), kernel.bins)] += kernel.joint(m, l);
        }
    }
    return normalized_profile(kernel.bins, std::move(w), std::nullopt);
}

} // namespace ldos
