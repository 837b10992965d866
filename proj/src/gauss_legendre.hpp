#pragma once

#include <array>
#include <cmath>

namespace pairstop::detail {

// 8-point Gauss-Legendre rule on [-1, 1]; exact for degree <= 15.
inline constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

/// Composite 8-point Gauss-Legendre over [lo, hi] with panels of width at
/// most `max_width` (and at least `min_panels` panels).
template <class F>
double gauss_composite(F&& f, double lo, double hi, double max_width, int min_panels = 1) {
    if (!(hi > lo)) return 0.0;
    int panels = min_panels;
    if (max_width > 0.0) {
        panels = std::max(panels, static_cast<int>(std::ceil((hi - lo) / max_width)));
    }
    const double w = (hi - lo) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * w;
        double s = 0.0;
        for (std::size_t k = 0; k < kGaussNodes.size(); ++k) {
            s += kGaussWeights[k] * f(mid + 0.5 * w * kGaussNodes[k]);
        }
        total += 0.5 * w * s;
    }
    return total;
}

}  // namespace pairstop::detail
