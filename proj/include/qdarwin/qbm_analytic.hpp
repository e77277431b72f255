#pragma once

// Closed-form reference curves for an underdamped oscillator decohered by an
// oscillator bath. They are approximations, tagged as such in every output,
// and are meant for plotting next to exact spin-bath results.

#include <span>
#include <string_view>
#include <vector>

namespace qdarwin {

enum class EntropyUnit { bits, nats };

inline constexpr std::string_view kAnalyticApproximationTag = "analytic-approximation";

struct QbmParams {
    double h_s = 1.0;  ///< system entropy, in `unit`
    EntropyUnit unit = EntropyUnit::bits;
    double s = 1.0;      ///< squeeze factor, >= 1
    double delta = 0.1;  ///< information deficit, in (0, 1]

    void validate() const;
};

struct QbmPoint {
    double f = 0.0;
    double raw = 0.0;  ///< H_S + (1/2) ln(f / (1 - f)), converted to `unit`
    double value = 0.0;  ///< raw clamped to [0, 2 H_S]
    bool clamped = false;
};

struct QbmCurve {
    std::vector<QbmPoint> points;
    EntropyUnit unit = EntropyUnit::bits;
    std::string_view tag = kAnalyticApproximationTag;
};

/// I(S:F) ~ H_S + (1/2) ln(f / (1 - f)); f must lie strictly inside (0, 1).
QbmCurve qbm_mutual_information(const QbmParams& params, std::span<const double> fractions);

/// R_delta ~ s^(2 delta)
double qbm_redundancy(const QbmParams& params);

}  // namespace qdarwin
