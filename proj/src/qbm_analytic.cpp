#include "qdarwin/qbm_analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qdarwin/errors.hpp"

namespace qdarwin {

void QbmParams::validate() const {
    if (!(h_s >= 0.0) || !std::isfinite(h_s)) throw InvalidArgument("h_s must be a finite nonnegative entropy");
    if (!(s >= 1.0) || !std::isfinite(s)) throw InvalidArgument("squeeze factor s must be >= 1");
    // delta = 1 is admitted so that s^(2 delta) can be evaluated at its edge
    if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in (0, 1]");
}

QbmCurve qbm_mutual_information(const QbmParams& params, std::span<const double> fractions) {
    params.validate();
    const double per_nat = params.unit == EntropyUnit::bits ? 1.0 / std::numbers::ln2 : 1.0;
    QbmCurve curve;
    curve.unit = params.unit;
    for (double f : fractions) {
        if (!(f > 0.0 && f < 1.0)) throw InvalidArgument("fraction must lie strictly inside (0, 1)");
        QbmPoint p;
        p.f = f;
        p.raw = params.h_s + 0.5 * std::log(f / (1.0 - f)) * per_nat;
        p.value = std::clamp(p.raw, 0.0, 2.0 * params.h_s);
        p.clamped = p.value != p.raw;
        curve.points.push_back(p);
    }
    return curve;
}

double qbm_redundancy(const QbmParams& params) {
    params.validate();
    return std::pow(params.s, 2.0 * params.delta);
}

}  // namespace qdarwin
