#include "qkdnet/keyrate.hpp"

#include <algorithm>
#include <cmath>

namespace qkdnet {

namespace {

constexpr double kLog2 = 0.69314718055994530941723212145818;

// d/dx of the binary entropy, in bits.
double entropy_slope(double x) { return std::log2((1.0 - x) / x); }

double binomial_sigma(double e, double n) {
    if (!(n > 0.0)) return 0.0;
    return std::sqrt(std::max(e * (1.0 - e), 0.0) / n);
}

}  // namespace

double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0)) throw domain_error("binary entropy argument must lie in [0, 1]");
    if (x == 0.0 || x == 1.0) return 0.0;
    return -(x * std::log(x) + (1.0 - x) * std::log(1.0 - x)) / kLog2;
}

QberEstimate qber(const CoincidenceTable& c) {
    const double err_h = c.at(Outcome::H, Outcome::H) + c.at(Outcome::V, Outcome::V);
    const double n_h = err_h + c.at(Outcome::H, Outcome::V) + c.at(Outcome::V, Outcome::H);
    const double err_d = c.at(Outcome::D, Outcome::A) + c.at(Outcome::A, Outcome::D);
    const double n_d = err_d + c.at(Outcome::D, Outcome::D) + c.at(Outcome::A, Outcome::A);
    if (!(n_h > 0.0)) throw domain_error("H/V basis has no coincidences; QBER undefined");
    if (!(n_d > 0.0)) throw domain_error("D/A basis has no coincidences; QBER undefined");
    QberEstimate q;
    q.n_h = n_h;
    q.n_d = n_d;
    q.e_h = err_h / n_h;
    q.e_d = err_d / n_d;
    q.sigma_h = binomial_sigma(q.e_h, n_h);
    q.sigma_d = binomial_sigma(q.e_d, n_d);
    return q;
}

RateWithBar sifted_rate(const CoincidenceTable& c, double t_acq_s) {
    if (!(t_acq_s > 0.0)) throw domain_error("acquisition time must be positive");
    const double numerator = c.at(Outcome::H, Outcome::V) + c.at(Outcome::V, Outcome::H) +
                             c.at(Outcome::D, Outcome::D) + c.at(Outcome::A, Outcome::A);
    return RateWithBar{numerator / t_acq_s, 3.0 * std::sqrt(numerator) / t_acq_s};
}

SecureRate secure_rate(const RateWithBar& sifted, const QberEstimate& q, double f_ec) {
    if (!(f_ec >= 1.0)) throw domain_error("error-correction inefficiency must be >= 1");
    for (double e : {q.e_h, q.e_d})
        if (!(e >= 0.0 && e <= 1.0)) throw domain_error("QBER must lie in [0, 1]");

    if (q.e_h >= 0.5 || q.e_d >= 0.5) return SecureRate{0.0, 0.0, true};

    const double e_hu = std::min(q.e_h + 3.0 * q.sigma_h, 0.5);
    const double e_du = std::min(q.e_d + 3.0 * q.sigma_d, 0.5);
    const double k = 1.0 - 0.5 * (binary_entropy(e_hu) + binary_entropy(e_du)) -
                     0.5 * f_ec * (binary_entropy(q.e_h) + binary_entropy(q.e_d));
    const double raw = sifted.bps * k;
    if (raw < 0.0) return SecureRate{0.0, 0.0, true};

    // First-order propagation: dK/de picks up both the e^u privacy term and the
    // f h(e) correction term. The slope diverges at e = 0, where the correction
    // contribution is dropped (the bound itself is exact there).
    double var = k * sifted.bar3 * k * sifted.bar3;
    const auto qber_term = [&](double e, double sigma, double eu) {
        if (!(sigma > 0.0)) return 0.0;
        double slope = -0.5 * entropy_slope(eu);
        if (e > 0.0) slope -= 0.5 * f_ec * entropy_slope(e);
        const double d = sifted.bps * slope * 3.0 * sigma;
        return d * d;
    };
    var += qber_term(q.e_h, q.sigma_h, e_hu);
    var += qber_term(q.e_d, q.sigma_d, e_du);
    return SecureRate{raw, std::sqrt(var), false};
}

RateWithBar published_sifted(double sifted_bps, double t_acq_s) {
    if (!(sifted_bps >= 0.0)) throw domain_error("sifted rate must be non-negative");
    if (!(t_acq_s > 0.0)) throw domain_error("acquisition time must be positive");
    const double counts = sifted_bps * t_acq_s;
    return RateWithBar{sifted_bps, 3.0 * std::sqrt(counts) / t_acq_s};
}

QberEstimate published_qber(double e_h, double e_d, double sifted_bps, double t_acq_s,
                            double bar3_h, double bar3_d) {
    for (double e : {e_h, e_d})
        if (!(e >= 0.0 && e <= 1.0)) throw domain_error("QBER must lie in [0, 1]");
    if (!(sifted_bps >= 0.0) || !(t_acq_s > 0.0))
        throw domain_error("published rates must be non-negative over a positive time");
    QberEstimate q;
    q.e_h = e_h;
    q.e_d = e_d;
    // Passive basis selection splits the sifted counts evenly between the bases.
    q.n_h = q.n_d = sifted_bps * t_acq_s / 2.0;
    q.sigma_h = bar3_h > 0.0 ? bar3_h / 3.0 : binomial_sigma(e_h, q.n_h);
    q.sigma_d = bar3_d > 0.0 ? bar3_d / 3.0 : binomial_sigma(e_d, q.n_d);
    return q;
}

double ImprovementScenario::factor() const {
    double f = 1.0;
    if (dual_detectors) f *= 4.0;
    if (splice_loss) f *= 4.0;
    if (detector_efficiency) f *= 9.0;
    if (rep_rate) f *= 25.0;
    return f;
}

Projection project_scenario(double base_secure_bps, const ImprovementScenario& s) {
    if (!(base_secure_bps >= 0.0)) throw domain_error("base secure rate must be non-negative");
    if (s.channels < 1) throw domain_error("channel count must be at least 1");
    Projection p;
    p.factor = s.factor();
    p.per_channel_bps = base_secure_bps * p.factor;
    p.aggregate_bps = p.per_channel_bps * static_cast<double>(s.channels);
    return p;
}

std::vector<StabilityPoint> stability_series(const BinnedStream& a, const BinnedStream& b,
                                             std::uint64_t pulses_per_window,
                                             std::uint64_t total_pulses, double rep_rate_hz) {
    if (pulses_per_window == 0) throw domain_error("window must contain at least one pulse");
    if (!(rep_rate_hz > 0.0)) throw domain_error("rep_rate_hz must be positive");
    if (total_pulses == 0) return {};
    const std::uint64_t n_windows = (total_pulses + pulses_per_window - 1) / pulses_per_window;

    std::vector<StabilityPoint> series;
    series.reserve(n_windows);
    std::size_t ia = 0, ib = 0;
    for (std::uint64_t w = 0; w < n_windows; ++w) {
        const std::uint64_t lo = w * pulses_per_window;
        const std::uint64_t hi = std::min(lo + pulses_per_window, total_pulses);
        BinnedStream wa, wb;
        while (ia < a.events.size() && a.events[ia].sync < hi) {
            if (a.events[ia].sync >= lo) wa.events.push_back(a.events[ia]);
            ++ia;
        }
        while (ib < b.events.size() && b.events[ib].sync < hi) {
            if (b.events[ib].sync >= lo) wb.events.push_back(b.events[ib]);
            ++ib;
        }
        StabilityPoint pt;
        pt.window_index = w;
        pt.t_start_s = static_cast<double>(lo) / rep_rate_hz;
        pt.t_end_s = static_cast<double>(hi) / rep_rate_hz;
        const CoincidenceTable table = coincidences(wa, wb);
        try {
            pt.q = qber(table);
        } catch (const domain_error&) {
            pt.empty = true;
        }
        series.push_back(pt);
    }
    return series;
}

}  // namespace qkdnet
