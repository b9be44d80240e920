#include "qkdnet/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace qkdnet {

double Frequency::wavelength_nm() const { return frequency_to_wavelength(*this); }

Frequency wavelength_to_frequency(double nm) {
    if (!(nm > 0.0)) throw domain_error("wavelength must be positive");
    const double ghz = kSpeedOfLightNmGhz / nm;
    return Frequency{static_cast<std::int64_t>(std::llround(ghz))};
}

double frequency_to_wavelength(Frequency f) {
    if (f.ghz <= 0) throw domain_error("frequency must be positive");
    return kSpeedOfLightNmGhz / static_cast<double>(f.ghz);
}

std::int64_t index_unit_ghz(std::int64_t spacing_ghz) {
    if (spacing_ghz != 50 && spacing_ghz != 100 && spacing_ghz != 200)
        throw config_error("channel spacing must be 50, 100 or 200 GHz");
    return spacing_ghz == 50 ? 50 : 100;
}

GridChannel nearest_channel(Frequency f, std::int64_t spacing_ghz) {
    const std::int64_t unit = index_unit_ghz(spacing_ghz);
    if (f.ghz <= 0) throw domain_error("frequency must be positive");
    // Round (f - anchor) to the nearest multiple of the spacing; ties go down.
    const std::int64_t rel = f.ghz - kGridAnchorGhz;
    std::int64_t q = rel / spacing_ghz;
    if (rel % spacing_ghz < 0) --q;  // floor division
    const std::int64_t lo = q * spacing_ghz;
    const std::int64_t hi = lo + spacing_ghz;
    const std::int64_t best = (rel - lo) <= (hi - rel) ? lo : hi;
    return GridChannel{best / unit, Frequency{kGridAnchorGhz + best}, spacing_ghz};
}

Frequency conjugate_of(const GridChannel& ch, Frequency pump) {
    if (pump.ghz <= ch.center.ghz)
        throw domain_error("pump frequency must exceed the channel frequency");
    return Frequency{pump.ghz - ch.center.ghz};
}

double loss_to_equivalent_km(double loss_db, double rate_db_per_km) {
    if (!(rate_db_per_km > 0.0)) throw domain_error("loss rate must be positive");
    if (loss_db < 0.0) throw domain_error("loss must be non-negative");
    return loss_db / rate_db_per_km;
}

namespace {

bool itu_defined(Frequency f) { return frequency_to_wavelength(f) >= 1520.0; }

}  // namespace

ChannelPlan plan_channels(Frequency pump, Frequency band_low, Frequency band_high,
                          std::int64_t spacing_ghz, double eps_conj_ghz, bool strict_itu) {
    const std::int64_t unit = index_unit_ghz(spacing_ghz);
    if (pump.ghz <= 0) throw domain_error("pump frequency must be positive");
    if (eps_conj_ghz < 0.0) eps_conj_ghz = static_cast<double>(spacing_ghz) / 2.0;

    ChannelPlan plan;
    plan.pump = pump;
    plan.band_low = band_low;
    plan.band_high = band_high;
    plan.spacing_ghz = spacing_ghz;
    plan.strict_itu = strict_itu;

    if (band_low.ghz > band_high.ghz) return plan;

    const double degenerate = static_cast<double>(pump.ghz) / 2.0;
    if (!(static_cast<double>(band_low.ghz) < degenerate &&
          degenerate < static_cast<double>(band_high.ghz)))
        return plan;

    const auto in_band = [&](std::int64_t c) {
        if (c < band_low.ghz || c > band_high.ghz) return false;
        return !strict_itu || itu_defined(Frequency{c});
    };

    // Walk candidate signal channels above the degenerate point; each one's
    // conjugate determines at most one idler channel within eps_conj.
    const std::int64_t step = spacing_ghz;
    std::int64_t first_rel = (band_low.ghz - kGridAnchorGhz) / step * step;
    while (kGridAnchorGhz + first_rel < band_low.ghz) first_rel += step;

    for (std::int64_t rel = first_rel; kGridAnchorGhz + rel <= band_high.ghz; rel += step) {
        const std::int64_t s = kGridAnchorGhz + rel;
        if (static_cast<double>(s) <= degenerate) continue;
        if (!in_band(s)) continue;
        const GridChannel idler = nearest_channel(Frequency{pump.ghz - s}, spacing_ghz);
        const std::int64_t i = idler.center.ghz;
        if (i >= s) continue;
        if (!in_band(i)) continue;
        if (std::llabs(s + i - pump.ghz) > eps_conj_ghz) continue;
        GridChannel signal{rel / unit, Frequency{s}, spacing_ghz};
        const double detuning = std::fabs(static_cast<double>(s) - degenerate);
        plan.pairs.push_back(ConjugatePair{signal, idler, detuning});
    }

    std::sort(plan.pairs.begin(), plan.pairs.end(), [](const auto& a, const auto& b) {
        if (a.detuning_ghz != b.detuning_ghz) return a.detuning_ghz < b.detuning_ghz;
        return a.signal.center.ghz < b.signal.center.ghz;
    });
    return plan;
}

std::string channel_plan_csv(const ChannelPlan& plan) {
    std::string out = "pair_id,signal_nm,idler_nm,signal_thz,idler_thz,detuning_ghz\n";
    char line[160];
    for (std::size_t i = 0; i < plan.pairs.size(); ++i) {
        const ConjugatePair& p = plan.pairs[i];
        std::snprintf(line, sizeof line, "%zu,%.4f,%.4f,%.4f,%.4f,%.1f\n", i,
                      p.signal.center.wavelength_nm(), p.idler.center.wavelength_nm(),
                      p.signal.center.thz(), p.idler.center.thz(), p.detuning_ghz);
        out += line;
    }
    return out;
}

}  // namespace qkdnet
