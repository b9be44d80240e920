#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qkdnet/errors.hpp"

namespace qkdnet {

// Speed of light expressed so that wavelength[nm] * frequency[GHz] = kSpeedOfLightNmGhz.
inline constexpr double kSpeedOfLightNmGhz = 299792458.0;

// 100-GHz anchor grid: channel centers sit at kGridAnchorGhz + index * 100 GHz.
inline constexpr std::int64_t kGridAnchorGhz = 190000;

// Optical frequency held as integer GHz so grid arithmetic is exact.
struct Frequency {
    std::int64_t ghz = 0;

    double thz() const { return static_cast<double>(ghz) / 1000.0; }
    double wavelength_nm() const;

    friend auto operator<=>(const Frequency&, const Frequency&) = default;
};

Frequency wavelength_to_frequency(double nm);
double frequency_to_wavelength(Frequency f);

struct GridChannel {
    std::int64_t index = 0;  // signed channel number; units of index_unit_ghz(spacing)
    Frequency center;
    std::int64_t spacing_ghz = 100;

    friend auto operator<=>(const GridChannel&, const GridChannel&) = default;
};

// Index step underlying GridChannel::index: 100 GHz for the 100/200-GHz grids,
// 50 GHz when the grid is refined to 50-GHz spacing.
std::int64_t index_unit_ghz(std::int64_t spacing_ghz);

// Nearest grid channel of the given spacing; |center - f| <= spacing/2.
GridChannel nearest_channel(Frequency f, std::int64_t spacing_ghz);

struct ConjugatePair {
    GridChannel signal;  // higher frequency of the two
    GridChannel idler;
    double detuning_ghz = 0.0;  // |signal center - degenerate point|
};

struct ChannelPlan {
    Frequency pump;
    Frequency band_low;   // lowest frequency admitted (longest wavelength)
    Frequency band_high;  // highest frequency admitted
    std::int64_t spacing_ghz = 200;
    bool strict_itu = false;
    std::vector<ConjugatePair> pairs;  // ascending detuning
};

Frequency conjugate_of(const GridChannel& ch, Frequency pump);

// Carves every frequency-conjugate channel pair inside the band. eps_conj_ghz < 0
// selects the default spacing/2. strict_itu drops channels below 1520 nm, where
// the ITU grid is not officially defined.
ChannelPlan plan_channels(Frequency pump, Frequency band_low, Frequency band_high,
                          std::int64_t spacing_ghz, double eps_conj_ghz = -1.0,
                          bool strict_itu = false);

double loss_to_equivalent_km(double loss_db, double rate_db_per_km);

// Columns: pair_id, signal_nm, idler_nm, signal_thz, idler_thz, detuning_ghz.
std::string channel_plan_csv(const ChannelPlan& plan);

}  // namespace qkdnet
