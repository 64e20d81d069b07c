#pragma once

#include "parzenfiber/constellation.hpp"
#include "parzenfiber/fft.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace parzenfiber {

inline constexpr double speed_of_light = 299792458.0;  // m/s
inline constexpr double planck = 6.62607015e-34;       // J s

/// Dual-polarization complex baseband waveform. Samples are in sqrt(W), so
/// the instantaneous power is |x|^2 + |y|^2 watts.
struct SignalBlock {
    cvec x;
    cvec y;
    double symbol_rate = 0.0;            // baud
    unsigned samples_per_symbol = 0;
    double center_wavelength = 1550e-9;  // m

    [[nodiscard]] double sample_rate() const { return symbol_rate * samples_per_symbol; }
    [[nodiscard]] std::size_t size() const { return x.size(); }
    cvec& pol(std::size_t p) { return p == 0 ? x : y; }
    [[nodiscard]] const cvec& pol(std::size_t p) const { return p == 0 ? x : y; }
};

inline double mean_power(const SignalBlock& sig)
{
    if (sig.x.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < sig.size(); ++i) acc += std::norm(sig.x[i]) + std::norm(sig.y[i]);
    return acc / static_cast<double>(sig.size());
}

inline double watts_to_dbm(double watts) { return 10.0 * std::log10(watts / 1e-3); }
inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

/// Root-raised-cosine filter. filter_span = 0 selects the exact periodic
/// filter applied as the RRC frequency response on the block's DFT bins.
struct RrcSpec {
    double roll_off = 0.1;
    unsigned filter_span = 64;  // symbols, even; 0 = untruncated
    unsigned samples_per_symbol = 16;
};

/// Continuous RRC impulse response for unit symbol period, t in symbols.
inline double rrc_impulse(double t, double roll_off)
{
    constexpr double pi = std::numbers::pi;
    const double r = roll_off;
    if (std::abs(t) < 1e-12) return 1.0 - r + 4.0 * r / pi;
    if (r > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * r)) < 1e-12) {
        return r / std::sqrt(2.0) *
               ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * r)) + (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * r)));
    }
    const double num = std::sin(pi * t * (1.0 - r)) + 4.0 * r * t * std::cos(pi * t * (1.0 + r));
    const double den = pi * t * (1.0 - 16.0 * r * r * t * t);
    return num / den;
}

/// Fraction of the ideal RRC pulse energy inside the truncated span.
inline double rrc_energy_capture(const RrcSpec& spec)
{
    const auto half = static_cast<long>(spec.filter_span) * spec.samples_per_symbol / 2;
    double acc = 0.0;
    for (long n = -half; n <= half; ++n) {
        const double h = rrc_impulse(static_cast<double>(n) / spec.samples_per_symbol, spec.roll_off);
        acc += h * h;
    }
    return acc / spec.samples_per_symbol;
}

inline void validate(const RrcSpec& spec)
{
    if (!(spec.roll_off >= 0.0 && spec.roll_off <= 1.0))
        throw std::invalid_argument("RrcSpec: roll-off must lie in [0, 1]");
    if (spec.filter_span % 2 != 0) throw std::invalid_argument("RrcSpec: filter span must be an even symbol count");
    if (spec.samples_per_symbol == 0) throw std::invalid_argument("RrcSpec: samples per symbol must be positive");
    if (spec.filter_span == 0) return;
    const double capture = rrc_energy_capture(spec);
    if (capture < 0.999)
        throw std::invalid_argument("RrcSpec: span of " + std::to_string(spec.filter_span) +
                                    " symbols captures only " + std::to_string(100.0 * capture) +
                                    "% of the pulse energy for roll-off " + std::to_string(spec.roll_off));
}

/// Odd-length, centered, unit-energy RRC taps at spec.samples_per_symbol.
inline std::vector<double> rrc_taps(const RrcSpec& spec)
{
    validate(spec);
    if (spec.filter_span == 0) throw std::invalid_argument("rrc_taps: an untruncated filter has no finite taps");
    const unsigned count = spec.filter_span * spec.samples_per_symbol + 1;
    const long center = count / 2;
    std::vector<double> taps(count);
    for (unsigned i = 0; i < count; ++i)
        taps[i] = rrc_impulse(static_cast<double>(static_cast<long>(i) - center) / spec.samples_per_symbol,
                              spec.roll_off);
    const double energy = std::inner_product(taps.begin(), taps.end(), taps.begin(), 0.0);
    for (auto& t : taps) t /= std::sqrt(energy);
    return taps;
}

/// RRC amplitude response at frequency f in units of the symbol rate,
/// scaled so that |H|^2 integrates to one.
inline double rrc_frequency_response(double f, double roll_off)
{
    const double af = std::abs(f);
    const double lo = 0.5 * (1.0 - roll_off);
    const double hi = 0.5 * (1.0 + roll_off);
    if (af <= lo) return 1.0;
    if (af > hi) return 0.0;
    return std::sqrt(0.5 * (1.0 + std::cos(std::numbers::pi / roll_off * (af - lo))));
}

/// Circular RRC filtering of a block sampled at spec.samples_per_symbol.
/// The filter has zero delay: tap zero sits on the input instant.
inline cvec rrc_filter(std::span<const cplx> block, const RrcSpec& spec)
{
    if (spec.filter_span > 0) {
        const auto taps = rrc_taps(spec);
        return circular_filter(block, taps);
    }
    validate(spec);
    const std::size_t n = block.size();
    cvec out(block.begin(), block.end());
    fft_forward(out);
    const double sps = spec.samples_per_symbol;
    const double gain = std::sqrt(sps);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = bin_omega(k, n, sps) / (2.0 * std::numbers::pi);  // in symbol-rate units
        out[k] *= gain * rrc_frequency_response(f, spec.roll_off);
    }
    fft_inverse(out);
    return out;
}

/// Upsample one polarization's block and pulse-shape it circularly.
/// Symbol k lands on sample k * spec.samples_per_symbol.
inline cvec shape_polarization(std::span<const cplx> symbols, const RrcSpec& spec)
{
    const unsigned sps = spec.samples_per_symbol;
    cvec train(symbols.size() * sps, cplx{});
    const double gain = std::sqrt(static_cast<double>(sps));
    for (std::size_t k = 0; k < symbols.size(); ++k) train[k * sps] = symbols[k] * gain;
    return rrc_filter(train, spec);
}

/// Pulse-shape a frame (payload followed by guard) into a periodic waveform
/// whose mean power equals the mean symbol energy.
inline SignalBlock shape(const SymbolFrame& frame, RrcSpec rrc, unsigned oversampling, double symbol_rate)
{
    if (oversampling < 2) throw std::invalid_argument("shape: oversampling must be at least 2");
    rrc.samples_per_symbol = oversampling;
    validate(rrc);
    SignalBlock sig;
    sig.symbol_rate = symbol_rate;
    sig.samples_per_symbol = oversampling;
    for (std::size_t p = 0; p < 2; ++p) {
        const auto& pf = frame.pol[p];
        cvec block(pf.symbols.begin(), pf.symbols.end());
        block.insert(block.end(), pf.guard_symbols.begin(), pf.guard_symbols.end());
        sig.pol(p) = shape_polarization(block, rrc);
    }
    return sig;
}

enum class PowerReference { Total, PerPolarization };

/// Scale to the requested launch power. With PowerReference::Total the sum
/// over both polarizations equals power_dbm; otherwise each polarization
/// carries power_dbm on average.
inline SignalBlock set_launch_power(SignalBlock sig, double power_dbm, PowerReference ref = PowerReference::Total)
{
    if (!std::isfinite(power_dbm)) throw std::invalid_argument("set_launch_power: power must be finite");
    const double current = mean_power(sig);
    if (!(current > 0.0)) throw std::invalid_argument("set_launch_power: input waveform has zero energy");
    const double target = dbm_to_watts(power_dbm) * (ref == PowerReference::Total ? 1.0 : 2.0);
    const double scale = std::sqrt(target / current);
    for (auto& v : sig.x) v *= scale;
    for (auto& v : sig.y) v *= scale;
    return sig;
}

inline double symbol_rate_for(double bit_rate_total, const Constellation& c, unsigned polarizations)
{
    return bit_rate_total / (static_cast<double>(polarizations) * c.bits_per_symbol);
}

} // namespace parzenfiber
