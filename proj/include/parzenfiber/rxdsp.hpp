#pragma once

#include "parzenfiber/constellation.hpp"
#include "parzenfiber/fft.hpp"
#include "parzenfiber/fiberlink.hpp"
#include "parzenfiber/txdsp.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

namespace parzenfiber {

inline constexpr unsigned adc_samples_per_symbol = 2;

/// Per-polarization symbol-rate sequences.
using DualSymbols = std::array<cvec, 2>;

/// Anti-aliased decimation to `target_sps` samples per symbol. The low-pass
/// is an ideal brick wall at the output Nyquist frequency, applied in the
/// DFT domain of the periodic block.
inline SignalBlock adc(SignalBlock sig, unsigned target_sps = adc_samples_per_symbol)
{
    if (target_sps == 0 || sig.samples_per_symbol < target_sps || sig.samples_per_symbol % target_sps != 0)
        throw std::invalid_argument("adc: " + std::to_string(sig.samples_per_symbol) +
                                    " samples/symbol is not an integer multiple of " + std::to_string(target_sps));
    const unsigned ratio = sig.samples_per_symbol / target_sps;
    if (ratio == 1) return sig;
    const std::size_t n = sig.size();
    const std::size_t m = n / ratio;
    for (std::size_t p = 0; p < 2; ++p) {
        cvec& field = sig.pol(p);
        fft_forward(field);
        cvec out(m, cplx{});
        const std::size_t keep = (m + 1) / 2;  // bins strictly below +Nyquist
        for (std::size_t k = 0; k < keep; ++k) out[k] = field[k];
        for (std::size_t k = 1; k < m - keep + (m % 2 == 0 ? 0 : 1); ++k) out[m - k] = field[n - k];
        fft_inverse(out);
        const double scale = static_cast<double>(m) / static_cast<double>(n);
        for (auto& v : out) v *= scale;
        field = std::move(out);
    }
    sig.samples_per_symbol = target_sps;
    return sig;
}

/// Exact inverse of the accumulated link dispersion.
inline SignalBlock cd_compensate(SignalBlock sig, double total_dispersion_ps_nm)
{
    return ideal_dispersion_element(std::move(sig), -total_dispersion_ps_nm);
}

/// Back propagation through the virtual inverse link: elements in reverse
/// order, fibers with negated loss, dispersion and nonlinearity, amplifier
/// gains removed and compensating elements undone. Noise is not modeled.
inline SignalBlock dbp(SignalBlock sig, const LinkSpec& link, unsigned steps_per_span)
{
    if (steps_per_span == 0) throw std::invalid_argument("dbp: steps per span must be positive");
    for (auto it = link.elements.rbegin(); it != link.elements.rend(); ++it) {
        const auto& element = it->element;
        if (const auto* f = std::get_if<FiberSegment>(&element)) {
            const double wavelength = sig.center_wavelength;
            sig = ssfm_propagate(std::move(sig), FiberModel::from(*f, wavelength).inverse(steps_per_span));
        } else if (const auto* a = std::get_if<AmplifierSpec>(&element)) {
            const double inv = std::pow(10.0, -a->gain_db / 20.0);
            for (auto& v : sig.x) v *= inv;
            for (auto& v : sig.y) v *= inv;
        } else if (const auto* d = std::get_if<IdealDispersionElement>(&element)) {
            sig = ideal_dispersion_element(std::move(sig), -d->dispersion_ps_nm, -d->loss_db);
        } else {
            throw std::invalid_argument("dbp: link element without an inverse");
        }
    }
    return sig;
}

inline void normalize_unit_power(cvec& symbols)
{
    double acc = 0.0;
    for (const auto& v : symbols) acc += std::norm(v);
    if (!(acc > 0.0)) throw std::invalid_argument("normalize_unit_power: zero-energy sequence");
    const double scale = std::sqrt(static_cast<double>(symbols.size()) / acc);
    for (auto& v : symbols) v *= scale;
}

/// Matched RRC filter, symbol-center sampling of the first `count` symbols,
/// and per-polarization unit mean power normalization.
inline DualSymbols matched_filter_and_decimate(const SignalBlock& sig, RrcSpec rrc, std::size_t count)
{
    const unsigned sps = sig.samples_per_symbol;
    if (sps == 0 || count == 0 || count * sps > sig.size())
        throw std::invalid_argument("matched_filter_and_decimate: block of " + std::to_string(sig.size()) +
                                    " samples cannot supply " + std::to_string(count) + " symbols");
    rrc.samples_per_symbol = sps;
    validate(rrc);
    DualSymbols out;
    for (std::size_t p = 0; p < 2; ++p) {
        const cvec filtered = rrc_filter(sig.pol(p), rrc);
        out[p].resize(count);
        for (std::size_t k = 0; k < count; ++k) out[p][k] = filtered[k * sps];
        normalize_unit_power(out[p]);
    }
    return out;
}

/// Data-aided bulk phase estimate arg(sum y_k conj(x_k)) over the training
/// prefix, removed from every symbol. Returns the estimate in radians.
inline double phase_align(cvec& received, std::span<const cplx> training)
{
    if (training.size() > received.size())
        throw std::invalid_argument("phase_align: more training symbols than received symbols");
    cplx corr{};
    for (std::size_t k = 0; k < training.size(); ++k) corr += received[k] * std::conj(training[k]);
    if (!(std::abs(corr) > 0.0)) throw std::invalid_argument("phase_align: zero training correlation");
    const double phi = std::arg(corr);
    const cplx derotate = std::polar(1.0, -phi);
    for (auto& v : received) v *= derotate;
    return phi;
}

inline std::array<double, 2> phase_align(DualSymbols& received, const SymbolFrame& frame)
{
    std::array<double, 2> phi{};
    for (std::size_t p = 0; p < 2; ++p) {
        const auto& sym = frame.pol[p].symbols;
        phi[p] = phase_align(received[p], std::span<const cplx>(sym.data(), frame.training_len));
    }
    return phi;
}

struct RxChainConfig {
    bool cd_compensation = true;
    unsigned dbp_steps_per_span = 0;  // 0 disables back propagation
    bool dbp_full_rate = false;       // run DBP before the ADC instead of at 2 samples/symbol
    RrcSpec matched_filter{};
};

inline void validate(const RxChainConfig& cfg)
{
    if (cfg.dbp_steps_per_span > 0 && cfg.cd_compensation)
        throw std::invalid_argument("RxChainConfig: DBP already inverts dispersion; disable CD compensation");
}

/// ADC -> {CD compensation | DBP} -> matched filter -> normalized symbols.
inline DualSymbols receive(SignalBlock sig, const LinkSpec& link, const RxChainConfig& cfg, std::size_t count)
{
    validate(cfg);
    const bool use_dbp = cfg.dbp_steps_per_span > 0;
    if (use_dbp && cfg.dbp_full_rate) sig = dbp(std::move(sig), link, cfg.dbp_steps_per_span);
    sig = adc(std::move(sig));
    if (use_dbp && !cfg.dbp_full_rate) sig = dbp(std::move(sig), link, cfg.dbp_steps_per_span);
    if (cfg.cd_compensation) sig = cd_compensate(std::move(sig), link.accumulated_dispersion_ps_nm());
    return matched_filter_and_decimate(sig, cfg.matched_filter, count);
}

} // namespace parzenfiber
