#pragma once

#include "parzenfiber/fft.hpp"
#include "parzenfiber/rng.hpp"
#include "parzenfiber/txdsp.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace parzenfiber {

inline constexpr double kerr_manakov_factor = 8.0 / 9.0;
inline constexpr unsigned max_ssfm_steps = 1'000'000;

// D [ps/(nm km)] <-> beta2 [s^2/m] at wavelength [m].
inline double beta2_from_dispersion(double d_ps_nm_km, double wavelength)
{
    const double d_si = d_ps_nm_km * 1e-6;  // s/m^2
    return -d_si * wavelength * wavelength / (2.0 * std::numbers::pi * speed_of_light);
}

inline double dispersion_from_beta2(double beta2, double wavelength)
{
    return -beta2 * 2.0 * std::numbers::pi * speed_of_light / (wavelength * wavelength) * 1e6;
}

// Accumulated dispersion [ps/nm] -> integrated beta2 [s^2].
inline double beta2_length_from_accumulated(double d_acc_ps_nm, double wavelength)
{
    return -d_acc_ps_nm * 1e-3 * wavelength * wavelength / (2.0 * std::numbers::pi * speed_of_light);
}

inline double db_per_km_to_per_m(double alpha_db_km) { return alpha_db_km / (10.0 * std::log10(std::numbers::e)) / 1e3; }

/// Fiber span in engineering units.
struct FiberSegment {
    double length = 80e3;               // m
    double alpha_db_km = 0.2;           // dB/km
    double dispersion_ps_nm_km = 16.0;  // ps/(nm km)
    double gamma_per_w_km = 1.4;        // 1/(W km)
    unsigned steps = 50;

    [[nodiscard]] double accumulated_dispersion_ps_nm() const { return dispersion_ps_nm_km * length / 1e3; }
};

/// Fiber in SI units as consumed by the split-step solver. Signs are free, so
/// the same solver runs the virtual inverse fiber used for back propagation.
struct FiberModel {
    double length = 0.0;  // m
    double alpha = 0.0;   // 1/m, power attenuation
    double beta2 = 0.0;   // s^2/m
    double gamma = 0.0;   // 1/(W m)
    unsigned steps = 1;

    static FiberModel from(const FiberSegment& seg, double wavelength)
    {
        return {seg.length, db_per_km_to_per_m(seg.alpha_db_km), beta2_from_dispersion(seg.dispersion_ps_nm_km, wavelength),
                seg.gamma_per_w_km / 1e3, seg.steps};
    }

    [[nodiscard]] FiberModel inverse(unsigned inverse_steps) const
    {
        return {length, -alpha, -beta2, -gamma, inverse_steps};
    }
};

struct AmplifierSpec {
    double gain_db = 16.0;
    double noise_figure_db = 5.5;
};

/// Lossless all-pass dispersion element, optionally with a flat loss so a
/// following amplifier's gain can be accounted for.
struct IdealDispersionElement {
    double dispersion_ps_nm = 0.0;
    double loss_db = 0.0;
};

using LinkElement = std::variant<FiberSegment, AmplifierSpec, IdealDispersionElement>;

enum class LinkStyle { DM, DUM };

inline const char* to_string(LinkStyle s) { return s == LinkStyle::DM ? "DM" : "DUM"; }

struct LinkSpec {
    struct Entry {
        LinkElement element;
        unsigned span = 0;
    };
    std::vector<Entry> elements;
    unsigned span_count = 0;
    LinkStyle style = LinkStyle::DUM;

    [[nodiscard]] double accumulated_dispersion_ps_nm() const
    {
        double acc = 0.0;
        for (const auto& e : elements) {
            if (const auto* f = std::get_if<FiberSegment>(&e.element)) acc += f->accumulated_dispersion_ps_nm();
            if (const auto* d = std::get_if<IdealDispersionElement>(&e.element)) acc += d->dispersion_ps_nm;
        }
        return acc;
    }

    [[nodiscard]] double length_m() const
    {
        double acc = 0.0;
        for (const auto& e : elements)
            if (const auto* f = std::get_if<FiberSegment>(&e.element)) acc += f->length;
        return acc;
    }
};

/// Per-span fiber and amplifier parameters shared by the link builders.
struct SpanParams {
    FiberSegment fiber{};
    AmplifierSpec amplifier{};
    // DM only: flat loss of the compensating element and the gain of the
    // second amplifier that restores it. Zero means an ideal lossless element.
    double dcf_loss_db = 0.0;
    double dcf_amplifier_nf_db = 5.5;
};

/// [SSMF, EDFA] x spans.
inline LinkSpec build_dum_link(const SpanParams& p, unsigned spans)
{
    LinkSpec link;
    link.style = LinkStyle::DUM;
    link.span_count = spans;
    for (unsigned s = 0; s < spans; ++s) {
        link.elements.push_back({p.fiber, s});
        link.elements.push_back({p.amplifier, s});
    }
    return link;
}

/// [SSMF, EDFA, full per-span CD compensation, EDFA] x spans.
inline LinkSpec build_dm_link(const SpanParams& p, unsigned spans)
{
    LinkSpec link;
    link.style = LinkStyle::DM;
    link.span_count = spans;
    for (unsigned s = 0; s < spans; ++s) {
        link.elements.push_back({p.fiber, s});
        link.elements.push_back({p.amplifier, s});
        link.elements.push_back({IdealDispersionElement{-p.fiber.accumulated_dispersion_ps_nm(), p.dcf_loss_db}, s});
        link.elements.push_back({AmplifierSpec{p.dcf_loss_db, p.dcf_amplifier_nf_db}, s});
    }
    return link;
}

namespace detail {

// exp(j * beta2_length / 2 * omega^2) * amplitude, per DFT bin.
inline cvec dispersion_kernel(std::size_t n, double sample_rate, double beta2_length, double amplitude)
{
    cvec kernel(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double w = bin_omega(k, n, sample_rate);
        kernel[k] = std::polar(amplitude, 0.5 * beta2_length * w * w);
    }
    return kernel;
}

inline void apply_kernel(cvec& field, const cvec& kernel)
{
    fft_forward(field);
    for (std::size_t k = 0; k < field.size(); ++k) field[k] *= kernel[k];
    fft_inverse(field);
}

} // namespace detail

/// Symmetric split-step solution of the Manakov equation
///   dA/dz = -(alpha/2) A - j (beta2/2) d^2A/dt^2 + j (8/9) gamma (|Ax|^2 + |Ay|^2) A
/// with fixed step length. Adjacent half linear steps are merged, so each
/// step costs one forward and one inverse DFT per polarization.
inline SignalBlock ssfm_propagate(SignalBlock sig, const FiberModel& fiber)
{
    if (fiber.steps == 0 || fiber.steps > max_ssfm_steps)
        throw std::invalid_argument("ssfm_propagate: step count " + std::to_string(fiber.steps) +
                                    " outside [1, " + std::to_string(max_ssfm_steps) + "]");
    if (!(fiber.length > 0.0)) throw std::invalid_argument("ssfm_propagate: fiber length must be positive");
    const std::size_t n = sig.size();
    const double h = fiber.length / fiber.steps;
    const double fs = sig.sample_rate();
    const cvec half = detail::dispersion_kernel(n, fs, fiber.beta2 * h / 2.0, std::exp(-fiber.alpha * h / 4.0));
    const cvec full = detail::dispersion_kernel(n, fs, fiber.beta2 * h, std::exp(-fiber.alpha * h / 2.0));
    const double nl = kerr_manakov_factor * fiber.gamma * h;

    for (unsigned step = 0; step < fiber.steps; ++step) {
        const cvec& lin = step == 0 ? half : full;
        detail::apply_kernel(sig.x, lin);
        detail::apply_kernel(sig.y, lin);
        if (nl != 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = std::norm(sig.x[i]) + std::norm(sig.y[i]);
                const cplx rot = std::polar(1.0, nl * p);
                sig.x[i] *= rot;
                sig.y[i] *= rot;
            }
        }
        if (!std::isfinite(mean_power(sig)))
            throw std::runtime_error("ssfm_propagate: non-finite field at step " + std::to_string(step));
    }
    detail::apply_kernel(sig.x, half);
    detail::apply_kernel(sig.y, half);
    return sig;
}

inline SignalBlock ssfm_propagate(SignalBlock sig, const FiberSegment& seg)
{
    const double wavelength = sig.center_wavelength;
    return ssfm_propagate(std::move(sig), FiberModel::from(seg, wavelength));
}

/// ASE variance per sample and polarization for a lumped amplifier:
/// n_sp (G - 1) h nu f_s with n_sp = F G / (2 (G - 1)). A unity-gain element
/// adds nothing.
inline double ase_variance(const AmplifierSpec& amp, double sample_rate, double wavelength)
{
    const double g = std::pow(10.0, amp.gain_db / 10.0);
    if (g == 1.0) return 0.0;
    const double f = std::pow(10.0, amp.noise_figure_db / 10.0);
    const double nsp = f * g / (2.0 * (g - 1.0));
    const double nu = speed_of_light / wavelength;
    return nsp * (g - 1.0) * planck * nu * sample_rate;
}

inline SignalBlock amplify(SignalBlock sig, const AmplifierSpec& amp, std::uint64_t noise_seed, bool add_noise = true)
{
    if (!std::isfinite(amp.gain_db) || !std::isfinite(amp.noise_figure_db))
        throw std::invalid_argument("amplify: gain and noise figure must be finite");
    if (amp.gain_db < 0.0) throw std::invalid_argument("amplify: gain below 0 dB is not an amplifier");
    const double field_gain = std::pow(10.0, amp.gain_db / 20.0);
    const double variance = add_noise ? ase_variance(amp, sig.sample_rate(), sig.center_wavelength) : 0.0;
    for (std::size_t p = 0; p < 2; ++p) {
        auto& field = sig.pol(p);
        for (auto& v : field) v *= field_gain;
        if (variance > 0.0) {
            Rng rng(noise_seed, p);
            for (auto& v : field) v += rng.complex_normal(variance);
        }
    }
    return sig;
}

/// All-pass exp(j beta2_acc omega^2 / 2) for an accumulated dispersion in
/// ps/nm, the same transfer function as a fiber with that dispersion.
inline SignalBlock ideal_dispersion_element(SignalBlock sig, double accumulated_dispersion_ps_nm, double loss_db = 0.0)
{
    if (!std::isfinite(accumulated_dispersion_ps_nm))
        throw std::invalid_argument("ideal_dispersion_element: dispersion must be finite");
    const double b2l = beta2_length_from_accumulated(accumulated_dispersion_ps_nm, sig.center_wavelength);
    const double amplitude = std::pow(10.0, -loss_db / 20.0);
    if (b2l == 0.0 && amplitude == 1.0) return sig;
    const cvec kernel = detail::dispersion_kernel(sig.size(), sig.sample_rate(), b2l, amplitude);
    detail::apply_kernel(sig.x, kernel);
    detail::apply_kernel(sig.y, kernel);
    return sig;
}

struct SpanPower {
    unsigned span_index = 0;
    double mean_power_dbm = 0.0;
};

struct LinkOutput {
    SignalBlock signal;
    std::vector<SpanPower> trace;
};

struct PropagateOptions {
    bool noise = true;
};

inline LinkOutput propagate_link(SignalBlock sig, const LinkSpec& link, std::uint64_t seed, PropagateOptions opts = {})
{
    if (link.elements.empty()) throw std::invalid_argument("propagate_link: empty link");
    LinkOutput out;
    std::uint64_t amp_index = 0;
    for (std::size_t i = 0; i < link.elements.size(); ++i) {
        const auto& entry = link.elements[i];
        if (const auto* f = std::get_if<FiberSegment>(&entry.element)) {
            sig = ssfm_propagate(std::move(sig), *f);
        } else if (const auto* a = std::get_if<AmplifierSpec>(&entry.element)) {
            sig = amplify(std::move(sig), *a, substream_seed(seed, amp_index++), opts.noise);
        } else if (const auto* d = std::get_if<IdealDispersionElement>(&entry.element)) {
            sig = ideal_dispersion_element(std::move(sig), d->dispersion_ps_nm, d->loss_db);
        }
        const bool span_end = i + 1 == link.elements.size() || link.elements[i + 1].span != entry.span;
        if (span_end) out.trace.push_back({entry.span, watts_to_dbm(mean_power(sig))});
    }
    out.signal = std::move(sig);
    return out;
}

inline void write_power_trace_csv(std::ostream& os, const std::vector<SpanPower>& trace)
{
    os << "span_index,mean_power_dbm\n";
    for (const auto& t : trace) os << t.span_index << ',' << t.mean_power_dbm << '\n';
}

} // namespace parzenfiber
