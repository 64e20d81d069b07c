#pragma once

#include "parzenfiber/fft.hpp"
#include "parzenfiber/rng.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace parzenfiber {

/// Cluster label. Labels are 0-based indices into Constellation::points.
using Label = std::uint16_t;

/// Square M-QAM with unit average energy and per-rail Gray bit mapping.
///
/// Points are ordered row-major over the in-phase level, then the
/// quadrature level, each ascending. The label of a point is its index.
/// The first log2(sqrt(M)) bits of a label's pattern Gray-code the I level,
/// the remaining bits Gray-code the Q level.
struct Constellation {
    unsigned order = 0;
    unsigned bits_per_symbol = 0;
    cvec points;
    std::vector<std::uint32_t> bit_map;  // label -> bit pattern, MSB first
    std::vector<Label> label_of_bits;    // inverse of bit_map

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] unsigned side() const { return 1u << (bits_per_symbol / 2); }
};

inline Constellation build_qam(unsigned order)
{
    if (order != 4 && order != 16 && order != 64 && order != 256)
        throw std::invalid_argument("build_qam: order " + std::to_string(order) +
                                    " unsupported; expected a square QAM order in {4, 16, 64, 256}");
    Constellation c;
    c.order = order;
    c.bits_per_symbol = static_cast<unsigned>(std::countr_zero(order));
    const unsigned side = c.side();
    const unsigned rail_bits = c.bits_per_symbol / 2;
    const double scale = 1.0 / std::sqrt(2.0 * (static_cast<double>(order) - 1.0) / 3.0);

    c.points.resize(order);
    c.bit_map.resize(order);
    c.label_of_bits.resize(order);
    for (unsigned i = 0; i < side; ++i) {
        for (unsigned q = 0; q < side; ++q) {
            const unsigned label = i * side + q;
            const double re = 2.0 * i - (side - 1.0);
            const double im = 2.0 * q - (side - 1.0);
            c.points[label] = cplx{re, im} * scale;
            const std::uint32_t bits = ((i ^ (i >> 1)) << rail_bits) | (q ^ (q >> 1));
            c.bit_map[label] = bits;
            c.label_of_bits[bits] = static_cast<Label>(label);
        }
    }
    return c;
}

inline std::vector<std::uint8_t> labels_to_bits(const Constellation& c, std::span<const Label> labels)
{
    std::vector<std::uint8_t> bits;
    bits.reserve(labels.size() * c.bits_per_symbol);
    for (const Label label : labels) {
        if (label >= c.order)
            throw std::out_of_range("labels_to_bits: label " + std::to_string(label) +
                                    " outside constellation of order " + std::to_string(c.order));
        const std::uint32_t pattern = c.bit_map[label];
        for (unsigned b = c.bits_per_symbol; b-- > 0;) bits.push_back(static_cast<std::uint8_t>((pattern >> b) & 1u));
    }
    return bits;
}

inline std::vector<Label> bits_to_labels(const Constellation& c, std::span<const std::uint8_t> bits)
{
    if (bits.size() % c.bits_per_symbol != 0)
        throw std::invalid_argument("bits_to_labels: bit count not a multiple of bits per symbol");
    std::vector<Label> labels;
    labels.reserve(bits.size() / c.bits_per_symbol);
    for (std::size_t k = 0; k < bits.size(); k += c.bits_per_symbol) {
        std::uint32_t pattern = 0;
        for (unsigned b = 0; b < c.bits_per_symbol; ++b) {
            if (bits[k + b] > 1) throw std::invalid_argument("bits_to_labels: bit values must be 0 or 1");
            pattern = (pattern << 1) | bits[k + b];
        }
        labels.push_back(c.label_of_bits[pattern]);
    }
    return labels;
}

/// One polarization's labeled payload plus the filler symbols that pad the
/// block up to an FFT-friendly length.
struct PolarizationFrame {
    std::vector<Label> labels;
    cvec symbols;
    std::vector<Label> guard_labels;
    cvec guard_symbols;
};

/// Dual-polarization labeled symbol sequence: symbols [0, training_len) are
/// training, [training_len, total_len) are testing. The transmitted block is
/// the payload followed by guard_len filler symbols and is treated as periodic.
struct SymbolFrame {
    std::array<PolarizationFrame, 2> pol;
    std::size_t training_len = 0;
    std::size_t total_len = 0;
    std::size_t guard_len = 0;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t testing_len() const { return total_len - training_len; }
    [[nodiscard]] std::size_t block_len() const { return total_len + guard_len; }
};

inline bool is_7_smooth(std::size_t n)
{
    if (n == 0) return false;
    for (const std::size_t p : {2u, 3u, 5u, 7u})
        while (n % p == 0) n /= p;
    return n == 1;
}

/// Smallest guard length >= min_guard making total + guard 7-smooth.
inline std::size_t guard_length_for(std::size_t total, std::size_t min_guard)
{
    std::size_t guard = min_guard;
    while (!is_7_smooth(total + guard)) ++guard;
    return guard;
}

inline SymbolFrame generate_frame(const Constellation& c, std::size_t training_len, std::size_t total_len,
                                  std::uint64_t seed, std::size_t min_guard = 64)
{
    if (training_len == 0 || training_len >= total_len)
        throw std::invalid_argument("generate_frame: need 0 < T < N (T=" + std::to_string(training_len) +
                                    ", N=" + std::to_string(total_len) + ")");
    SymbolFrame frame;
    frame.training_len = training_len;
    frame.total_len = total_len;
    frame.guard_len = guard_length_for(total_len, min_guard);
    frame.seed = seed;
    for (std::size_t p = 0; p < 2; ++p) {
        auto& pf = frame.pol[p];
        Rng payload(seed, p);
        pf.labels.resize(total_len);
        pf.symbols.resize(total_len);
        for (std::size_t k = 0; k < total_len; ++k) {
            pf.labels[k] = static_cast<Label>(payload.below(c.order));
            pf.symbols[k] = c.points[pf.labels[k]];
        }
        Rng filler(seed, 2 + p);
        pf.guard_labels.resize(frame.guard_len);
        pf.guard_symbols.resize(frame.guard_len);
        for (std::size_t k = 0; k < frame.guard_len; ++k) {
            pf.guard_labels[k] = static_cast<Label>(filler.below(c.order));
            pf.guard_symbols[k] = c.points[pf.guard_labels[k]];
        }
    }
    return frame;
}

} // namespace parzenfiber
