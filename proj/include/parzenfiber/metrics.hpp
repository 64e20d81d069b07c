#pragma once

#include "parzenfiber/constellation.hpp"
#include "parzenfiber/detect.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>

namespace parzenfiber {

struct QReport {
    std::size_t bit_errors = 0;
    std::size_t bits_total = 0;
    std::size_t symbol_errors = 0;
    std::size_t symbols_total = 0;
    double ber = 0.0;
    double q_db = std::numeric_limits<double>::quiet_NaN();
    std::size_t fallback_count = 0;
    std::uint64_t fingerprint = 0;

    [[nodiscard]] bool q_valid() const { return std::isfinite(q_db); }
};

/// Gaussian-equivalent Q factor, 20 log10(sqrt(2) erfcinv(2 BER)). Outside
/// (0, 0.5) the result is NaN; callers test QReport::q_valid().
inline double q_from_ber(double ber)
{
    if (!(ber > 0.0 && ber < 0.5)) return std::numeric_limits<double>::quiet_NaN();
    return 20.0 * std::log10(std::sqrt(2.0) * boost::math::erfc_inv(2.0 * ber));
}

inline double ber_from_q(double q_db) { return 0.5 * std::erfc(std::pow(10.0, q_db / 20.0) / std::sqrt(2.0)); }

/// Error counts of per-polarization detections against the testing region of
/// the frame, aggregated over both polarizations.
inline QReport count_errors(std::span<const DetectionResult> results, const SymbolFrame& truth, const Constellation& c)
{
    if (results.size() != truth.pol.size())
        throw std::invalid_argument("count_errors: expected one detection result per polarization");
    QReport report;
    for (std::size_t p = 0; p < results.size(); ++p) {
        const auto& labels = truth.pol[p].labels;
        if (results[p].size() != truth.testing_len())
            throw std::invalid_argument("count_errors: detection length " + std::to_string(results[p].size()) +
                                        " differs from testing length " + std::to_string(truth.testing_len()));
        const std::span<const Label> testing(labels.data() + truth.training_len, truth.testing_len());
        report.symbol_errors += symbol_errors(results[p], testing);
        report.bit_errors += bit_errors(results[p], testing, c);
        report.symbols_total += testing.size();
        report.fallback_count += results[p].fallback_count;
    }
    report.bits_total = report.symbols_total * c.bits_per_symbol;
    report.ber = report.bits_total ? static_cast<double>(report.bit_errors) / report.bits_total : 0.0;
    report.q_db = q_from_ber(report.ber);
    return report;
}

} // namespace parzenfiber
