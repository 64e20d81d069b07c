#pragma once

#include "parzenfiber/constellation.hpp"
#include "parzenfiber/fft.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace parzenfiber {

/// Labeled received training symbols for one polarization.
class TrainingSet {
public:
    TrainingSet(cvec points, std::vector<Label> labels, unsigned order)
        : points_(std::move(points)), labels_(std::move(labels)), order_(order)
    {
        if (points_.size() != labels_.size())
            throw std::invalid_argument("TrainingSet: point and label counts differ");
        for (const Label l : labels_)
            if (l >= order_) throw std::invalid_argument("TrainingSet: label " + std::to_string(l) + " out of range");
    }

    [[nodiscard]] std::span<const cplx> points() const { return points_; }
    [[nodiscard]] std::span<const Label> labels() const { return labels_; }
    [[nodiscard]] unsigned order() const { return order_; }
    [[nodiscard]] std::size_t size() const { return points_.size(); }
    [[nodiscard]] bool empty() const { return points_.empty(); }

private:
    cvec points_;
    std::vector<Label> labels_;
    unsigned order_;
};

struct PwParams {
    double radius = 0.3;
};

struct DetectionResult {
    std::vector<Label> labels;
    std::vector<double> metric;          // winning cluster metric per symbol
    std::vector<std::uint8_t> fallback;  // 1 where the window was empty
    std::size_t fallback_count = 0;

    [[nodiscard]] std::size_t size() const { return labels.size(); }
};

/// Minimum-distance decision; equidistant points resolve to the lower label.
inline DetectionResult md_detect(std::span<const cplx> symbols, const Constellation& c)
{
    DetectionResult out;
    out.labels.resize(symbols.size());
    out.metric.resize(symbols.size());
    out.fallback.assign(symbols.size(), 0);
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        double best = std::numeric_limits<double>::infinity();
        Label arg = 0;
        for (std::size_t m = 0; m < c.points.size(); ++m) {
            const double d = std::norm(symbols[k] - c.points[m]);
            if (d < best) {
                best = d;
                arg = static_cast<Label>(m);
            }
        }
        out.labels[k] = arg;
        out.metric[k] = std::sqrt(best);
    }
    return out;
}

/// Weight of a training point at distance 0 where 1/d is singular.
inline constexpr double pw_coincident_weight = 1e12;

/// Inverse-distance window: 1/d inside the closed radius, 0 outside.
inline double pw_window_weight(double distance, double radius)
{
    if (distance > radius) return 0.0;
    if (distance == 0.0) return pw_coincident_weight;
    return 1.0 / distance;
}

/// Parzen-window decision. For each test symbol the per-cluster metric sums
/// the window weights of same-label training symbols; the largest metric
/// wins, ties to the lower label. An empty window falls back to the label of
/// the nearest training symbol and is flagged.
inline DetectionResult pw_detect(std::span<const cplx> test, const TrainingSet& train, const PwParams& params)
{
    if (train.empty()) throw std::invalid_argument("pw_detect: empty training set");
    if (!(params.radius > 0.0)) throw std::invalid_argument("pw_detect: window radius must be positive");
    const auto pts = train.points();
    const auto lab = train.labels();
    const double r2 = params.radius * params.radius;

    DetectionResult out;
    out.labels.resize(test.size());
    out.metric.resize(test.size());
    out.fallback.assign(test.size(), 0);
    std::vector<double> metric(train.order());

    for (std::size_t k = 0; k < test.size(); ++k) {
        std::fill(metric.begin(), metric.end(), 0.0);
        bool any = false;
        double nearest = std::numeric_limits<double>::infinity();
        Label nearest_label = 0;
        const cplx y = test[k];
        for (std::size_t t = 0; t < pts.size(); ++t) {
            const double d2 = std::norm(y - pts[t]);
            if (d2 < nearest) {
                nearest = d2;
                nearest_label = lab[t];
            }
            if (d2 <= r2) {
                metric[lab[t]] += pw_window_weight(std::sqrt(d2), params.radius);
                any = true;
            }
        }
        if (!any) {
            out.labels[k] = nearest_label;
            out.metric[k] = 0.0;
            out.fallback[k] = 1;
            ++out.fallback_count;
            continue;
        }
        Label arg = 0;
        for (std::size_t m = 1; m < metric.size(); ++m)
            if (metric[m] > metric[arg]) arg = static_cast<Label>(m);
        out.labels[k] = arg;
        out.metric[k] = metric[arg];
    }
    return out;
}

/// Symbol-error count of a detection against known labels.
inline std::size_t symbol_errors(const DetectionResult& r, std::span<const Label> truth)
{
    if (r.size() != truth.size()) throw std::invalid_argument("symbol_errors: length mismatch");
    std::size_t errors = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) errors += r.labels[k] != truth[k];
    return errors;
}

/// Bit-error count using the constellation's bit map.
inline std::size_t bit_errors(const DetectionResult& r, std::span<const Label> truth, const Constellation& c)
{
    if (r.size() != truth.size()) throw std::invalid_argument("bit_errors: length mismatch");
    std::size_t errors = 0;
    for (std::size_t k = 0; k < truth.size(); ++k)
        errors += static_cast<std::size_t>(std::popcount(c.bit_map[r.labels[k]] ^ c.bit_map[truth[k]]));
    return errors;
}

struct WindowScan {
    std::vector<double> radii;
    std::vector<std::size_t> bit_errors;
    std::size_t bits_total = 0;
    double best_radius = 0.0;
};

/// Labeled symbols disjoint from the training set they are scored against.
struct Holdout {
    std::span<const cplx> symbols;
    std::span<const Label> labels;
    const TrainingSet* train = nullptr;
};

/// Scan a radius grid on labeled holdouts and keep the radius with the
/// fewest pooled bit errors (equivalently the highest Q); ties go to the
/// smaller radius.
inline WindowScan optimize_window(std::span<const Holdout> holdouts, const Constellation& c, std::span<const double> grid)
{
    if (grid.empty()) throw std::invalid_argument("optimize_window: empty radius grid");
    WindowScan scan;
    scan.radii.assign(grid.begin(), grid.end());
    scan.bit_errors.assign(grid.size(), 0);
    for (const auto& h : holdouts) {
        if (h.train == nullptr) throw std::invalid_argument("optimize_window: holdout without training set");
        scan.bits_total += h.labels.size() * c.bits_per_symbol;
        for (std::size_t i = 0; i < grid.size(); ++i)
            scan.bit_errors[i] += bit_errors(pw_detect(h.symbols, *h.train, {grid[i]}), h.labels, c);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const bool fewer = scan.bit_errors[i] < scan.bit_errors[best];
        const bool tie_smaller = scan.bit_errors[i] == scan.bit_errors[best] && grid[i] < grid[best];
        if (fewer || tie_smaller) best = i;
    }
    scan.best_radius = grid[best];
    return scan;
}

inline WindowScan optimize_window(std::span<const cplx> holdout, std::span<const Label> holdout_labels,
                                  const TrainingSet& train, const Constellation& c, std::span<const double> grid)
{
    const Holdout h{holdout, holdout_labels, &train};
    return optimize_window(std::span<const Holdout>(&h, 1), c, grid);
}

/// Rasterize PW decision regions over [-extent, extent]^2 as re,im,label.
inline void write_decision_regions_csv(std::ostream& os, const TrainingSet& train, const PwParams& params,
                                       unsigned resolution, double extent = 1.6)
{
    if (resolution < 2) throw std::invalid_argument("decision regions: resolution must be at least 2");
    cvec grid;
    grid.reserve(static_cast<std::size_t>(resolution) * resolution);
    const double step = 2.0 * extent / (resolution - 1);
    for (unsigned i = 0; i < resolution; ++i)
        for (unsigned q = 0; q < resolution; ++q) grid.emplace_back(-extent + i * step, -extent + q * step);
    const auto result = pw_detect(grid, train, params);
    os << "re,im,label\n";
    for (std::size_t k = 0; k < grid.size(); ++k)
        os << grid[k].real() << ',' << grid[k].imag() << ',' << result.labels[k] << '\n';
}

} // namespace parzenfiber
