#include "parzenfiber/metrics.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>

using namespace parzenfiber;

namespace {

// invert ber = 0.5 erfc(q / sqrt 2) by bisection, q in linear units
double q_linear_by_bisection(double ber)
{
    double lo = 0.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(mid / std::sqrt(2.0)) > ber) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

SymbolFrame frame_with(const std::vector<Label>& pol0, const std::vector<Label>& pol1, std::size_t training)
{
    SymbolFrame f;
    f.pol[0].labels = pol0;
    f.pol[1].labels = pol1;
    f.training_len = training;
    f.total_len = pol0.size();
    return f;
}

DetectionResult result(std::vector<Label> labels)
{
    DetectionResult r;
    r.labels = std::move(labels);
    r.fallback.assign(r.labels.size(), 0);
    return r;
}

} // namespace

TEST(QFactor, ReferenceValues)
{
    EXPECT_NEAR(q_from_ber(0.5 * std::erfc(1.0 / std::sqrt(2.0))), 0.0, 1e-9);
    EXPECT_NEAR(q_from_ber(1e-3), 9.7998, 1e-3);
    EXPECT_NEAR(q_from_ber(0.5 * std::erfc(2.0 / std::sqrt(2.0))), 20.0 * std::log10(2.0), 1e-9);
    EXPECT_NEAR(q_from_ber(0.02275), 6.02, 0.01);
}

TEST(QFactor, MatchesBisectionOracle)
{
    for (double ber : {0.4, 0.1, 3e-2, 1e-3, 4.2e-5, 1e-9, 1e-15}) {
        const double want = 20.0 * std::log10(q_linear_by_bisection(ber));
        EXPECT_NEAR(q_from_ber(ber) / want, 1.0, 1e-10) << ber;
    }
}

TEST(QFactor, OutOfDomainIsNaN)
{
    for (double ber : {0.0, -1e-3, 0.5, 0.7, 1.0}) EXPECT_TRUE(std::isnan(q_from_ber(ber))) << ber;
    EXPECT_TRUE(std::isnan(q_from_ber(std::nan(""))));
}

TEST(QFactor, StrictlyDecreasing)
{
    double prev = INFINITY;
    for (double e = -12.0; e < std::log10(0.5); e += 0.01) {
        const double q = q_from_ber(std::pow(10.0, e));
        EXPECT_LT(q, prev);
        prev = q;
    }
}

TEST(QFactor, RoundTrip)
{
    for (double ber : {0.49, 0.2, 1e-2, 1e-3, 1e-6, 1e-10}) EXPECT_NEAR(ber_from_q(q_from_ber(ber)) / ber, 1.0, 1e-9);
}

TEST(CountErrors, PerfectDetection)
{
    const auto c = build_qam(16);
    const auto f = frame_with({1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}, 2);
    const std::array<DetectionResult, 2> res{result({3, 4, 5}), result({8, 9, 10})};
    const auto q = count_errors(res, f, c);
    EXPECT_EQ(q.bit_errors, 0u);
    EXPECT_EQ(q.symbol_errors, 0u);
    EXPECT_EQ(q.bits_total, 24u);
    EXPECT_EQ(q.symbols_total, 6u);
    EXPECT_DOUBLE_EQ(q.ber, 0.0);
    EXPECT_FALSE(q.q_valid());
}

TEST(CountErrors, GrayNeighbourIsOneBit)
{
    const auto c = build_qam(16);
    // label 5 = (i=1, q=1); neighbours 4, 6, 1, 9
    for (Label n : {Label{4}, Label{6}, Label{1}, Label{9}}) {
        const auto f = frame_with({0, 5}, {0, 0}, 1);
        const std::array<DetectionResult, 2> res{result({n}), result({0})};
        const auto q = count_errors(res, f, c);
        EXPECT_EQ(q.bit_errors, 1u) << n;
        EXPECT_EQ(q.symbol_errors, 1u);
        EXPECT_DOUBLE_EQ(q.ber, 1.0 / 8.0);
        EXPECT_TRUE(q.q_valid());
    }
}

TEST(CountErrors, ComplementedLabelsHitHalfTheBits)
{
    const auto c = build_qam(16);
    Rng rng(4);
    std::vector<Label> truth(20001), flipped;
    for (auto& l : truth) l = static_cast<Label>(rng.below(16));
    for (std::size_t k = 1; k < truth.size(); ++k) {
        // random bit pattern unrelated to the truth
        flipped.push_back(c.label_of_bits[rng.below(16)]);
    }
    const auto f = frame_with(truth, truth, 1);
    const std::array<DetectionResult, 2> res{result(flipped), result(flipped)};
    const auto q = count_errors(res, f, c);
    EXPECT_NEAR(static_cast<double>(q.bit_errors) / q.bits_total, 0.5, 0.01);

    // bitwise complement of every pattern flips exactly all bits
    std::vector<Label> complement;
    for (std::size_t k = 1; k < truth.size(); ++k) complement.push_back(c.label_of_bits[c.bit_map[truth[k]] ^ 0xFu]);
    const std::array<DetectionResult, 2> all{result(complement), result(complement)};
    EXPECT_EQ(count_errors(all, f, c).bit_errors, count_errors(all, f, c).bits_total);
}

TEST(CountErrors, AggregatesFallbacksAndRejectsMismatch)
{
    const auto c = build_qam(4);
    const auto f = frame_with({0, 1, 2, 3}, {0, 1, 2, 3}, 1);
    auto a = result({1, 2, 3});
    a.fallback_count = 2;
    auto b = result({1, 2, 3});
    b.fallback_count = 1;
    const std::array<DetectionResult, 2> ok{a, b};
    EXPECT_EQ(count_errors(ok, f, c).fallback_count, 3u);
    const std::array<DetectionResult, 2> bad{result({1, 2}), b};
    EXPECT_THROW(count_errors(bad, f, c), std::invalid_argument);
    const std::array<DetectionResult, 1> one{a};
    EXPECT_THROW(count_errors(one, f, c), std::invalid_argument);
}
