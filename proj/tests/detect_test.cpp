#include "parzenfiber/detect.hpp"
#include "parzenfiber/metrics.hpp"

#include "naive_pw.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace parzenfiber;

namespace {

struct Scene {
    TrainingSet train;
    cvec test;
    std::vector<Label> test_labels;
};

// 16-QAM over AWGN with per-dimension deviation sigma
Scene awgn_scene(unsigned order, std::size_t t, std::size_t n, double sigma, std::uint64_t seed)
{
    const auto c = build_qam(order);
    Rng rng(seed);
    cvec tp, test;
    std::vector<Label> tl, test_labels;
    for (std::size_t k = 0; k < t + n; ++k) {
        const auto l = static_cast<Label>(rng.below(order));
        const cplx y = c.points[l] + rng.complex_normal(2.0 * sigma * sigma);
        if (k < t) {
            tp.push_back(y);
            tl.push_back(l);
        } else {
            test.push_back(y);
            test_labels.push_back(l);
        }
    }
    return {TrainingSet(tp, tl, order), test, test_labels};
}

} // namespace

TEST(WindowWeight, Examples)
{
    EXPECT_DOUBLE_EQ(pw_window_weight(0.3, 0.3), 1.0 / 0.3);
    EXPECT_DOUBLE_EQ(pw_window_weight(0.6, 0.3), 0.0);
    EXPECT_DOUBLE_EQ(pw_window_weight(0.0, 0.3), pw_coincident_weight);
    EXPECT_DOUBLE_EQ(pw_window_weight(0.1, 0.3), 10.0);
}

TEST(PwDetect, SinglePointInWindow)
{
    const TrainingSet train({cplx{1.0, 0.0}}, {3}, 4);
    const cvec test{cplx{1.1, 0.0}};
    const auto r = pw_detect(test, train, {0.5});
    EXPECT_EQ(r.labels[0], 3);
    EXPECT_EQ(r.fallback_count, 0u);
    EXPECT_NEAR(r.metric[0], 10.0, 1e-12);
}

TEST(PwDetect, HandEvaluatedTwoClusters)
{
    const Label a = 0, b = 1;
    const TrainingSet train({{0.9, 0.0}, {1.1, 0.0}, {0.0, 0.9}, {0.0, 1.1}}, {a, a, b, b}, 2);
    const cvec test{cplx{0.95, 0.05}};
    const auto r = pw_detect(test, train, {0.3});
    EXPECT_EQ(r.labels[0], a);
    // metric A = 1/|(0.05,0.05)| + 1/|(-0.15,0.05)|
    EXPECT_NEAR(r.metric[0], 1.0 / std::hypot(0.05, 0.05) + 1.0 / std::hypot(0.15, 0.05), 1e-9);
}

TEST(PwDetect, CoincidentTrainingPointDominates)
{
    const TrainingSet train({{0.5, 0.5}, {0.51, 0.5}, {0.49, 0.5}, {0.5, 0.52}}, {2, 1, 1, 1}, 4);
    const cvec test{cplx{0.5, 0.5}};
    EXPECT_EQ(pw_detect(test, train, {0.3}).labels[0], 2);
}

TEST(PwDetect, EmptyWindowFallsBackToNearest)
{
    const TrainingSet train({{1.0, 0.0}, {-1.0, 0.0}}, {0, 1}, 2);
    const cvec test{cplx{-2.0, 0.3}, cplx{1.05, 0.0}, cplx{3.0, 0.0}};
    const auto r = pw_detect(test, train, {0.1});
    EXPECT_EQ(r.labels, (std::vector<Label>{1, 0, 0}));
    EXPECT_EQ(r.fallback, (std::vector<std::uint8_t>{1, 0, 1}));
    EXPECT_EQ(r.fallback_count, 2u);
}

TEST(PwDetect, ExactTieGoesToLowerLabel)
{
    const TrainingSet train({{1.0, 0.0}, {-1.0, 0.0}}, {3, 1}, 4);
    const cvec test{cplx{0.0, 0.0}};
    EXPECT_EQ(pw_detect(test, train, {2.0}).labels[0], 1);
}

TEST(PwDetect, Rejections)
{
    const TrainingSet empty({}, {}, 16);
    const cvec test{cplx{0.0, 0.0}};
    EXPECT_THROW(pw_detect(test, empty, {0.3}), std::invalid_argument);
    const TrainingSet one({cplx{1.0, 0.0}}, {0}, 4);
    EXPECT_THROW(pw_detect(test, one, {0.0}), std::invalid_argument);
    EXPECT_THROW(pw_detect(test, one, {-0.1}), std::invalid_argument);
    EXPECT_THROW(TrainingSet({cplx{}}, {4}, 4), std::invalid_argument);
    EXPECT_THROW(TrainingSet({cplx{}, cplx{}}, {0}, 4), std::invalid_argument);
}

TEST(PwDetect, MatchesNaiveOracleOnRandomInstances)
{
    Rng rng(77);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const unsigned m = 1 + static_cast<unsigned>(rng.below(16));
        const std::size_t t = 1 + rng.below(50);
        cvec tp(t);
        std::vector<Label> tl(t);
        for (std::size_t i = 0; i < t; ++i) {
            tp[i] = {rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0};
            tl[i] = static_cast<Label>(rng.below(m));
        }
        cvec test(8);
        for (auto& y : test) y = {rng.uniform() * 2.4 - 1.2, rng.uniform() * 2.4 - 1.2};
        const double radius = 0.02 + rng.uniform() * 0.8;
        const auto got = pw_detect(test, TrainingSet(tp, tl, m), {radius});
        for (std::size_t k = 0; k < test.size(); ++k) {
            const auto want = naive_pw::classify(test[k], tp, tl, m, radius);
            mismatches += got.labels[k] != want.label || static_cast<bool>(got.fallback[k]) != want.fallback;
        }
    }
    EXPECT_EQ(mismatches, 0u);
}

TEST(PwDetect, HugeWindowIsInverseDistanceVote)
{
    const auto s = awgn_scene(16, 200, 500, 0.1, 5);
    const auto got = pw_detect(s.test, s.train, {1e6});
    const auto pts = s.train.points();
    const auto lab = s.train.labels();
    for (std::size_t k = 0; k < s.test.size(); ++k) {
        std::vector<double> vote(16, 0.0);
        for (std::size_t t = 0; t < pts.size(); ++t) vote[lab[t]] += 1.0 / std::abs(s.test[k] - pts[t]);
        const auto want = std::max_element(vote.begin(), vote.end()) - vote.begin();
        ASSERT_EQ(got.labels[k], want);
    }
    EXPECT_EQ(got.fallback_count, 0u);
}

TEST(PwDetect, RotationInvariant)
{
    const auto s = awgn_scene(16, 1000, 4000, 0.12, 6);
    const auto ref = pw_detect(s.test, s.train, {0.3});
    Rng rng(8);
    for (int r = 0; r < 20; ++r) {
        const cplx rot = std::polar(1.0, rng.uniform() * 2.0 * std::numbers::pi);
        cvec tp(s.train.points().begin(), s.train.points().end()), test = s.test;
        for (auto& v : tp) v *= rot;
        for (auto& v : test) v *= rot;
        const TrainingSet train(tp, std::vector<Label>(s.train.labels().begin(), s.train.labels().end()), 16);
        EXPECT_EQ(pw_detect(test, train, {0.3}).labels, ref.labels);
    }
}

TEST(PwDetect, ScaleCovariant)
{
    const auto s = awgn_scene(16, 1000, 4000, 0.12, 7);
    const auto ref = pw_detect(s.test, s.train, {0.3});
    for (double k : {0.25, 0.5, 2.0, 8.0}) {
        cvec tp(s.train.points().begin(), s.train.points().end()), test = s.test;
        for (auto& v : tp) v *= k;
        for (auto& v : test) v *= k;
        const TrainingSet train(tp, std::vector<Label>(s.train.labels().begin(), s.train.labels().end()), 16);
        EXPECT_EQ(pw_detect(test, train, {0.3 * k}).labels, ref.labels) << k;
    }
}

TEST(PwDetect, AgreesWithMdAtHighSnr)
{
    const auto c = build_qam(16);
    const auto s = awgn_scene(16, 1000, 20000, 0.05, 9);
    const auto pw = pw_detect(s.test, s.train, {0.3});
    const auto md = md_detect(s.test, c);
    std::size_t agree = 0;
    for (std::size_t k = 0; k < s.test.size(); ++k) agree += pw.labels[k] == md.labels[k];
    EXPECT_GT(static_cast<double>(agree) / s.test.size(), 0.999);
}

TEST(MdDetect, ExactPointsAndTies)
{
    const auto c = build_qam(16);
    const auto exact = md_detect(c.points, c);
    for (Label l = 0; l < 16; ++l) EXPECT_EQ(exact.labels[l], l);
    // midpoint between labels 5 and 6 (adjacent in Q)
    const cvec mid{0.5 * (c.points[5] + c.points[6])};
    EXPECT_EQ(md_detect(mid, c).labels[0], 5);
    const cvec origin{cplx{0.0, 0.0}};
    EXPECT_EQ(md_detect(origin, c).labels[0], 5);
}

TEST(MdDetect, InvariantUnderCommonScaling)
{
    const auto c = build_qam(64);
    const auto s = awgn_scene(64, 1, 5000, 0.05, 10);
    const auto ref = md_detect(s.test, c);
    for (double k : {0.5, 3.0}) {
        auto scaled = c;
        for (auto& p : scaled.points) p *= k;
        cvec test = s.test;
        for (auto& v : test) v *= k;
        EXPECT_EQ(md_detect(test, scaled).labels, ref.labels);
    }
}

TEST(ErrorCounts, SymbolAndBitErrors)
{
    const auto c = build_qam(16);
    DetectionResult r;
    r.labels = {0, 1, 5, 15};
    const std::vector<Label> truth{0, 1, 4, 0};
    EXPECT_EQ(symbol_errors(r, truth), 2u);
    EXPECT_EQ(bit_errors(r, truth, c),
              static_cast<std::size_t>(std::popcount(c.bit_map[5] ^ c.bit_map[4]) + std::popcount(c.bit_map[15] ^ c.bit_map[0])));
    const std::vector<Label> short_truth{0};
    EXPECT_THROW(symbol_errors(r, short_truth), std::invalid_argument);
    EXPECT_THROW(bit_errors(r, short_truth, c), std::invalid_argument);
}

TEST(OptimizeWindow, GridContracts)
{
    const auto c = build_qam(16);
    const auto s = awgn_scene(16, 500, 2000, 0.1, 11);
    const std::vector<double> single{0.27};
    EXPECT_DOUBLE_EQ(optimize_window(s.test, s.test_labels, s.train, c, single).best_radius, 0.27);
    const std::vector<double> none;
    EXPECT_THROW(optimize_window(s.test, s.test_labels, s.train, c, none), std::invalid_argument);
    // noiseless holdout: every radius is error-free, the smallest wins
    const auto clean = awgn_scene(16, 500, 2000, 0.0, 12);
    const std::vector<double> grid{0.4, 0.1, 0.2};
    const auto scan = optimize_window(clean.test, clean.test_labels, clean.train, c, grid);
    EXPECT_DOUBLE_EQ(scan.best_radius, 0.1);
    EXPECT_EQ(scan.bit_errors, (std::vector<std::size_t>{0, 0, 0}));
    EXPECT_EQ(scan.bits_total, 2000u * 4u);
}

TEST(OptimizeWindow, PicksFewestErrors)
{
    const auto c = build_qam(16);
    const auto s = awgn_scene(16, 1000, 8000, 0.13, 13);
    const std::vector<double> grid{0.01, 0.3};
    const auto scan = optimize_window(s.test, s.test_labels, s.train, c, grid);
    EXPECT_LT(scan.bit_errors[1], scan.bit_errors[0]);
    EXPECT_DOUBLE_EQ(scan.best_radius, 0.3);
}

TEST(OptimizeWindow, AwgnCurveIsFlatAboveTwoSigma)
{
    const auto c = build_qam(16);
    const double sigma = 0.12;
    std::vector<double> grid;
    for (double r = 2.0 * sigma; r <= 0.4 + 1e-9; r += 0.04) grid.push_back(r);
    std::vector<Holdout> holdouts;
    std::vector<Scene> scenes;
    for (int s = 0; s < 4; ++s) scenes.push_back(awgn_scene(16, 1000, 16384, sigma, 20 + s));
    for (const auto& s : scenes) holdouts.push_back({s.test, s.test_labels, &s.train});
    const auto scan = optimize_window(holdouts, c, grid);
    double lo = 1e9, hi = -1e9;
    for (auto e : scan.bit_errors) {
        const double q = q_from_ber(static_cast<double>(e) / scan.bits_total);
        lo = std::min(lo, q);
        hi = std::max(hi, q);
    }
    EXPECT_LT(hi - lo, 0.3) << lo << " " << hi;
}

TEST(DecisionRegions, RasterCsv)
{
    const auto c = build_qam(16);
    const auto s = awgn_scene(16, 1000, 10, 0.05, 14);
    std::ostringstream os;
    write_decision_regions_csv(os, s.train, {0.3}, 11);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "re,im,label");
    int rows = 0;
    double re = 0, im = 0;
    int label = 0;
    char comma;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        ls >> re >> comma >> im >> comma >> label;
        EXPECT_GE(label, 0);
        EXPECT_LT(label, 16);
        ++rows;
    }
    EXPECT_EQ(rows, 121);
    EXPECT_DOUBLE_EQ(re, 1.6);
    EXPECT_DOUBLE_EQ(im, 1.6);
    EXPECT_EQ(label, md_detect(cvec{cplx{1.6, 1.6}}, c).labels[0]);
    EXPECT_THROW(write_decision_regions_csv(os, s.train, {0.3}, 1), std::invalid_argument);
}
