#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "turbrec/conditioning.hpp"
#include "turbrec/synthetic.hpp"
#include "turbrec/turbsim.hpp"

namespace turbrec {
namespace {

using namespace conditioning;

TEST(Level, CalibrationEndpoints) {
    const Calibration cal{0.2, 0.8};
    EXPECT_DOUBLE_EQ(level_from_score(0.8, cal).level, 0.0);
    EXPECT_DOUBLE_EQ(level_from_score(0.2, cal).level, 1.0);
    EXPECT_DOUBLE_EQ(level_from_score(0.9, cal).level, 0.0);
    EXPECT_DOUBLE_EQ(level_from_score(0.1, cal).level, 1.0);
    EXPECT_DOUBLE_EQ(level_from_score(0.5, cal).raw_score, 0.5);
}

TEST(Level, ReciprocalFormula) {
    const Calibration cal{0.25, 1.0};
    // (1/0.5 - 1) / (4 - 1)
    EXPECT_NEAR(level_from_score(0.5, cal).level, 1.0 / 3.0, 1e-15);
}

TEST(Level, NonIncreasingInScoreOnAGrid) {
    const Calibration cal{0.1, 0.9};
    double last = 2.0;
    for (int i = 0; i <= 100; ++i) {
        const double s = 0.05 + 0.9 * i / 100.0;
        const double l = level_from_score(s, cal).level;
        EXPECT_LE(l, last);
        EXPECT_GE(l, 0.0);
        EXPECT_LE(l, 1.0);
        last = l;
    }
}

TEST(Level, RejectsNonPositiveScores) {
    EXPECT_THROW(level_from_score(0.0, {}), std::domain_error);
    EXPECT_THROW(level_from_score(-0.3, {}), std::domain_error);
    EXPECT_THROW(level_from_score(0.5, Calibration{0.6, 0.4}), std::invalid_argument);
}

TEST(AnalyticProxy, ScoreInUnitIntervalAndDeterministic) {
    const AnalyticProxy proxy;
    const auto img = synthetic::textured_image(48, 48, 3);
    const double s = proxy.score(img);
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(s, proxy.score(img));
    const double flat = proxy.score(Frame(16, 16, 3, 0.5));
    EXPECT_GT(flat, 0.0);
    EXPECT_LT(flat, s);
}

TEST(AnalyticProxy, StrongDegradationRaisesTheLevel) {
    const AnalyticProxy proxy;
    const auto clean = synthetic::textured_image(64, 64, 12);
    const auto weak = turbsim::degrade(clean, turbsim::preset(turbsim::Level::weak, 5), 0);
    const auto strong = turbsim::degrade(clean, turbsim::preset(turbsim::Level::strong, 5), 0);
    const auto cal = calibrate({proxy.score(weak), proxy.score(strong), proxy.score(clean)});
    EXPECT_GT(turbulence_level(strong, proxy, cal).level, turbulence_level(weak, proxy, cal).level);
}

TEST(ExternalScorer, ReadsSidecarAndRejectsUnknownIds) {
    const auto path = std::filesystem::temp_directory_path() / ("turbrec_scores_" + std::to_string(::getpid()) + ".json");
    std::ofstream(path) << R"({"a/000001.png": 0.4, "a/000002.png": 0.9})";
    const auto scorer = ExternalScorer::from_json_file(path);
    std::filesystem::remove(path);
    const Frame f(4, 4, 3);
    EXPECT_DOUBLE_EQ(scorer.score(f, "a/000001.png"), 0.4);
    EXPECT_DOUBLE_EQ(scorer.score(f, "a/000002.png"), 0.9);
    EXPECT_THROW(scorer.score(f, "b/000001.png"), std::out_of_range);
}

TEST(Calibrate, UsesFirstAndNinetyNinthPercentiles) {
    std::vector<double> scores;
    for (int i = 1; i <= 101; ++i) scores.push_back(i / 101.0);
    const auto cal = calibrate(scores);
    EXPECT_NEAR(cal.s_min, 2.0 / 101.0, 1e-12);
    EXPECT_NEAR(cal.s_max, 100.0 / 101.0, 1e-12);
    const auto degenerate = calibrate({0.5, 0.5});
    EXPECT_LT(degenerate.s_min, degenerate.s_max);
}

}  // namespace
}  // namespace turbrec
