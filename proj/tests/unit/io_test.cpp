#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "test_images.hpp"
#include "turbrec/io.hpp"

namespace turbrec {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("turbrec_io_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    fs::path dir_;
};

Frame quantized(Frame f) {
    for (auto& v : f.data()) v = std::round(v * 255.0) / 255.0;
    return f;
}

TEST(FrameName, IsOneBasedAndPadded) {
    EXPECT_EQ(io::frame_name(0), "000001.png");
    EXPECT_EQ(io::frame_name(122), "000123.png");
}

TEST_F(IoTest, PngRoundTripsQuantizedValues) {
    const auto rgb = quantized(testing::random_frame(9, 11, 3, 1));
    io::write_png(dir_ / "rgb.png", rgb);
    EXPECT_LT(testing::max_abs_diff(io::read_png(dir_ / "rgb.png"), rgb), 1e-12);

    const auto gray = quantized(testing::random_frame(5, 4, 1, 2));
    io::write_png(dir_ / "gray.png", gray);
    const auto back = io::read_png(dir_ / "gray.png");
    EXPECT_EQ(back.channels(), 1);
    EXPECT_LT(testing::max_abs_diff(back, gray), 1e-12);
}

TEST_F(IoTest, PngClampsOutOfRange) {
    Frame f(1, 2, 1);
    f.at(0, 0, 0) = -0.5;
    f.at(0, 1, 0) = 1.7;
    io::write_png(dir_ / "c.png", f);
    const auto back = io::read_png(dir_ / "c.png");
    EXPECT_EQ(back.at(0, 0, 0), 0.0);
    EXPECT_EQ(back.at(0, 1, 0), 1.0);
}

TEST_F(IoTest, MissingPngIsAnIoError) {
    EXPECT_THROW(io::read_png(dir_ / "nope.png"), io::IoError);
}

TEST_F(IoTest, VideoRoundTripKeepsMetadata) {
    VideoSequence v;
    v.id = "clip7";
    v.frame_rate = 25.0;
    for (int t = 0; t < 3; ++t) v.frames.push_back(quantized(testing::random_frame(6, 8, 3, 10 + t)));
    io::write_video(dir_ / "v", v);
    EXPECT_TRUE(io::is_video_dir(dir_ / "v"));
    EXPECT_TRUE(fs::exists(dir_ / "v" / "000003.png"));
    const auto back = io::read_video(dir_ / "v");
    EXPECT_EQ(back.id, "clip7");
    ASSERT_TRUE(back.frame_rate.has_value());
    EXPECT_DOUBLE_EQ(*back.frame_rate, 25.0);
    ASSERT_EQ(back.length(), 3u);
    for (int t = 0; t < 3; ++t) EXPECT_LT(testing::max_abs_diff(back.frames[t], v.frames[t]), 1e-12);
}

TEST_F(IoTest, VideoWithoutMetaUsesDirectoryName) {
    io::write_png(dir_ / "plain" / io::frame_name(0), Frame(4, 4, 3, 0.2));
    const auto back = io::read_video(dir_ / "plain");
    EXPECT_EQ(back.id, "plain");
    EXPECT_EQ(back.length(), 1u);
}

TEST_F(IoTest, FlowRoundTripsAtFloatPrecision) {
    FlowField f(7, 5);
    f.u = testing::random_plane(7, 5, 3, -4.0, 4.0);
    f.v = testing::random_plane(7, 5, 4, -4.0, 4.0);
    io::write_flow(dir_ / "f.flo", f);
    EXPECT_TRUE(fs::exists(io::flowmeta_path(dir_ / "f.flo")));
    EXPECT_EQ(fs::file_size(dir_ / "f.flo"), 2u * 7 * 5 * sizeof(float));
    const auto back = io::read_flow(dir_ / "f.flo");
    ASSERT_EQ(back.height(), 7);
    ASSERT_EQ(back.width(), 5);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        EXPECT_EQ(back.u.data()[i], static_cast<double>(static_cast<float>(f.u.data()[i])));
        EXPECT_EQ(back.v.data()[i], static_cast<double>(static_cast<float>(f.v.data()[i])));
    }
}

TEST_F(IoTest, FlowLayoutIsUPlaneThenVPlane) {
    FlowField f(1, 2);
    f.u.at(0, 0) = 1.0;
    f.u.at(0, 1) = 2.0;
    f.v.at(0, 0) = 3.0;
    f.v.at(0, 1) = 4.0;
    io::write_flow(dir_ / "g.flo", f);
    std::ifstream in(dir_ / "g.flo", std::ios::binary);
    float raw[4];
    in.read(reinterpret_cast<char*>(raw), sizeof(raw));
    EXPECT_EQ(raw[0], 1.0f);
    EXPECT_EQ(raw[1], 2.0f);
    EXPECT_EQ(raw[2], 3.0f);
    EXPECT_EQ(raw[3], 4.0f);
}

}  // namespace
}  // namespace turbrec
