#include "turbrec/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

namespace turbrec::io {

using nlohmann::json;

Frame read_png(const fs::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
        throw IoError("cannot read PNG " + path.string() + ": " + image.message);
    }
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        png_image_free(&image);
        throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
    }
    Frame frame(static_cast<int>(image.height), static_cast<int>(image.width), gray ? 1 : 3);
    std::transform(buffer.begin(), buffer.end(), frame.data().begin(),
                   [](std::uint8_t v) { return v / 255.0; });
    return frame;
}

namespace {

void write_bytes(const fs::path& path, int height, int width, int channels,
                 const std::vector<std::uint8_t>& bytes) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
        throw IoError("cannot write PNG " + path.string() + ": " + image.message);
    }
}

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

void write_png(const fs::path& path, const Frame& frame) {
    std::vector<std::uint8_t> bytes(frame.size());
    std::transform(frame.data().begin(), frame.data().end(), bytes.begin(), quantize);
    write_bytes(path, frame.height(), frame.width(), frame.channels(), bytes);
}

void write_png(const fs::path& path, const Plane& plane) {
    std::vector<std::uint8_t> bytes(plane.size());
    std::transform(plane.data().begin(), plane.data().end(), bytes.begin(), quantize);
    write_bytes(path, plane.height(), plane.width(), 1, bytes);
}

std::string frame_name(std::size_t index) {
    std::ostringstream os;
    os << std::setw(6) << std::setfill('0') << (index + 1) << ".png";
    return os.str();
}

bool is_video_dir(const fs::path& dir) {
    return fs::is_directory(dir) && fs::exists(dir / frame_name(0));
}

VideoSequence read_video(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    VideoSequence video;
    video.id = dir.filename().string();
    std::size_t expected = 0;
    if (fs::exists(dir / "meta.json")) {
        std::ifstream in(dir / "meta.json");
        const json meta = json::parse(in);
        if (meta.contains("id")) video.id = meta.at("id").get<std::string>();
        if (meta.contains("fps") && !meta.at("fps").is_null()) video.frame_rate = meta.at("fps").get<double>();
        if (meta.contains("frames")) expected = meta.at("frames").get<std::size_t>();
    }
    for (std::size_t i = 0;; ++i) {
        const auto p = dir / frame_name(i);
        if (!fs::exists(p)) break;
        video.frames.push_back(read_png(p));
    }
    if (video.frames.empty()) throw IoError("no frames in " + dir.string());
    if (expected != 0 && expected != video.frames.size()) {
        throw IoError("meta.json frame count disagrees with " + dir.string());
    }
    video.validate();
    return video;
}

void write_video(const fs::path& dir, const VideoSequence& video) {
    video.validate();
    fs::create_directories(dir);
    for (std::size_t i = 0; i < video.frames.size(); ++i) {
        write_png(dir / frame_name(i), video.frames[i]);
    }
    const auto& f = video.frames.front();
    json meta{{"id", video.id},
              {"fps", video.frame_rate ? json(*video.frame_rate) : json(nullptr)},
              {"shape", {f.height(), f.width(), f.channels()}},
              {"frames", video.frames.size()}};
    std::ofstream(dir / "meta.json") << meta.dump(2) << '\n';
}

fs::path flowmeta_path(const fs::path& path) {
    auto p = path;
    p.replace_extension(".flowmeta.json");
    return p;
}

void write_flow(const fs::path& path, const FlowField& flow) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string());
    auto put = [&out](const Plane& p) {
        for (double v : p.data()) {
            auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
            out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
        }
    };
    put(flow.u);
    put(flow.v);
    std::ofstream(flowmeta_path(path)) << json{{"H", flow.height()}, {"W", flow.width()}}.dump() << '\n';
}

FlowField read_flow(const fs::path& path) {
    std::ifstream meta_in(flowmeta_path(path));
    if (!meta_in) throw IoError("missing flow sidecar for " + path.string());
    const json meta = json::parse(meta_in);
    FlowField flow(meta.at("H").get<int>(), meta.at("W").get<int>());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    auto get = [&in, &path](Plane& p) {
        for (double& v : p.data()) {
            std::uint32_t bits = 0;
            if (!in.read(reinterpret_cast<char*>(&bits), sizeof(bits))) {
                throw IoError("truncated flow file " + path.string());
            }
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
            v = std::bit_cast<float>(bits);
        }
    };
    get(flow.u);
    get(flow.v);
    return flow;
}

}  // namespace turbrec::io
