#include "turbrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "turbrec/datasets.hpp"
#include "turbrec/image_ops.hpp"
#include "turbrec/rng.hpp"

namespace turbrec::synthetic {

Frame textured_image(int height, int width, std::uint64_t seed) {
    auto rng = make_rng(seed, {0x7E47});
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Frame img(height, width, 3);

    struct Grating {
        double kx, ky, phase;
        std::array<double, 3> amp;
    };
    std::vector<Grating> gratings(6);
    for (auto& g : gratings) {
        const double theta = u01(rng) * std::numbers::pi;
        const double period = 4.0 + 20.0 * u01(rng);
        g.kx = 2.0 * std::numbers::pi * std::cos(theta) / period;
        g.ky = 2.0 * std::numbers::pi * std::sin(theta) / period;
        g.phase = 2.0 * std::numbers::pi * u01(rng);
        for (auto& a : g.amp) a = 0.04 + 0.08 * u01(rng);
    }
    std::array<double, 3> base{0.3 + 0.4 * u01(rng), 0.3 + 0.4 * u01(rng), 0.3 + 0.4 * u01(rng)};
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double v = base[c];
                for (const auto& g : gratings) v += g.amp[c] * std::sin(g.kx * x + g.ky * y + g.phase);
                img.at(y, x, c) = v;
            }
        }
    }
    const int n_rects = 4 + static_cast<int>(u01(rng) * 4);
    for (int r = 0; r < n_rects; ++r) {
        const int rw = 3 + static_cast<int>(u01(rng) * width / 3.0);
        const int rh = 3 + static_cast<int>(u01(rng) * height / 3.0);
        const int x0 = static_cast<int>(u01(rng) * (width - 1));
        const int y0 = static_cast<int>(u01(rng) * (height - 1));
        const std::array<double, 3> col{u01(rng), u01(rng), u01(rng)};
        const double alpha = 0.5 + 0.4 * u01(rng);
        for (int y = y0; y < std::min(height, y0 + rh); ++y) {
            for (int x = x0; x < std::min(width, x0 + rw); ++x) {
                for (int c = 0; c < 3; ++c) img.at(y, x, c) = (1.0 - alpha) * img.at(y, x, c) + alpha * col[c];
            }
        }
    }
    return clamp01(std::move(img));
}

VideoSequence static_clip(const Frame& image, std::size_t n, const std::string& id) {
    VideoSequence v;
    v.id = id;
    v.frames.assign(n, image);
    return v;
}

VideoSequence translating_clip(const Frame& canvas, int crop_size, std::size_t n, std::array<double, 2> start,
                               std::array<double, 2> velocity, const std::string& id) {
    const auto positions = datasets::reflect_trajectory(start, velocity, n, canvas.width() - crop_size,
                                                        canvas.height() - crop_size);
    VideoSequence v;
    v.id = id;
    for (const auto& p : positions) v.frames.push_back(crop(canvas, p.x, p.y, crop_size, crop_size));
    return v;
}

}  // namespace turbrec::synthetic
