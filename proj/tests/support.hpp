#pragma once

#include "roadlabel/imgcore.hpp"
#include "roadlabel/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <unistd.h>

namespace roadlabel::testing {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

/// Box-blurred white noise rescaled to [0,1]: texture with energy at every
/// scale that shares no code with the synthetic scene generator.
inline GrayImage random_texture(int w, int h, std::uint64_t seed, int blur_passes = 2) {
    Rng rng(seed);
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (auto& x : v) x = rng.uniform();
    std::vector<double> tmp(v.size());
    for (int pass = 0; pass < blur_passes; ++pass) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0;
                for (int d = -1; d <= 1; ++d) s += v[y * w + (x + d + w) % w];
                tmp[y * w + x] = s / 3;
            }
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double s = 0;
                for (int d = -1; d <= 1; ++d) s += tmp[((y + d + h) % h) * w + x];
                v[y * w + x] = s / 3;
            }
    }
    double lo = 1e9, hi = -1e9;
    for (double x : v) lo = std::min(lo, x), hi = std::max(hi, x);
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = static_cast<float>((v[y * w + x] - lo) / (hi - lo));
    return out;
}

inline GrayImage white_noise(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    GrayImage out(w, h);
    for (float& x : out.values()) x = static_cast<float>(rng.uniform());
    return out;
}

inline SimilarityTransform random_transform(Rng& rng, double max_t = 50.0) {
    return {std::exp(rng.uniform(-1.0, 1.0)), rng.uniform(-kPi, kPi), rng.uniform(-max_t, max_t),
            rng.uniform(-max_t, max_t)};
}

inline double angle_diff(double a, double b) { return std::abs(wrap_angle(a - b)); }

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("roadlabel-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

}  // namespace roadlabel::testing
