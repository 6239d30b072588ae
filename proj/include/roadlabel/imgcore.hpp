#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace roadlabel {

/// One timestamped raster from a camera feed. Color frames are stored RGB.
struct Frame {
    std::string camera_id;
    std::string frame_id;
    std::int64_t timestamp = 0;  // UTC seconds
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray) or 3 (RGB)
    std::vector<std::uint8_t> pixels;

    /// Throws Validation when the buffer does not match the declared shape.
    void validate() const;
};

/// Row-major intensities in [0,1].
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, float fill = 0.0f);
    GrayImage(int width, int height, std::vector<float> values);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return values_.empty(); }

    float at(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    float& at(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<const float> values() const noexcept { return values_; }
    std::span<float> values() noexcept { return values_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<float> values_;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// q = scale * R(rotation) * p + (tx, ty), with p and q measured from the
/// image center ((W-1)/2, (H-1)/2). Maps SOURCE coordinates to TARGET.
struct SimilarityTransform {
    double scale = 1.0;
    double rotation = 0.0;  // radians, kept in (-pi, pi]
    double tx = 0.0;
    double ty = 0.0;

    static SimilarityTransform identity() { return {}; }

    Point2 apply(Point2 p) const;

    friend bool operator==(const SimilarityTransform&, const SimilarityTransform&) = default;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

/// Applying the result is equivalent to applying `first`, then `second`.
SimilarityTransform compose(const SimilarityTransform& first, const SimilarityTransform& second);

/// Throws InvalidTransform for non-positive or non-finite scale.
SimilarityTransform invert(const SimilarityTransform& t);

enum class Provenance { Manual, Reuse, Corrected };

std::string_view to_string(Provenance p);

/// Binary road mask. bits are 0 (non-road) or 1 (road).
struct LabelMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;
    Provenance provenance = Provenance::Manual;
    std::string source_frame_id;

    LabelMask() = default;
    LabelMask(int w, int h, Provenance prov = Provenance::Manual, std::string source = {})
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0), provenance(prov),
          source_frame_id(std::move(source)) {}

    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }

    std::size_t count() const;
};

GrayImage to_gray(const Frame& frame);

/// Quantizes a gray image back to an 8-bit single-channel frame.
Frame to_frame(const GrayImage& img, std::string camera_id = {}, std::string frame_id = {},
               std::int64_t timestamp = 0);

/// Bilinear resampling; target pixels whose source falls outside the image are 0.
GrayImage warp_image(const GrayImage& img, const SimilarityTransform& t);

/// Nearest-neighbor resampling; out-of-view pixels become non-road.
/// The result has provenance Corrected.
LabelMask warp_mask(const LabelMask& mask, const SimilarityTransform& t);

/// road AND NOT excluded. Dimensions must match.
LabelMask subtract(const LabelMask& road, const LabelMask& excluded);

/// RGB frame with road pixels tinted green.
Frame overlay_mask(const Frame& frame, const LabelMask& mask, double alpha = 0.45);

// File I/O (PNG/JPEG via OpenCV codecs).
Frame load_frame(const std::filesystem::path& path, std::string camera_id, std::string frame_id,
                 std::int64_t timestamp);
void save_frame_png(const Frame& frame, const std::filesystem::path& path);

/// Single-channel PNG: 0 = non-road, anything above 127 = road.
LabelMask load_mask(const std::filesystem::path& path, Provenance provenance,
                    std::string source_frame_id);
void save_mask_png(const LabelMask& mask, const std::filesystem::path& path);

/// Decodes an in-memory image body; returns false if it is not a decodable image.
bool is_decodable_image(std::span<const std::uint8_t> body);

}  // namespace roadlabel
