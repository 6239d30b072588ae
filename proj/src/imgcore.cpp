#include "roadlabel/imgcore.hpp"

#include "roadlabel/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace roadlabel {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidTransform: return "invalid_transform";
    case ErrorKind::DimensionMismatch: return "dimension_mismatch";
    case ErrorKind::ZeroEnergy: return "zero_energy";
    case ErrorKind::DegenerateScene: return "degenerate_scene";
    case ErrorKind::UnknownFrame: return "unknown_frame";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
    case ErrorKind::Validation: return "validation";
    }
    return "unknown";
}

std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::Manual: return "manual";
    case Provenance::Reuse: return "reuse";
    case Provenance::Corrected: return "corrected";
    }
    return "unknown";
}

void Frame::validate() const {
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::Validation, "frame " + frame_id + " has non-positive dimensions");
    if (channels != 1 && channels != 3)
        throw Error(ErrorKind::Validation, "frame " + frame_id + " must have 1 or 3 channels");
    if (pixels.size() != static_cast<std::size_t>(width) * height * channels)
        throw Error(ErrorKind::Validation, "frame " + frame_id + " pixel buffer size mismatch");
}

GrayImage::GrayImage(int width, int height, float fill)
    : width_(width), height_(height), values_(static_cast<std::size_t>(width) * height, fill) {
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::Validation, "image dimensions must be positive");
}

GrayImage::GrayImage(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width <= 0 || height <= 0)
        throw Error(ErrorKind::Validation, "image dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(width) * height)
        throw Error(ErrorKind::Validation, "image buffer size mismatch");
}

double wrap_angle(double radians) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double a = std::fmod(radians, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

Point2 SimilarityTransform::apply(Point2 p) const {
    const double c = std::cos(rotation);
    const double s = std::sin(rotation);
    return {scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty};
}

SimilarityTransform compose(const SimilarityTransform& first, const SimilarityTransform& second) {
    const Point2 t = second.apply({first.tx, first.ty});
    return {first.scale * second.scale, wrap_angle(first.rotation + second.rotation), t.x, t.y};
}

SimilarityTransform invert(const SimilarityTransform& t) {
    if (!(t.scale > 0.0) || !std::isfinite(t.scale))
        throw Error(ErrorKind::InvalidTransform, "cannot invert transform with scale <= 0");
    const double inv_scale = 1.0 / t.scale;
    const double c = std::cos(-t.rotation);
    const double s = std::sin(-t.rotation);
    return {inv_scale, wrap_angle(-t.rotation), -inv_scale * (c * t.tx - s * t.ty),
            -inv_scale * (s * t.tx + c * t.ty)};
}

std::size_t LabelMask::count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

GrayImage to_gray(const Frame& frame) {
    frame.validate();
    std::vector<float> out(static_cast<std::size_t>(frame.width) * frame.height);
    if (frame.channels == 1) {
        std::transform(frame.pixels.begin(), frame.pixels.end(), out.begin(),
                       [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const std::uint8_t* px = &frame.pixels[3 * i];
            const double luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
            out[i] = static_cast<float>(std::clamp(luma / 255.0, 0.0, 1.0));
        }
    }
    return GrayImage(frame.width, frame.height, std::move(out));
}

Frame to_frame(const GrayImage& img, std::string camera_id, std::string frame_id,
               std::int64_t timestamp) {
    Frame f{std::move(camera_id), std::move(frame_id), timestamp, img.width(), img.height(), 1, {}};
    f.pixels.resize(img.values().size());
    std::transform(img.values().begin(), img.values().end(), f.pixels.begin(), [](float v) {
        return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
    });
    return f;
}

namespace {

// Iterates target pixels and yields their source-image coordinates under t^-1.
template <typename Fn>
void for_each_source_coord(int width, int height, const SimilarityTransform& t, Fn&& fn) {
    const SimilarityTransform inv = invert(t);
    const double cx = (width - 1) / 2.0;
    const double cy = (height - 1) / 2.0;
    const double c = std::cos(inv.rotation) * inv.scale;
    const double s = std::sin(inv.rotation) * inv.scale;
    for (int y = 0; y < height; ++y) {
        const double qy = y - cy;
        for (int x = 0; x < width; ++x) {
            const double qx = x - cx;
            const double sx = c * qx - s * qy + inv.tx + cx;
            const double sy = s * qx + c * qy + inv.ty + cy;
            fn(x, y, sx, sy);
        }
    }
}

}  // namespace

GrayImage warp_image(const GrayImage& img, const SimilarityTransform& t) {
    GrayImage out(img.width(), img.height(), 0.0f);
    const int w = img.width();
    const int h = img.height();
    constexpr double eps = 1e-9;
    for_each_source_coord(w, h, t, [&](int x, int y, double sx, double sy) {
        if (sx < -eps || sy < -eps || sx > w - 1 + eps || sy > h - 1 + eps) return;
        sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const double fx = sx - x0;
        const double fy = sy - y0;
        const int x1 = std::min(x0 + 1, w - 1);
        const int y1 = std::min(y0 + 1, h - 1);
        double v = img.at(x0, y0);
        if (fx != 0.0 || fy != 0.0) {
            v = (1 - fx) * (1 - fy) * img.at(x0, y0) + fx * (1 - fy) * img.at(x1, y0) +
                (1 - fx) * fy * img.at(x0, y1) + fx * fy * img.at(x1, y1);
        }
        out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    });
    return out;
}

LabelMask warp_mask(const LabelMask& mask, const SimilarityTransform& t) {
    LabelMask out(mask.width, mask.height, Provenance::Corrected, mask.source_frame_id);
    const int w = mask.width;
    const int h = mask.height;
    for_each_source_coord(w, h, t, [&](int x, int y, double sx, double sy) {
        const long ix = std::lround(sx);
        const long iy = std::lround(sy);
        if (ix < 0 || iy < 0 || ix >= w || iy >= h) return;
        out.at(x, y) = mask.at(static_cast<int>(ix), static_cast<int>(iy)) ? 1 : 0;
    });
    return out;
}

LabelMask subtract(const LabelMask& road, const LabelMask& excluded) {
    if (road.width != excluded.width || road.height != excluded.height)
        throw Error(ErrorKind::DimensionMismatch, "exclusion mask dimensions differ from label");
    LabelMask out = road;
    for (std::size_t i = 0; i < out.bits.size(); ++i)
        out.bits[i] = (road.bits[i] && !excluded.bits[i]) ? 1 : 0;
    return out;
}

Frame overlay_mask(const Frame& frame, const LabelMask& mask, double alpha) {
    frame.validate();
    if (frame.width != mask.width || frame.height != mask.height)
        throw Error(ErrorKind::DimensionMismatch, "overlay mask differs in size from frame");
    Frame out = frame;
    out.channels = 3;
    out.pixels.resize(static_cast<std::size_t>(frame.width) * frame.height * 3);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        std::uint8_t rgb[3];
        for (int c = 0; c < 3; ++c) rgb[c] = frame.pixels[i * frame.channels + (frame.channels == 3 ? c : 0)];
        for (int c = 0; c < 3; ++c) {
            double v = rgb[c];
            if (mask.bits[i]) v = (1.0 - alpha) * v + alpha * (c == 1 ? 255.0 : 0.0);
            out.pixels[3 * i + c] = static_cast<std::uint8_t>(std::lround(v));
        }
    }
    return out;
}

Frame load_frame(const std::filesystem::path& path, std::string camera_id, std::string frame_id,
                 std::int64_t timestamp) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (img.empty()) throw Error(ErrorKind::Io, "cannot read image " + path.string());
    if (img.depth() != CV_8U) {
        cv::Mat tmp;
        img.convertTo(tmp, CV_8U, img.depth() == CV_16U ? 1.0 / 257.0 : 1.0);
        img = tmp;
    }
    Frame f{std::move(camera_id), std::move(frame_id), timestamp, img.cols, img.rows, 0, {}};
    cv::Mat converted;
    switch (img.channels()) {
    case 1: converted = img; f.channels = 1; break;
    case 3: cv::cvtColor(img, converted, cv::COLOR_BGR2RGB); f.channels = 3; break;
    case 4: cv::cvtColor(img, converted, cv::COLOR_BGRA2RGB); f.channels = 3; break;
    default: throw Error(ErrorKind::Io, "unsupported channel count in " + path.string());
    }
    if (!converted.isContinuous()) converted = converted.clone();
    f.pixels.assign(converted.data, converted.data + converted.total() * converted.elemSize());
    return f;
}

void save_frame_png(const Frame& frame, const std::filesystem::path& path) {
    frame.validate();
    cv::Mat img(frame.height, frame.width, frame.channels == 1 ? CV_8UC1 : CV_8UC3,
                const_cast<std::uint8_t*>(frame.pixels.data()));
    cv::Mat bgr;
    if (frame.channels == 3)
        cv::cvtColor(img, bgr, cv::COLOR_RGB2BGR);
    else
        bgr = img;
    if (!cv::imwrite(path.string(), bgr))
        throw Error(ErrorKind::Io, "cannot write image " + path.string());
}

LabelMask load_mask(const std::filesystem::path& path, Provenance provenance,
                    std::string source_frame_id) {
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (img.empty()) throw Error(ErrorKind::Io, "cannot read mask " + path.string());
    LabelMask mask(img.cols, img.rows, provenance, std::move(source_frame_id));
    for (int y = 0; y < img.rows; ++y) {
        const auto* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < img.cols; ++x) mask.at(x, y) = row[x] > 127 ? 1 : 0;
    }
    return mask;
}

void save_mask_png(const LabelMask& mask, const std::filesystem::path& path) {
    cv::Mat img(mask.height, mask.width, CV_8UC1);
    for (int y = 0; y < mask.height; ++y) {
        auto* row = img.ptr<std::uint8_t>(y);
        for (int x = 0; x < mask.width; ++x) row[x] = mask.at(x, y) ? 255 : 0;
    }
    if (!cv::imwrite(path.string(), img))
        throw Error(ErrorKind::Io, "cannot write mask " + path.string());
}

bool is_decodable_image(std::span<const std::uint8_t> body) {
    if (body.size() < 8) return false;
    const bool jpeg = body[0] == 0xFF && body[1] == 0xD8 && body[2] == 0xFF;
    const bool png = body[0] == 0x89 && body[1] == 'P' && body[2] == 'N' && body[3] == 'G';
    if (!jpeg && !png) return false;
    cv::Mat raw(1, static_cast<int>(body.size()), CV_8UC1, const_cast<std::uint8_t*>(body.data()));
    return !cv::imdecode(raw, cv::IMREAD_UNCHANGED).empty();
}

}  // namespace roadlabel
