#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loopclose/types.hpp"

namespace loopclose {

/// Row-major 8-bit grayscale image.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const GrayImage&) const = default;
};

/// One flag per pixel; set flags mark pixels that belong to the reconstructed map.
struct MappedMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;

    MappedMask() = default;
    MappedMask(int w, int h, bool fill);

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
};

/// Keypoints keep a 16 px margin so the rotated descriptor patch always fits.
inline constexpr int kKeypointBorder = 16;
inline constexpr int kPatchRadius = 15;
inline constexpr int kMinImageSide = 32;

struct Keypoint {
    int x = 0;
    int y = 0;
    double response = 0;
    double orientation = 0;  ///< radians in (-pi, pi]

    bool operator==(const Keypoint&) const = default;
};

class Descriptor256 {
public:
    static constexpr std::size_t kBits = 256;
    static constexpr std::size_t kBytes = 32;

    Descriptor256() { bytes_.fill(0); }
    explicit Descriptor256(const std::array<std::uint8_t, kBytes>& bytes) : bytes_(bytes) {}

    bool bit(std::size_t i) const { return (bytes_[i >> 3] >> (i & 7)) & 1u; }
    void set_bit(std::size_t i, bool v) {
        const auto mask = static_cast<std::uint8_t>(1u << (i & 7));
        if (v) {
            bytes_[i >> 3] |= mask;
        } else {
            bytes_[i >> 3] &= static_cast<std::uint8_t>(~mask);
        }
    }

    const std::array<std::uint8_t, kBytes>& bytes() const { return bytes_; }
    std::array<std::uint8_t, kBytes>& bytes() { return bytes_; }

    Descriptor256 operator~() const;

    /// 64 lowercase hex characters, byte 0 first.
    std::string to_hex() const;
    static std::optional<Descriptor256> from_hex(std::string_view hex);

    bool operator==(const Descriptor256&) const = default;

private:
    std::array<std::uint8_t, kBytes> bytes_;
};

struct InformativeFeature {
    Keypoint keypoint;
    Descriptor256 descriptor;
    int score = 0;  ///< popcount of descriptor

    bool operator==(const InformativeFeature&) const = default;
};

/// Sampling pairs for the binary test, offsets relative to the keypoint.
struct BriefPattern {
    struct Pair {
        int ax, ay, bx, by;
    };
    std::array<Pair, Descriptor256::kBits> pairs;

    static constexpr std::uint64_t kSeed = 0xB121F;

    /// Pairs drawn once from an isotropic Gaussian (sigma = 31/5) clipped to
    /// the radius-15 disc, using Lcg64(kSeed).
    static const BriefPattern& standard();
};

/// FAST 9-of-16 segment test with 3x3 non-maximum suppression. Only pixels
/// with a full descriptor margin are candidates. The mask, when given, filters
/// the suppressed result.
std::vector<Keypoint> fast_corners(const GrayImage& img, const MappedMask* mask, int threshold);

/// Intensity-centroid angle over the disc of `radius` around the keypoint.
double orientation(const GrayImage& img, const Keypoint& kp, int radius = kPatchRadius);

/// Steered binary descriptor: the pattern is rotated by kp.orientation and
/// rounded to the nearest pixel; bit i is set iff I(a_i) < I(b_i).
Descriptor256 brief_descriptor(const GrayImage& img, const Keypoint& kp,
                               const BriefPattern& pattern = BriefPattern::standard());

int informativeness_score(const Descriptor256& d);

/// Highest score first; ties on higher response, then raster order (y, x).
std::vector<InformativeFeature> select_top_k(std::vector<InformativeFeature> features, std::size_t k);

/// Detect, orient, describe and score every keypoint (no top-K cut).
std::vector<InformativeFeature> extract_features(const GrayImage& img, const MappedMask* mask, int fast_threshold);

}  // namespace loopclose
