#include "loopclose/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "loopclose/rng.hpp"

namespace loopclose {

namespace {

// Bresenham circle of radius 3, clockwise from the top.
constexpr std::array<std::array<int, 2>, 16> kRing = {{{0, -3},
                                                       {1, -3},
                                                       {2, -2},
                                                       {3, -1},
                                                       {3, 0},
                                                       {3, 1},
                                                       {2, 2},
                                                       {1, 3},
                                                       {0, 3},
                                                       {-1, 3},
                                                       {-2, 2},
                                                       {-3, 1},
                                                       {-3, 0},
                                                       {-3, -1},
                                                       {-2, -2},
                                                       {-1, -3}}};

constexpr int kArcLength = 9;

// Segment-test score at (x, y): sum of |I_p - I_c| over the contiguous arc of
// at least 9 ring pixels that are all brighter or all darker than the center
// by more than the threshold. Zero when there is no such arc.
double segment_score(const GrayImage& img, int x, int y, int threshold) {
    const int center = img.at(x, y);
    std::array<int, 16> state{};
    std::array<int, 16> diff{};
    for (int i = 0; i < 16; ++i) {
        const int v = img.at(x + kRing[i][0], y + kRing[i][1]);
        diff[i] = std::abs(v - center);
        state[i] = v > center + threshold ? 1 : (v < center - threshold ? -1 : 0);
    }
    for (const int polarity : {1, -1}) {
        int anchor = -1;
        for (int i = 0; i < 16; ++i) {
            if (state[i] != polarity) {
                anchor = i;
                break;
            }
        }
        if (anchor < 0) {
            double sum = 0;
            for (int i = 0; i < 16; ++i) {
                sum += diff[i];
            }
            return sum;
        }
        int run = 0;
        double run_sum = 0;
        for (int step = 1; step <= 16; ++step) {
            const int i = (anchor + step) % 16;
            if (state[i] == polarity) {
                ++run;
                run_sum += diff[i];
            } else {
                if (run >= kArcLength) {
                    return run_sum;
                }
                run = 0;
                run_sum = 0;
            }
        }
    }
    return 0;
}

void check_image(const GrayImage& img) {
    if (img.width < kMinImageSide || img.height < kMinImageSide ||
        img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) {
        throw Error(ErrorCode::InvalidImage, "image must be at least 32x32 with width*height pixels");
    }
}

BriefPattern make_standard_pattern() {
    BriefPattern pattern{};
    Lcg64 rng(BriefPattern::kSeed);
    const double sigma = 31.0 / 5.0;
    auto draw_point = [&](int& px, int& py) {
        for (;;) {
            px = static_cast<int>(std::lround(rng.gaussian() * sigma));
            py = static_cast<int>(std::lround(rng.gaussian() * sigma));
            if (px * px + py * py <= kPatchRadius * kPatchRadius) {
                return;
            }
        }
    };
    for (auto& pair : pattern.pairs) {
        do {
            draw_point(pair.ax, pair.ay);
            draw_point(pair.bx, pair.by);
        } while (pair.ax == pair.bx && pair.ay == pair.by);
    }
    return pattern;
}

}  // namespace

GrayImage::GrayImage(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

MappedMask::MappedMask(int w, int h, bool fill) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

Descriptor256 Descriptor256::operator~() const {
    Descriptor256 out;
    for (std::size_t i = 0; i < kBytes; ++i) {
        out.bytes_[i] = static_cast<std::uint8_t>(~bytes_[i]);
    }
    return out;
}

std::string Descriptor256::to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * kBytes);
    for (const auto b : bytes_) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

std::optional<Descriptor256> Descriptor256::from_hex(std::string_view hex) {
    if (hex.size() != 2 * kBytes) {
        return std::nullopt;
    }
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Descriptor256 d;
    for (std::size_t i = 0; i < kBytes; ++i) {
        const int hi = nibble(hex[2 * i]);
        const int lo = nibble(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            return std::nullopt;
        }
        d.bytes_[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return d;
}

const BriefPattern& BriefPattern::standard() {
    static const BriefPattern pattern = make_standard_pattern();
    return pattern;
}

std::vector<Keypoint> fast_corners(const GrayImage& img, const MappedMask* mask, int threshold) {
    check_image(img);
    if (threshold < 1) {
        throw Error(ErrorCode::InvalidConfig, "FAST threshold must be >= 1");
    }
    if (mask && (mask->width != img.width || mask->height != img.height ||
                 mask->bits.size() != img.pixels.size())) {
        throw Error(ErrorCode::MaskMismatch, "mask dimensions differ from the image");
    }
    const int w = img.width;
    const int h = img.height;
    std::vector<double> score(img.pixels.size(), 0.0);
    for (int y = kKeypointBorder; y < h - kKeypointBorder; ++y) {
        for (int x = kKeypointBorder; x < w - kKeypointBorder; ++x) {
            score[static_cast<std::size_t>(y) * w + x] = segment_score(img, x, y, threshold);
        }
    }

    std::vector<Keypoint> out;
    for (int y = kKeypointBorder; y < h - kKeypointBorder; ++y) {
        for (int x = kKeypointBorder; x < w - kKeypointBorder; ++x) {
            const std::size_t idx = static_cast<std::size_t>(y) * w + x;
            const double s = score[idx];
            if (s <= 0) {
                continue;
            }
            bool keep = true;
            for (int dy = -1; dy <= 1 && keep; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) {
                        continue;
                    }
                    const std::size_t nidx = static_cast<std::size_t>(y + dy) * w + (x + dx);
                    const double ns = score[nidx];
                    // Equal neighbours: the earlier one in raster order wins.
                    if (ns > s || (ns == s && nidx < idx)) {
                        keep = false;
                        break;
                    }
                }
            }
            if (keep && (!mask || mask->at(x, y))) {
                out.push_back(Keypoint{x, y, s, 0.0});
            }
        }
    }
    return out;
}

double orientation(const GrayImage& img, const Keypoint& kp, int radius) {
    if (kp.x - radius < 0 || kp.y - radius < 0 || kp.x + radius >= img.width || kp.y + radius >= img.height) {
        throw Error(ErrorCode::PatchOutOfBounds, "orientation patch leaves the image");
    }
    double m10 = 0;
    double m01 = 0;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > radius * radius) {
                continue;
            }
            const double v = img.at(kp.x + dx, kp.y + dy);
            m10 += dx * v;
            m01 += dy * v;
        }
    }
    if (std::abs(m01) < 1e-9 && std::abs(m10) < 1e-9) {
        return 0.0;
    }
    double theta = std::atan2(m01, m10);
    if (theta <= -std::numbers::pi) {
        theta = std::numbers::pi;
    }
    return theta;
}

Descriptor256 brief_descriptor(const GrayImage& img, const Keypoint& kp, const BriefPattern& pattern) {
    if (kp.x - kPatchRadius < 0 || kp.y - kPatchRadius < 0 || kp.x + kPatchRadius >= img.width ||
        kp.y + kPatchRadius >= img.height) {
        throw Error(ErrorCode::PatchOutOfBounds, "descriptor patch leaves the image");
    }
    const double c = std::cos(kp.orientation);
    const double s = std::sin(kp.orientation);
    auto sample = [&](int px, int py) {
        const int rx = static_cast<int>(std::lround(c * px - s * py));
        const int ry = static_cast<int>(std::lround(s * px + c * py));
        return img.at(kp.x + rx, kp.y + ry);
    };
    Descriptor256 d;
    for (std::size_t i = 0; i < Descriptor256::kBits; ++i) {
        const auto& p = pattern.pairs[i];
        d.set_bit(i, sample(p.ax, p.ay) < sample(p.bx, p.by));
    }
    return d;
}

int informativeness_score(const Descriptor256& d) {
    int count = 0;
    for (const auto b : d.bytes()) {
        count += std::popcount(b);
    }
    return count;
}

std::vector<InformativeFeature> select_top_k(std::vector<InformativeFeature> features, std::size_t k) {
    std::stable_sort(features.begin(), features.end(), [](const InformativeFeature& a, const InformativeFeature& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.keypoint.response != b.keypoint.response) return a.keypoint.response > b.keypoint.response;
        if (a.keypoint.y != b.keypoint.y) return a.keypoint.y < b.keypoint.y;
        return a.keypoint.x < b.keypoint.x;
    });
    if (features.size() > k) {
        features.resize(k);
    }
    return features;
}

std::vector<InformativeFeature> extract_features(const GrayImage& img, const MappedMask* mask, int fast_threshold) {
    std::vector<InformativeFeature> out;
    for (Keypoint kp : fast_corners(img, mask, fast_threshold)) {
        kp.orientation = orientation(img, kp, kPatchRadius);
        InformativeFeature f;
        f.keypoint = kp;
        f.descriptor = brief_descriptor(img, kp);
        f.score = informativeness_score(f.descriptor);
        out.push_back(f);
    }
    return out;
}

}  // namespace loopclose
