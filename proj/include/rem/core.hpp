#pragma once

// Domain types shared by the whole toolkit: positions, beacon samples,
// scan volume and LPS anchor geometry. Everything here is an immutable
// value type; validation canonicalizes and range-checks raw records.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rem {

// Value-or-error carrier used by validation and parsing paths.
template <typename T>
class Result {
public:
    static Result ok(T value) {
        Result r;
        r.value_ = std::move(value);
        return r;
    }
    static Result fail(std::string message) {
        Result r;
        r.error_ = std::move(message);
        return r;
    }

    explicit operator bool() const { return value_.has_value(); }

    const T& value() const {
        if (!value_) throw std::logic_error("Result::value on error: " + error_);
        return *value_;
    }
    T&& take() {
        if (!value_) throw std::logic_error("Result::take on error: " + error_);
        return std::move(*value_);
    }
    const std::string& error() const { return error_; }

private:
    Result() = default;
    std::optional<T> value_;
    std::string error_;
};

struct Position {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
    friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(const Position& a, const Position& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Scan volume: a rectangular cuboid anchored at the origin.
struct VolumeSpec {
    double x_len = 3.74;
    double y_len = 3.20;
    double z_len = 2.10;

    bool valid() const { return x_len > 0 && y_len > 0 && z_len > 0; }
    Position center() const { return {x_len / 2, y_len / 2, z_len / 2}; }
    bool contains(const Position& p, double margin = 0.0) const {
        return p.x >= margin && p.x <= x_len - margin &&
               p.y >= margin && p.y <= y_len - margin &&
               p.z >= margin && p.z <= z_len - margin;
    }
    friend bool operator==(const VolumeSpec&, const VolumeSpec&) = default;
};

// One received beacon observation. rssi is an integer dBm as reported by
// the scanning radio; mac is canonical (lowercase, colon-separated).
struct BeaconSample {
    std::int64_t timestamp_ms = 0;
    Position position;
    std::string ssid;
    std::string mac;
    int rssi = 0;
    int channel = 1;

    friend bool operator==(const BeaconSample&, const BeaconSample&) = default;
};

constexpr int kRssiMin = -100;
constexpr int kRssiMax = 0;
constexpr int kChannelMin = 1;
constexpr int kChannelMax = 14;

// Accepts colon or hyphen separators and any letter case; returns the
// lowercase colon form, or nothing if the text is not 6 hex octets.
inline std::optional<std::string> canonical_mac(const std::string& text) {
    if (text.size() != 17) return std::nullopt;
    std::string out;
    out.reserve(17);
    for (size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (i % 3 == 2) {
            if (c != ':' && c != '-') return std::nullopt;
            out.push_back(':');
        } else {
            if (!std::isxdigit(static_cast<unsigned char>(c))) return std::nullopt;
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

// Canonicalizes and range-checks a raw record. The error message names
// the offending field. Idempotent: validating a valid sample returns it
// unchanged.
inline Result<BeaconSample> validate_sample(BeaconSample raw) {
    if (raw.timestamp_ms < 0)
        return Result<BeaconSample>::fail("timestamp must be >= 0");
    if (!raw.position.finite())
        return Result<BeaconSample>::fail("position coordinates must be finite");
    if (raw.rssi < kRssiMin || raw.rssi > kRssiMax)
        return Result<BeaconSample>::fail("rssi out of range [-100, 0]");
    if (raw.channel < kChannelMin || raw.channel > kChannelMax)
        return Result<BeaconSample>::fail("channel out of range [1, 14]");
    auto mac = canonical_mac(raw.mac);
    if (!mac)
        return Result<BeaconSample>::fail("malformed mac: '" + raw.mac + "'");
    raw.mac = *mac;
    return Result<BeaconSample>::ok(std::move(raw));
}

// Ordered sample collection. Iteration order is the ingestion order and
// is stable across runs.
struct Dataset {
    std::vector<BeaconSample> samples;
    std::string provenance;

    size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

struct Anchor {
    int id = 0;
    Position position;
};

// The LPS anchor cage at the corners of the scan volume.
struct AnchorLayout {
    std::vector<Anchor> anchors;
};

inline AnchorLayout default_anchor_layout() {
    return AnchorLayout{{
        {0, {0.00, 0.00, 0.00}},
        {1, {0.00, 2.30, 2.10}},
        {2, {3.74, 2.31, 0.00}},
        {3, {3.74, 0.00, 2.09}},
        {4, {0.00, 0.00, 2.10}},
        {5, {0.00, 2.33, 0.00}},
        {6, {3.74, 2.30, 2.09}},
        {7, {3.74, 0.00, 0.00}},
    }};
}

// Distance from a point to the boundary (union of the six faces) of a
// volume; zero when the point lies on a face.
inline double distance_to_boundary(const VolumeSpec& v, const Position& p) {
    const double dx = std::min(std::abs(p.x), std::abs(v.x_len - p.x));
    const double dy = std::min(std::abs(p.y), std::abs(v.y_len - p.y));
    const double dz = std::min(std::abs(p.z), std::abs(v.z_len - p.z));
    return std::min({dx, dy, dz});
}

}  // namespace rem
