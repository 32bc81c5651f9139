#pragma once

// Synthetic access-point environments: log-distance path loss with
// lognormal shadowing, integer-dBm receiver model with a detection
// threshold, and a seeded generator calibrated to the scale of the
// collected-data characteristics (73 APs, 5 channels, shared SSIDs).

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rem/core.hpp"

namespace rem {

struct AccessPoint {
    std::string mac;
    std::string ssid;
    int channel = 1;
    Position position;             // may lie outside the scan volume
    double tx_power_ref = -40.0;   // dBm at 1 m
    double path_loss_exponent = 2.0;
};

struct RfEnvironment {
    std::vector<AccessPoint> aps;
    double shadow_sigma = 2.0;          // dB
    double detection_threshold = -95.0; // dBm
    std::uint64_t seed = 0;
};

// Log-distance model: tx_ref - 10*n*log10(d), distance clamped to 0.1 m,
// plus N(0, sigma^2) shadowing, rounded to integer dBm and clamped to
// [-100, 0]. Values below the detection threshold are not received.
inline std::optional<int> rssi_at(const AccessPoint& ap, const Position& where,
                                  double shadow_sigma, double detection_threshold,
                                  std::mt19937_64& rng) {
    const double d = std::max(distance(ap.position, where), 0.1);
    double rssi = ap.tx_power_ref - 10.0 * ap.path_loss_exponent * std::log10(d);
    if (shadow_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, shadow_sigma);
        rssi += noise(rng);
    }
    const int value = static_cast<int>(
        std::clamp<long long>(std::llround(rssi), kRssiMin, kRssiMax));
    if (value < detection_threshold) return std::nullopt;
    return value;
}

inline std::optional<int> rssi_at(const RfEnvironment& env, const AccessPoint& ap,
                                  const Position& where, std::mt19937_64& rng) {
    return rssi_at(ap, where, env.shadow_sigma, env.detection_threshold, rng);
}

// APs uniform in a ball around the volume center; channel mass
// concentrated on 1/6/11 with a small spill onto two side channels;
// SSID pool smaller than the AP count, with an ISP-like shared subset.
inline RfEnvironment generate_environment(std::uint64_t seed, size_t n_aps,
                                          const VolumeSpec& volume, double placement_radius,
                                          double shadow_sigma = 2.0,
                                          double detection_threshold = -95.0) {
    RfEnvironment env;
    env.seed = seed;
    env.shadow_sigma = shadow_sigma;
    env.detection_threshold = detection_threshold;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const size_t n_ssids =
        std::max<size_t>(1, static_cast<size_t>(std::llround(static_cast<double>(n_aps) * 49.0 / 73.0)));
    const size_t n_shared = std::min<size_t>(8, n_ssids);
    std::vector<std::string> ssid_pool;
    for (size_t i = 0; i < n_ssids; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "net-%03zu", i);
        ssid_pool.emplace_back(buf);
    }

    const Position center = volume.center();
    std::set<std::string> used_macs;
    std::uniform_int_distribution<int> octet(0, 255);

    for (size_t i = 0; i < n_aps; ++i) {
        AccessPoint ap;
        do {
            char mac[18];
            std::snprintf(mac, sizeof(mac), "%02x:%02x:%02x:%02x:%02x:%02x", octet(rng),
                          octet(rng), octet(rng), octet(rng), octet(rng), octet(rng));
            ap.mac = mac;
        } while (!used_macs.insert(ap.mac).second);

        // uniform in the ball, by rejection from the cube
        for (;;) {
            const double x = (2.0 * unit(rng) - 1.0) * placement_radius;
            const double y = (2.0 * unit(rng) - 1.0) * placement_radius;
            const double z = (2.0 * unit(rng) - 1.0) * placement_radius;
            if (x * x + y * y + z * z <= placement_radius * placement_radius) {
                ap.position = {center.x + x, center.y + y, center.z + z};
                break;
            }
        }

        const double u = unit(rng);
        if (u < 0.28) ap.channel = 1;
        else if (u < 0.58) ap.channel = 6;
        else if (u < 0.88) ap.channel = 11;
        else if (u < 0.94) ap.channel = 3;
        else ap.channel = 13;

        ap.tx_power_ref = -60.0 + 40.0 * unit(rng);
        ap.path_loss_exponent = 1.6 + 1.9 * unit(rng);
        ap.ssid = i < n_ssids
                      ? ssid_pool[i]
                      : ssid_pool[static_cast<size_t>(unit(rng) * static_cast<double>(n_shared))];
        env.aps.push_back(std::move(ap));
    }
    return env;
}

// The bundled scenario used by `simulate --scenario default` and the
// end-to-end tests: 73 APs at the collected-data scale.
inline RfEnvironment default_scenario() {
    return generate_environment(42, 73, VolumeSpec{}, 12.0, 2.0, -95.0);
}

inline nlohmann::json environment_to_json(const RfEnvironment& env) {
    nlohmann::json aps = nlohmann::json::array();
    for (const auto& ap : env.aps)
        aps.push_back({{"mac", ap.mac},
                       {"ssid", ap.ssid},
                       {"channel", ap.channel},
                       {"position", {ap.position.x, ap.position.y, ap.position.z}},
                       {"tx_power_ref", ap.tx_power_ref},
                       {"path_loss_exponent", ap.path_loss_exponent}});
    return {{"format_version", 1},
            {"aps", std::move(aps)},
            {"shadow_sigma", env.shadow_sigma},
            {"detection_threshold", env.detection_threshold},
            {"seed", env.seed}};
}

inline Result<RfEnvironment> environment_from_json(const nlohmann::json& j) {
    using R = Result<RfEnvironment>;
    try {
        if (j.value("format_version", 0) != 1)
            return R::fail("unsupported environment format_version");
        RfEnvironment env;
        env.shadow_sigma = j.at("shadow_sigma").get<double>();
        env.detection_threshold = j.at("detection_threshold").get<double>();
        env.seed = j.at("seed").get<std::uint64_t>();
        std::set<std::string> macs;
        for (const auto& a : j.at("aps")) {
            AccessPoint ap;
            ap.mac = a.at("mac").get<std::string>();
            ap.ssid = a.at("ssid").get<std::string>();
            ap.channel = a.at("channel").get<int>();
            auto pos = a.at("position").get<std::vector<double>>();
            if (pos.size() != 3) return R::fail("bad AP position");
            ap.position = {pos[0], pos[1], pos[2]};
            ap.tx_power_ref = a.at("tx_power_ref").get<double>();
            ap.path_loss_exponent = a.at("path_loss_exponent").get<double>();
            if (ap.channel < kChannelMin || ap.channel > kChannelMax)
                return R::fail("AP channel out of range");
            if (!macs.insert(ap.mac).second) return R::fail("duplicate AP mac " + ap.mac);
            env.aps.push_back(std::move(ap));
        }
        if (env.shadow_sigma < 0) return R::fail("shadow_sigma must be >= 0");
        return R::ok(std::move(env));
    } catch (const std::exception& e) {
        return R::fail(std::string("bad environment json: ") + e.what());
    }
}

}  // namespace rem
