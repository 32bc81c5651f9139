#pragma once

// Waypoint lattice generation, multi-drone route assignment with a
// serpentine sweep, flight-time budgeting, the scan-hover control-loop
// simulation and the sequential multi-drone mission simulation that
// produces a beacon-sample Dataset plus an event log.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rem/core.hpp"
#include "rem/synthetic.hpp"

namespace rem {

struct Waypoint {
    Position position;
    double scan_seconds = 3.0;
};

struct Route {
    int drone_id = 0;
    Position start_position;
    double yaw_deg = 0.0;
    std::vector<Waypoint> waypoints;
};

struct TimingModel {
    double fly_seconds = 4.0;
    double scan_seconds = 3.0;
    double takeoff_seconds = 10.0;
    double land_seconds = 10.0;
    double handover_seconds = 5.0;   // gap between one drone landing and the next taking off
    double endurance_seconds = 372.0;
};

// Tensor grid of nx*ny*nz waypoints, evenly spaced inside
// [margin, len - margin] on each axis; a single point sits mid-axis.
inline Result<std::vector<Waypoint>> generate_lattice(const VolumeSpec& volume, int nx, int ny,
                                                      int nz, double margin,
                                                      double scan_seconds = 3.0) {
    using R = Result<std::vector<Waypoint>>;
    if (nx < 1 || ny < 1 || nz < 1) return R::fail("lattice counts must be >= 1");
    if (margin < 0) return R::fail("margin must be >= 0");
    const double lens[3] = {volume.x_len, volume.y_len, volume.z_len};
    const int counts[3] = {nx, ny, nz};
    std::array<std::vector<double>, 3> coords;
    for (int a = 0; a < 3; ++a) {
        const double lo = margin, hi = lens[a] - margin;
        if (!(hi > lo) && counts[a] > 1) return R::fail("margin leaves no interior");
        if (hi < lo) return R::fail("margin leaves no interior");
        if (counts[a] == 1) {
            coords[a].push_back((lo + hi) / 2.0);
        } else {
            const double step = (hi - lo) / static_cast<double>(counts[a] - 1);
            for (int i = 0; i < counts[a]; ++i)
                coords[a].push_back(lo + step * static_cast<double>(i));
        }
    }
    std::vector<Waypoint> out;
    out.reserve(static_cast<size_t>(nx) * ny * nz);
    for (double x : coords[0])
        for (double y : coords[1])
            for (double z : coords[2])
                out.push_back({{x, y, z}, scan_seconds});
    return R::ok(std::move(out));
}

namespace detail {

inline std::array<std::vector<double>, 3> axis_values(const std::vector<Waypoint>& wps) {
    std::array<std::vector<double>, 3> vals;
    for (const auto& w : wps) {
        vals[0].push_back(w.position.x);
        vals[1].push_back(w.position.y);
        vals[2].push_back(w.position.z);
    }
    for (auto& v : vals) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return vals;
}

inline size_t rank_of(const std::vector<double>& sorted, double v) {
    return static_cast<size_t>(std::lower_bound(sorted.begin(), sorted.end(), v) -
                               sorted.begin());
}

// Contiguous plane runs along `axis`, accumulated until the run count
// is as close as possible to an even share of the remaining waypoints.
inline std::vector<int> slab_assignment(const std::vector<Waypoint>& wps,
                                        const std::vector<double>& planes, int axis,
                                        int n_drones) {
    std::vector<size_t> plane_count(planes.size(), 0);
    auto coord = [&](const Waypoint& w) {
        return axis == 0 ? w.position.x : axis == 1 ? w.position.y : w.position.z;
    };
    for (const auto& w : wps) ++plane_count[rank_of(planes, coord(w))];

    n_drones = std::min<int>(n_drones, static_cast<int>(planes.size()));
    std::vector<int> drone_of_plane(planes.size(), n_drones - 1);
    size_t remaining = wps.size();
    size_t plane = 0;
    for (int d = 0; d < n_drones; ++d) {
        const size_t drones_left = static_cast<size_t>(n_drones - d);
        const size_t planes_left = planes.size() - plane;
        const size_t max_planes = planes_left - (drones_left - 1);
        const double target = static_cast<double>(remaining) / static_cast<double>(drones_left);
        size_t taken = 0, taken_planes = 0;
        while (taken_planes < max_planes) {
            if (d + 1 < n_drones && taken_planes > 0) {
                const double with = std::abs(static_cast<double>(taken + plane_count[plane]) - target);
                const double without = std::abs(static_cast<double>(taken) - target);
                if (with > without) break;
            }
            drone_of_plane[plane] = d;
            taken += plane_count[plane];
            ++plane;
            ++taken_planes;
        }
        remaining -= taken;
    }
    std::vector<int> drone_of_wp(wps.size());
    for (size_t i = 0; i < wps.size(); ++i)
        drone_of_wp[i] = drone_of_plane[rank_of(planes, coord(wps[i]))];
    return drone_of_wp;
}

}  // namespace detail

// Partitions waypoints into one route per drone: contiguous plane slabs
// along the axis that best equalizes counts, each route ordered by a
// serpentine sweep so consecutive waypoints are lattice neighbours.
inline std::vector<Route> assign_routes(const std::vector<Waypoint>& waypoints, int n_drones) {
    if (waypoints.empty() || n_drones < 1) return {};
    n_drones = std::min<int>(n_drones, static_cast<int>(waypoints.size()));
    const auto axes = detail::axis_values(waypoints);

    int best_axis = 0;
    std::vector<int> best_assign;
    size_t best_spread = waypoints.size() + 1;
    for (int a = 0; a < 3; ++a) {
        if (axes[a].size() < static_cast<size_t>(n_drones)) continue;
        auto assign = detail::slab_assignment(waypoints, axes[a], a, n_drones);
        std::vector<size_t> counts(static_cast<size_t>(n_drones), 0);
        for (int d : assign) ++counts[static_cast<size_t>(d)];
        const size_t spread = *std::max_element(counts.begin(), counts.end()) -
                              *std::min_element(counts.begin(), counts.end());
        if (spread < best_spread) {
            best_spread = spread;
            best_axis = a;
            best_assign = std::move(assign);
        }
    }
    if (best_assign.empty())  // fewer planes than drones on every axis
        best_assign = detail::slab_assignment(waypoints, axes[0], 0, n_drones);

    const int a = best_axis;
    const int b = (a + 1) % 3, c = (a + 2) % 3;
    auto grid_index = [&](const Waypoint& w, int axis) {
        const double v = axis == 0 ? w.position.x : axis == 1 ? w.position.y : w.position.z;
        return detail::rank_of(axes[static_cast<size_t>(axis)], v);
    };

    const size_t nb = axes[static_cast<size_t>(b)].size();
    const size_t nc = axes[static_cast<size_t>(c)].size();
    auto snake_key = [&](const Waypoint& w) {
        const size_t ia = grid_index(w, a), ib = grid_index(w, b), ic = grid_index(w, c);
        const size_t ic_adj = ib % 2 == 0 ? ic : nc - 1 - ic;
        size_t plane_rank = ib * nc + ic_adj;
        if (ia % 2 == 1) plane_rank = nb * nc - 1 - plane_rank;
        return ia * nb * nc + plane_rank;
    };

    std::vector<Route> routes(static_cast<size_t>(*std::max_element(best_assign.begin(),
                                                                    best_assign.end()) + 1));
    for (size_t i = 0; i < waypoints.size(); ++i)
        routes[static_cast<size_t>(best_assign[i])].waypoints.push_back(waypoints[i]);
    for (size_t d = 0; d < routes.size(); ++d) {
        Route& r = routes[d];
        r.drone_id = static_cast<int>(d);
        std::stable_sort(r.waypoints.begin(), r.waypoints.end(),
                         [&](const Waypoint& x, const Waypoint& y) {
                             return snake_key(x) < snake_key(y);
                         });
        if (!r.waypoints.empty())
            r.start_position = {r.waypoints.front().position.x,
                                r.waypoints.front().position.y, 0.0};
    }
    return routes;
}

struct TimeEstimate {
    double seconds = 0.0;
    bool endurance_warning = false;
};

// takeoff + sum(fly + scan) per waypoint + land.
inline TimeEstimate estimate_time(const Route& route, const TimingModel& timing) {
    TimeEstimate e;
    e.seconds = timing.takeoff_seconds + timing.land_seconds;
    for (const auto& w : route.waypoints) e.seconds += timing.fly_seconds + w.scan_seconds;
    e.endurance_warning = e.seconds > timing.endurance_seconds;
    return e;
}

struct HoverSimConfig {
    double setpoint_period = 0.1;   // scan-position feedback interval
    double stale_timeout = 0.5;     // commander falls back after this silence
    double controller_gain = 2.0;   // 1/s, velocity command per meter of error
    double drift_velocity_sigma = 0.0;  // m/s random walk intensity
    std::uint64_t seed = 0;
};

struct HoverResult {
    // (t, x, y, z) displacement from the scan position, per 10 ms step
    std::vector<std::array<double, 4>> trajectory;
    double max_displacement = 0.0;
};

namespace detail {
constexpr double kHoverDt = 0.01;
constexpr double kVelocityResponseTau = 0.2;  // first-order command response
constexpr double kAttitudeDecayRate = 1.5;    // 1/s, attitude-zero fallback damping
}  // namespace detail

// Point-mass hover around the scan position. Feedback ON: a setpoint
// every setpoint_period commands velocity -gain * displacement, tracked
// with a first-order lag. Feedback OFF: free drift until stale_timeout,
// then attitude-zero mode decays velocity exponentially with no
// position correction.
inline HoverResult simulate_hover(const std::array<double, 3>& initial_velocity,
                                  const HoverSimConfig& cfg, bool feedback, double duration) {
    HoverResult res;
    std::array<double, 3> pos{0, 0, 0};
    std::array<double, 3> vel = initial_velocity;
    std::array<double, 3> cmd{0, 0, 0};
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> kick(0.0, 1.0);
    const double dt = detail::kHoverDt;
    const size_t steps = static_cast<size_t>(std::llround(duration / dt));
    const size_t period_steps =
        std::max<size_t>(1, static_cast<size_t>(std::llround(cfg.setpoint_period / dt)));
    const double noise_scale = cfg.drift_velocity_sigma * std::sqrt(dt);

    res.trajectory.reserve(steps + 1);
    res.trajectory.push_back({0.0, 0.0, 0.0, 0.0});
    double last_setpoint_t = feedback ? 0.0 : 0.0;  // held from before radio shutdown
    for (size_t s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        if (feedback && s % period_steps == 0) {
            for (int i = 0; i < 3; ++i) cmd[i] = -cfg.controller_gain * pos[i];
            last_setpoint_t = t;
        }
        const bool stale = (t - last_setpoint_t) > cfg.stale_timeout;
        for (int i = 0; i < 3; ++i) {
            if (feedback) {
                vel[i] += (cmd[i] - vel[i]) * (dt / detail::kVelocityResponseTau);
            } else if (stale) {
                vel[i] -= vel[i] * detail::kAttitudeDecayRate * dt;
            }
            if (noise_scale > 0.0) vel[i] += kick(rng) * noise_scale;
            pos[i] += vel[i] * dt;
        }
        const double disp = std::sqrt(pos[0] * pos[0] + pos[1] * pos[1] + pos[2] * pos[2]);
        res.max_displacement = std::max(res.max_displacement, disp);
        res.trajectory.push_back({t + dt, pos[0], pos[1], pos[2]});
    }
    return res;
}

struct MissionEvent {
    std::string type;  // takeoff | goto | scan-start | scan-end | land
    double t = 0.0;    // seconds from mission start
    int waypoint_index = -1;
    Position position;
};

struct DroneTimeline {
    int drone_id = 0;
    std::vector<MissionEvent> events;
    std::vector<std::array<double, 4>> trajectory;  // (t, x, y, z) at 10 Hz
};

struct MissionLog {
    std::vector<DroneTimeline> drones;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline Position lerp(const Position& a, const Position& b, double f) {
    return {a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f, a.z + (b.z - a.z) * f};
}

}  // namespace detail

// Executes the routes strictly in sequence and collects one sample per
// detectable AP per waypoint, at the drone's hover-jittered position.
// Deterministic per seed: replaying yields the identical Dataset and
// timeline.
inline Result<std::pair<Dataset, MissionLog>> simulate_mission(
    const std::vector<Route>& routes, const TimingModel& timing, const RfEnvironment& env,
    const HoverSimConfig& hover_cfg, std::uint64_t seed, bool force = false,
    std::int64_t base_timestamp_ms = 0) {
    using R = Result<std::pair<Dataset, MissionLog>>;
    if (routes.empty()) return R::fail("no routes");
    for (const auto& r : routes) {
        if (r.waypoints.empty()) return R::fail("route for drone " +
                                                std::to_string(r.drone_id) + " is empty");
        const TimeEstimate est = estimate_time(r, timing);
        if (est.endurance_warning && !force)
            return R::fail("route for drone " + std::to_string(r.drone_id) + " needs " +
                           std::to_string(est.seconds) + " s, over the endurance budget of " +
                           std::to_string(timing.endurance_seconds) + " s (use force)");
    }

    Dataset ds;
    ds.provenance = "simulation seed=" + std::to_string(seed);
    MissionLog log;
    std::mt19937_64 shadow_rng(detail::mix_seed(seed, 0x5ca));
    std::mt19937_64 drift_rng(detail::mix_seed(seed, 0xd1f));
    std::normal_distribution<double> gauss(0.0, 1.0);

    double t = 0.0;
    for (size_t ri = 0; ri < routes.size(); ++ri) {
        const Route& route = routes[ri];
        if (ri > 0) t += timing.handover_seconds;
        DroneTimeline timeline;
        timeline.drone_id = route.drone_id;
        auto log_point = [&](double at, const Position& p) {
            timeline.trajectory.push_back({at, p.x, p.y, p.z});
        };
        auto segment = [&](double start, double dur, const Position& from, const Position& to) {
            // 10 Hz samples, end point owned by the next segment
            const size_t n = std::max<size_t>(1, static_cast<size_t>(std::llround(dur * 10.0)));
            for (size_t i = 0; i < n; ++i) {
                const double f = static_cast<double>(i) / static_cast<double>(n);
                log_point(start + dur * f, detail::lerp(from, to, f));
            }
        };

        timeline.events.push_back({"takeoff", t, -1, route.start_position});
        Position cur = route.start_position;
        Position hover_alt = {route.start_position.x, route.start_position.y,
                              route.waypoints.front().position.z};
        segment(t, timing.takeoff_seconds, cur, hover_alt);
        t += timing.takeoff_seconds;
        cur = hover_alt;

        for (size_t wi = 0; wi < route.waypoints.size(); ++wi) {
            const Waypoint& wp = route.waypoints[wi];
            timeline.events.push_back({"goto", t, static_cast<int>(wi), wp.position});
            segment(t, timing.fly_seconds, cur, wp.position);
            t += timing.fly_seconds;

            timeline.events.push_back({"scan-start", t, static_cast<int>(wi), wp.position});
            HoverSimConfig wp_hover = hover_cfg;
            wp_hover.seed = detail::mix_seed(seed, (static_cast<std::uint64_t>(ri) << 32) | wi);
            const std::array<double, 3> v0 = {
                gauss(drift_rng) * hover_cfg.drift_velocity_sigma,
                gauss(drift_rng) * hover_cfg.drift_velocity_sigma,
                gauss(drift_rng) * hover_cfg.drift_velocity_sigma};
            const HoverResult hover = simulate_hover(v0, wp_hover, true, wp.scan_seconds);
            for (size_t i = 0; i < hover.trajectory.size(); i += 10) {
                const auto& p = hover.trajectory[i];
                log_point(t + p[0], {wp.position.x + p[1], wp.position.y + p[2],
                                     wp.position.z + p[3]});
            }

            const size_t n_aps = env.aps.size();
            for (size_t ai = 0; ai < n_aps; ++ai) {
                const AccessPoint& ap = env.aps[ai];
                const double offset =
                    (static_cast<double>(ai) + 0.5) * wp.scan_seconds / static_cast<double>(n_aps);
                const size_t hi = std::min<size_t>(
                    hover.trajectory.size() - 1,
                    static_cast<size_t>(std::llround(offset / detail::kHoverDt)));
                const auto& hp = hover.trajectory[hi];
                const Position at = {wp.position.x + hp[1], wp.position.y + hp[2],
                                     wp.position.z + hp[3]};
                const auto rssi = rssi_at(env, ap, at, shadow_rng);
                if (!rssi) continue;
                BeaconSample s;
                s.timestamp_ms = base_timestamp_ms +
                                 static_cast<std::int64_t>(std::llround((t + offset) * 1000.0));
                s.position = at;
                s.ssid = ap.ssid;
                s.mac = ap.mac;
                s.rssi = *rssi;
                s.channel = ap.channel;
                ds.samples.push_back(std::move(s));
            }
            t += wp.scan_seconds;
            const auto& end_off = hover.trajectory.back();
            cur = {wp.position.x + end_off[1], wp.position.y + end_off[2],
                   wp.position.z + end_off[3]};
            timeline.events.push_back({"scan-end", t, static_cast<int>(wi), cur});
        }

        const Position ground = {cur.x, cur.y, 0.0};
        segment(t, timing.land_seconds, cur, ground);
        t += timing.land_seconds;
        log_point(t, ground);
        timeline.events.push_back({"land", t, -1, ground});
        log.drones.push_back(std::move(timeline));
    }
    return R::ok(std::make_pair(std::move(ds), std::move(log)));
}

// ---------------------------------------------------------------------------
// JSON forms consumed by the base-station-style client and the CLI

inline nlohmann::json routes_to_json(const std::vector<Route>& routes) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : routes) {
        nlohmann::json wps = nlohmann::json::array();
        for (const auto& w : r.waypoints)
            wps.push_back({{"position", {w.position.x, w.position.y, w.position.z}},
                           {"scan_seconds", w.scan_seconds}});
        out.push_back({{"drone_id", r.drone_id},
                       {"start_position",
                        {r.start_position.x, r.start_position.y, r.start_position.z}},
                       {"yaw_deg", r.yaw_deg},
                       {"waypoints", std::move(wps)}});
    }
    return out;
}

inline Result<std::vector<Route>> routes_from_json(const nlohmann::json& j) {
    using R = Result<std::vector<Route>>;
    try {
        std::vector<Route> routes;
        for (const auto& rj : j) {
            Route r;
            r.drone_id = rj.at("drone_id").get<int>();
            auto sp = rj.at("start_position").get<std::vector<double>>();
            if (sp.size() != 3) return R::fail("bad start_position");
            r.start_position = {sp[0], sp[1], sp[2]};
            r.yaw_deg = rj.value("yaw_deg", 0.0);
            for (const auto& wj : rj.at("waypoints")) {
                auto p = wj.at("position").get<std::vector<double>>();
                if (p.size() != 3) return R::fail("bad waypoint position");
                r.waypoints.push_back({{p[0], p[1], p[2]}, wj.value("scan_seconds", 3.0)});
            }
            routes.push_back(std::move(r));
        }
        return R::ok(std::move(routes));
    } catch (const std::exception& e) {
        return R::fail(std::string("bad routes json: ") + e.what());
    }
}

inline nlohmann::json mission_log_to_json(const MissionLog& log) {
    nlohmann::json drones = nlohmann::json::array();
    for (const auto& d : log.drones) {
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : d.events)
            events.push_back({{"type", e.type},
                              {"t", e.t},
                              {"waypoint_index", e.waypoint_index},
                              {"position", {e.position.x, e.position.y, e.position.z}}});
        nlohmann::json traj = nlohmann::json::array();
        for (const auto& p : d.trajectory) traj.push_back({p[0], p[1], p[2], p[3]});
        drones.push_back({{"drone_id", d.drone_id},
                          {"events", std::move(events)},
                          {"trajectory_10hz", std::move(traj)}});
    }
    return {{"format_version", 1}, {"drones", std::move(drones)}};
}

}  // namespace rem
