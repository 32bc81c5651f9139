#pragma once

// Sample file parsing (CSV / JSONL) and the exploration statistics:
// Table-style summary, per-MAC / per-channel histograms and 0.5 m axis
// histograms.

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rem/core.hpp"
#include "rem/text.hpp"

namespace rem {

enum class SampleFormat { csv, jsonl };

inline const char* kSampleCsvHeader = "timestamp,x,y,z,ssid,rssi,mac,channel";

struct ParseOptions {
    SampleFormat format = SampleFormat::csv;
    bool lenient = false;  // skip and count bad records instead of aborting
};

struct ParseIssue {
    size_t line = 0;  // 1-based, header included
    std::string message;
};

struct ParseReport {
    Dataset dataset;
    std::vector<ParseIssue> issues;
    size_t skipped = 0;
};

namespace detail {

inline Result<BeaconSample> sample_from_fields(const std::vector<std::string>& f) {
    if (f.size() != 8)
        return Result<BeaconSample>::fail("expected 8 fields, got " + std::to_string(f.size()));
    BeaconSample s;
    auto ts = parse_int64(f[0]);
    if (!ts) return Result<BeaconSample>::fail("timestamp: not an integer");
    s.timestamp_ms = *ts;
    const char* coord_names[3] = {"x", "y", "z"};
    double* coords[3] = {&s.position.x, &s.position.y, &s.position.z};
    for (int i = 0; i < 3; ++i) {
        auto v = parse_double(f[1 + i]);
        if (!v) return Result<BeaconSample>::fail(std::string(coord_names[i]) + ": not a number");
        *coords[i] = *v;
    }
    s.ssid = f[4];
    auto rssi = parse_int(f[5]);
    if (!rssi) return Result<BeaconSample>::fail("rssi: not an integer");
    s.rssi = *rssi;
    s.mac = f[6];
    auto channel = parse_int(f[7]);
    if (!channel) return Result<BeaconSample>::fail("channel: not an integer");
    s.channel = *channel;
    return validate_sample(std::move(s));
}

inline Result<BeaconSample> sample_from_json(const std::string& line) {
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        return Result<BeaconSample>::fail("not a JSON object");
    for (const char* key : {"timestamp", "x", "y", "z", "ssid", "rssi", "mac", "channel"})
        if (!j.contains(key))
            return Result<BeaconSample>::fail(std::string("missing key '") + key + "'");
    if (!j["timestamp"].is_number_integer() || !j["rssi"].is_number_integer() ||
        !j["channel"].is_number_integer())
        return Result<BeaconSample>::fail("timestamp/rssi/channel must be integers");
    if (!j["x"].is_number() || !j["y"].is_number() || !j["z"].is_number())
        return Result<BeaconSample>::fail("x/y/z must be numbers");
    if (!j["ssid"].is_string() || !j["mac"].is_string())
        return Result<BeaconSample>::fail("ssid/mac must be strings");
    BeaconSample s;
    s.timestamp_ms = j["timestamp"].get<std::int64_t>();
    s.position = {j["x"].get<double>(), j["y"].get<double>(), j["z"].get<double>()};
    s.ssid = j["ssid"].get<std::string>();
    s.rssi = j["rssi"].get<int>();
    s.mac = j["mac"].get<std::string>();
    s.channel = j["channel"].get<int>();
    return validate_sample(std::move(s));
}

}  // namespace detail

// Reads samples in file order. Lines starting with '#' are comments
// (our own writers emit a provenance comment). In strict mode the first
// bad record aborts the parse with its line number; lenient mode skips
// it and records the issue.
inline Result<ParseReport> parse_samples(std::istream& in, const ParseOptions& opts,
                                         std::string provenance = "") {
    ParseReport report;
    report.dataset.provenance = std::move(provenance);
    std::string line;
    size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (opts.format == SampleFormat::csv && !header_seen) {
            if (line != kSampleCsvHeader)
                return Result<ParseReport>::fail(
                    "line " + std::to_string(line_no) + ": expected header '" +
                    std::string(kSampleCsvHeader) + "'");
            header_seen = true;
            continue;
        }
        Result<BeaconSample> parsed = opts.format == SampleFormat::csv
                                          ? detail::sample_from_fields(split_csv_line(line))
                                          : detail::sample_from_json(line);
        if (!parsed) {
            if (!opts.lenient)
                return Result<ParseReport>::fail(
                    "line " + std::to_string(line_no) + ": " + parsed.error());
            report.issues.push_back({line_no, parsed.error()});
            ++report.skipped;
            continue;
        }
        report.dataset.samples.push_back(parsed.take());
    }
    if (opts.format == SampleFormat::csv && !header_seen)
        return Result<ParseReport>::fail("missing CSV header");
    return Result<ParseReport>::ok(std::move(report));
}

// comment: optional '#'-prefixed line(s) emitted before the header,
// used for provenance blocks in artifacts.
inline void serialize_samples(const Dataset& ds, SampleFormat format, std::ostream& out,
                              const std::string& comment = "") {
    if (!comment.empty()) out << "# " << comment << "\n";
    if (format == SampleFormat::csv) {
        out << kSampleCsvHeader << "\n";
        for (const auto& s : ds.samples) {
            out << s.timestamp_ms << ',' << format_double(s.position.x) << ','
                << format_double(s.position.y) << ',' << format_double(s.position.z) << ','
                << csv_escape(s.ssid) << ',' << s.rssi << ',' << s.mac << ',' << s.channel
                << "\n";
        }
    } else {
        for (const auto& s : ds.samples) {
            nlohmann::json j{{"timestamp", s.timestamp_ms}, {"x", s.position.x},
                             {"y", s.position.y},           {"z", s.position.z},
                             {"ssid", s.ssid},              {"rssi", s.rssi},
                             {"mac", s.mac},                {"channel", s.channel}};
            out << j.dump() << "\n";
        }
    }
}

struct StatsReport {
    size_t n_samples = 0;
    size_t distinct_macs = 0;
    size_t distinct_ssids = 0;
    size_t distinct_channels = 0;
    double mean_rssi = 0.0;
    double median_rssi = 0.0;
};

// Median takes the lower-middle element for even counts so the result
// stays an observed integer dBm.
inline Result<StatsReport> compute_stats(const Dataset& ds) {
    if (ds.empty()) return Result<StatsReport>::fail("empty dataset");
    StatsReport r;
    r.n_samples = ds.size();
    std::set<std::string> macs, ssids;
    std::set<int> channels;
    std::vector<int> rssi;
    rssi.reserve(ds.size());
    double sum = 0;
    for (const auto& s : ds.samples) {
        macs.insert(s.mac);
        ssids.insert(s.ssid);
        channels.insert(s.channel);
        rssi.push_back(s.rssi);
        sum += s.rssi;
    }
    std::sort(rssi.begin(), rssi.end());
    r.distinct_macs = macs.size();
    r.distinct_ssids = ssids.size();
    r.distinct_channels = channels.size();
    r.mean_rssi = sum / static_cast<double>(r.n_samples);
    r.median_rssi = rssi[(rssi.size() - 1) / 2];
    return Result<StatsReport>::ok(r);
}

enum class HistKind { mac, channel, axis_bin };
enum class Axis { x, y };

struct Histogram {
    HistKind kind = HistKind::mac;
    std::vector<std::pair<std::string, size_t>> bins;
    double bin_width = 0.0;  // axis_bin only
};

// Per-MAC or per-channel counts, sorted by descending count then label.
// With distinct_positions set, a MAC is counted once per distinct scan
// position instead of once per sample (the "seen in N locations"
// reading of the per-AP figure).
inline Histogram histogram_by_key(const Dataset& ds, HistKind kind,
                                  bool distinct_positions = false) {
    Histogram h;
    h.kind = kind;
    if (kind == HistKind::channel) {
        std::map<int, size_t> counts;
        for (const auto& s : ds.samples) ++counts[s.channel];
        std::vector<std::pair<int, size_t>> rows(counts.begin(), counts.end());
        // ties break by numeric channel, not by label text
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (const auto& [ch, n] : rows) h.bins.emplace_back(std::to_string(ch), n);
        return h;
    } else {
        std::map<std::string, size_t> counts;
        if (distinct_positions) {
            std::map<std::string, std::set<std::array<double, 3>>> seen;
            for (const auto& s : ds.samples)
                seen[s.mac].insert({s.position.x, s.position.y, s.position.z});
            for (const auto& [mac, positions] : seen) counts[mac] = positions.size();
        } else {
            for (const auto& s : ds.samples) ++counts[s.mac];
        }
        for (const auto& [mac, n] : counts) h.bins.emplace_back(mac, n);
    }
    std::stable_sort(h.bins.begin(), h.bins.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return h;
}

// Half-open bins [k*w, (k+1)*w) contiguous from 0 up to the largest
// populated bin; labels carry the lower edge.
inline Result<Histogram> histogram_by_axis(const Dataset& ds, Axis axis, double bin_width) {
    if (!(bin_width > 0)) return Result<Histogram>::fail("bin_width must be > 0");
    Histogram h;
    h.kind = HistKind::axis_bin;
    h.bin_width = bin_width;
    std::vector<size_t> counts;
    for (const auto& s : ds.samples) {
        const double v = axis == Axis::x ? s.position.x : s.position.y;
        if (v < 0) return Result<Histogram>::fail("axis histogram requires coordinates >= 0");
        const size_t bin = static_cast<size_t>(v / bin_width);
        if (bin >= counts.size()) counts.resize(bin + 1, 0);
        ++counts[bin];
    }
    for (size_t k = 0; k < counts.size(); ++k)
        h.bins.emplace_back(format_double(static_cast<double>(k) * bin_width), counts[k]);
    return Result<Histogram>::ok(std::move(h));
}

}  // namespace rem
