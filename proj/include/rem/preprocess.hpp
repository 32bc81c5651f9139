#pragma once

// Pre-processing: rare-MAC filtering, one-hot feature encoding and the
// seeded train/test split. SSID and timestamp never enter the feature
// matrix; they stay on the Dataset.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rem/core.hpp"

namespace rem {

struct EncodingSpec {
    bool use_coords = true;
    bool use_mac_onehot = true;
    bool use_channel_onehot = false;
    double mac_scale = 1.0;  // value written into MAC one-hot entries

    bool valid() const {
        return (use_coords || use_mac_onehot || use_channel_onehot) && mac_scale >= 1.0;
    }
};

// Column-group boundaries of an encoded matrix, derived from labels.
struct ColumnLayout {
    size_t coord_begin = 0, coord_count = 0;
    size_t mac_begin = 0, mac_count = 0;
    size_t channel_begin = 0, channel_count = 0;
};

// Row-major numeric encoding of a dataset: coordinates, then MAC one-hot
// columns (sorted by MAC), then channel one-hot columns (sorted by
// channel), restricted to the enabled groups. targets hold raw dBm.
struct FeatureMatrix {
    std::vector<std::string> columns;
    std::vector<double> values;  // rows() x cols(), row-major
    std::vector<double> targets;
    std::vector<std::string> mac_of_row;

    size_t rows() const { return targets.size(); }
    size_t cols() const { return columns.size(); }
    std::span<const double> row(size_t i) const {
        return {values.data() + i * cols(), cols()};
    }

    ColumnLayout layout() const {
        ColumnLayout l;
        size_t i = 0;
        while (i < columns.size() &&
               (columns[i] == "x" || columns[i] == "y" || columns[i] == "z"))
            ++i;
        l.coord_count = i;
        l.mac_begin = i;
        while (i < columns.size() && columns[i].starts_with("mac=")) ++i;
        l.mac_count = i - l.mac_begin;
        l.channel_begin = i;
        while (i < columns.size() && columns[i].starts_with("channel=")) ++i;
        l.channel_count = i - l.channel_begin;
        return l;
    }
};

// Keeps exactly the samples whose MAC occurs at least min_count times in
// the input ("less than min_count" dropped); order preserved.
inline std::pair<Dataset, size_t> filter_rare_macs(const Dataset& ds, size_t min_count) {
    std::map<std::string, size_t> counts;
    for (const auto& s : ds.samples) ++counts[s.mac];
    Dataset out;
    out.provenance = ds.provenance;
    size_t dropped = 0;
    for (const auto& s : ds.samples) {
        if (counts[s.mac] >= min_count)
            out.samples.push_back(s);
        else
            ++dropped;
    }
    return {std::move(out), dropped};
}

inline std::vector<std::string> build_columns(const Dataset& ds, const EncodingSpec& spec) {
    std::vector<std::string> cols;
    if (spec.use_coords) {
        cols.insert(cols.end(), {"x", "y", "z"});
    }
    if (spec.use_mac_onehot) {
        std::set<std::string> macs;
        for (const auto& s : ds.samples) macs.insert(s.mac);
        for (const auto& m : macs) cols.push_back("mac=" + m);
    }
    if (spec.use_channel_onehot) {
        std::set<int> channels;
        for (const auto& s : ds.samples) channels.insert(s.channel);
        for (int c : channels) cols.push_back("channel=" + std::to_string(c));
    }
    return cols;
}

// Encodes against an explicit column list (the training columns, when
// encoding a test set). A MAC or channel with no matching column leaves
// its one-hot group all-zero.
inline Result<FeatureMatrix> encode_with_columns(const Dataset& ds, const EncodingSpec& spec,
                                                 std::vector<std::string> columns) {
    if (ds.empty()) return Result<FeatureMatrix>::fail("empty dataset");
    if (!spec.valid()) return Result<FeatureMatrix>::fail("invalid encoding spec");
    FeatureMatrix m;
    m.columns = std::move(columns);
    const ColumnLayout layout = m.layout();
    std::map<std::string, size_t> mac_col;
    for (size_t i = 0; i < layout.mac_count; ++i)
        mac_col[m.columns[layout.mac_begin + i].substr(4)] = layout.mac_begin + i;
    std::map<std::string, size_t> channel_col;
    for (size_t i = 0; i < layout.channel_count; ++i)
        channel_col[m.columns[layout.channel_begin + i].substr(8)] = layout.channel_begin + i;

    const size_t d = m.cols();
    m.values.assign(ds.size() * d, 0.0);
    m.targets.reserve(ds.size());
    m.mac_of_row.reserve(ds.size());
    for (size_t r = 0; r < ds.size(); ++r) {
        const BeaconSample& s = ds.samples[r];
        double* row = m.values.data() + r * d;
        if (layout.coord_count == 3) {
            row[0] = s.position.x;
            row[1] = s.position.y;
            row[2] = s.position.z;
        }
        if (auto it = mac_col.find(s.mac); it != mac_col.end())
            row[it->second] = spec.mac_scale;
        if (layout.channel_count > 0)
            if (auto it = channel_col.find(std::to_string(s.channel)); it != channel_col.end())
                row[it->second] = 1.0;
        m.targets.push_back(static_cast<double>(s.rssi));
        m.mac_of_row.push_back(s.mac);
    }
    return Result<FeatureMatrix>::ok(std::move(m));
}

inline Result<FeatureMatrix> encode(const Dataset& ds, const EncodingSpec& spec) {
    return encode_with_columns(ds, spec, build_columns(ds, spec));
}

struct SplitConfig {
    double train_fraction = 0.75;
    std::uint64_t seed = 0;
    bool stratify_by_mac = true;
};

struct SplitResult {
    Dataset train;
    Dataset test;
    std::vector<std::string> warnings;
};

// Deterministic per seed. Train size is round(fraction * n); stratified
// mode adjusts per-MAC quotas by largest remainder so every MAC keeps at
// least one training sample while the total still lands on the rounded
// target whenever feasible.
inline Result<SplitResult> split(const Dataset& ds, const SplitConfig& cfg) {
    const size_t n = ds.size();
    if (n < 2) return Result<SplitResult>::fail("split requires at least 2 samples");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        return Result<SplitResult>::fail("train_fraction must be in (0, 1)");

    size_t total_train = static_cast<size_t>(std::llround(cfg.train_fraction * static_cast<double>(n)));
    total_train = std::clamp<size_t>(total_train, 1, n - 1);

    SplitResult out;
    std::mt19937_64 rng(cfg.seed);
    std::vector<char> in_train(n, 0);

    if (!cfg.stratify_by_mac) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t i = 0; i < total_train; ++i) in_train[idx[i]] = 1;
    } else {
        std::map<std::string, std::vector<size_t>> groups;
        for (size_t i = 0; i < n; ++i) groups[ds.samples[i].mac].push_back(i);

        struct Quota {
            const std::string* mac;
            std::vector<size_t>* rows;
            size_t take;
            double remainder;
        };
        std::vector<Quota> quotas;
        size_t assigned = 0;
        for (auto& [mac, rows] : groups) {
            const double want = cfg.train_fraction * static_cast<double>(rows.size());
            size_t base = static_cast<size_t>(std::floor(want));
            if (rows.size() == 1) {
                out.warnings.push_back("mac " + mac +
                                       " has a single sample; placed in train");
                base = 1;
            } else {
                base = std::clamp<size_t>(base, 1, rows.size());
            }
            quotas.push_back({&mac, &rows, base, want - std::floor(want)});
            assigned += base;
        }
        if (assigned < total_train) {
            std::vector<Quota*> order;
            for (auto& q : quotas) order.push_back(&q);
            std::stable_sort(order.begin(), order.end(), [](const Quota* a, const Quota* b) {
                if (a->remainder != b->remainder) return a->remainder > b->remainder;
                return *a->mac < *b->mac;
            });
            while (assigned < total_train) {
                bool moved = false;
                for (Quota* q : order) {
                    if (assigned == total_train) break;
                    if (q->take < q->rows->size()) {
                        ++q->take;
                        ++assigned;
                        moved = true;
                    }
                }
                if (!moved) break;
            }
        } else if (assigned > total_train) {
            std::vector<Quota*> order;
            for (auto& q : quotas) order.push_back(&q);
            std::stable_sort(order.begin(), order.end(), [](const Quota* a, const Quota* b) {
                if (a->remainder != b->remainder) return a->remainder < b->remainder;
                return *a->mac < *b->mac;
            });
            while (assigned > total_train) {
                bool moved = false;
                for (Quota* q : order) {
                    if (assigned == total_train) break;
                    if (q->take > 1) {
                        --q->take;
                        --assigned;
                        moved = true;
                    }
                }
                if (!moved) break;
            }
        }
        if (assigned != total_train)
            out.warnings.push_back("stratification forced train size " +
                                   std::to_string(assigned) + " (target " +
                                   std::to_string(total_train) + ")");
        for (auto& q : quotas) {
            std::shuffle(q.rows->begin(), q.rows->end(), rng);
            for (size_t i = 0; i < q.take; ++i) in_train[(*q.rows)[i]] = 1;
        }
    }

    out.train.provenance = ds.provenance + " [train]";
    out.test.provenance = ds.provenance + " [test]";
    for (size_t i = 0; i < n; ++i)
        (in_train[i] ? out.train : out.test).samples.push_back(ds.samples[i]);
    return Result<SplitResult>::ok(std::move(out));
}

}  // namespace rem
