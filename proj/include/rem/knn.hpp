#pragma once

// k-nearest-neighbour machinery. Distance is plain Euclidean over the
// encoded columns, with the MAC one-hot group stretched by mac_scale at
// distance time: two rows sharing coordinates are at squared distance 0
// (same MAC) or 2*(mac_scale*onehot)^2 (different MAC). Neighbour ties
// at equal distance break by lower training-row index.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "rem/preprocess.hpp"

namespace rem {

enum class Weighting { uniform, inverse_distance };

inline double knn_squared_distance(const ColumnLayout& layout, std::span<const double> a,
                                   std::span<const double> b, double mac_scale) {
    double sum = 0.0;
    size_t c = 0;
    for (; c < layout.coord_count; ++c) {
        const double d = a[c] - b[c];
        sum += d * d;
    }
    for (; c < layout.mac_begin + layout.mac_count; ++c) {
        const double d = mac_scale * a[c] - mac_scale * b[c];
        sum += d * d;
    }
    for (; c < layout.channel_begin + layout.channel_count; ++c) {
        const double d = a[c] - b[c];
        sum += d * d;
    }
    return sum;
}

inline double knn_distance(const ColumnLayout& layout, std::span<const double> a,
                           std::span<const double> b, double mac_scale) {
    return std::sqrt(knn_squared_distance(layout, a, b, mac_scale));
}

struct Neighbor {
    double dist = 0.0;
    size_t index = 0;
};

// Combines the k nearest targets. Neighbors must be sorted ascending by
// (dist, index). Inverse-distance weighting uses w = 1/d; if any of the
// k nearest sits at distance 0, the prediction is the mean of those
// exact matches.
inline double combine_neighbors(std::span<const Neighbor> nearest,
                                std::span<const double> targets, Weighting weighting) {
    size_t zeros = 0;
    while (zeros < nearest.size() && nearest[zeros].dist == 0.0) ++zeros;
    if (weighting == Weighting::inverse_distance && zeros > 0) {
        double sum = 0.0;
        for (size_t i = 0; i < zeros; ++i) sum += targets[nearest[i].index];
        return sum / static_cast<double>(zeros);
    }
    if (weighting == Weighting::uniform) {
        double sum = 0.0;
        for (const auto& nb : nearest) sum += targets[nb.index];
        return sum / static_cast<double>(nearest.size());
    }
    double num = 0.0, den = 0.0;
    for (const auto& nb : nearest) {
        const double w = 1.0 / nb.dist;
        num += w * targets[nb.index];
        den += w;
    }
    return num / den;
}

// Predicts one query row against a training matrix: brute-force distance
// to every row, partial selection of the k nearest (all rows when the
// matrix holds fewer than k), then the weighting rule above.
inline double knn_predict(const FeatureMatrix& train, std::span<const double> query, int k,
                          Weighting weighting, double mac_scale = 1.0) {
    const size_t n = train.rows();
    const ColumnLayout layout = train.layout();
    std::vector<Neighbor> all(n);
    for (size_t i = 0; i < n; ++i)
        all[i] = {knn_distance(layout, train.row(i), query, mac_scale), i};
    const size_t kk = std::min<size_t>(static_cast<size_t>(k), n);
    auto by_dist_then_index = [](const Neighbor& a, const Neighbor& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.index < b.index;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<ptrdiff_t>(kk), all.end(),
                      by_dist_then_index);
    return combine_neighbors({all.data(), kk}, train.targets, weighting);
}

}  // namespace rem
