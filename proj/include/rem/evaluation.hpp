#pragma once

// RMSE loss, test-set evaluation with a per-MAC breakdown, and the
// cross-validated grid search used to tune the kNN families.
//
// The knn family gets an exact fast path: per fold the coordinate
// distances are computed once, each mac_scale produces one sorted
// neighbour order per validation row, and every (k, weighting) cell is
// read off prefix accumulations. The arithmetic matches the naive
// fit/predict route operation for operation, so results are identical
// bit for bit (pinned by a property test).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rem/regressors.hpp"

namespace rem {

inline Result<double> rmse(std::span<const double> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size())
        return Result<double>::fail("rmse: length mismatch");
    if (predictions.empty()) return Result<double>::fail("rmse: empty input");
    double sum = 0.0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions[i] - truths[i];
        sum += e * e;
    }
    return Result<double>::ok(std::sqrt(sum / static_cast<double>(predictions.size())));
}

struct MacRmse {
    std::string mac;
    double rmse = 0.0;
    size_t count = 0;
};

struct EvalReport {
    double rmse = 0.0;
    size_t n = 0;
    std::vector<MacRmse> per_mac;
    size_t fallback_rows = 0;
};

inline Result<EvalReport> evaluate(const TrainedModel& model, const FeatureMatrix& test) {
    if (test.rows() == 0) return Result<EvalReport>::fail("empty test set");
    const Predictions pred = predict(model, test);
    EvalReport report;
    report.n = test.rows();
    report.fallback_rows = pred.fallback_rows.size();
    auto overall = rmse(pred.values, test.targets);
    if (!overall) return Result<EvalReport>::fail(overall.error());
    report.rmse = overall.value();
    std::map<std::string, std::pair<double, size_t>> per_mac;  // sum of squares, count
    for (size_t r = 0; r < test.rows(); ++r) {
        const double e = pred.values[r] - test.targets[r];
        auto& [ss, count] = per_mac[test.mac_of_row[r]];
        ss += e * e;
        ++count;
    }
    for (const auto& [mac, acc] : per_mac)
        report.per_mac.push_back(
            {mac, std::sqrt(acc.first / static_cast<double>(acc.second)), acc.second});
    return Result<EvalReport>::ok(std::move(report));
}

struct CvConfig {
    int folds = 5;
    std::uint64_t seed = 0;
};

struct GridSpec {
    Family family = Family::knn;
    std::vector<int> ks;
    std::vector<Weighting> weightings;
    std::vector<double> mac_scales;  // knn only; ignored for per_mac_knn

    static GridSpec default_knn() {
        GridSpec g;
        g.family = Family::knn;
        for (int k = 1; k <= 20; ++k) g.ks.push_back(k);
        g.weightings = {Weighting::uniform, Weighting::inverse_distance};
        for (int s = 1; s <= 20; ++s) g.mac_scales.push_back(s);
        return g;
    }
    static GridSpec default_per_mac_knn() {
        GridSpec g = default_knn();
        g.family = Family::per_mac_knn;
        g.mac_scales = {1.0};
        return g;
    }
};

struct GridPoint {
    int k = 1;
    Weighting weighting = Weighting::uniform;
    double mac_scale = 1.0;
};

struct GridRow {
    GridPoint point;
    std::vector<double> fold_rmse;
    double mean_rmse = 0.0;
};

struct GridSearchResult {
    GridPoint best;
    double best_score = 0.0;
    std::vector<GridRow> table;
    bool stratified = true;
    std::vector<std::string> warnings;
};

namespace detail {

// Fold ids per row. Stratified assignment spreads each MAC's rows over
// the folds via one global round-robin counter; it needs every MAC to
// hold at least 2 rows and n >= folds, otherwise we downgrade.
inline std::vector<int> make_folds(const FeatureMatrix& m, int folds, std::uint64_t seed,
                                   bool& stratified, std::vector<std::string>& warnings) {
    const size_t n = m.rows();
    std::vector<int> fold_of(n, 0);
    std::mt19937_64 rng(seed);
    stratified = n >= static_cast<size_t>(folds);
    if (stratified) {
        std::map<std::string, size_t> counts;
        for (const auto& mac : m.mac_of_row) ++counts[mac];
        for (const auto& [mac, c] : counts)
            if (c < 2) {
                stratified = false;
                warnings.push_back("mac " + mac + " has fewer than 2 rows");
                break;
            }
    }
    if (stratified) {
        std::map<std::string, std::vector<size_t>> groups;
        for (size_t i = 0; i < n; ++i) groups[m.mac_of_row[i]].push_back(i);
        size_t counter = 0;
        for (auto& [mac, rows] : groups) {
            std::shuffle(rows.begin(), rows.end(), rng);
            for (size_t i : rows) fold_of[i] = static_cast<int>(counter++ % folds);
        }
    } else {
        warnings.push_back("stratified folds impossible; using unstratified folds");
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t i = 0; i < n; ++i) fold_of[idx[i]] = static_cast<int>(i % folds);
    }
    return fold_of;
}

inline FeatureMatrix subset(const FeatureMatrix& m, const std::vector<size_t>& rows) {
    FeatureMatrix out;
    out.columns = m.columns;
    const size_t d = m.cols();
    out.values.reserve(rows.size() * d);
    out.targets.reserve(rows.size());
    out.mac_of_row.reserve(rows.size());
    for (size_t r : rows) {
        auto row = m.row(r);
        out.values.insert(out.values.end(), row.begin(), row.end());
        out.targets.push_back(m.targets[r]);
        out.mac_of_row.push_back(m.mac_of_row[r]);
    }
    return out;
}

// Exact fast path for the knn family over one fold: reproduces the
// naive computation's operation order so scores match bitwise.
//
// se_out[point_index] accumulates squared prediction error over the
// fold's validation rows, where point_index enumerates
// ks x weightings x mac_scales in grid order.
inline void knn_fold_errors(const FeatureMatrix& train_fold, const FeatureMatrix& val_fold,
                            const GridSpec& grid, std::vector<double>& se_out) {
    const ColumnLayout layout = train_fold.layout();
    const size_t n_train = train_fold.rows();
    const size_t n_val = val_fold.rows();
    const size_t d = train_fold.cols();

    // per-row nonzero column of each one-hot group (-1 when absent)
    auto onehot_cols = [&](const FeatureMatrix& m, size_t begin, size_t count) {
        std::vector<ptrdiff_t> cols(m.rows(), -1);
        if (count == 0) return cols;
        for (size_t r = 0; r < m.rows(); ++r) {
            auto row = m.row(r);
            for (size_t c = begin; c < begin + count; ++c)
                if (row[c] != 0.0) {
                    cols[r] = static_cast<ptrdiff_t>(c);
                    break;
                }
        }
        return cols;
    };
    const auto train_mac = onehot_cols(train_fold, layout.mac_begin, layout.mac_count);
    const auto val_mac = onehot_cols(val_fold, layout.mac_begin, layout.mac_count);
    const auto train_ch = onehot_cols(train_fold, layout.channel_begin, layout.channel_count);
    const auto val_ch = onehot_cols(val_fold, layout.channel_begin, layout.channel_count);

    // coordinate part of the squared distance, fixed across the grid
    std::vector<double> coord_d2(n_val * n_train);
    for (size_t q = 0; q < n_val; ++q) {
        auto vrow = val_fold.row(q);
        for (size_t i = 0; i < n_train; ++i) {
            auto trow = train_fold.row(i);
            double sum = 0.0;
            for (size_t c = 0; c < layout.coord_count; ++c) {
                const double diff = trow[c] - vrow[c];
                sum += diff * diff;
            }
            coord_d2[q * n_train + i] = sum;
        }
    }

    const size_t n_k = grid.ks.size(), n_w = grid.weightings.size(), n_s = grid.mac_scales.size();
    se_out.assign(n_k * n_w * n_s, 0.0);

    std::vector<Neighbor> order(n_train);
    std::vector<double> cum_t(n_train + 1), cum_w(n_train + 1), cum_wt(n_train + 1);

    for (size_t si = 0; si < n_s; ++si) {
        const double scale = grid.mac_scales[si];
        for (size_t q = 0; q < n_val; ++q) {
            auto vrow = val_fold.row(q);
            const double* cd2 = coord_d2.data() + q * n_train;
            for (size_t i = 0; i < n_train; ++i) {
                double sum = cd2[i];
                // one-hot group terms added in column order, like the
                // dense distance does
                const ptrdiff_t tm = train_mac[i], vm = val_mac[q];
                if (tm != vm) {
                    const ptrdiff_t first = std::min(tm < 0 ? vm : tm, vm < 0 ? tm : vm);
                    const ptrdiff_t second = tm == first ? vm : tm;
                    for (ptrdiff_t c : {first, second}) {
                        if (c < 0) continue;
                        const double v = c == tm ? scale * train_fold.row(i)[static_cast<size_t>(c)]
                                                 : scale * vrow[static_cast<size_t>(c)];
                        sum += v * v;
                    }
                }
                const ptrdiff_t tc = train_ch[i], vc = val_ch[q];
                if (tc != vc) {
                    const ptrdiff_t first = std::min(tc < 0 ? vc : tc, vc < 0 ? tc : vc);
                    const ptrdiff_t second = tc == first ? vc : tc;
                    for (ptrdiff_t c : {first, second}) {
                        if (c < 0) continue;
                        const double v = c == tc ? train_fold.row(i)[static_cast<size_t>(c)]
                                                 : vrow[static_cast<size_t>(c)];
                        sum += v * v;
                    }
                }
                order[i] = {std::sqrt(sum), i};
            }
            std::sort(order.begin(), order.end(), [](const Neighbor& a, const Neighbor& b) {
                if (a.dist != b.dist) return a.dist < b.dist;
                return a.index < b.index;
            });

            size_t zeros = 0;
            while (zeros < n_train && order[zeros].dist == 0.0) ++zeros;
            cum_t[0] = cum_w[0] = cum_wt[0] = 0.0;
            for (size_t i = 0; i < n_train; ++i) {
                const double t = train_fold.targets[order[i].index];
                cum_t[i + 1] = cum_t[i] + t;
                const double w = order[i].dist > 0.0 ? 1.0 / order[i].dist : 0.0;
                cum_w[i + 1] = cum_w[i] + w;
                cum_wt[i + 1] = cum_wt[i] + w * t;
            }

            for (size_t ki = 0; ki < n_k; ++ki) {
                const size_t kk = std::min<size_t>(static_cast<size_t>(grid.ks[ki]), n_train);
                for (size_t wi = 0; wi < n_w; ++wi) {
                    const Weighting w = grid.weightings[wi];
                    double pred;
                    if (w == Weighting::inverse_distance && zeros > 0) {
                        const size_t z = std::min(zeros, kk);
                        pred = cum_t[z] / static_cast<double>(z);
                    } else if (w == Weighting::uniform) {
                        pred = cum_t[kk] / static_cast<double>(kk);
                    } else {
                        pred = cum_wt[kk] / cum_w[kk];
                    }
                    const double e = pred - val_fold.targets[q];
                    se_out[(ki * n_w + wi) * n_s + si] += e * e;
                }
            }
        }
    }
}

}  // namespace detail

// Evaluates every grid point by k-fold cross-validation on the training
// matrix and returns the argmin of mean fold RMSE. Ties break toward
// smaller k, then smaller mac_scale, then weighting axis order. The
// table is ordered by grid-point index (ks x weightings x mac_scales).
inline Result<GridSearchResult> grid_search(const GridSpec& grid, const FeatureMatrix& train,
                                            const CvConfig& cv) {
    using R = Result<GridSearchResult>;
    if (grid.ks.empty() || grid.weightings.empty()) return R::fail("empty grid axes");
    if (grid.family != Family::knn && grid.family != Family::per_mac_knn)
        return R::fail("grid_search supports the knn families");
    if (cv.folds < 2) return R::fail("folds must be >= 2");
    if (train.rows() < static_cast<size_t>(cv.folds))
        return R::fail("folds exceed training-set size");

    GridSpec g = grid;
    std::sort(g.ks.begin(), g.ks.end());
    if (g.family == Family::per_mac_knn || g.mac_scales.empty()) g.mac_scales = {1.0};
    std::sort(g.mac_scales.begin(), g.mac_scales.end());

    GridSearchResult result;
    const std::vector<int> fold_of =
        detail::make_folds(train, cv.folds, cv.seed, result.stratified, result.warnings);

    const size_t n_k = g.ks.size(), n_w = g.weightings.size(), n_s = g.mac_scales.size();
    const size_t n_points = n_k * n_w * n_s;
    result.table.resize(n_points);
    for (size_t ki = 0; ki < n_k; ++ki)
        for (size_t wi = 0; wi < n_w; ++wi)
            for (size_t si = 0; si < n_s; ++si) {
                GridRow& row = result.table[(ki * n_w + wi) * n_s + si];
                row.point = {g.ks[ki], g.weightings[wi], g.mac_scales[si]};
                row.fold_rmse.resize(static_cast<size_t>(cv.folds));
            }

    std::vector<double> se;
    for (int f = 0; f < cv.folds; ++f) {
        std::vector<size_t> train_rows, val_rows;
        for (size_t i = 0; i < train.rows(); ++i)
            (fold_of[i] == f ? val_rows : train_rows).push_back(i);
        if (train_rows.empty() || val_rows.empty())
            return R::fail("fold " + std::to_string(f) + " is degenerate");
        const FeatureMatrix train_fold = detail::subset(train, train_rows);
        const FeatureMatrix val_fold = detail::subset(train, val_rows);

        if (g.family == Family::knn) {
            detail::knn_fold_errors(train_fold, val_fold, g, se);
            for (size_t p = 0; p < n_points; ++p)
                result.table[p].fold_rmse[static_cast<size_t>(f)] =
                    std::sqrt(se[p] / static_cast<double>(val_rows.size()));
        } else {
            for (size_t p = 0; p < n_points; ++p) {
                RegressorSpec spec;
                spec.family = g.family;
                spec.knn.k = result.table[p].point.k;
                spec.knn.weighting = result.table[p].point.weighting;
                spec.knn.mac_scale = result.table[p].point.mac_scale;
                auto model = fit(spec, train_fold);
                if (!model) return R::fail(model.error());
                const Predictions pred = predict(model.value(), val_fold);
                auto score = rmse(pred.values, val_fold.targets);
                if (!score) return R::fail(score.error());
                result.table[p].fold_rmse[static_cast<size_t>(f)] = score.value();
            }
        }
    }

    for (auto& row : result.table) {
        double sum = 0.0;
        for (double v : row.fold_rmse) sum += v;
        row.mean_rmse = sum / static_cast<double>(row.fold_rmse.size());
    }

    size_t best = 0;
    auto weight_rank = [&](Weighting w) {
        for (size_t i = 0; i < g.weightings.size(); ++i)
            if (g.weightings[i] == w) return i;
        return size_t{0};
    };
    for (size_t p = 1; p < n_points; ++p) {
        const GridRow& a = result.table[p];
        const GridRow& b = result.table[best];
        const auto ta = std::tuple(a.mean_rmse, a.point.k, a.point.mac_scale,
                                   weight_rank(a.point.weighting));
        const auto tb = std::tuple(b.mean_rmse, b.point.k, b.point.mac_scale,
                                   weight_rank(b.point.weighting));
        if (ta < tb) best = p;
    }
    result.best = result.table[best].point;
    result.best_score = result.table[best].mean_rmse;
    return R::ok(std::move(result));
}

}  // namespace rem
