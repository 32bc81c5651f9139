#pragma once

// The estimator families: global mean, per-MAC mean, kNN over encoded
// features, per-MAC kNN over coordinates only, and the MLP. All of them
// sit behind fit()/predict() on a TrainedModel variant and serialize to
// a versioned JSON document.
//
// Mean targets are accumulated in sorted order and the MLP sorts its
// rows canonically before the seeded shuffle, so fitting is independent
// of training-row order.

#include <algorithm>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rem/knn.hpp"
#include "rem/mlp.hpp"
#include "rem/preprocess.hpp"

namespace rem {

enum class Family { global_mean, per_mac_mean, knn, per_mac_knn, mlp };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::global_mean: return "global_mean";
        case Family::per_mac_mean: return "per_mac_mean";
        case Family::knn: return "knn";
        case Family::per_mac_knn: return "per_mac_knn";
        case Family::mlp: return "mlp";
    }
    return "?";
}

inline std::optional<Family> family_from_name(const std::string& s) {
    for (Family f : {Family::global_mean, Family::per_mac_mean, Family::knn,
                     Family::per_mac_knn, Family::mlp})
        if (s == family_name(f)) return f;
    return std::nullopt;
}

inline const char* weighting_name(Weighting w) {
    return w == Weighting::uniform ? "uniform" : "inverse_distance";
}

inline std::optional<Weighting> weighting_from_name(const std::string& s) {
    if (s == "uniform") return Weighting::uniform;
    if (s == "inverse_distance" || s == "distance") return Weighting::inverse_distance;
    return std::nullopt;
}

struct KnnParams {
    int k = 5;
    Weighting weighting = Weighting::uniform;
    double mac_scale = 1.0;  // applied at distance time, on top of the encoding
};

struct RegressorSpec {
    Family family = Family::global_mean;
    KnnParams knn;  // knn and per_mac_knn
    MlpParams mlp;  // mlp only
};

struct Predictions {
    std::vector<double> values;
    std::vector<size_t> fallback_rows;  // rows answered by the global-mean fallback
};

namespace detail {

// Mean with sorted accumulation: independent of input order.
inline double stable_mean(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

inline double matrix_onehot_value(const FeatureMatrix& m) {
    const ColumnLayout layout = m.layout();
    for (size_t r = 0; r < m.rows() && layout.mac_count > 0; ++r) {
        auto row = m.row(r);
        for (size_t c = layout.mac_begin; c < layout.mac_begin + layout.mac_count; ++c)
            if (row[c] != 0.0) return row[c];
    }
    return 1.0;
}

}  // namespace detail

struct GlobalMeanModel {
    double mean = 0.0;
    std::vector<std::string> columns;
    std::string trained_on;

    Predictions predict(const FeatureMatrix& queries) const {
        return {std::vector<double>(queries.rows(), mean), {}};
    }
};

struct PerMacMeanModel {
    std::map<std::string, double> means;
    double fallback_mean = 0.0;
    std::vector<std::string> columns;
    std::string trained_on;

    Predictions predict(const FeatureMatrix& queries) const {
        Predictions out;
        out.values.reserve(queries.rows());
        for (size_t r = 0; r < queries.rows(); ++r) {
            auto it = means.find(queries.mac_of_row[r]);
            if (it == means.end()) {
                out.fallback_rows.push_back(r);
                out.values.push_back(fallback_mean);
            } else {
                out.values.push_back(it->second);
            }
        }
        return out;
    }
};

struct KnnModel {
    KnnParams params;
    FeatureMatrix train;
    std::string trained_on;

    Predictions predict(const FeatureMatrix& queries) const {
        if (queries.columns != train.columns)
            throw std::invalid_argument("knn predict: query columns do not match training columns");
        Predictions out;
        out.values.reserve(queries.rows());
        for (size_t r = 0; r < queries.rows(); ++r)
            out.values.push_back(knn_predict(train, queries.row(r), params.k, params.weighting,
                                             params.mac_scale));
        return out;
    }
};

struct PerMacKnnModel {
    struct Table {
        std::vector<double> coords;  // 3 per row, training order preserved
        std::vector<double> targets;
        size_t rows() const { return targets.size(); }
    };

    int k = 5;
    Weighting weighting = Weighting::uniform;
    std::map<std::string, Table> tables;
    double fallback_mean = 0.0;
    std::vector<std::string> columns;
    std::string trained_on;

    // Coordinate-only kNN within the query's own MAC; a MAC with fewer
    // than k rows uses all of them, an unknown MAC falls back.
    Predictions predict(const FeatureMatrix& queries) const {
        const ColumnLayout layout = queries.layout();
        if (layout.coord_count != 3)
            throw std::invalid_argument("per-MAC knn predict: queries lack coordinate columns");
        Predictions out;
        out.values.reserve(queries.rows());
        std::vector<Neighbor> all;
        for (size_t r = 0; r < queries.rows(); ++r) {
            auto it = tables.find(queries.mac_of_row[r]);
            if (it == tables.end()) {
                out.fallback_rows.push_back(r);
                out.values.push_back(fallback_mean);
                continue;
            }
            const Table& t = it->second;
            auto q = queries.row(r);
            all.resize(t.rows());
            for (size_t i = 0; i < t.rows(); ++i) {
                const double dx = t.coords[3 * i] - q[0];
                const double dy = t.coords[3 * i + 1] - q[1];
                const double dz = t.coords[3 * i + 2] - q[2];
                all[i] = {std::sqrt(dx * dx + dy * dy + dz * dz), i};
            }
            const size_t kk = std::min<size_t>(static_cast<size_t>(k), t.rows());
            std::partial_sort(all.begin(), all.begin() + static_cast<ptrdiff_t>(kk), all.end(),
                              [](const Neighbor& a, const Neighbor& b) {
                                  if (a.dist != b.dist) return a.dist < b.dist;
                                  return a.index < b.index;
                              });
            out.values.push_back(combine_neighbors({all.data(), kk}, t.targets, weighting));
        }
        return out;
    }
};

struct MlpModel {
    MlpParams params;
    std::vector<std::string> columns;
    MlpNetwork network;
    MlpTrainHistory history;
    std::string trained_on;
    double onehot_value = 1.0;  // one-hot magnitude seen at fit time

    void scale_row(std::span<const double> in, std::vector<double>& out,
                   const ColumnLayout& layout) const {
        out.assign(in.begin(), in.end());
        if (layout.coord_count == 3) {
            out[0] /= params.volume.x_len;
            out[1] /= params.volume.y_len;
            out[2] /= params.volume.z_len;
        }
    }

    Predictions predict(const FeatureMatrix& queries) const {
        if (queries.columns != columns)
            throw std::invalid_argument("mlp predict: query columns do not match training columns");
        const ColumnLayout layout = queries.layout();
        Predictions out;
        out.values.reserve(queries.rows());
        std::vector<double> x;
        for (size_t r = 0; r < queries.rows(); ++r) {
            scale_row(queries.row(r), x, layout);
            out.values.push_back(network.forward(x));
        }
        return out;
    }
};

using TrainedModel =
    std::variant<GlobalMeanModel, PerMacMeanModel, KnnModel, PerMacKnnModel, MlpModel>;

inline Predictions predict(const TrainedModel& model, const FeatureMatrix& queries) {
    return std::visit([&](const auto& m) { return m.predict(queries); }, model);
}

inline Family model_family(const TrainedModel& model) {
    switch (model.index()) {
        case 0: return Family::global_mean;
        case 1: return Family::per_mac_mean;
        case 2: return Family::knn;
        case 3: return Family::per_mac_knn;
        default: return Family::mlp;
    }
}

namespace detail {

inline MlpModel fit_mlp(const FeatureMatrix& train, MlpParams params, std::string trained_on) {
    const size_t n = train.rows();
    const size_t d = train.cols();
    const ColumnLayout layout = train.layout();

    // Canonical row order (lexicographic by features, target, MAC) makes
    // training independent of the caller's row order.
    std::vector<size_t> canon(n);
    std::iota(canon.begin(), canon.end(), 0);
    std::sort(canon.begin(), canon.end(), [&](size_t a, size_t b) {
        auto ra = train.row(a), rb = train.row(b);
        for (size_t c = 0; c < d; ++c)
            if (ra[c] != rb[c]) return ra[c] < rb[c];
        if (train.targets[a] != train.targets[b]) return train.targets[a] < train.targets[b];
        return train.mac_of_row[a] < train.mac_of_row[b];
    });

    std::vector<double> inputs(n * d);
    std::vector<double> targets(n);
    for (size_t i = 0; i < n; ++i) {
        auto row = train.row(canon[i]);
        std::copy(row.begin(), row.end(), inputs.begin() + static_cast<ptrdiff_t>(i * d));
        if (layout.coord_count == 3) {
            inputs[i * d] /= params.volume.x_len;
            inputs[i * d + 1] /= params.volume.y_len;
            inputs[i * d + 2] /= params.volume.z_len;
        }
        targets[i] = train.targets[canon[i]];
    }

    MlpModel model;
    model.params = params;
    model.columns = train.columns;
    model.trained_on = std::move(trained_on);
    model.onehot_value = matrix_onehot_value(train);
    model.network = MlpNetwork(d, static_cast<size_t>(params.hidden_units));

    std::mt19937_64 rng(params.seed);
    model.network.init_weights(rng);
    model.network.parameters()[model.network.b2_off()] = stable_mean(train.targets);

    AdamOptimizer adam(model.network.parameter_count(), params.adam);
    const size_t batch = std::max<size_t>(1, static_cast<size_t>(params.batch_size));
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> batch_in(batch * d), batch_t(batch), grad;

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < n; start += batch) {
            const size_t count = std::min(batch, n - start);
            for (size_t b = 0; b < count; ++b) {
                const size_t src = order[start + b];
                std::copy_n(inputs.begin() + static_cast<ptrdiff_t>(src * d), d,
                            batch_in.begin() + static_cast<ptrdiff_t>(b * d));
                batch_t[b] = targets[src];
            }
            model.network.batch_gradient(batch_in.data(), batch_t.data(), count, grad);
            adam.step(model.network.parameters(), grad);
        }
        const double loss = model.network.batch_loss(inputs.data(), targets.data(), n);
        if (!std::isfinite(loss))
            throw std::runtime_error("mlp training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch) + " (lr " +
                                     std::to_string(params.adam.learning_rate) + ")");
        model.history.epoch_loss.push_back(loss);
        if (epoch == 0 || loss < model.history.best_loss) {
            model.history.best_loss = loss;
            model.history.best_epoch = static_cast<size_t>(epoch);
        }
    }
    if (model.history.epoch_loss.empty()) {
        model.history.best_loss = model.network.batch_loss(inputs.data(), targets.data(), n);
        model.history.best_epoch = 0;
    }
    return model;
}

}  // namespace detail

inline Result<TrainedModel> fit(const RegressorSpec& spec, const FeatureMatrix& train) {
    if (train.rows() == 0) return Result<TrainedModel>::fail("empty training set");
    if (train.mac_of_row.size() != train.rows())
        return Result<TrainedModel>::fail("training matrix lacks per-row MAC keys");
    const std::string trained_on = "matrix[" + std::to_string(train.rows()) + "x" +
                                   std::to_string(train.cols()) + "]";

    switch (spec.family) {
        case Family::global_mean: {
            GlobalMeanModel m;
            m.mean = detail::stable_mean(train.targets);
            m.columns = train.columns;
            m.trained_on = trained_on;
            return Result<TrainedModel>::ok(TrainedModel(std::move(m)));
        }
        case Family::per_mac_mean: {
            PerMacMeanModel m;
            std::map<std::string, std::vector<double>> groups;
            for (size_t r = 0; r < train.rows(); ++r)
                groups[train.mac_of_row[r]].push_back(train.targets[r]);
            if (groups.empty())
                return Result<TrainedModel>::fail("per-MAC family with zero MACs");
            for (auto& [mac, targets] : groups)
                m.means[mac] = detail::stable_mean(std::move(targets));
            m.fallback_mean = detail::stable_mean(train.targets);
            m.columns = train.columns;
            m.trained_on = trained_on;
            return Result<TrainedModel>::ok(TrainedModel(std::move(m)));
        }
        case Family::knn: {
            if (spec.knn.k < 1) return Result<TrainedModel>::fail("knn requires k >= 1");
            if (spec.knn.mac_scale < 1.0)
                return Result<TrainedModel>::fail("knn requires mac_scale >= 1");
            KnnModel m;
            m.params = spec.knn;
            m.train = train;
            m.trained_on = trained_on;
            return Result<TrainedModel>::ok(TrainedModel(std::move(m)));
        }
        case Family::per_mac_knn: {
            if (spec.knn.k < 1) return Result<TrainedModel>::fail("knn requires k >= 1");
            const ColumnLayout layout = train.layout();
            if (layout.coord_count != 3)
                return Result<TrainedModel>::fail(
                    "per-MAC knn requires coordinate columns in the encoding");
            PerMacKnnModel m;
            m.k = spec.knn.k;
            m.weighting = spec.knn.weighting;
            for (size_t r = 0; r < train.rows(); ++r) {
                auto row = train.row(r);
                auto& t = m.tables[train.mac_of_row[r]];
                t.coords.insert(t.coords.end(), {row[0], row[1], row[2]});
                t.targets.push_back(train.targets[r]);
            }
            if (m.tables.empty())
                return Result<TrainedModel>::fail("per-MAC family with zero MACs");
            m.fallback_mean = detail::stable_mean(train.targets);
            m.columns = train.columns;
            m.trained_on = trained_on;
            return Result<TrainedModel>::ok(TrainedModel(std::move(m)));
        }
        case Family::mlp: {
            if (spec.mlp.hidden_units < 1)
                return Result<TrainedModel>::fail("mlp requires hidden_units >= 1");
            try {
                return Result<TrainedModel>::ok(
                    TrainedModel(detail::fit_mlp(train, spec.mlp, trained_on)));
            } catch (const std::exception& e) {
                return Result<TrainedModel>::fail(e.what());
            }
        }
    }
    return Result<TrainedModel>::fail("unknown family");
}

// ---------------------------------------------------------------------------
// serialization (versioned JSON)

inline nlohmann::json matrix_to_json(const FeatureMatrix& m) {
    return {{"columns", m.columns},
            {"values", m.values},
            {"targets", m.targets},
            {"macs", m.mac_of_row}};
}

inline Result<FeatureMatrix> matrix_from_json(const nlohmann::json& j) {
    FeatureMatrix m;
    try {
        j.at("columns").get_to(m.columns);
        j.at("values").get_to(m.values);
        j.at("targets").get_to(m.targets);
        j.at("macs").get_to(m.mac_of_row);
    } catch (const std::exception& e) {
        return Result<FeatureMatrix>::fail(std::string("bad matrix json: ") + e.what());
    }
    if (m.values.size() != m.targets.size() * m.columns.size() ||
        m.mac_of_row.size() != m.targets.size())
        return Result<FeatureMatrix>::fail("bad matrix json: inconsistent shapes");
    return Result<FeatureMatrix>::ok(std::move(m));
}

inline nlohmann::json model_to_json(const TrainedModel& model) {
    nlohmann::json j;
    j["format_version"] = 1;
    j["family"] = family_name(model_family(model));
    std::visit([&](const auto& m) { j["trained_on"] = m.trained_on; j["columns"] = m.columns; },
               model);
    if (const auto* m = std::get_if<GlobalMeanModel>(&model)) {
        j["mean"] = m->mean;
    } else if (const auto* m = std::get_if<PerMacMeanModel>(&model)) {
        j["means"] = m->means;
        j["fallback_mean"] = m->fallback_mean;
    } else if (const auto* m = std::get_if<KnnModel>(&model)) {
        j["k"] = m->params.k;
        j["weighting"] = weighting_name(m->params.weighting);
        j["mac_scale"] = m->params.mac_scale;
        j["train"] = matrix_to_json(m->train);
    } else if (const auto* m = std::get_if<PerMacKnnModel>(&model)) {
        j["k"] = m->k;
        j["weighting"] = weighting_name(m->weighting);
        j["fallback_mean"] = m->fallback_mean;
        nlohmann::json tables = nlohmann::json::object();
        for (const auto& [mac, t] : m->tables)
            tables[mac] = {{"coords", t.coords}, {"targets", t.targets}};
        j["tables"] = std::move(tables);
    } else if (const auto* m = std::get_if<MlpModel>(&model)) {
        j["hidden_units"] = m->params.hidden_units;
        j["adam"] = {{"learning_rate", m->params.adam.learning_rate},
                     {"beta1", m->params.adam.beta1},
                     {"beta2", m->params.adam.beta2},
                     {"epsilon", m->params.adam.epsilon}};
        j["epochs"] = m->params.epochs;
        j["batch_size"] = m->params.batch_size;
        j["seed"] = m->params.seed;
        j["volume"] = {m->params.volume.x_len, m->params.volume.y_len, m->params.volume.z_len};
        j["in_dim"] = m->network.in_dim();
        j["onehot_value"] = m->onehot_value;
        j["weights"] = m->network.parameters();
        j["history"] = {{"epoch_loss", m->history.epoch_loss},
                        {"best_epoch", m->history.best_epoch},
                        {"best_loss", m->history.best_loss}};
    }
    return j;
}

inline Result<TrainedModel> model_from_json(const nlohmann::json& j) {
    using R = Result<TrainedModel>;
    try {
        if (j.value("format_version", 0) != 1) return R::fail("unsupported model format_version");
        auto family = family_from_name(j.at("family").get<std::string>());
        if (!family) return R::fail("unknown model family");
        std::vector<std::string> columns = j.at("columns").get<std::vector<std::string>>();
        std::string trained_on = j.value("trained_on", "");
        switch (*family) {
            case Family::global_mean: {
                GlobalMeanModel m;
                m.mean = j.at("mean").get<double>();
                m.columns = std::move(columns);
                m.trained_on = std::move(trained_on);
                return R::ok(TrainedModel(std::move(m)));
            }
            case Family::per_mac_mean: {
                PerMacMeanModel m;
                m.means = j.at("means").get<std::map<std::string, double>>();
                m.fallback_mean = j.at("fallback_mean").get<double>();
                m.columns = std::move(columns);
                m.trained_on = std::move(trained_on);
                return R::ok(TrainedModel(std::move(m)));
            }
            case Family::knn: {
                KnnModel m;
                m.params.k = j.at("k").get<int>();
                auto w = weighting_from_name(j.at("weighting").get<std::string>());
                if (!w) return R::fail("unknown weighting");
                m.params.weighting = *w;
                m.params.mac_scale = j.at("mac_scale").get<double>();
                auto train = matrix_from_json(j.at("train"));
                if (!train) return R::fail(train.error());
                m.train = train.take();
                m.trained_on = std::move(trained_on);
                return R::ok(TrainedModel(std::move(m)));
            }
            case Family::per_mac_knn: {
                PerMacKnnModel m;
                m.k = j.at("k").get<int>();
                auto w = weighting_from_name(j.at("weighting").get<std::string>());
                if (!w) return R::fail("unknown weighting");
                m.weighting = *w;
                m.fallback_mean = j.at("fallback_mean").get<double>();
                for (const auto& [mac, t] : j.at("tables").items()) {
                    PerMacKnnModel::Table table;
                    t.at("coords").get_to(table.coords);
                    t.at("targets").get_to(table.targets);
                    if (table.coords.size() != 3 * table.targets.size())
                        return R::fail("bad per-MAC table shapes");
                    m.tables[mac] = std::move(table);
                }
                m.columns = std::move(columns);
                m.trained_on = std::move(trained_on);
                return R::ok(TrainedModel(std::move(m)));
            }
            case Family::mlp: {
                MlpModel m;
                m.params.hidden_units = j.at("hidden_units").get<int>();
                const auto& adam = j.at("adam");
                m.params.adam = {adam.at("learning_rate").get<double>(),
                                 adam.at("beta1").get<double>(),
                                 adam.at("beta2").get<double>(),
                                 adam.at("epsilon").get<double>()};
                m.params.epochs = j.at("epochs").get<int>();
                m.params.batch_size = j.at("batch_size").get<int>();
                m.params.seed = j.at("seed").get<std::uint64_t>();
                auto vol = j.at("volume").get<std::vector<double>>();
                if (vol.size() != 3) return R::fail("bad mlp volume");
                m.params.volume = {vol[0], vol[1], vol[2]};
                const size_t in_dim = j.at("in_dim").get<size_t>();
                m.network = MlpNetwork(in_dim, static_cast<size_t>(m.params.hidden_units));
                auto weights = j.at("weights").get<std::vector<double>>();
                if (weights.size() != m.network.parameter_count())
                    return R::fail("bad mlp weight count");
                m.network.parameters() = std::move(weights);
                m.onehot_value = j.value("onehot_value", 1.0);
                const auto& hist = j.at("history");
                hist.at("epoch_loss").get_to(m.history.epoch_loss);
                m.history.best_epoch = hist.at("best_epoch").get<size_t>();
                m.history.best_loss = hist.at("best_loss").get<double>();
                m.columns = std::move(columns);
                m.trained_on = std::move(trained_on);
                return R::ok(TrainedModel(std::move(m)));
            }
        }
        return R::fail("unknown family");
    } catch (const std::exception& e) {
        return R::fail(std::string("bad model json: ") + e.what());
    }
}

}  // namespace rem
