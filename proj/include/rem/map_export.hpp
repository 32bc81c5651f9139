#pragma once

// Dense 3D radio-environment-map grids: one trained model evaluated at
// every lattice point for one MAC, exported as CSV or JSON (and a 2D
// slice for plotting). Grid values equal pointwise predict() exactly;
// there is no interpolation.

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rem/regressors.hpp"
#include "rem/text.hpp"

namespace rem {

struct RemGrid {
    VolumeSpec volume;
    double resolution = 0.5;
    std::string mac;
    size_t nx = 0, ny = 0, nz = 0;
    std::vector<double> values;  // ix-major: ((ix * ny) + iy) * nz + iz
    std::string model_provenance;

    size_t index(size_t ix, size_t iy, size_t iz) const { return (ix * ny + iy) * nz + iz; }
    Position point(size_t ix, size_t iy, size_t iz) const {
        return {static_cast<double>(ix) * resolution, static_cast<double>(iy) * resolution,
                static_cast<double>(iz) * resolution};
    }
    friend bool operator==(const RemGrid& a, const RemGrid& b) {
        return a.volume == b.volume && a.resolution == b.resolution && a.mac == b.mac &&
               a.nx == b.nx && a.ny == b.ny && a.nz == b.nz && a.values == b.values;
    }
};

namespace detail {
// floor(len / res) + 1 lattice points per axis, inclusive of the face;
// the small epsilon absorbs binary-representation error in len / res.
inline size_t axis_points(double len, double res) {
    return static_cast<size_t>(std::floor(len / res + 1e-9)) + 1;
}
}  // namespace detail

inline Result<RemGrid> predict_grid(const TrainedModel& model, const VolumeSpec& volume,
                                    double resolution, const std::string& mac) {
    using R = Result<RemGrid>;
    if (!(resolution > 0)) return R::fail("resolution must be > 0");
    if (!volume.valid()) return R::fail("invalid volume");

    RemGrid grid;
    grid.volume = volume;
    grid.resolution = resolution;
    grid.mac = mac;
    grid.nx = detail::axis_points(volume.x_len, resolution);
    grid.ny = detail::axis_points(volume.y_len, resolution);
    grid.nz = detail::axis_points(volume.z_len, resolution);

    // queries use the model's own training columns and one-hot magnitude
    const std::vector<std::string>* columns = nullptr;
    double onehot_value = 1.0;
    std::visit([&](const auto& m) { columns = &m.columns; }, model);
    if (const auto* m = std::get_if<KnnModel>(&model))
        onehot_value = detail::matrix_onehot_value(m->train);
    else if (const auto* m = std::get_if<MlpModel>(&model))
        onehot_value = m->onehot_value;

    FeatureMatrix queries;
    queries.columns = *columns;
    const ColumnLayout layout = queries.layout();
    ptrdiff_t mac_col = -1;
    for (size_t c = layout.mac_begin; c < layout.mac_begin + layout.mac_count; ++c)
        if (queries.columns[c] == "mac=" + mac) mac_col = static_cast<ptrdiff_t>(c);

    const size_t d = queries.cols();
    const size_t n = grid.nx * grid.ny * grid.nz;
    queries.values.assign(n * d, 0.0);
    queries.targets.assign(n, 0.0);
    queries.mac_of_row.assign(n, mac);
    size_t r = 0;
    for (size_t ix = 0; ix < grid.nx; ++ix)
        for (size_t iy = 0; iy < grid.ny; ++iy)
            for (size_t iz = 0; iz < grid.nz; ++iz, ++r) {
                double* row = queries.values.data() + r * d;
                const Position p = grid.point(ix, iy, iz);
                if (layout.coord_count == 3) {
                    row[0] = p.x;
                    row[1] = p.y;
                    row[2] = p.z;
                }
                if (mac_col >= 0) row[static_cast<size_t>(mac_col)] = onehot_value;
            }

    const Predictions pred = predict(model, queries);
    grid.values = pred.values;
    grid.model_provenance = std::string(family_name(model_family(model)));
    for (double v : grid.values)
        if (!std::isfinite(v)) return R::fail("non-finite grid value");
    return R::ok(std::move(grid));
}

inline void export_grid_csv(const RemGrid& grid, std::ostream& out,
                            const std::string& comment = "") {
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "x,y,z,mac,rssi_pred\n";
    for (size_t ix = 0; ix < grid.nx; ++ix)
        for (size_t iy = 0; iy < grid.ny; ++iy)
            for (size_t iz = 0; iz < grid.nz; ++iz) {
                const Position p = grid.point(ix, iy, iz);
                out << format_double(p.x) << ',' << format_double(p.y) << ','
                    << format_double(p.z) << ',' << grid.mac << ','
                    << format_double(grid.values[grid.index(ix, iy, iz)]) << "\n";
            }
}

inline nlohmann::json grid_to_json(const RemGrid& grid) {
    return {{"format_version", 1},
            {"volume", {grid.volume.x_len, grid.volume.y_len, grid.volume.z_len}},
            {"resolution", grid.resolution},
            {"mac", grid.mac},
            {"dims", {grid.nx, grid.ny, grid.nz}},
            {"order", "ix-major"},
            {"values", grid.values},
            {"model", grid.model_provenance}};
}

inline Result<RemGrid> grid_from_json(const nlohmann::json& j) {
    using R = Result<RemGrid>;
    try {
        if (j.value("format_version", 0) != 1) return R::fail("unsupported grid format_version");
        RemGrid g;
        auto vol = j.at("volume").get<std::vector<double>>();
        if (vol.size() != 3) return R::fail("bad grid volume");
        g.volume = {vol[0], vol[1], vol[2]};
        g.resolution = j.at("resolution").get<double>();
        g.mac = j.at("mac").get<std::string>();
        auto dims = j.at("dims").get<std::vector<size_t>>();
        if (dims.size() != 3) return R::fail("bad grid dims");
        g.nx = dims[0];
        g.ny = dims[1];
        g.nz = dims[2];
        j.at("values").get_to(g.values);
        g.model_provenance = j.value("model", "");
        if (g.values.size() != g.nx * g.ny * g.nz) return R::fail("grid value count mismatch");
        return R::ok(std::move(g));
    } catch (const std::exception& e) {
        return R::fail(std::string("bad grid json: ") + e.what());
    }
}

// CSV import for round-tripping exported grids. Geometry is recovered
// from the coordinate sets; `#` comment lines are skipped.
inline Result<RemGrid> grid_from_csv(std::istream& in) {
    using R = Result<RemGrid>;
    std::string line;
    bool header_seen = false;
    struct Row {
        double x, y, z, v;
        std::string mac;
    };
    std::vector<Row> rows;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "x,y,z,mac,rssi_pred")
                return R::fail("line " + std::to_string(line_no) + ": bad grid header");
            header_seen = true;
            continue;
        }
        auto f = split_csv_line(line);
        if (f.size() != 5) return R::fail("line " + std::to_string(line_no) + ": want 5 fields");
        auto x = parse_double(f[0]), y = parse_double(f[1]), z = parse_double(f[2]),
             v = parse_double(f[4]);
        if (!x || !y || !z || !v)
            return R::fail("line " + std::to_string(line_no) + ": bad number");
        rows.push_back({*x, *y, *z, *v, f[3]});
    }
    if (rows.empty()) return R::fail("empty grid csv");
    RemGrid g;
    g.mac = rows.front().mac;
    std::vector<double> xs, ys, zs;
    for (const auto& r : rows) {
        xs.push_back(r.x);
        ys.push_back(r.y);
        zs.push_back(r.z);
    }
    auto uniq = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    uniq(xs);
    uniq(ys);
    uniq(zs);
    g.nx = xs.size();
    g.ny = ys.size();
    g.nz = zs.size();
    g.resolution = g.nx > 1 ? xs[1] - xs[0] : (g.ny > 1 ? ys[1] - ys[0] : 1.0);
    g.volume = {std::max(xs.back(), 1e-9), std::max(ys.back(), 1e-9), std::max(zs.back(), 1e-9)};
    if (rows.size() != g.nx * g.ny * g.nz) return R::fail("grid rows do not form a lattice");
    g.values.assign(rows.size(), 0.0);
    size_t r = 0;
    for (size_t ix = 0; ix < g.nx; ++ix)
        for (size_t iy = 0; iy < g.ny; ++iy)
            for (size_t iz = 0; iz < g.nz; ++iz, ++r)
                g.values[g.index(ix, iy, iz)] = rows[r].v;
    return R::ok(std::move(g));
}

// Horizontal slice at the lattice plane nearest to z, as a TSV table
// with x labels down the rows and y labels across the columns.
inline Result<std::string> grid_slice_tsv(const RemGrid& grid, double z) {
    if (grid.nz == 0) return Result<std::string>::fail("empty grid");
    size_t iz = 0;
    double best = std::abs(z - 0.0);
    for (size_t i = 1; i < grid.nz; ++i) {
        const double dist = std::abs(z - static_cast<double>(i) * grid.resolution);
        if (dist < best) {
            best = dist;
            iz = i;
        }
    }
    std::string out = "x\\y";
    for (size_t iy = 0; iy < grid.ny; ++iy)
        out += "\t" + format_double(static_cast<double>(iy) * grid.resolution);
    out += "\n";
    for (size_t ix = 0; ix < grid.nx; ++ix) {
        out += format_double(static_cast<double>(ix) * grid.resolution);
        for (size_t iy = 0; iy < grid.ny; ++iy)
            out += "\t" + format_double(grid.values[grid.index(ix, iy, iz)]);
        out += "\n";
    }
    return Result<std::string>::ok(std::move(out));
}

}  // namespace rem
