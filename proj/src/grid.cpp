#include "slowfast/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace slowfast {

std::size_t BoxGrid::node_count() const {
    std::size_t n = 1;
    for (int r : resolution) n *= std::size_t(r);
    return n;
}

std::size_t BoxGrid::index(const std::vector<int>& multi) const {
    std::size_t idx = 0;
    for (int d = 0; d < dim(); ++d) idx = idx * std::size_t(resolution[d]) + std::size_t(multi[d]);
    return idx;
}

std::vector<int> BoxGrid::multi_index(std::size_t idx) const {
    std::vector<int> multi(static_cast<std::size_t>(dim()));
    for (int d = dim() - 1; d >= 0; --d) {
        multi[std::size_t(d)] = int(idx % std::size_t(resolution[d]));
        idx /= std::size_t(resolution[d]);
    }
    return multi;
}

std::vector<double> BoxGrid::node(std::size_t idx) const {
    std::vector<int> multi = multi_index(idx);
    std::vector<double> x(static_cast<std::size_t>(dim()));
    for (int d = 0; d < dim(); ++d) x[std::size_t(d)] = coord(d, multi[std::size_t(d)]);
    return x;
}

double BoxGrid::max_spacing() const {
    return *std::max_element(spacing.begin(), spacing.end());
}

double BoxGrid::min_spacing() const {
    return *std::min_element(spacing.begin(), spacing.end());
}

BoxGrid make_box_grid(const std::vector<double>& lower,
                      const std::vector<double>& upper,
                      const std::vector<int>& resolution) {
    if (lower.empty() || lower.size() != upper.size() || lower.size() != resolution.size())
        throw std::invalid_argument("make_box_grid: dimension mismatch");
    BoxGrid g;
    g.lower = lower;
    g.upper = upper;
    g.resolution = resolution;
    g.spacing.resize(lower.size());
    for (std::size_t d = 0; d < lower.size(); ++d) {
        if (resolution[d] < 2)
            throw std::invalid_argument("make_box_grid: resolution must be >= 2 per axis");
        if (!(lower[d] < upper[d]))
            throw std::invalid_argument("make_box_grid: degenerate bounds");
        g.spacing[d] = (upper[d] - lower[d]) / double(resolution[d] - 1);
    }
    return g;
}

Field make_field(const BoxGrid& grid, double fill) {
    Field f;
    f.grid = grid;
    f.values.assign(grid.node_count(), fill);
    return f;
}

double interpolate(const Field& field, const std::vector<double>& point) {
    const BoxGrid& g = field.grid;
    int d = g.dim();
    if (int(point.size()) != d)
        throw std::invalid_argument("interpolate: dimension mismatch");
    std::vector<int> base(static_cast<std::size_t>(d));
    std::vector<double> frac(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
        double t = (point[std::size_t(k)] - g.lower[std::size_t(k)]) / g.spacing[std::size_t(k)];
        t = std::max(0.0, std::min(t, double(g.resolution[std::size_t(k)] - 1)));
        int i = std::min(int(t), g.resolution[std::size_t(k)] - 2);
        base[std::size_t(k)] = i;
        frac[std::size_t(k)] = t - double(i);
    }
    double acc = 0.0;
    std::vector<int> corner(static_cast<std::size_t>(d));
    for (unsigned mask = 0; mask < (1u << d); ++mask) {
        double w = 1.0;
        for (int k = 0; k < d; ++k) {
            bool hi = mask & (1u << k);
            corner[std::size_t(k)] = base[std::size_t(k)] + (hi ? 1 : 0);
            w *= hi ? frac[std::size_t(k)] : 1.0 - frac[std::size_t(k)];
        }
        if (w != 0.0) acc += w * field.values[g.index(corner)];
    }
    return acc;
}

std::vector<double> gradient(const Field& field, std::size_t node) {
    const BoxGrid& g = field.grid;
    int d = g.dim();
    std::vector<int> multi = g.multi_index(node);
    std::vector<double> grad(static_cast<std::size_t>(d));
    std::vector<int> probe = multi;
    for (int k = 0; k < d; ++k) {
        int i = multi[std::size_t(k)];
        int n = g.resolution[std::size_t(k)];
        double h = g.spacing[std::size_t(k)];
        double v;
        if (i == 0) {
            probe[std::size_t(k)] = 1;
            v = (field.values[g.index(probe)] - field.values[node]) / h;
        } else if (i == n - 1) {
            probe[std::size_t(k)] = n - 2;
            v = (field.values[node] - field.values[g.index(probe)]) / h;
        } else {
            probe[std::size_t(k)] = i + 1;
            double up = field.values[g.index(probe)];
            probe[std::size_t(k)] = i - 1;
            double dn = field.values[g.index(probe)];
            v = (up - dn) / (2.0 * h);
        }
        probe[std::size_t(k)] = i;
        grad[std::size_t(k)] = v;
    }
    return grad;
}

namespace {
void format_value(std::string& row, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    row += buf;
}
}  // namespace

void write_field_csv(const Field& field, std::ostream& out) {
    const BoxGrid& g = field.grid;
    std::string row;
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        row.clear();
        std::vector<double> x = g.node(i);
        for (double c : x) {
            format_value(row, c);
            row += ',';
        }
        format_value(row, field.values[i]);
        row += '\n';
        out << row;
    }
}

void write_field_csv(const Field& field, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_field_csv(field, out);
}

Field read_field_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("field csv: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows.front().size() < 2)
        throw std::runtime_error("field csv: empty or malformed");
    std::size_t d = rows.front().size() - 1;

    std::vector<std::vector<double>> axes(d);
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> c;
        c.reserve(rows.size());
        for (auto& r : rows) c.push_back(r[k]);
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end(),
                            [](double a, double b) { return std::fabs(a - b) < 1e-12; }),
                c.end());
        if (c.size() < 2) throw std::runtime_error("field csv: degenerate axis");
        axes[k] = std::move(c);
    }
    std::vector<double> lower(d), upper(d);
    std::vector<int> res(d);
    for (std::size_t k = 0; k < d; ++k) {
        lower[k] = axes[k].front();
        upper[k] = axes[k].back();
        res[k] = int(axes[k].size());
    }
    Field f = make_field(make_box_grid(lower, upper, res));
    if (rows.size() != f.grid.node_count())
        throw std::runtime_error("field csv: node count does not match grid");
    for (auto& r : rows) {
        std::vector<int> multi(d);
        for (std::size_t k = 0; k < d; ++k) {
            double t = (r[k] - lower[k]) / f.grid.spacing[k];
            multi[k] = int(std::lround(t));
            if (std::fabs(t - double(multi[k])) > 1e-6)
                throw std::runtime_error("field csv: non-uniform coordinates");
        }
        f.values[f.grid.index(multi)] = r[d];
    }
    return f;
}

Field read_field_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return read_field_csv(in);
}

}  // namespace slowfast
