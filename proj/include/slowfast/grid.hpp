#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace slowfast {

// Uniform rectangular grid. Node ordering is row-major with axis 0 slowest.
struct BoxGrid {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<int> resolution;   // nodes per axis, >= 2
    std::vector<double> spacing;   // (upper-lower)/(resolution-1)

    int dim() const { return int(lower.size()); }
    std::size_t node_count() const;
    double coord(int axis, int i) const { return lower[axis] + spacing[axis] * i; }
    std::size_t index(const std::vector<int>& multi) const;
    std::vector<int> multi_index(std::size_t idx) const;
    std::vector<double> node(std::size_t idx) const;
    double max_spacing() const;
    double min_spacing() const;
};

BoxGrid make_box_grid(const std::vector<double>& lower,
                      const std::vector<double>& upper,
                      const std::vector<int>& resolution);

// Scalar field on a BoxGrid. +inf is the sentinel for infeasible distances.
struct Field {
    BoxGrid grid;
    std::vector<double> values;
};

Field make_field(const BoxGrid& grid, double fill = 0.0);

// Multilinear interpolation; points outside the box are clamped first.
double interpolate(const Field& field, const std::vector<double>& point);

// Central difference at interior nodes, first-order one-sided at the boundary.
std::vector<double> gradient(const Field& field, std::size_t node);

// CSV: one row per node, coordinates then value.
void write_field_csv(const Field& field, std::ostream& out);
void write_field_csv(const Field& field, const std::string& path);

// Rebuilds grid metadata from the coordinate columns (uniform grids only).
Field read_field_csv(std::istream& in);
Field read_field_csv(const std::string& path);

}  // namespace slowfast
