#include "nh/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nh/errors.hpp"

namespace nh {

int face_axis(Face f) {
    switch (f) {
        case Face::Left:
        case Face::Right: return 0;
        case Face::Bottom:
        case Face::Top: return 1;
        case Face::Back:
        case Face::Front: return 2;
    }
    return 0;
}

bool face_is_upper(Face f) { return f == Face::Right || f == Face::Top || f == Face::Front; }

Face parse_face(std::string_view name) {
    if (name == "left") return Face::Left;
    if (name == "right") return Face::Right;
    if (name == "bottom") return Face::Bottom;
    if (name == "top") return Face::Top;
    if (name == "back") return Face::Back;
    if (name == "front") return Face::Front;
    throw ParameterError("unknown boundary tag '" + std::string(name) + "'");
}

std::string_view face_name(Face f) {
    switch (f) {
        case Face::Left: return "left";
        case Face::Right: return "right";
        case Face::Bottom: return "bottom";
        case Face::Top: return "top";
        case Face::Back: return "back";
        case Face::Front: return "front";
    }
    return "?";
}

StructuredGrid::StructuredGrid(std::vector<int> cells_per_axis, std::vector<double> extent) {
    dim_ = static_cast<int>(cells_per_axis.size());
    if (dim_ < 1 || dim_ > 3) throw ParameterError("grid dimension must be 1, 2 or 3");
    if (!extent.empty() && static_cast<int>(extent.size()) != dim_)
        throw ParameterError("grid extent must have one entry per axis");
    for (int a = 0; a < dim_; ++a) {
        if (cells_per_axis[a] < 1) throw ParameterError("cells per axis must be positive");
        cells_[a] = cells_per_axis[a];
        if (!extent.empty()) {
            if (!(extent[a] > 0.0)) throw ParameterError("grid extent must be positive");
            extent_[a] = extent[a];
        }
    }
    node_count_ = 1;
    cell_count_ = 1;
    for (int a = 0; a < dim_; ++a) {
        node_count_ *= static_cast<std::size_t>(cells_[a] + 1);
        cell_count_ *= static_cast<std::size_t>(cells_[a]);
    }

    std::array<int, 3> p{0, 1, 2};
    double factorial = 1.0;
    for (int a = 2; a <= dim_; ++a) factorial *= a;
    double cell_volume = 1.0;
    for (int a = 0; a < dim_; ++a) cell_volume *= spacing(a);
    do {
        perms_.push_back(p);
        SimplexShape s;
        s.volume = cell_volume / factorial;
        // lambda_0 = 1 - xi_{p0}, lambda_a = xi_{p(a-1)} - xi_{pa}, lambda_d = xi_{p(d-1)}
        s.grads[0][p[0]] = -1.0 / spacing(p[0]);
        for (int a = 1; a <= dim_; ++a) {
            s.grads[a][p[a - 1]] += 1.0 / spacing(p[a - 1]);
            if (a < dim_) s.grads[a][p[a]] -= 1.0 / spacing(p[a]);
        }
        shapes_.push_back(s);
    } while (std::next_permutation(p.begin(), p.begin() + dim_));
}

StructuredGrid StructuredGrid::unit(int dim, int cells_per_axis) {
    return StructuredGrid(std::vector<int>(static_cast<std::size_t>(dim), cells_per_axis));
}

std::vector<std::size_t> StructuredGrid::node_shape() const {
    std::vector<std::size_t> shape;
    for (int a = dim_ - 1; a >= 0; --a) shape.push_back(static_cast<std::size_t>(nodes(a)));
    return shape;
}

double StructuredGrid::volume() const noexcept {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= extent_[a];
    return v;
}

Index3 StructuredGrid::node_index(std::size_t id) const noexcept {
    Index3 idx{0, 0, 0};
    for (int a = 0; a < 3; ++a) {
        const auto n = static_cast<std::size_t>(nodes(a));
        idx[a] = static_cast<int>(id % n);
        id /= n;
    }
    return idx;
}

Point3 StructuredGrid::node_coord(std::size_t id) const noexcept {
    const Index3 idx = node_index(id);
    Point3 x{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) x[a] = idx[a] * spacing(a);
    return x;
}

Index3 StructuredGrid::cell_index(std::size_t id) const noexcept {
    Index3 idx{0, 0, 0};
    for (int a = 0; a < 3; ++a) {
        const auto n = static_cast<std::size_t>(a < dim_ ? cells_[a] : 1);
        idx[a] = static_cast<int>(id % n);
        id /= n;
    }
    return idx;
}

Element StructuredGrid::element(std::size_t e) const noexcept {
    Element el;
    const std::size_t per_cell = shapes_.size();
    el.cell = e / per_cell;
    el.permutation = static_cast<int>(e % per_cell);
    Index3 v = cell_index(el.cell);
    el.nodes[0] = node_id(v);
    const auto& p = perms_[el.permutation];
    for (int a = 0; a < dim_; ++a) {
        ++v[p[a]];
        el.nodes[a + 1] = node_id(v);
    }
    return el;
}

std::vector<std::size_t> StructuredGrid::boundary_nodes(Face f) const {
    const int axis = face_axis(f);
    if (axis >= dim_) throw ParameterError("boundary '" + std::string(face_name(f)) + "' does not exist in " +
                                           std::to_string(dim_) + "D");
    const int fixed = face_is_upper(f) ? cells_[axis] : 0;
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < node_count_; ++n)
        if (node_index(n)[axis] == fixed) out.push_back(n);
    return out;
}

bool StructuredGrid::on_boundary(std::size_t node) const noexcept {
    const Index3 idx = node_index(node);
    for (int a = 0; a < dim_; ++a)
        if (idx[a] == 0 || idx[a] == cells_[a]) return true;
    return false;
}

namespace {

// Kuhn-simplex evaluation inside the cell containing x.
template <class Fetch>
double eval_in_cell(const StructuredGrid& g, const Point3& x, Fetch&& fetch) {
    const int d = g.dim();
    Index3 base{0, 0, 0};
    std::array<double, 3> xi{0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a) {
        const double s = x[a] / g.spacing(a);
        int c = static_cast<int>(std::floor(s));
        c = std::clamp(c, 0, g.cells(a) - 1);
        base[a] = c;
        xi[a] = std::clamp(s - c, 0.0, 1.0);
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.begin() + d, [&](int a, int b) { return xi[a] > xi[b]; });
    double value = (1.0 - xi[order[0]]) * fetch(g.node_id(base));
    Index3 v = base;
    for (int a = 0; a < d; ++a) {
        ++v[order[a]];
        const double next = a + 1 < d ? xi[order[a + 1]] : 0.0;
        value += (xi[order[a]] - next) * fetch(g.node_id(v));
    }
    return value;
}

}  // namespace

double interpolate_p1(const StructuredGrid& grid, const std::vector<double>& nodal, const Point3& x) {
    return eval_in_cell(grid, x, [&](std::size_t n) { return nodal[n]; });
}

std::vector<double> prolongate(const StructuredGrid& coarse, const std::vector<double>& coarse_values,
                               const StructuredGrid& fine, int components) {
    if (coarse.dim() != fine.dim()) throw ParameterError("prolongate: grid dimensions differ");
    if (coarse_values.size() != coarse.node_count() * static_cast<std::size_t>(components))
        throw ParameterError("prolongate: coarse array does not match grid");
    std::vector<double> out(fine.node_count() * static_cast<std::size_t>(components));
    for (std::size_t n = 0; n < fine.node_count(); ++n) {
        const Point3 x = fine.node_coord(n);
        for (int c = 0; c < components; ++c) {
            out[n * components + c] = eval_in_cell(
                coarse, x, [&](std::size_t m) { return coarse_values[m * components + c]; });
        }
    }
    return out;
}

}  // namespace nh
