#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace nh {

/// Faces of the box [0, L_0] x ... x [0, L_{d-1}].
/// Axis 0 carries left/right, axis 1 bottom/top, axis 2 back/front.
enum class Face { Left, Right, Bottom, Top, Back, Front };

int face_axis(Face f);
bool face_is_upper(Face f);
Face parse_face(std::string_view name);
std::string_view face_name(Face f);

using Index3 = std::array<int, 3>;
using Point3 = std::array<double, 3>;

/// P1 shape data shared by every simplex with the same Kuhn permutation.
struct SimplexShape {
    /// grads[a][i] = d(lambda_a)/dx_i for the d+1 barycentric functions.
    std::array<std::array<double, 3>, 4> grads{};
    double volume = 0.0;
};

struct Element {
    std::array<std::size_t, 4> nodes{};  // d+1 used
    int permutation = 0;
    std::size_t cell = 0;
};

/// Uniform tensor-product lattice over a box, split into simplices with the
/// Kuhn (Freudenthal) triangulation: 2 triangles per square, 6 tetrahedra per cube.
/// Nodes are numbered with axis 0 fastest. The triangulation is nested under
/// integer refinement, so a P1 function on a coarse grid is exactly a P1
/// function on any grid that refines it by an integer factor.
class StructuredGrid {
public:
    StructuredGrid() = default;
    explicit StructuredGrid(std::vector<int> cells_per_axis, std::vector<double> extent = {});

    /// Unit hypercube [0,1]^d with n cells per axis.
    static StructuredGrid unit(int dim, int cells_per_axis);

    int dim() const noexcept { return dim_; }
    int cells(int axis) const { return cells_[axis]; }
    int nodes(int axis) const { return axis < dim_ ? cells_[axis] + 1 : 1; }
    double extent(int axis) const { return extent_[axis]; }
    double spacing(int axis) const { return extent_[axis] / cells_[axis]; }
    std::vector<int> cells_per_axis() const { return {cells_.begin(), cells_.begin() + dim_}; }
    /// Node counts per axis in array (slowest-first) order, e.g. {ny+1, nx+1}.
    std::vector<std::size_t> node_shape() const;

    std::size_t node_count() const noexcept { return node_count_; }
    std::size_t cell_count() const noexcept { return cell_count_; }
    int simplices_per_cell() const noexcept { return static_cast<int>(shapes_.size()); }
    std::size_t element_count() const noexcept { return cell_count_ * shapes_.size(); }
    double volume() const noexcept;

    std::size_t node_id(const Index3& idx) const noexcept {
        return static_cast<std::size_t>(idx[0]) +
               static_cast<std::size_t>(nodes(0)) *
                   (static_cast<std::size_t>(idx[1]) + static_cast<std::size_t>(nodes(1)) * idx[2]);
    }
    Index3 node_index(std::size_t id) const noexcept;
    Point3 node_coord(std::size_t id) const noexcept;

    std::size_t cell_id(const Index3& idx) const noexcept {
        return static_cast<std::size_t>(idx[0]) +
               static_cast<std::size_t>(cells_[0]) *
                   (static_cast<std::size_t>(idx[1]) + static_cast<std::size_t>(cells_[1]) * idx[2]);
    }
    Index3 cell_index(std::size_t id) const noexcept;

    Element element(std::size_t e) const noexcept;
    const SimplexShape& shape(int permutation) const { return shapes_[permutation]; }
    /// Axis order used to walk from the base corner to the opposite corner.
    const std::array<int, 3>& permutation(int p) const { return perms_[p]; }

    std::vector<std::size_t> boundary_nodes(Face f) const;
    bool on_boundary(std::size_t node) const noexcept;

    bool operator==(const StructuredGrid& o) const {
        return dim_ == o.dim_ && cells_ == o.cells_ && extent_ == o.extent_;
    }

private:
    int dim_ = 0;
    std::array<int, 3> cells_{1, 1, 1};
    std::array<double, 3> extent_{1.0, 1.0, 1.0};
    std::size_t node_count_ = 0;
    std::size_t cell_count_ = 0;
    std::vector<std::array<int, 3>> perms_;
    std::vector<SimplexShape> shapes_;
};

/// Evaluate a P1 nodal function of `grid` at a point inside the box.
double interpolate_p1(const StructuredGrid& grid, const std::vector<double>& nodal, const Point3& x);

/// Evaluate a coarse P1 function at every node of a fine grid covering the same box.
std::vector<double> prolongate(const StructuredGrid& coarse, const std::vector<double>& coarse_values,
                               const StructuredGrid& fine, int components = 1);

}  // namespace nh
