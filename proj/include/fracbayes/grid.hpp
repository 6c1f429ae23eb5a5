#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

namespace fracbayes {

/// One cell value per grid cell, row-major (x fastest).
using CellField = Eigen::VectorXd;

struct Rectangle {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
};

/// Structured rectangular grid of the domain. Velocity DoFs live on edges,
/// pressure DoFs on cells. Edges are indexed vertical-first:
///   vertical edge (i,j), i=0..nx, j=0..ny-1   -> id = i*ny + j
///   horizontal edge (i,j), i=0..nx-1, j=0..ny -> id = (nx+1)*ny + j*nx + i
/// A vertical edge carries the flux in +x direction, a horizontal edge the
/// flux in +y direction.
class RectGrid {
 public:
  RectGrid(int nx, int ny, Rectangle domain = {});

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const Rectangle& domain() const { return domain_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double cell_area() const { return hx_ * hy_; }

  int cell_count() const { return nx_ * ny_; }
  int edge_count() const { return (nx_ + 1) * ny_ + nx_ * (ny_ + 1); }
  int vertical_edge_count() const { return (nx_ + 1) * ny_; }

  int cell_id(int i, int j) const { return j * nx_ + i; }
  int vertical_edge_id(int i, int j) const { return i * ny_ + j; }
  int horizontal_edge_id(int i, int j) const {
    return vertical_edge_count() + j * nx_ + i;
  }

  bool is_vertical(int edge) const { return edge < vertical_edge_count(); }
  bool is_boundary(int edge) const { return boundary_[edge]; }
  double edge_length(int edge) const { return is_vertical(edge) ? hy_ : hx_; }

  /// Cells adjacent to an edge; second entry is -1 on the boundary.
  std::array<int, 2> edge_cells(int edge) const { return cells_[edge]; }

  /// Unit normal in the edge's positive direction: (1,0) or (0,1).
  std::array<double, 2> edge_normal(int edge) const {
    return is_vertical(edge) ? std::array<double, 2>{1.0, 0.0}
                             : std::array<double, 2>{0.0, 1.0};
  }

  /// +1 if the positive edge direction points out of the domain at this
  /// boundary edge (east/north sides), -1 otherwise (west/south).
  int boundary_orientation(int edge) const;

  /// West, east, south, north edge of a cell.
  std::array<int, 4> cell_edges(int i, int j) const {
    return {vertical_edge_id(i, j), vertical_edge_id(i + 1, j),
            horizontal_edge_id(i, j), horizontal_edge_id(i, j + 1)};
  }

  std::array<double, 2> cell_center(int i, int j) const {
    return {domain_.x0 + (i + 0.5) * hx_, domain_.y0 + (j + 0.5) * hy_};
  }
  std::array<double, 2> cell_center(int cell) const {
    return cell_center(cell % nx_, cell / nx_);
  }
  std::array<double, 2> edge_midpoint(int edge) const;

  std::vector<int> boundary_edges() const;
  /// Boundary edges on the x = x0 and x = x1 sides (left then right).
  std::vector<int> left_right_boundary_edges() const;

 private:
  int nx_, ny_;
  Rectangle domain_;
  double hx_, hy_;
  std::vector<std::array<int, 2>> cells_;  // per edge
  std::vector<char> boundary_;
};

RectGrid build_rect_grid(int nx, int ny, Rectangle domain = {});

}  // namespace fracbayes
