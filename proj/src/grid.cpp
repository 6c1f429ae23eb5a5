#include "fracbayes/grid.hpp"

#include <stdexcept>

namespace fracbayes {

RectGrid::RectGrid(int nx, int ny, Rectangle domain)
    : nx_(nx), ny_(ny), domain_(domain) {
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("RectGrid: cell counts must be positive");
  if (domain.x1 <= domain.x0 || domain.y1 <= domain.y0)
    throw std::invalid_argument("RectGrid: empty domain rectangle");
  hx_ = (domain.x1 - domain.x0) / nx;
  hy_ = (domain.y1 - domain.y0) / ny;

  cells_.assign(edge_count(), {-1, -1});
  boundary_.assign(edge_count(), 0);
  // Adjacency keeps the semantic order {upwind, downwind} along the edge
  // normal: {west, east} for vertical edges, {south, north} for horizontal
  // ones, with -1 where the neighbour does not exist.
  for (int i = 0; i <= nx_; ++i)
    for (int j = 0; j < ny_; ++j) {
      const int e = vertical_edge_id(i, j);
      cells_[e] = {i > 0 ? cell_id(i - 1, j) : -1, i < nx_ ? cell_id(i, j) : -1};
      boundary_[e] = (i == 0 || i == nx_);
    }
  for (int i = 0; i < nx_; ++i)
    for (int j = 0; j <= ny_; ++j) {
      const int e = horizontal_edge_id(i, j);
      cells_[e] = {j > 0 ? cell_id(i, j - 1) : -1, j < ny_ ? cell_id(i, j) : -1};
      boundary_[e] = (j == 0 || j == ny_);
    }
}

int RectGrid::boundary_orientation(int edge) const {
  if (!boundary_[edge])
    throw std::invalid_argument("boundary_orientation: interior edge");
  if (is_vertical(edge)) {
    const int i = edge / ny_;
    return i == 0 ? -1 : 1;
  }
  const int j = (edge - vertical_edge_count()) / nx_;
  return j == 0 ? -1 : 1;
}

std::array<double, 2> RectGrid::edge_midpoint(int edge) const {
  if (is_vertical(edge)) {
    const int i = edge / ny_;
    const int j = edge % ny_;
    return {domain_.x0 + i * hx_, domain_.y0 + (j + 0.5) * hy_};
  }
  const int k = edge - vertical_edge_count();
  const int i = k % nx_;
  const int j = k / nx_;
  return {domain_.x0 + (i + 0.5) * hx_, domain_.y0 + j * hy_};
}

std::vector<int> RectGrid::boundary_edges() const {
  std::vector<int> out;
  for (int e = 0; e < edge_count(); ++e)
    if (boundary_[e]) out.push_back(e);
  return out;
}

std::vector<int> RectGrid::left_right_boundary_edges() const {
  std::vector<int> out;
  for (int j = 0; j < ny_; ++j) out.push_back(vertical_edge_id(0, j));
  for (int j = 0; j < ny_; ++j) out.push_back(vertical_edge_id(nx_, j));
  return out;
}

RectGrid build_rect_grid(int nx, int ny, Rectangle domain) {
  return RectGrid(nx, ny, domain);
}

}  // namespace fracbayes
