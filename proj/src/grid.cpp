#include "hwctrl/grid.hpp"

#include <cmath>

#include "hwctrl/error.hpp"

namespace hwctrl {

Grid::Grid(int dim, double radius, double h) : dim_(dim), h_(h) {
  if (dim < 1) throw Error(ErrorCode::InvalidInput, "grid dimension must be >= 1");
  if (!(radius > 0.0) || !(h > 0.0)) throw Error(ErrorCode::InvalidInput, "grid radius and mesh must be > 0");
  k_ = static_cast<int>(std::lround(radius / h));
  if (k_ < 2) throw Error(ErrorCode::InvalidInput, "grid needs at least two cells on each side of the origin");
  stride_.resize(dim);
  double total = 1.0;
  long s = 1;
  for (int a = 0; a < dim; ++a) {
    stride_[a] = s;
    s *= per_axis();
    total *= per_axis();
  }
  if (total > 5e7) throw Error(ErrorCode::DimensionTooLarge, "grid would have more than 5e7 cells");
  size_ = s;
}

Eigen::VectorXd Grid::point(long node) const {
  Eigen::VectorXd x(dim_);
  for (int a = 0; a < dim_; ++a) x(a) = coord(node, a);
  return x;
}

long Grid::origin() const {
  long node = 0;
  for (int a = 0; a < dim_; ++a) node += k_ * stride_[a];
  return node;
}

bool Grid::on_boundary(long node) const {
  for (int a = 0; a < dim_; ++a) {
    int idx = axis_index(node, a);
    if (idx == 0 || idx == 2 * k_) return true;
  }
  return false;
}

long Grid::nearest(const Eigen::VectorXd& x) const {
  long node = 0;
  for (int a = 0; a < dim_; ++a) {
    double r = x(a) / h_;
    if (std::abs(r) > k_ + 0.5) return -1;
    long idx = std::lround(r) + k_;
    if (idx < 0) idx = 0;
    if (idx > 2 * k_) idx = 2 * k_;
    node += idx * stride_[a];
  }
  return node;
}

}  // namespace hwctrl
