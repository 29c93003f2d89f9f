#pragma once

#include <Eigen/Dense>
#include <memory>
#include <variant>
#include <vector>

#include "hwctrl/control.hpp"

namespace hwctrl {

struct GridSpec {
  double radius = 8.0;
  double h = 0.1;
  ControlPoint fallback;
};

/// Uniform box grid [-k h, k h]^dim with 2k+1 nodes per axis; node 0 of every axis is -k h.
class Grid {
 public:
  Grid() = default;
  Grid(int dim, double radius, double h);

  int dim() const { return dim_; }
  int half() const { return k_; }
  int per_axis() const { return 2 * k_ + 1; }
  long size() const { return size_; }
  double h() const { return h_; }
  double radius() const { return k_ * h_; }
  long stride(int axis) const { return stride_[axis]; }

  int axis_index(long node, int axis) const { return static_cast<int>((node / stride_[axis]) % per_axis()); }
  double coord(long node, int axis) const { return (axis_index(node, axis) - k_) * h_; }
  Eigen::VectorXd point(long node) const;
  long origin() const;
  bool on_boundary(long node) const;
  /// Nearest node, or -1 when x lies outside the box by more than half a cell.
  long nearest(const Eigen::VectorXd& x) const;

 private:
  int dim_ = 0;
  int k_ = 0;
  double h_ = 0.0;
  long size_ = 0;
  std::vector<long> stride_;
};

struct GridPolicy {
  Grid grid;
  std::vector<ControlPoint> u;  // one per node
  ControlPoint fallback;

  const ControlPoint& at(const Eigen::VectorXd& x) const {
    long node = grid.nearest(x);
    return node < 0 ? fallback : u[node];
  }
};

/// Stationary feedback x -> (u^c, u^s).
class MarkovControl {
 public:
  MarkovControl() = default;
  static MarkovControl constant(ControlPoint u) {
    MarkovControl c;
    c.impl_ = std::move(u);
    return c;
  }
  static MarkovControl grid(std::shared_ptr<const GridPolicy> p) {
    MarkovControl c;
    c.impl_ = std::move(p);
    return c;
  }

  bool is_constant() const { return std::holds_alternative<ControlPoint>(impl_); }

  const ControlPoint& operator()(const Eigen::VectorXd& x) const {
    if (auto* u = std::get_if<ControlPoint>(&impl_)) return *u;
    return std::get<std::shared_ptr<const GridPolicy>>(impl_)->at(x);
  }

 private:
  std::variant<ControlPoint, std::shared_ptr<const GridPolicy>> impl_;
};

}  // namespace hwctrl
