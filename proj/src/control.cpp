#include "hwctrl/control.hpp"

#include "hwctrl/error.hpp"

namespace hwctrl {

void require_valid(const ControlPoint& u, int I, int J) {
  if (u.uc.size() != I || u.us.size() != J)
    throw Error(ErrorCode::ShapeMismatch, "control has wrong dimensions");
  if (!on_simplex(u.uc) || !on_simplex(u.us))
    throw Error(ErrorCode::InvalidInput, "control is not in the product of simplices");
}

}  // namespace hwctrl
