#include "hwctrl/stats.hpp"

namespace hwctrl {

double t_quantile_975(int df) {
  if (df < 1) return 0.0;
  if (df == 1) return 12.706204736174698;
  if (df == 2) return 4.302652729749464;
  if (df == 3) return 3.182446305284263;
  if (df == 4) return 2.7764451051977934;
  const double z = 1.959963984540054;
  const double z3 = z * z * z, z5 = z3 * z * z, z7 = z5 * z * z;
  const double n = df;
  return z + (z3 + z) / (4 * n) + (5 * z5 + 16 * z3 + 3 * z) / (96 * n * n) +
         (3 * z7 + 19 * z5 + 17 * z3 - 15 * z) / (384 * n * n * n);
}

Estimate mean_ci(const std::vector<double>& values) {
  RunningStats s;
  for (double v : values) s.add(v);
  return {s.mean(), t_quantile_975(static_cast<int>(s.count()) - 1) * s.std_error()};
}

}  // namespace hwctrl
