#pragma once

#include <vector>

#include "riemoc/grid.hpp"

namespace riemoc::dd {

/// Generator description of the polyhedral cone {z : C z <= 0}:
/// cone = span(lineality) + nonneg combinations of rays.
struct ConeGenerators {
  std::vector<Vec> lineality;
  std::vector<Vec> rays;  // normalized |r|_2 = 1
  bool trivial() const { return lineality.empty() && rays.empty(); }
};

/// Double description method, incremental over the rows of C. Intended for
/// desk-scale dimensions (<= 8 variables, tens of inequalities).
ConeGenerators extreme_rays(const Mat& C, int dim, double tol = 1e-10);

}  // namespace riemoc::dd
