#include "riemoc/double_description.hpp"

#include <algorithm>
#include <cmath>

namespace riemoc::dd {

namespace {

struct Ray {
  Vec v;
  std::vector<int> tight;  // indices of processed inequalities with c·v = 0
};

bool subset_of(const std::vector<int>& a, const std::vector<int>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

std::vector<int> intersect(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

ConeGenerators extreme_rays(const Mat& C, int dim, double tol) {
  // Lineality basis starts as the full space; rays start empty.
  std::vector<Vec> lin;
  for (int i = 0; i < dim; ++i) lin.push_back(Vec::Unit(dim, i));
  std::vector<Ray> rays;

  for (Eigen::Index rix = 0; rix < C.rows(); ++rix) {
    Vec c = C.row(rix).transpose();
    int idx = static_cast<int>(rix);
    if (c.norm() <= tol) continue;

    // If the lineality space meets the constraint, split off one generator.
    int pivot = -1;
    for (std::size_t i = 0; i < lin.size(); ++i)
      if (std::abs(c.dot(lin[i])) > tol) {
        pivot = static_cast<int>(i);
        break;
      }
    if (pivot >= 0) {
      Vec l0 = lin[static_cast<std::size_t>(pivot)];
      if (c.dot(l0) > 0) l0 = -l0;
      l0 /= -c.dot(l0);  // c·l0 = -1
      std::vector<Vec> new_lin;
      for (std::size_t i = 0; i < lin.size(); ++i) {
        if (static_cast<int>(i) == pivot) continue;
        Vec adj = lin[i] + c.dot(lin[i]) * l0;
        if (adj.norm() > tol) new_lin.push_back(adj);
      }
      lin = std::move(new_lin);
      std::vector<Ray> projected;
      for (auto& r : rays) {
        r.v = r.v + c.dot(r.v) * l0;  // project onto {c·v = 0}
        double nr = r.v.norm();
        if (nr <= tol) continue;
        r.v /= nr;
        r.tight.push_back(idx);
        std::sort(r.tight.begin(), r.tight.end());
        projected.push_back(std::move(r));
      }
      rays = std::move(projected);
      Ray nr;
      nr.v = l0.normalized();
      rays.push_back(std::move(nr));
      continue;
    }

    // Lineality is inside the hyperplane; classic ray partition step.
    std::vector<Ray> keep, pos, neg;
    for (auto& r : rays) {
      double s = c.dot(r.v);
      if (s > tol)
        pos.push_back(r);
      else if (s < -tol)
        neg.push_back(r);
      else {
        r.tight.push_back(idx);
        std::sort(r.tight.begin(), r.tight.end());
        keep.push_back(r);
      }
    }
    std::vector<Ray> next = neg;
    next.insert(next.end(), keep.begin(), keep.end());
    for (const auto& rp : pos)
      for (const auto& rn : neg) {
        // Adjacency: no third ray is tight on every inequality shared by the pair.
        std::vector<int> common = intersect(rp.tight, rn.tight);
        bool adjacent = true;
        for (const auto& other : rays) {
          if (&other == &rp || &other == &rn) continue;
          if ((other.v - rp.v).norm() < tol || (other.v - rn.v).norm() < tol) continue;
          if (subset_of(common, other.tight)) {
            adjacent = false;
            break;
          }
        }
        if (!adjacent && !common.empty()) continue;
        Ray w;
        w.v = c.dot(rp.v) * rn.v - c.dot(rn.v) * rp.v;
        double nw = w.v.norm();
        if (nw <= tol) continue;
        w.v /= nw;
        w.tight = common;
        w.tight.push_back(idx);
        std::sort(w.tight.begin(), w.tight.end());
        next.push_back(std::move(w));
      }
    // Deduplicate parallel rays.
    rays.clear();
    for (auto& r : next) {
      bool dup = false;
      for (const auto& q : rays)
        if ((q.v - r.v).norm() < 1e-9) {
          dup = true;
          break;
        }
      if (!dup) rays.push_back(std::move(r));
    }
  }

  ConeGenerators out;
  out.lineality = std::move(lin);
  for (auto& l : out.lineality) l.normalize();
  out.rays.reserve(rays.size());
  for (auto& r : rays) out.rays.push_back(r.v.normalized());
  return out;
}

}  // namespace riemoc::dd
