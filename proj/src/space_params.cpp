#include "besov/space_params.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace besov {

double SpaceParams::delta() const {
  const double gap = positive_part(reciprocal(p) - reciprocal(r));
  return mixed ? gap : d * gap;
}

double SpaceParams::nu() const {
  const double dl = delta();
  if (dl == 0.0) return kInf;
  return (s - dl) / (2.0 * dl);
}

double SpaceParams::inv_nu() const {
  const double v = nu();
  return is_inf(v) ? 0.0 : 1.0 / v;
}

std::string SpaceParams::check() const {
  std::ostringstream err;
  if (d < 1) err << "dimension d must be >= 1; ";
  if (m < 1) err << "spline order m must be >= 1; ";
  if (!(p > 0.0) || !(q > 0.0) || !(r > 0.0)) err << "p, q, r must lie in (0, inf]; ";
  if (!(s > 0.0) || is_inf(s)) err << "smoothness s must be a positive real; ";
  if (!err.str().empty()) return err.str();
  if (!(s > delta())) {
    err << (mixed ? "mixed" : "isotropic") << " regime requires s > " << delta() << "; ";
  }
  const double cap = std::min<double>(m, m - 1 + reciprocal(p));
  if (!(s < cap)) err << "spline order too low: need s < min(m, m-1+1/p) = " << cap << "; ";
  return err.str();
}

void SpaceParams::validate() const {
  const std::string msg = check();
  if (!msg.empty()) throw std::invalid_argument("SpaceParams: " + msg);
}

}  // namespace besov
