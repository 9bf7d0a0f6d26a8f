#include "cate/rng.hpp"

#include "cate/estimators.hpp"

namespace cate {

double Rng::normal() {
    // uniform() returns values in [0, 1); shift off exact zero.
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-54;
    return normal_quantile(u);
}

} // namespace cate
