#include "mixcs/core.hpp"

namespace mixcs {

bool all_finite(const Eigen::Ref<const MatrixXd>& m) { return m.allFinite(); }

}  // namespace mixcs
