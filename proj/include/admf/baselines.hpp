#pragma once

#include <Eigen/Dense>

#include "admf/market_data.hpp"

namespace admf {

/// Carry-forward baseline: the ADM at the sample's anchor.
const Eigen::MatrixXd& baseline_previous(const AdmSequence& seq, const AdmSample& s);

/// Constant Correlation Model: unit diagonal, every off-diagonal set to the
/// grand mean of all off-diagonal entries of the history ADMs whose timestamp
/// lies in (t_anchor - window_days, t_anchor].
Eigen::MatrixXd baseline_ccm(const AdmSequence& seq, int anchor_pos,
                             long window_days = 5 * 252);

}  // namespace admf
