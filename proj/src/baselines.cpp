#include "admf/baselines.hpp"

#include "admf/common.hpp"

namespace admf {

const Eigen::MatrixXd& baseline_previous(const AdmSequence& seq, const AdmSample& s) {
    return seq.mats.at(s.anchor);
}

Eigen::MatrixXd baseline_ccm(const AdmSequence& seq, int anchor_pos, long window_days) {
    if (seq.measure != Measure::correlation) {
        throw DataError("CCM baseline requires a correlation sequence");
    }
    if (anchor_pos < 0 || anchor_pos >= static_cast<int>(seq.size())) {
        throw DataError("CCM anchor out of range");
    }
    const long t_anchor = seq.timestamps[anchor_pos];
    const int n = seq.n_assets();
    double sum = 0.0;
    long count = 0;
    for (int p = anchor_pos; p >= 0; --p) {
        if (seq.timestamps[p] <= t_anchor - window_days) break;
        const Eigen::MatrixXd& m = seq.mats[p];
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                if (i != j) {
                    sum += m(i, j);
                    ++count;
                }
            }
        }
    }
    if (count == 0) throw DataError("CCM rolling window is empty");
    const double mean = sum / static_cast<double>(count);
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(n, n, mean);
    out.diagonal().setOnes();
    return out;
}

}  // namespace admf
