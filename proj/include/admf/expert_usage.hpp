#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "admf/market_data.hpp"
#include "admf/model.hpp"

namespace admf {

/// Mean expert-importance weights per market phase: for each sample, a
/// selected expert contributes 1/top_k, an unselected one 0.
struct ExpertUsageProfile {
    Eigen::MatrixXd weights;  // n_phases x n_exp
    int n_exp = 0;
    int top_k = 0;
};

/// Groups samples by the phase of their anchor timestamp and averages the
/// quadratic-coefficient gate's selections. Every phase must receive at
/// least one sample.
ExpertUsageProfile expert_usage(ForecastModel& model, const AdmSequence& seq,
                                const std::vector<AdmSample>& samples,
                                const std::vector<int>& phase_of_return,
                                int n_phases);

/// Wide CSV (phase x expert) and long-format CSV (phase, expert, weight).
void write_expert_usage(const std::string& wide_path, const std::string& long_path,
                        const ExpertUsageProfile& profile);

/// Mean cosine similarity of usage rows within regimes minus across regimes.
double regime_similarity_margin(const ExpertUsageProfile& profile,
                                const std::vector<int>& regime_of_phase);

}  // namespace admf
