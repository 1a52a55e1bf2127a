#include "admf/expert_usage.hpp"

#include <fstream>

#include "admf/csv.hpp"

namespace admf {

ExpertUsageProfile expert_usage(ForecastModel& model, const AdmSequence& seq,
                                const std::vector<AdmSample>& samples,
                                const std::vector<int>& phase_of_return, int n_phases) {
    if (n_phases < 1) throw ConfigError("need at least one phase");
    ExpertUsageProfile profile;
    Eigen::MatrixXd sums;
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(n_phases);
    for (const auto& s : samples) {
        const long t = seq.timestamps.at(s.anchor);
        if (t < 0 || t >= static_cast<long>(phase_of_return.size())) {
            throw DataError("sample anchor outside the labelled range");
        }
        const int phase = phase_of_return[t];
        model.forward(sample_frames(seq, s), nullptr, false);
        const GateDecision* gate = model.quad_gate();
        if (!gate) throw DataError("model has no MoE gate to profile");
        if (profile.n_exp == 0) {
            profile.n_exp = static_cast<int>(gate->weights.size());
            profile.top_k = static_cast<int>(gate->selected.size());
            sums = Eigen::MatrixXd::Zero(n_phases, profile.n_exp);
        }
        for (int i : gate->selected) sums(phase, i) += 1.0 / profile.top_k;
        counts(phase) += 1.0;
    }
    for (int p = 0; p < n_phases; ++p) {
        if (counts(p) == 0.0) {
            throw DataError("phase " + std::to_string(p) + " received no samples");
        }
    }
    profile.weights = sums.array().colwise() / counts.array();
    return profile;
}

void write_expert_usage(const std::string& wide_path, const std::string& long_path,
                        const ExpertUsageProfile& profile) {
    {
        std::ofstream out(wide_path);
        if (!out) throw DataError("cannot open for writing: " + wide_path);
        out << "phase";
        for (int e = 0; e < profile.n_exp; ++e) out << ",expert" << e;
        out << '\n';
        for (Eigen::Index p = 0; p < profile.weights.rows(); ++p) {
            out << p;
            for (Eigen::Index e = 0; e < profile.weights.cols(); ++e) {
                out << ',' << csv::format(profile.weights(p, e));
            }
            out << '\n';
        }
    }
    std::ofstream out(long_path);
    if (!out) throw DataError("cannot open for writing: " + long_path);
    out << "phase,expert,weight\n";
    for (Eigen::Index p = 0; p < profile.weights.rows(); ++p) {
        for (Eigen::Index e = 0; e < profile.weights.cols(); ++e) {
            out << p << ',' << e << ',' << csv::format(profile.weights(p, e)) << '\n';
        }
    }
}

double regime_similarity_margin(const ExpertUsageProfile& profile,
                                const std::vector<int>& regime_of_phase) {
    const Eigen::Index n = profile.weights.rows();
    if (static_cast<Eigen::Index>(regime_of_phase.size()) != n) {
        throw DataError("regime labels do not match phase count");
    }
    auto cosine = [&](Eigen::Index a, Eigen::Index b) {
        const double na = profile.weights.row(a).norm();
        const double nb = profile.weights.row(b).norm();
        if (na == 0.0 || nb == 0.0) return 0.0;
        return profile.weights.row(a).dot(profile.weights.row(b)) / (na * nb);
    };
    double within = 0.0, cross = 0.0;
    long n_within = 0, n_cross = 0;
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) {
            if (regime_of_phase[a] == regime_of_phase[b]) {
                within += cosine(a, b);
                ++n_within;
            } else {
                cross += cosine(a, b);
                ++n_cross;
            }
        }
    }
    if (n_within == 0 || n_cross == 0) {
        throw DataError("similarity margin needs both within- and cross-regime pairs");
    }
    return within / n_within - cross / n_cross;
}

}  // namespace admf
