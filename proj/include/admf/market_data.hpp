#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace admf {

/// Aligned close-price panel: prices(i, j) = close of assets[j] on dates[i].
struct PriceTable {
    std::vector<std::string> assets;
    std::vector<std::string> dates;   // strictly increasing, ISO-8601
    Eigen::MatrixXd prices;           // n_dates x n_assets, all > 0
};

/// Log returns; one row fewer than the price table that produced it.
struct ReturnTable {
    std::vector<std::string> assets;
    std::vector<std::string> dates;   // return dates (price date of the later leg)
    Eigen::MatrixXd returns;          // (n_dates - 1) x n_assets
};

enum class Measure { correlation, covariance };
enum class CalendarPolicy { strict, intersect };

/// What to do when an asset has zero variance inside a correlation window.
enum class DegeneratePolicy { error, zero };

std::string to_string(Measure m);
Measure measure_from_string(const std::string& s);

/// Dependency-matrix sequence over one return table. `timestamps[i]` is the
/// return-day index of the window end for `mats[i]` (window (t - n_lag, t]).
struct AdmSequence {
    std::vector<std::string> assets;
    Measure measure = Measure::correlation;
    int n_lag = 0;
    std::vector<long> timestamps;
    std::vector<Eigen::MatrixXd> mats;

    std::size_t size() const { return mats.size(); }
    int n_assets() const { return static_cast<int>(assets.size()); }
};

/// One supervised example, stored as positions into an AdmSequence.
struct AdmSample {
    std::vector<int> inputs;  // k positions, strictly increasing, gap u
    int anchor = 0;           // == inputs.back()
    int target = 0;           // == anchor + h (in sequence positions)
};

struct SampleSet {
    int k = 0, u = 0, h = 0;
    std::vector<AdmSample> samples;
};

struct SplitFractions {
    double train = 0.8, validation = 0.1, test = 0.1;
};

struct DatasetSplit {
    int k = 0, u = 0, h = 0;
    std::vector<AdmSample> train, validation, test;
};

/// Parse a long-format price CSV (`date,asset,close`) into an aligned table.
/// `strict` drops assets that miss any date of the union calendar (recording a
/// warning); `intersect` keeps only dates shared by every asset.
PriceTable ingest_prices(const std::string& path, CalendarPolicy policy,
                         std::vector<std::string>* warnings = nullptr);

ReturnTable log_returns(const PriceTable& pt);

/// Sample dependency matrix over the window (t - n_lag, t], 1/(n_lag - 1)
/// normalization. `t` is a 0-based return-day index, t >= n_lag - 1.
Eigen::MatrixXd compute_adm(const ReturnTable& rt, long t, int n_lag, Measure measure,
                            DegeneratePolicy policy = DegeneratePolicy::error);

AdmSequence build_adm_sequence(const ReturnTable& rt, int n_lag, Measure measure,
                               DegeneratePolicy policy = DegeneratePolicy::error);

/// All windows of k frames spaced u apart with a target h ahead; the count is
/// max(0, N - ((k - 1) * u + h)).
SampleSet window_samples(std::size_t n_adm, int k, int u, int h);

/// Chronological split at cumulative-fraction boundaries (floored).
DatasetSplit split_samples(const SampleSet& set, const SplitFractions& fractions);

/// Frames of one sample as pointers into the sequence (no copies).
std::vector<const Eigen::MatrixXd*> sample_frames(const AdmSequence& seq,
                                                  const AdmSample& s);

/// Throws unless `m` satisfies the invariants of its measure kind
/// (symmetry 1e-9; correlation: unit diagonal, entries in [-1, 1]).
void validate_adm(const Eigen::MatrixXd& m, Measure measure);

}  // namespace admf
