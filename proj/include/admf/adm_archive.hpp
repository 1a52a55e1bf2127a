#pragma once

#include <string>
#include <vector>

#include "admf/market_data.hpp"

namespace admf {

/// On-disk layout: one directory holding `adm_<t>.csv` (n x n values, t the
/// return-day timestamp) plus `manifest.json` with keys
///   schema_version, measure, n_lag, predicted, assets, timestamps.
void write_adm_archive(const std::string& dir, const AdmSequence& seq,
                       bool predicted = false);

AdmSequence read_adm_archive(const std::string& dir, bool* predicted = nullptr);

/// Sample index sidecar (`samples.json`): k/u/h and per-split anchor positions.
void write_sample_index(const std::string& path, const DatasetSplit& split);
DatasetSplit read_sample_index(const std::string& path);

}  // namespace admf
