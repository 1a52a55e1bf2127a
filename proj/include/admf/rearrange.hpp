#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "admf/market_data.hpp"

namespace admf {

struct AssetOrdering {
    enum class Provenance { original, dtw_hierarchical };
    std::vector<std::string> order;  // permutation of the asset universe
    Provenance provenance = Provenance::original;
};

struct DistanceMatrix {
    std::vector<std::string> assets;
    Eigen::MatrixXd d;  // symmetric, zero diagonal, nonnegative
};

/// Per-asset means of consecutive non-overlapping `period`-day blocks; a
/// trailing partial block is averaged over its actual length.
/// Returns one coarse series per asset (column order of `rt`).
std::vector<std::vector<double>> monthly_average_returns(const ReturnTable& rt,
                                                         int period = 21);

/// Classic dynamic time warping with |a - b| local cost and full-alignment
/// boundary conditions (no warping window).
double dtw_distance(const std::vector<double>& a, const std::vector<double>& b);

DistanceMatrix dtw_distance_matrix(const std::vector<std::string>& assets,
                                   const std::vector<std::vector<double>>& series);

/// Agglomerative ordering: unweighted average linkage over the original
/// distance matrix; each merge concatenates the children's ordered lists
/// (cluster containing the smaller original index first). Ties between
/// candidate pairs break on the lexicographically smallest pair of cluster
/// minimum indices.
AssetOrdering hierarchical_order(const DistanceMatrix& dm);

/// result(i, j) = m(perm[i], perm[j]) where perm maps new slots to original
/// indices per `ord` against `universe`.
Eigen::MatrixXd apply_ordering(const Eigen::MatrixXd& m,
                               const std::vector<std::string>& universe,
                               const AssetOrdering& ord);

/// Reorders every matrix in the sequence (and its asset list).
AdmSequence apply_ordering(const AdmSequence& seq, const AssetOrdering& ord);

/// Ordering fit on the training period of a return table: coarse monthly
/// average returns -> pairwise DTW -> hierarchical order. `train_rows` caps
/// the rows used (0 = all).
AssetOrdering fit_dtw_ordering(const ReturnTable& rt, long train_rows = 0,
                               int period = 21);

void write_ordering(const std::string& path, const AssetOrdering& ord);
AssetOrdering read_ordering(const std::string& path);

}  // namespace admf
