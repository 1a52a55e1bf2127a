#include "admf/rearrange.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "admf/common.hpp"
#include "admf/csv.hpp"

namespace admf {

std::vector<std::vector<double>> monthly_average_returns(const ReturnTable& rt,
                                                         int period) {
    if (period < 1) throw ConfigError("period must be >= 1");
    const long n_ret = rt.returns.rows();
    if (n_ret == 0) throw DataError("empty return table");
    const int n_assets = static_cast<int>(rt.returns.cols());
    std::vector<std::vector<double>> coarse(n_assets);
    for (long start = 0; start < n_ret; start += period) {
        const long len = std::min<long>(period, n_ret - start);
        const Eigen::RowVectorXd mean =
            rt.returns.middleRows(start, len).colwise().mean();
        for (int a = 0; a < n_assets; ++a) coarse[a].push_back(mean(a));
    }
    return coarse;
}

double dtw_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw DataError("dtw_distance on empty series");
    const std::size_t n = a.size(), m = b.size();
    // Two-row DP over the full alignment grid.
    std::vector<double> prev(m), curr(m);
    prev[0] = std::abs(a[0] - b[0]);
    for (std::size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + std::abs(a[0] - b[j]);
    for (std::size_t i = 1; i < n; ++i) {
        curr[0] = prev[0] + std::abs(a[i] - b[0]);
        for (std::size_t j = 1; j < m; ++j) {
            const double best = std::min({prev[j], curr[j - 1], prev[j - 1]});
            curr[j] = best + std::abs(a[i] - b[j]);
        }
        std::swap(prev, curr);
    }
    return prev[m - 1];
}

DistanceMatrix dtw_distance_matrix(const std::vector<std::string>& assets,
                                   const std::vector<std::vector<double>>& series) {
    if (assets.size() != series.size()) {
        throw DataError("asset/series count mismatch");
    }
    const int n = static_cast<int>(assets.size());
    DistanceMatrix dm;
    dm.assets = assets;
    dm.d = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double v = dtw_distance(series[i], series[j]);
            dm.d(i, j) = v;
            dm.d(j, i) = v;
        }
    }
    return dm;
}

AssetOrdering hierarchical_order(const DistanceMatrix& dm) {
    const int n = static_cast<int>(dm.assets.size());
    if (n == 0) throw DataError("hierarchical_order on empty universe");
    if (dm.d.rows() != n || dm.d.cols() != n) {
        throw DataError("distance matrix shape mismatch");
    }

    struct Cluster {
        std::vector<int> members;  // original indices, in concatenation order
        int min_index;
    };
    std::vector<Cluster> clusters;
    clusters.reserve(n);
    for (int i = 0; i < n; ++i) clusters.push_back({{i}, i});

    // UPGMA linkage on the original distances: mean over all cross pairs.
    auto linkage = [&](const Cluster& a, const Cluster& b) {
        double sum = 0.0;
        for (int i : a.members) {
            for (int j : b.members) sum += dm.d(i, j);
        }
        return sum / (static_cast<double>(a.members.size()) * b.members.size());
    };

    while (clusters.size() > 1) {
        double best = std::numeric_limits<double>::infinity();
        std::pair<int, int> best_key{0, 0};
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double d = linkage(clusters[i], clusters[j]);
                std::pair<int, int> key{
                    std::min(clusters[i].min_index, clusters[j].min_index),
                    std::max(clusters[i].min_index, clusters[j].min_index)};
                if (d < best || (d == best && key < best_key)) {
                    best = d;
                    best_key = key;
                    bi = i;
                    bj = j;
                }
            }
        }
        Cluster& a = clusters[bi];
        Cluster& b = clusters[bj];
        // Child with the smaller original index leads the concatenation.
        Cluster merged;
        const Cluster& first = a.min_index < b.min_index ? a : b;
        const Cluster& second = a.min_index < b.min_index ? b : a;
        merged.members = first.members;
        merged.members.insert(merged.members.end(), second.members.begin(),
                              second.members.end());
        merged.min_index = std::min(a.min_index, b.min_index);
        clusters.erase(clusters.begin() + bj);
        clusters[bi] = std::move(merged);
    }

    AssetOrdering ord;
    ord.provenance = AssetOrdering::Provenance::dtw_hierarchical;
    ord.order.reserve(n);
    for (int idx : clusters.front().members) ord.order.push_back(dm.assets[idx]);
    return ord;
}

namespace {

std::vector<int> permutation_of(const std::vector<std::string>& universe,
                                const AssetOrdering& ord) {
    if (universe.size() != ord.order.size()) {
        throw DataError("ordering universe size mismatch");
    }
    std::unordered_map<std::string, int> index;
    for (std::size_t i = 0; i < universe.size(); ++i) {
        index[universe[i]] = static_cast<int>(i);
    }
    std::vector<int> perm;
    perm.reserve(ord.order.size());
    std::vector<bool> seen(universe.size(), false);
    for (const auto& a : ord.order) {
        auto it = index.find(a);
        if (it == index.end()) throw DataError("ordering names unknown asset '" + a + "'");
        if (seen[it->second]) throw DataError("ordering repeats asset '" + a + "'");
        seen[it->second] = true;
        perm.push_back(it->second);
    }
    return perm;
}

}  // namespace

Eigen::MatrixXd apply_ordering(const Eigen::MatrixXd& m,
                               const std::vector<std::string>& universe,
                               const AssetOrdering& ord) {
    const std::vector<int> perm = permutation_of(universe, ord);
    const int n = static_cast<int>(perm.size());
    if (m.rows() != n || m.cols() != n) throw DataError("matrix/universe size mismatch");
    Eigen::MatrixXd out(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) out(i, j) = m(perm[i], perm[j]);
    }
    return out;
}

AdmSequence apply_ordering(const AdmSequence& seq, const AssetOrdering& ord) {
    const std::vector<int> perm = permutation_of(seq.assets, ord);
    AdmSequence out;
    out.assets = ord.order;
    out.measure = seq.measure;
    out.n_lag = seq.n_lag;
    out.timestamps = seq.timestamps;
    out.mats.reserve(seq.mats.size());
    const int n = static_cast<int>(perm.size());
    for (const auto& m : seq.mats) {
        Eigen::MatrixXd r(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) r(i, j) = m(perm[i], perm[j]);
        }
        out.mats.push_back(std::move(r));
    }
    return out;
}

AssetOrdering fit_dtw_ordering(const ReturnTable& rt, long train_rows, int period) {
    ReturnTable head = rt;
    if (train_rows > 0 && train_rows < rt.returns.rows()) {
        head.returns = rt.returns.topRows(train_rows);
        head.dates.assign(rt.dates.begin(), rt.dates.begin() + train_rows);
    }
    const auto coarse = monthly_average_returns(head, period);
    return hierarchical_order(dtw_distance_matrix(rt.assets, coarse));
}

void write_ordering(const std::string& path, const AssetOrdering& ord) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "# provenance: "
        << (ord.provenance == AssetOrdering::Provenance::dtw_hierarchical
                ? "dtw_hierarchical"
                : "original")
        << '\n';
    for (const auto& a : ord.order) out << a << '\n';
}

AssetOrdering read_ordering(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    AssetOrdering ord;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        line = csv::trim(line);
        if (line.empty()) continue;
        if (first && line.rfind("# provenance:", 0) == 0) {
            first = false;
            ord.provenance = line.find("dtw_hierarchical") != std::string::npos
                                 ? AssetOrdering::Provenance::dtw_hierarchical
                                 : AssetOrdering::Provenance::original;
            continue;
        }
        first = false;
        ord.order.push_back(line);
    }
    if (ord.order.empty()) throw DataError(path + ": empty ordering");
    return ord;
}

}  // namespace admf
