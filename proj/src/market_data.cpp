#include "admf/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "admf/common.hpp"
#include "admf/csv.hpp"

namespace admf {

std::string to_string(Measure m) {
    return m == Measure::correlation ? "correlation" : "covariance";
}

Measure measure_from_string(const std::string& s) {
    if (s == "correlation") return Measure::correlation;
    if (s == "covariance") return Measure::covariance;
    throw ConfigError("unknown measure: '" + s + "'");
}

PriceTable ingest_prices(const std::string& path, CalendarPolicy policy,
                         std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open price file: " + path);

    // asset -> (date -> close)
    std::map<std::string, std::map<std::string, double>> series;
    std::set<std::string> all_dates;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) continue;
        auto fields = csv::split(line);
        if (!saw_header) {
            saw_header = true;
            if (fields.size() >= 3 && fields[0] == "date") continue;  // header row
        }
        if (fields.size() != 3) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected 3 fields `date,asset,close`, got " +
                            std::to_string(fields.size()));
        }
        double close = 0.0;
        try {
            std::size_t used = 0;
            close = std::stod(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument(fields[2]);
        } catch (const std::exception&) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": close is not a number: '" + fields[2] + "'");
        }
        if (!(close > 0.0)) {
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": nonpositive close for " + fields[1]);
        }
        series[fields[1]][fields[0]] = close;
        all_dates.insert(fields[0]);
    }
    if (series.empty()) throw DataError(path + ": no price rows");

    const std::size_t n_assets_in = series.size();
    std::vector<std::string> dates;
    if (policy == CalendarPolicy::strict) {
        dates.assign(all_dates.begin(), all_dates.end());
        for (auto it = series.begin(); it != series.end();) {
            if (it->second.size() != dates.size()) {
                if (warnings) {
                    warnings->push_back("dropping asset '" + it->first +
                                        "' with incomplete calendar (" +
                                        std::to_string(it->second.size()) + "/" +
                                        std::to_string(dates.size()) + " dates)");
                }
                it = series.erase(it);
            } else {
                ++it;
            }
        }
    } else {
        std::map<std::string, std::size_t> date_count;
        for (const auto& [asset, sm] : series) {
            for (const auto& [d, v] : sm) date_count[d]++;
        }
        for (const auto& [d, c] : date_count) {
            if (c == series.size()) dates.push_back(d);
        }
        if (dates.empty()) throw DataError(path + ": no common dates across assets");
    }

    if (series.empty() || (n_assets_in >= 2 && series.size() < 2)) {
        throw DataError(path + ": fewer than 2 assets survive ingest");
    }

    PriceTable pt;
    for (const auto& [asset, sm] : series) pt.assets.push_back(asset);
    pt.dates = dates;
    pt.prices.resize(static_cast<Eigen::Index>(dates.size()),
                     static_cast<Eigen::Index>(pt.assets.size()));
    for (std::size_t j = 0; j < pt.assets.size(); ++j) {
        const auto& sm = series.at(pt.assets[j]);
        for (std::size_t i = 0; i < dates.size(); ++i) {
            pt.prices(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                sm.at(dates[i]);
        }
    }
    return pt;
}

ReturnTable log_returns(const PriceTable& pt) {
    if (pt.dates.size() < 2) throw DataError("need at least 2 dates for returns");
    ReturnTable rt;
    rt.assets = pt.assets;
    rt.dates.assign(pt.dates.begin() + 1, pt.dates.end());
    const Eigen::Index t = pt.prices.rows();
    rt.returns = (pt.prices.bottomRows(t - 1).array().log() -
                  pt.prices.topRows(t - 1).array().log())
                     .matrix();
    return rt;
}

void validate_adm(const Eigen::MatrixXd& m, Measure measure) {
    if (m.rows() != m.cols()) throw NumericError("ADM is not square");
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9) {
        throw NumericError("ADM asymmetry " + std::to_string(asym) + " exceeds 1e-9");
    }
    if (measure == Measure::correlation) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, i) - 1.0) > 1e-9) {
                throw NumericError("correlation diagonal entry " + std::to_string(i) +
                                   " is " + std::to_string(m(i, i)));
            }
        }
        if (m.minCoeff() < -1.0 - 1e-9 || m.maxCoeff() > 1.0 + 1e-9) {
            throw NumericError("correlation entry outside [-1, 1]");
        }
    } else {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (m(i, i) < 0.0) throw NumericError("negative covariance diagonal");
        }
    }
}

Eigen::MatrixXd compute_adm(const ReturnTable& rt, long t, int n_lag, Measure measure,
                            DegeneratePolicy policy) {
    const long n_ret = rt.returns.rows();
    if (n_lag < 2) throw ConfigError("n_lag must be >= 2");
    if (t < n_lag - 1 || t >= n_ret) {
        throw DataError("ADM window (t - n_lag, t] out of range at t=" +
                        std::to_string(t));
    }
    const int n = static_cast<int>(rt.returns.cols());
    const Eigen::MatrixXd win = rt.returns.middleRows(t - n_lag + 1, n_lag);
    const Eigen::RowVectorXd mean = win.colwise().mean();
    const Eigen::MatrixXd centered = win.rowwise() - mean;
    Eigen::MatrixXd cov =
        (centered.transpose() * centered) / static_cast<double>(n_lag - 1);
    cov = ((cov + cov.transpose()) / 2.0).eval();  // kill rounding asymmetry

    if (measure == Measure::covariance) return cov;

    Eigen::VectorXd sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    std::vector<int> flat;
    for (int i = 0; i < n; ++i) {
        if (sd(i) <= 0.0) flat.push_back(i);
    }
    if (!flat.empty() && policy == DegeneratePolicy::error) {
        throw NumericError("zero-variance asset '" + rt.assets[flat.front()] +
                           "' in correlation window ending at t=" + std::to_string(t));
    }
    Eigen::MatrixXd corr(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double v;
            if (i == j) {
                v = 1.0;
            } else if (sd(i) <= 0.0 || sd(j) <= 0.0) {
                v = 0.0;  // DegeneratePolicy::zero
            } else {
                v = cov(i, j) / (sd(i) * sd(j));
                v = std::clamp(v, -1.0, 1.0);
            }
            corr(i, j) = v;
            corr(j, i) = v;
        }
    }
    return corr;
}

AdmSequence build_adm_sequence(const ReturnTable& rt, int n_lag, Measure measure,
                               DegeneratePolicy policy) {
    const long n_ret = rt.returns.rows();
    if (n_ret < n_lag) {
        throw DataError("need at least n_lag=" + std::to_string(n_lag) +
                        " returns, have " + std::to_string(n_ret));
    }
    AdmSequence seq;
    seq.assets = rt.assets;
    seq.measure = measure;
    seq.n_lag = n_lag;
    seq.timestamps.reserve(n_ret - n_lag + 1);
    seq.mats.reserve(n_ret - n_lag + 1);
    for (long t = n_lag - 1; t < n_ret; ++t) {
        try {
            seq.mats.push_back(compute_adm(rt, t, n_lag, measure, policy));
        } catch (const NumericError& e) {
            throw NumericError("at t=" + std::to_string(t) + ": " + e.what());
        }
        seq.timestamps.push_back(t);
    }
    return seq;
}

SampleSet window_samples(std::size_t n_adm, int k, int u, int h) {
    if (k < 1 || u < 1 || h < 1) throw ConfigError("k, u, h must all be >= 1");
    SampleSet set;
    set.k = k;
    set.u = u;
    set.h = h;
    const long span = static_cast<long>(k - 1) * u + h;
    const long n = static_cast<long>(n_adm);
    for (long anchor = static_cast<long>(k - 1) * u; anchor + h < n; ++anchor) {
        AdmSample s;
        s.inputs.reserve(k);
        for (int d = 1; d <= k; ++d) {
            s.inputs.push_back(static_cast<int>(anchor - static_cast<long>(k - d) * u));
        }
        s.anchor = static_cast<int>(anchor);
        s.target = static_cast<int>(anchor + h);
        set.samples.push_back(std::move(s));
    }
    // Count identity: max(0, N - ((k-1)u + h)).
    const long expected = std::max<long>(0, n - span);
    if (static_cast<long>(set.samples.size()) != expected) {
        throw NumericError("window_samples count mismatch");
    }
    return set;
}

DatasetSplit split_samples(const SampleSet& set, const SplitFractions& f) {
    if (!(f.train > 0.0 && f.validation > 0.0 && f.test > 0.0)) {
        throw ConfigError("split fractions must be positive");
    }
    if (std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
    const std::size_t n = set.samples.size();
    const auto b1 = static_cast<std::size_t>(std::floor(n * f.train));
    const auto b2 = static_cast<std::size_t>(std::floor(n * (f.train + f.validation)));
    if (b1 == 0 || b2 <= b1 || b2 >= n) {
        throw DataError("split of " + std::to_string(n) +
                        " samples leaves an empty part");
    }
    DatasetSplit out;
    out.k = set.k;
    out.u = set.u;
    out.h = set.h;
    out.train.assign(set.samples.begin(), set.samples.begin() + b1);
    out.validation.assign(set.samples.begin() + b1, set.samples.begin() + b2);
    out.test.assign(set.samples.begin() + b2, set.samples.end());
    return out;
}

std::vector<const Eigen::MatrixXd*> sample_frames(const AdmSequence& seq,
                                                  const AdmSample& s) {
    std::vector<const Eigen::MatrixXd*> frames;
    frames.reserve(s.inputs.size());
    for (int pos : s.inputs) frames.push_back(&seq.mats.at(pos));
    return frames;
}

}  // namespace admf
