#include "admf/adm_archive.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "admf/common.hpp"
#include "admf/csv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace admf {

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path + ": bad JSON: " + e.what());
    }
    return j;
}

AdmSample sample_at(int anchor, int k, int u, int h) {
    AdmSample s;
    for (int d = 1; d <= k; ++d) s.inputs.push_back(anchor - (k - d) * u);
    s.anchor = anchor;
    s.target = anchor + h;
    return s;
}

}  // namespace

void write_adm_archive(const std::string& dir, const AdmSequence& seq, bool predicted) {
    const fs::path target(dir);
    const fs::path tmp(dir + ".tmp");
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    json manifest;
    manifest["schema_version"] = 1;
    manifest["measure"] = to_string(seq.measure);
    manifest["n_lag"] = seq.n_lag;
    manifest["predicted"] = predicted;
    manifest["assets"] = seq.assets;
    manifest["timestamps"] = seq.timestamps;
    std::ofstream mf(tmp / "manifest.json");
    mf << manifest.dump(2) << '\n';
    mf.close();

    for (std::size_t i = 0; i < seq.size(); ++i) {
        csv::write_matrix((tmp / ("adm_" + std::to_string(seq.timestamps[i]) + ".csv")).string(),
                          seq.mats[i]);
    }
    fs::remove_all(target);
    fs::rename(tmp, target);
}

AdmSequence read_adm_archive(const std::string& dir, bool* predicted) {
    const json manifest = read_json_file((fs::path(dir) / "manifest.json").string());
    AdmSequence seq;
    try {
        seq.measure = measure_from_string(manifest.at("measure").get<std::string>());
        seq.n_lag = manifest.at("n_lag").get<int>();
        seq.assets = manifest.at("assets").get<std::vector<std::string>>();
        seq.timestamps = manifest.at("timestamps").get<std::vector<long>>();
        if (predicted) *predicted = manifest.at("predicted").get<bool>();
    } catch (const json::exception& e) {
        throw DataError(dir + "/manifest.json: " + e.what());
    }
    const int n = seq.n_assets();
    seq.mats.reserve(seq.timestamps.size());
    for (long t : seq.timestamps) {
        Eigen::MatrixXd m =
            csv::read_matrix((fs::path(dir) / ("adm_" + std::to_string(t) + ".csv")).string());
        if (m.rows() != n || m.cols() != n) {
            throw DataError(dir + ": adm_" + std::to_string(t) + ".csv has wrong shape");
        }
        seq.mats.push_back(std::move(m));
    }
    return seq;
}

void write_sample_index(const std::string& path, const DatasetSplit& split) {
    json j;
    j["k"] = split.k;
    j["u"] = split.u;
    j["h"] = split.h;
    auto anchors = [](const std::vector<AdmSample>& v) {
        std::vector<int> a;
        a.reserve(v.size());
        for (const auto& s : v) a.push_back(s.anchor);
        return a;
    };
    j["train"] = anchors(split.train);
    j["validation"] = anchors(split.validation);
    j["test"] = anchors(split.test);
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

DatasetSplit read_sample_index(const std::string& path) {
    const json j = read_json_file(path);
    DatasetSplit split;
    try {
        split.k = j.at("k").get<int>();
        split.u = j.at("u").get<int>();
        split.h = j.at("h").get<int>();
        for (int a : j.at("train").get<std::vector<int>>()) {
            split.train.push_back(sample_at(a, split.k, split.u, split.h));
        }
        for (int a : j.at("validation").get<std::vector<int>>()) {
            split.validation.push_back(sample_at(a, split.k, split.u, split.h));
        }
        for (int a : j.at("test").get<std::vector<int>>()) {
            split.test.push_back(sample_at(a, split.k, split.u, split.h));
        }
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    return split;
}

}  // namespace admf
