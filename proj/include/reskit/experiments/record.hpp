#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "reskit/errors.hpp"
#include "reskit/experiments/config.hpp"

namespace reskit::experiments {

using json = nlohmann::json;

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt(std::size_t v) { return std::to_string(v); }

/// CSV table; every row starts with config_hash and seed.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) {
        if (row.size() != columns.size()) throw DimensionError("table: row width differs from header");
        rows.push_back(std::move(row));
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream f(path, std::ios::trunc);
        if (!f) throw FormatError("cannot open '" + path.string() + "' for writing");
        auto line = [&f](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) f << (i ? "," : "") << cells[i];
            f << '\n';
        };
        line(columns);
        for (const auto& r : rows) line(r);
        if (!f) throw FormatError("write to '" + path.string() + "' failed");
    }
};

inline json environment_descriptor(std::size_t workers) {
    return {{"compiler", std::string("g++ ") + __VERSION__},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"hardware_threads", std::thread::hardware_concurrency()},
            {"workers", workers},
            {"eigen_threads", Eigen::nbThreads()},
            {"timestamp_utc", std::chrono::duration_cast<std::chrono::seconds>(
                                  std::chrono::system_clock::now().time_since_epoch()).count()}};
}

struct ResultRecord {
    std::string experiment;
    std::string config_hash;
    Table results;
    std::map<std::string, Table> curves;
    json meta = json::object();

    /// Writes results.csv, curves/<name>.csv and meta.json into `dir`.
    void write(const std::filesystem::path& dir, const Config& cfg) const {
        std::filesystem::create_directories(dir / "curves");
        results.write(dir / "results.csv");
        for (const auto& [name, table] : curves) table.write(dir / "curves" / (name + ".csv"));
        json m = meta;
        m["experiment"] = experiment;
        m["config_hash"] = config_hash;
        m["config"] = cfg.values();
        m["environment"] = environment_descriptor(cfg.count("workers"));
        std::ofstream f(dir / "meta.json", std::ios::trunc);
        if (!f) throw FormatError("cannot write meta.json in '" + dir.string() + "'");
        f << m.dump(2) << '\n';
    }
};

/// Thread-safe sink for rows produced by parallel cells; rows are ordered by cell
/// index on extraction so output does not depend on scheduling.
class Collector {
public:
    void add(std::size_t cell, std::vector<std::string> row) {
        std::lock_guard lock(mutex_);
        rows_.emplace(cell, std::move(row));
    }

    void drain_into(Table& t) {
        std::lock_guard lock(mutex_);
        for (auto& [cell, row] : rows_) t.add(std::move(row));
        rows_.clear();
    }

private:
    std::mutex mutex_;
    std::multimap<std::size_t, std::vector<std::string>> rows_;
};

}  // namespace reskit::experiments
