#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "reskit/errors.hpp"

namespace reskit::experiments {

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"convergence", "predict", "timing", "stability", "recdirect", "simulate-ks"};
    return names;
}

/// Keys that never influence results and are left out of the config hash.
inline const std::set<std::string>& non_semantic_keys() {
    static const std::set<std::string> keys = {"workers"};
    return keys;
}

namespace detail {

using Defaults = std::map<std::string, std::string>;

inline Defaults common_defaults() {
    return {
        {"seeds", "0,1,2,3,4"},
        {"workers", "1"},
        {"algorithms", "rc,src,rk"},
        {"activation", "erf"},
        {"activations", "erf,rff,relu"},
        {"sigma_i2", "0.16"},
        {"sigma_r2", "0.81"},
        {"sigma_b2", "0.16"},
        {"sigma_r2_list", "0.25,1,4"},
        {"r", "1.1"},
        {"alpha", "0.01"},
        {"N", "3996"},
        {"n", "10000"},
        {"m", "2000"},
        {"tau", "50"},
        {"rk_subsample", "2000"},
        {"warmup", "100"},
        {"horizon", "600"},
        {"test_starts", "20"},
        {"heldout", "12000"},
        {"dataset", ""},
        {"normalize", "max_abs"},
        {"ks_L", "22"},
        {"ks_grid", "100"},
        {"ks_dt", "0.25"},
        {"ks_subsample", "1"},
        {"ks_transient", "2000"},
        {"ks_seed", "0"},
        {"lyapunov", "auto"},
        {"lyap_probes", "4"},
        {"lyap_horizon", "8000"},
        {"normalizer_pairs", "4"},
        {"input_dim", "50"},
        {"series", "50"},
        {"T", "10"},
        {"record_t", "2,5,10"},
        {"redraw", "off"},
        {"study", "mse"},
        {"trials", "200"},
        {"delta", "0.05"},
        {"realizations", "100"},
        {"steps", "100"},
        {"rk_windows", "200"},
        {"repeats", "5"},
        {"warmup_runs", "1"},
        {"forward_steps", "500"},
        {"phases", "forward,train,predict"},
        {"direct_horizon", "200"},
        {"frames", "20000"},
        {"estimate_lyapunov", "true"},
    };
}

inline Defaults experiment_defaults(const std::string& experiment) {
    Defaults d = common_defaults();
    if (experiment == "convergence") {
        d["algorithms"] = "rc,src";
        d["sigma_i2"] = "1";
        d["sigma_b2"] = "0";
        d["N"] = "64,128,256,512,1024,2048,4096,8192";
        d["seeds"] = "0,1";
    } else if (experiment == "stability") {
        d["sigma_i2"] = "0.01";
        d["sigma_b2"] = "0";
        d["sigma_r2_list"] = "0.49,1,2.25";
        d["N"] = "1000";
        d["seeds"] = "0";
    } else if (experiment == "timing") {
        d["N"] = "1948,3996,8092";
        d["seeds"] = "0";
    } else if (experiment == "recdirect") {
        d["algorithms"] = "rc";
        d["N"] = "1948";
    }
    return d;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace detail

/// Flat key/value experiment configuration. Precedence: defaults < file (global keys,
/// then the experiment's section) < explicit overrides.
class Config {
public:
    Config() : Config("predict") {}

    explicit Config(std::string experiment) : experiment_(std::move(experiment)) {
        const auto& names = experiment_names();
        if (std::find(names.begin(), names.end(), experiment_) == names.end())
            throw ConfigError("unknown experiment '" + experiment_ + "'");
        values_ = detail::experiment_defaults(experiment_);
    }

    const std::string& experiment() const noexcept { return experiment_; }
    const std::map<std::string, std::string>& values() const noexcept { return values_; }

    void set(const std::string& key, const std::string& value) {
        if (!values_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
        values_[key] = detail::trim(value);
    }

    /// Parses "key=value".
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
        set(detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
    }

    void load_ini(const std::filesystem::path& path) {
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(path.string(), tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ConfigError(std::string("config file: ") + e.what());
        }
        std::vector<std::pair<std::string, std::string>> section;
        for (const auto& [key, node] : tree) {
            if (node.empty()) {
                set(key, node.data());
            } else if (key == experiment_) {
                for (const auto& [k, v] : node) section.emplace_back(k, v.data());
            } else {
                const auto& names = experiment_names();
                if (std::find(names.begin(), names.end(), key) == names.end())
                    throw ConfigError("config file: unknown section [" + key + "]");
            }
        }
        for (const auto& [k, v] : section) set(k, v);
    }

    const std::string& str(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
        return it->second;
    }

    double real(const std::string& key) const { return parse_real(key, str(key)); }

    std::size_t count(const std::string& key) const { return parse_count(key, str(key)); }

    bool flag(const std::string& key) const {
        const auto& v = str(key);
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
    }

    std::vector<std::string> list(const std::string& key) const { return detail::split_list(str(key)); }

    std::vector<double> reals(const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : list(key)) out.push_back(parse_real(key, s));
        return out;
    }

    std::vector<std::size_t> counts(const std::string& key) const {
        std::vector<std::size_t> out;
        for (const auto& s : list(key)) out.push_back(parse_count(key, s));
        return out;
    }

    /// FNV-1a 64 over the experiment name and the sorted semantic key/value pairs.
    std::string hash() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto feed = [&h](std::string_view s) {
            for (unsigned char c : s) {
                h ^= c;
                h *= 0x100000001b3ULL;
            }
        };
        feed(experiment_);
        feed("\n");
        for (const auto& [k, v] : values_) {
            if (non_semantic_keys().contains(k)) continue;
            feed(k);
            feed("=");
            feed(v);
            feed("\n");
        }
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

private:
    static double parse_real(const std::string& key, const std::string& s) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("config key '" + key + "': '" + s + "' is not a number");
        return v;
    }

    static std::size_t parse_count(const std::string& key, const std::string& s) {
        std::size_t v = 0;
        auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
            throw ConfigError("config key '" + key + "': '" + s + "' is not a non-negative integer");
        return v;
    }

    std::string experiment_;
    std::map<std::string, std::string> values_;
};

}  // namespace reskit::experiments
