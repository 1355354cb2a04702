#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "reskit/errors.hpp"
#include "reskit/ks.hpp"
#include "reskit/learning.hpp"
#include "reskit/series.hpp"

namespace reskit {

// Layout (little endian):
//   "RSKD" | u16 version | u8 dtype | u8 rank | u64 dims[rank]
//   | u32 meta_len | meta (key=value lines) | row-major payload | u32 crc32
// The checksum covers every byte before it.

inline constexpr std::array<char, 4> kTensorMagic = {'R', 'S', 'K', 'D'};
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeFloat64 = 1;

struct Tensor {
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
    std::map<std::string, std::string> meta;

    std::uint64_t numel() const noexcept {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

namespace detail {

class ByteWriter {
public:
    template <class U>
    void put(U v) {
        using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                     std::conditional_t<sizeof(U) == 4, std::uint32_t,
                     std::conditional_t<sizeof(U) == 2, std::uint16_t, std::uint8_t>>>;
        const auto b = std::bit_cast<Bits>(v);
        for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((b >> (8 * i)) & 0xffu));
    }
    void put_bytes(const std::string& s) { buf.insert(buf.end(), s.begin(), s.end()); }

    std::vector<char> buf;
};

class ByteReader {
public:
    ByteReader(const std::vector<char>& b, std::size_t end) : buf_(b), end_(end) {}

    template <class U>
    U get() {
        using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                     std::conditional_t<sizeof(U) == 4, std::uint32_t,
                     std::conditional_t<sizeof(U) == 2, std::uint16_t, std::uint8_t>>>;
        need(sizeof(U));
        Bits b = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            b |= static_cast<Bits>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return std::bit_cast<U>(b);
    }
    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const noexcept { return end_ - pos_; }

private:
    void need(std::size_t n) const {
        if (n > end_ - pos_) throw FormatError("tensor: truncated file");
    }
    const std::vector<char>& buf_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const char* p, std::size_t n) {
    uLong c = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        c = crc32(c, reinterpret_cast<const Bytef*>(p), chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
    std::array<char, 32> b{};
    auto res = std::to_chars(b.data(), b.data() + b.size(), v);
    return std::string(b.data(), res.ptr);
}

inline double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw FormatError("cannot parse number '" + s + "'");
    return v;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::vector<char>& bytes) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw FormatError("cannot open '" + tmp + "' for writing");
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw FormatError("write to '" + tmp + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline void write_tensor(const std::filesystem::path& path, const Tensor& t) {
    if (t.numel() != t.data.size()) throw DimensionError("tensor: dims do not match payload size");
    if (t.dims.size() > 255) throw DimensionError("tensor: rank above 255");
    std::string meta;
    for (const auto& [k, v] : t.meta) {
        if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw FormatError("tensor: metadata key/value contains a separator");
        meta += k + "=" + v + "\n";
    }
    detail::ByteWriter w;
    w.buf.reserve(64 + meta.size() + 8 * t.data.size());
    w.put_bytes(std::string(kTensorMagic.begin(), kTensorMagic.end()));
    w.put(kTensorVersion);
    w.put(kDtypeFloat64);
    w.put(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) w.put(d);
    w.put(static_cast<std::uint32_t>(meta.size()));
    w.put_bytes(meta);
    for (double v : t.data) w.put(v);
    w.put(detail::crc32_of(w.buf.data(), w.buf.size()));
    detail::write_file_atomic(path, w.buf);
}

/// Reads and fully validates a tensor file; optionally rejects non-finite payloads.
inline Tensor read_tensor(const std::filesystem::path& path, bool require_finite = true) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open '" + path.string() + "'");
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 || !std::equal(kTensorMagic.begin(), kTensorMagic.end(), buf.begin()))
        throw FormatError("tensor: bad magic in '" + path.string() + "'");
    if (buf.size() < 12) throw FormatError("tensor: truncated file");
    detail::ByteReader r(buf, buf.size() - 4);
    r.get_bytes(4);
    const auto version = r.get<std::uint16_t>();
    if (version != kTensorVersion) throw FormatError("tensor: unsupported version " + std::to_string(version));
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != kDtypeFloat64) throw FormatError("tensor: unsupported dtype tag " + std::to_string(dtype));
    Tensor t;
    t.dims.resize(r.get<std::uint8_t>());
    for (auto& d : t.dims) d = r.get<std::uint64_t>();
    const auto meta_len = r.get<std::uint32_t>();
    std::istringstream meta(r.get_bytes(meta_len));
    for (std::string line; std::getline(meta, line);) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("tensor: malformed metadata line");
        t.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const std::uint64_t n = t.numel();
    if (n > r.remaining() / 8 || r.remaining() != n * 8) throw FormatError("tensor: truncated file or shape mismatch");
    t.data.resize(n);
    for (auto& v : t.data) v = r.get<double>();
    detail::ByteReader tail(buf, buf.size());
    tail.get_bytes(buf.size() - 4);
    if (tail.get<std::uint32_t>() != detail::crc32_of(buf.data(), buf.size() - 4))
        throw FormatError("tensor: checksum mismatch in '" + path.string() + "'");
    if (require_finite)
        for (double v : t.data)
            if (!std::isfinite(v)) throw FormatError("tensor: non-finite value in payload");
    return t;
}

namespace detail {

inline const std::string& meta_at(const Tensor& t, const std::string& k) {
    auto it = t.meta.find(k);
    if (it == t.meta.end()) throw FormatError("missing metadata key '" + k + "'");
    return it->second;
}

inline std::uint64_t meta_uint(const Tensor& t, const std::string& k) {
    const auto& s = meta_at(t, k);
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("bad integer for '" + k + "'");
    return v;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    if (ds.series.empty()) throw DimensionError("dataset: empty series");
    Tensor t;
    t.dims = {ds.series.length(), ds.series.dim()};
    t.data.assign(ds.series.values.data(), ds.series.values.data() + ds.series.values.size());
    using detail::format_double;
    t.meta = {{"kind", "dataset"},
              {"generator", ds.generator},
              {"dt", format_double(ds.series.dt)},
              {"dt_effective", format_double(ds.dt_effective)},
              {"lyapunov", format_double(ds.lyapunov)},
              {"ks.L", format_double(ds.config.L)},
              {"ks.grid", std::to_string(ds.config.grid)},
              {"ks.dt", format_double(ds.config.dt)},
              {"ks.subsample", std::to_string(ds.config.subsample)},
              {"ks.transient", std::to_string(ds.config.transient)},
              {"ks.seed", std::to_string(ds.config.seed)},
              {"ks.init_amplitude", format_double(ds.config.init_amplitude)}};
    write_tensor(path, t);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    const Tensor t = read_tensor(path);
    if (t.dims.size() != 2 || t.dims[0] < 1 || t.dims[1] < 1) throw FormatError("dataset: expected a non-empty T x d tensor");
    if (detail::meta_at(t, "kind") != "dataset") throw FormatError("dataset: file holds a '" + t.meta.at("kind") + "'");
    using detail::parse_double;
    Dataset ds;
    const auto T = static_cast<Eigen::Index>(t.dims[0]), d = static_cast<Eigen::Index>(t.dims[1]);
    ds.series = TimeSeries(Eigen::Map<const RowMatrix>(t.data.data(), T, d), parse_double(detail::meta_at(t, "dt")));
    ds.dt_effective = parse_double(detail::meta_at(t, "dt_effective"));
    ds.lyapunov = parse_double(detail::meta_at(t, "lyapunov"));
    ds.generator = detail::meta_at(t, "generator");
    ds.config.L = parse_double(detail::meta_at(t, "ks.L"));
    ds.config.grid = detail::meta_uint(t, "ks.grid");
    ds.config.dt = parse_double(detail::meta_at(t, "ks.dt"));
    ds.config.subsample = detail::meta_uint(t, "ks.subsample");
    ds.config.transient = detail::meta_uint(t, "ks.transient");
    ds.config.seed = detail::meta_uint(t, "ks.seed");
    ds.config.init_amplitude = parse_double(detail::meta_at(t, "ks.init_amplitude"));
    return ds;
}

inline void save_model(const RidgeModel& m, const std::filesystem::path& path) {
    Tensor t;
    t.dims = {m.outputs(), m.features()};
    t.data.resize(m.weights.size());
    Eigen::Map<RowMatrix>(t.data.data(), m.weights.rows(), m.weights.cols()) = m.weights;
    using detail::format_double;
    t.meta = {{"kind", "model"},
              {"mode", m.mode == RidgeMode::primal ? "primal" : "dual"},
              {"alpha", format_double(m.alpha)},
              {"alpha_used", format_double(m.alpha_used)},
              {"r", format_double(m.r)},
              {"N", std::to_string(m.N)},
              {"d", std::to_string(m.d)},
              {"tau", std::to_string(m.tau)}};
    write_tensor(path, t);
}

inline RidgeModel load_model(const std::filesystem::path& path) {
    const Tensor t = read_tensor(path);
    if (t.dims.size() != 2) throw FormatError("model: expected a rank-2 weight tensor");
    if (detail::meta_at(t, "kind") != "model") throw FormatError("model: file does not hold a model");
    RidgeModel m;
    const auto& mode = detail::meta_at(t, "mode");
    if (mode != "primal" && mode != "dual") throw FormatError("model: unknown mode '" + mode + "'");
    m.mode = mode == "primal" ? RidgeMode::primal : RidgeMode::dual;
    m.alpha = detail::parse_double(detail::meta_at(t, "alpha"));
    m.alpha_used = detail::parse_double(detail::meta_at(t, "alpha_used"));
    m.r = detail::parse_double(detail::meta_at(t, "r"));
    m.N = detail::meta_uint(t, "N");
    m.d = detail::meta_uint(t, "d");
    m.tau = detail::meta_uint(t, "tau");
    m.weights = Eigen::Map<const RowMatrix>(t.data.data(), static_cast<Eigen::Index>(t.dims[0]),
                                            static_cast<Eigen::Index>(t.dims[1]));
    return m;
}

/// CSV with header t,x0,...,x{d-1}; t is the frame index, values at full precision.
inline void write_series_csv(const TimeSeries& s, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot open '" + path.string() + "' for writing");
    f << 't';
    for (std::size_t j = 0; j < s.dim(); ++j) f << ",x" << j;
    f << '\n';
    char buf[40];
    for (std::size_t t = 0; t < s.length(); ++t) {
        f << t;
        for (std::size_t j = 0; j < s.dim(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.17g", s.values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)));
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw FormatError("write to '" + path.string() + "' failed");
}

inline TimeSeries read_series_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw FormatError("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(f, line) || line.rfind("t,", 0) != 0) throw FormatError("csv: missing header");
    const auto d = static_cast<Eigen::Index>(std::count(line.begin(), line.end(), ','));
    std::vector<double> vals;
    Eigen::Index rows = 0;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        Eigen::Index cols = 0;
        while (std::getline(ss, cell, ',')) {
            vals.push_back(detail::parse_double(cell));
            ++cols;
        }
        if (cols != d) throw FormatError("csv: row " + std::to_string(rows) + " has the wrong width");
        ++rows;
    }
    return TimeSeries(Eigen::Map<const RowMatrix>(vals.data(), rows, d));
}

}  // namespace reskit
