#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include <catch_amalgamated.hpp>

#include "reskit/io.hpp"

using namespace reskit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "reskit_test_io";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::vector<char>& b) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f.write(b.data(), static_cast<std::streamsize>(b.size()));
}

Tensor sample() {
    Tensor t;
    t.dims = {2, 3};
    t.data = {1.0, -2.5, 1e-300, 0.1, 3.0, std::numbers::pi};
    t.meta = {{"kind", "test"}, {"note", "a b"}};
    return t;
}

}  // namespace

TEST_CASE("tensor round trip is bit exact", "[io]") {
    const auto p = scratch("t.rskd");
    write_tensor(p, sample());
    const Tensor r = read_tensor(p);
    CHECK(r.dims == sample().dims);
    CHECK(r.data == sample().data);
    CHECK(r.meta == sample().meta);
    CHECK(!fs::exists(p.string() + ".tmp"));
}

TEST_CASE("tensor format errors", "[io]") {
    const auto p = scratch("bad.rskd");
    write_tensor(p, sample());
    const auto good = slurp(p);

    auto b = good;
    b[0] = 'X';
    spit(p, b);
    CHECK_THROWS_AS(read_tensor(p), FormatError);

    b = good;
    b[4] = 9;
    spit(p, b);
    CHECK_THROWS_AS(read_tensor(p), FormatError);

    b = good;
    b[6] = 2;
    spit(p, b);
    CHECK_THROWS_AS(read_tensor(p), FormatError);

    b = good;
    b[b.size() - 12] ^= 0x01;
    spit(p, b);
    CHECK_THROWS_AS(read_tensor(p), FormatError);

    for (std::size_t cut : {std::size_t{3}, std::size_t{20}, good.size() - 1}) {
        spit(p, std::vector<char>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut)));
        CHECK_THROWS_AS(read_tensor(p), FormatError);
    }
    CHECK_THROWS_AS(read_tensor(scratch("missing.rskd")), FormatError);
}

TEST_CASE("non-finite payloads", "[io]") {
    const auto p = scratch("nan.rskd");
    Tensor t = sample();
    t.data[2] = std::numeric_limits<double>::quiet_NaN();
    write_tensor(p, t);
    CHECK_THROWS_AS(read_tensor(p), FormatError);
    CHECK(std::isnan(read_tensor(p, false).data[2]));
    t.dims = {7};
    CHECK_THROWS_AS(write_tensor(p, t), DimensionError);
}

TEST_CASE("dataset round trip", "[io]") {
    KSConfig c;
    c.transient = 10;
    c.seed = 3;
    Dataset ds = simulate_ks(c, 5);
    ds.lyapunov = 0.0478;
    const auto p = scratch("ds.rskd");
    save_dataset(ds, p);
    const Dataset r = load_dataset(p);
    CHECK(r.series.values == ds.series.values);
    CHECK(r.lyapunov == ds.lyapunov);
    CHECK(r.config.L == c.L);
    CHECK(r.config.seed == 3);
    CHECK(r.generator == kKsGeneratorVersion);
    CHECK(r.dt_effective == ds.dt_effective);
    CHECK_THROWS_AS(load_model(p), FormatError);
}

TEST_CASE("model round trip", "[io]") {
    RidgeModel m;
    m.mode = RidgeMode::dual;
    m.alpha = 0.01;
    m.alpha_used = 0.1;
    m.r = 1.1;
    m.N = 0;
    m.d = 2;
    m.tau = 50;
    m.weights = RowMatrix::Random(2, 7);
    const auto p = scratch("m.rskd");
    save_model(m, p);
    const RidgeModel r = load_model(p);
    CHECK(r.weights == m.weights);
    CHECK(r.mode == m.mode);
    CHECK(r.alpha_used == m.alpha_used);
    CHECK(r.tau == 50);
    CHECK_THROWS_AS(load_dataset(p), FormatError);
}

TEST_CASE("series CSV", "[io]") {
    RowMatrix v(3, 2);
    v << 0.1, -2, 1.0 / 3.0, 4e-20, 5, 6;
    const auto p = scratch("s.csv");
    write_series_csv(TimeSeries(v), p);
    std::ifstream f(p);
    std::string header;
    std::getline(f, header);
    CHECK(header == "t,x0,x1");
    CHECK(read_series_csv(p).values == v);
    {
        std::ofstream g(p, std::ios::app);
        g << "3,1\n";
    }
    CHECK_THROWS_AS(read_series_csv(p), FormatError);
}
