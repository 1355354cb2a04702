// Acceptance checks. One line per criterion: "criterion N: PASS|FAIL <detail>".
// Usage: acceptance [--only N] [--workers W]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reskit/experiments/experiments.hpp"
#include "reskit/reskit.hpp"

using namespace reskit;
using namespace reskit::experiments;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        detail << (ok ? "" : "[x] ") << what << "; ";
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::size_t g_workers = 1;

Config with_workers(Config c) {
    c.set("workers", std::to_string(g_workers));
    return c;
}

// ---------------------------------------------------------------------------------

Eigen::MatrixXd sylvester_recursive(std::size_t p) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Ones(1, 1);
    while (static_cast<std::size_t>(h.rows()) < p) {
        const auto n = h.rows();
        Eigen::MatrixXd next(2 * n, 2 * n);
        next << h, h, h, -h;
        h = next;
    }
    return h / std::sqrt(static_cast<double>(p));
}

void criterion1(Outcome& o) {
    double worst = 0;
    for (std::size_t p = 2; p <= 1024; p *= 2) {
        const Eigen::MatrixXd H = sylvester_recursive(p);
        for (std::uint64_t k = 0; k < 4; ++k) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(p));
            CounterRng(derive_key(p, k)).fill_normal(v, 1.0);
            Eigen::VectorXd got = v;
            fwht_in_place(std::span<double>(got.data(), p));
            worst = std::max(worst, (got - H * v).cwiseAbs().maxCoeff());
        }
    }
    o.require(worst <= 1e-10, "max |fwht - H v| = " + num(worst) + " (<= 1e-10)");
    double inv = 0, norm = 0;
    for (std::uint64_t k = 0; k < 10000; ++k) {
        const std::size_t p = std::size_t{1} << (1 + k % 10);
        Eigen::VectorXd v(static_cast<Eigen::Index>(p));
        CounterRng(derive_key(77, k)).fill_normal(v, 1.0);
        Eigen::VectorXd w = v;
        fwht_in_place(std::span<double>(w.data(), p));
        norm = std::max(norm, std::abs(w.norm() - v.norm()) / v.norm());
        fwht_in_place(std::span<double>(w.data(), p));
        inv = std::max(inv, (w - v).cwiseAbs().maxCoeff());
    }
    o.require(inv <= 1e-10, "involution error over 1e4 vectors " + num(inv));
    o.require(norm <= 1e-12, "relative norm change " + num(norm));
}

void criterion2(Outcome& o) {
    const KernelKind kinds[] = {KernelKind::arcsine_erf, KernelKind::gaussian_rff, KernelKind::arcsine_sign,
                                KernelKind::heaviside, KernelKind::arccos1_relu};
    for (KernelKind kind : kinds) {
        double worst = 0;
        for (std::uint64_t pair = 0; pair < 50; ++pair) {
            Eigen::VectorXd u(4), v(4);
            CounterRng(derive_key(pair, 1)).fill_normal(u, 0.6);
            CounterRng(derive_key(pair, 2)).fill_normal(v, 0.6);
            const auto est = mc_kernel_estimate_stats(kind, u, v, 1000000, derive_key(pair, 3));
            const double exact = kernel_scalar(kind, u.dot(v), u.squaredNorm(), v.squaredNorm());
            worst = std::max(worst, std::abs(est.mean - exact) / est.standard_error());
        }
        o.require(worst <= 5.0, std::string(to_string(kind)) + " max deviation " + num(worst) + " SE (<= 5)");
    }
}

void criterion3(Outcome& o) {
    Config c = with_workers(Config("convergence"));
    c.set("activations", "erf,rff");
    c.set("sigma_r2_list", "0.25,1,4");
    c.set("algorithms", "rc,src");
    const auto r = run_convergence_study(c);
    const std::size_t t10 = r.record_index(10);
    for (const auto& [key, per_seed] : r.mse) {
        const double s = r.slope(key, t10);
        o.require(s >= -1.3 && s <= -0.7, std::string(to_string(key.activation)) + "/" + std::string(to_string(key.backend)) +
                                              " s2=" + num(key.sigma_r2) + " slope " + num(s));
    }
    for (const auto& [key, per_seed] : r.mse) {
        if (key.backend != Backend::dense) continue;
        ConvergenceKey sk = key;
        sk.backend = Backend::structured;
        double worst = 0;
        for (std::size_t ni = 0; ni < r.Ns.size(); ++ni)
            worst = std::max(worst, r.mean_mse(sk, ni, t10) / r.mean_mse(key, ni, t10));
        o.require(worst <= 1.5, std::string(to_string(key.activation)) + " s2=" + num(key.sigma_r2) + " max SRC/RC " + num(worst));
    }
    Config rl = with_workers(Config("convergence"));
    rl.set("activations", "relu");
    rl.set("sigma_r2_list", "4");
    rl.set("algorithms", "rc");
    const auto rr = run_convergence_study(rl);
    const ConvergenceKey k{Activation::relu, 4.0, Backend::dense, false};
    bool grows = true;
    double min_ratio = 1e300;
    for (std::size_t ni = 0; ni < rr.Ns.size(); ++ni) {
        const double ratio = rr.mean_mse(k, ni, rr.record_index(10)) / rr.mean_mse(k, ni, rr.record_index(2));
        min_ratio = std::min(min_ratio, ratio);
        grows = grows && ratio > 1.0;
    }
    o.require(grows, "relu s2=4 min MSE(t=10)/MSE(t=2) over N " + num(min_ratio) + " (> 1)");
}

void criterion4(Outcome& o) {
    Config c = with_workers(Config("convergence"));
    c.set("study", "bound");
    c.set("sigma_r2", "0.25");
    c.set("N", "1024");
    c.set("T", "10");
    c.set("delta", "0.05");
    c.set("trials", "200");
    for (Activation a : {Activation::erf, Activation::rff}) {
        const BoundResult b = run_bound_study(c, a);
        bool ok = true;
        double worst = 0;
        for (std::size_t t = 0; t < b.violation_fraction.size(); ++t) {
            ok = ok && b.violation_fraction[t] <= b.allowed[t];
            worst = std::max(worst, b.violation_fraction[t]);
        }
        o.require(ok, std::string(to_string(a)) + " Lambda " + num(b.Lambda) + " max violation fraction " + num(worst) +
                          " (allowed from " + num(b.allowed.front()) + ")");
    }
}

void criterion5(Outcome& o) {
    const Config c = with_workers(Config("stability"));
    const auto r = run_stability_study(c);
    for (std::size_t i = 0; i < r.sigma_r2.size(); ++i) {
        const double s2 = r.sigma_r2[i], d = r.rc[i][100];
        if (s2 == 0.49) o.require(d < 1e-4, "s2=0.49 distance(100) " + num(d) + " (< 1e-4)");
        if (s2 == 2.25) o.require(d > 0.1, "s2=2.25 distance(100) " + num(d) + " (> 0.1)");
        if (s2 <= 1.0) o.require(r.rk[i][50] < 1e-8, "rk s2=" + num(s2) + " Gram gap(50) " + num(r.rk[i][50]) + " (< 1e-8)");
    }
    o.require(r.realizations == 100, "realizations " + std::to_string(r.realizations));
}

void criterion6(Outcome& o) {
    Config c = with_workers(Config("convergence"));
    c.set("activations", "erf,sign,heaviside,rff,relu");
    c.set("sigma_r2_list", "0.25");
    c.set("algorithms", "rc");
    c.set("redraw", "both");
    const auto r = run_convergence_study(c);
    const std::size_t t10 = r.record_index(10);
    for (Activation a : {Activation::erf, Activation::sign, Activation::heaviside, Activation::rff, Activation::relu}) {
        const double fixed = r.slope({a, 0.25, Backend::dense, false}, t10);
        const double redrawn = r.slope({a, 0.25, Backend::dense, true}, t10);
        o.require(std::abs(fixed - redrawn) <= 0.2,
                  std::string(to_string(a)) + " slope fixed " + num(fixed) + " redraw " + num(redrawn));
    }
}

void criterion7(Outcome& o) {
    const Config c = with_workers(Config("predict"));
    const auto r = run_prediction_study(c);
    const std::size_t h1 = r.lyapunov_steps - 1, h3 = 3 * r.lyapunov_steps - 1;
    o.detail << "lambda " << num(r.lyapunov) << ", " << r.lyapunov_steps << " steps/LT, " << r.seeds.size() << " seeds; ";
    for (const char* alg : {"rc", "src", "rk"}) {
        const auto& ac = r.find(alg, 3996);
        const auto [m1, s1] = ac.stats(h1);
        const auto [m3, s3] = ac.stats(h3);
        o.require(m1 < 0.3, std::string(alg) + " NMSE(1 LT) " + num(m1) + " +- " + num(s1) + " (< 0.3)");
        o.require(m3 < 1.0, std::string(alg) + " NMSE(3 LT) " + num(m3) + " +- " + num(s3) + " (< 1)");
    }
    const auto& rc = r.find("rc", 3996);
    const auto& src = r.find("src", 3996);
    for (double lt : {0.5, 1.0, 2.0, 3.0}) {
        const auto h = static_cast<std::size_t>(std::lround(lt * static_cast<double>(r.lyapunov_steps))) - 1;
        const auto [ma, sa] = rc.stats(h);
        const auto [mb, sb] = src.stats(h);
        o.require(std::abs(ma - mb) <= std::max(sa, sb), "RC/SRC gap at " + num(lt) + " LT " + num(std::abs(ma - mb)) +
                                                             " vs band " + num(std::max(sa, sb)));
    }
}

void criterion8(Outcome& o) {
    Config c = with_workers(Config("timing"));
    c.set("phases", "forward");
    c.set("algorithms", "rc,src,rk");
    const auto r = run_timing_study(c);
    const double rc2 = r.find("rc", 1948, "forward").seconds, rc4 = r.find("rc", 3996, "forward").seconds;
    const double rc8 = r.find("rc", 8092, "forward").seconds, src8 = r.find("src", 8092, "forward").seconds;
    const double rk = r.find("rk", 0, "forward").seconds;
    o.require(src8 < rc8, "SRC forward " + num(src8) + " s < RC forward " + num(rc8) + " s at N=8092");
    o.require(rc4 / rc2 >= 2.5, "RC forward N=3996 / N=1948 = " + num(rc4 / rc2) + " (>= 2.5)");
    o.require(rk < rc8, "RK Gram forward " + num(rk) + " s < RC forward " + num(rc8) + " s at N=8092");
}

// Ridge weights through the SVD of the design matrix.
Eigen::MatrixXd pinv_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::VectorXd f = s.array() / (s.array().square() + alpha);
    return (svd.matrixV() * f.asDiagonal() * svd.matrixU().transpose() * Y).transpose();
}

void criterion9(Outcome& o) {
    double worst = 0;
    std::size_t perturb_fail = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
        const CounterRng rng(derive_key(k, 9));
        const auto n = static_cast<Eigen::Index>(1 + rng.bits(0) % 200), F = static_cast<Eigen::Index>(1 + rng.bits(1) % 200);
        const auto c = static_cast<Eigen::Index>(1 + rng.bits(2) % 5);
        const double alpha = std::pow(10.0, -3.0 + 3.0 * rng.uniform(3));
        Eigen::MatrixXd X(n, F), Y(n, c);
        CounterRng(derive_key(k, 10)).fill_normal(X, 1.0);
        CounterRng(derive_key(k, 11)).fill_normal(Y, 1.0);
        const RidgeModel m = ridge_fit(X, Y, alpha);
        const Eigen::MatrixXd ref = pinv_ridge(X, Y, alpha);
        worst = std::max(worst, (m.weights - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff()));
        // Dual form: A = (K + alpha I)^-1 Y with K = X X^T, weights X^T A.
        const RidgeModel d = ridge_fit(X * X.transpose(), Y, alpha, RidgeMode::dual);
        const Eigen::MatrixXd dual_w = d.weights * X;
        worst = std::max(worst, (dual_w - ref).cwiseAbs().maxCoeff() / std::max(1.0, ref.cwiseAbs().maxCoeff()));
        const double best = ridge_objective(m, X, Y, m.weights);
        for (std::uint64_t j = 0; j < 10; ++j) {
            Eigen::MatrixXd dir(c, F);
            CounterRng(derive_key(k, 100 + j)).fill_normal(dir, 1.0);
            if (ridge_objective(m, X, Y, m.weights + 1e-4 * dir / dir.norm()) < best) ++perturb_fail;
        }
    }
    o.require(worst <= 1e-8, "max relative deviation from the pseudo-inverse oracle " + num(worst) + " (<= 1e-8)");
    o.require(perturb_fail == 0, std::to_string(perturb_fail) + " of 1000 perturbations lowered the objective");
}

void criterion10(Outcome& o) {
    KSConfig c;
    c.L = 100.0;
    c.grid = 100;
    const Dataset zero = simulate_ks_from(c, Eigen::VectorXd::Zero(100), 200);
    o.require(zero.series.values.cwiseAbs().maxCoeff() == 0.0, "zero field stays exactly zero");

    KSConfig sub = c;
    sub.L = 5.0;
    sub.transient = 0;
    const double q = 2 * std::numbers::pi / sub.L;
    const double linear = q * q - q * q * q * q;
    Eigen::VectorXd u0(100);
    for (Eigen::Index j = 0; j < 100; ++j) u0[j] = 1e-3 * std::cos(q * sub.L * static_cast<double>(j) / 100.0);
    const Dataset dec = simulate_ks_from(sub, u0, 40);
    const double rate = std::log(dec.series.values.row(39).norm() / dec.series.values.row(19).norm()) / (20 * sub.dt);
    o.require(rate < 0 && linear < 0 && std::abs(rate - linear) < 0.01 * std::abs(linear),
              "L=5 decay rate " + num(rate) + " vs linear theory " + num(linear));

    LyapunovOptions opt;
    opt.probes = 4;
    opt.horizon = 8000;
    const double lam = estimate_lyapunov(c, opt).lambda;
    o.require(lam >= 0.043 / 2 && lam <= 0.043 * 2, "L=100 divergence rate " + num(lam) + " (within [0.0215, 0.086])");

    KSConfig rt;
    rt.L = 100.0;
    Dataset ds = simulate_ks(rt, 500);
    ds.lyapunov = lam;
    const auto path = std::filesystem::temp_directory_path() / "reskit_acceptance_ks.rskd";
    save_dataset(ds, path);
    const Dataset back = load_dataset(path);
    std::filesystem::remove(path);
    o.require(back.series.values == ds.series.values && back.lyapunov == ds.lyapunov, "dataset round trip bit-identical");
}

struct Criterion {
    int id;
    double limit_seconds;
    std::function<void(Outcome&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int only = 0;
    app.add_option("--only", only, "run a single criterion (1-10)");
    app.add_option("--workers", g_workers, "worker threads for experiment grids");
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all = {
        {1, 10, criterion1},    {2, 120, criterion2},  {3, 900, criterion3}, {4, 600, criterion4},
        {5, 300, criterion5},   {6, 900, criterion6},  {7, 3600, criterion7}, {8, 1200, criterion8},
        {9, 60, criterion9},    {10, 600, criterion10},
    };
    int failures = 0;
    for (const auto& c : all) {
        if (only != 0 && c.id != only) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what() << "; ";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.require(secs < c.limit_seconds, "runtime " + num(secs) + " s (< " + num(c.limit_seconds) + " s)");
        std::printf("criterion %d: %s  %s\n", c.id, o.pass ? "PASS" : "FAIL", o.detail.str().c_str());
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
