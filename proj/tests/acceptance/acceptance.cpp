// End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
// Exit status is nonzero if any criterion fails, except those listed with
// --known-fail (criteria we implement faithfully but whose targets are not met;
// their lines still say FAIL).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include "nh/config.hpp"
#include "nh/homogenize.hpp"
#include "nh/network.hpp"
#include "nh/pipeline.hpp"
#include "nh/random_field.hpp"
#include "nh/rng.hpp"
#include "nh/surrogate.hpp"

using namespace nh;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string format(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

double min_eig(const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (m + m.transpose())).eigenvalues().minCoeff();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> row;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) row.push_back(cell);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CellPatch uniform_patch(int dim, int n, double value) {
    CellPatch p;
    p.grid = StructuredGrid::unit(dim, n);
    p.values.assign(p.grid.node_count(), value);
    return p;
}

// Isotropic plane-strain / 3D stiffness in Mandel-scaled Voigt form, written out by hand.
Eigen::MatrixXd isotropic_oracle(int dim, double e, double nu) {
    const double lambda = e * nu / ((1 + nu) * (1 - 2 * nu)), mu = e / (2 * (1 + nu));
    const int n = dim == 2 ? 3 : 6;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) c(i, j) = lambda + (i == j ? 2 * mu : 0.0);
    for (int s = dim; s < n; ++s) c(s, s) = 2 * mu;
    return c;
}

Outcome homogeneous_exactness() {
    const auto t0 = Clock::now();
    double err_k = 0.0, err_c = 0.0;
    for (int d : {2, 3}) {
        const int n = d == 2 ? 16 : 6;
        const Eigen::MatrixXd k = effective_permeability(uniform_patch(d, n, 3.7));
        err_k = std::max(err_k, (k - 3.7 * Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff());
        const Eigen::MatrixXd c = effective_elasticity(uniform_patch(d, n, 1.0), 0.25);
        err_c = std::max(err_c, (c - isotropic_oracle(d, 1.0, 0.25)).cwiseAbs().maxCoeff());
    }
    const Eigen::MatrixXd c2 = effective_elasticity(uniform_patch(2, 16, 1.0), 0.25);
    const double dt = seconds_since(t0);
    return {err_k <= 1e-10 && err_c <= 1e-8 && dt < 1.0,
            format("max|k*-cI| %.1e (tol 1e-10), max|C*-C_iso| %.1e (tol 1e-8), 2D C* = (%.6f, %.6f, %.6f), %.2f s",
                   err_k, err_c, c2(0, 0), c2(0, 1), c2(2, 2), dt)};
}

Outcome laminate_oracle() {
    const auto t0 = Clock::now();
    const int n = 128;
    const auto g = StructuredGrid::unit(2, n);
    // two equal layers stacked along x2, k = 1 below and 4 above, interface on element edges
    ElementCoefficients c;
    c.dim = 2;
    for (std::size_t e = 0; e < g.element_count(); ++e) {
        const double k = g.cell_index(g.element(e).cell)[1] < n / 2 ? 1.0 : 4.0;
        c.permeability.insert(c.permeability.end(), {k, 0.0, 0.0, k});
    }
    const Eigen::MatrixXd raw = effective_permeability_raw(g, c);
    const Eigen::MatrixXd k = 0.5 * (raw + raw.transpose());
    const double arithmetic = 0.5 * (1.0 + 4.0), harmonic = 2.0 / (1.0 + 0.25);
    const double r1 = std::abs(k(0, 0) - arithmetic) / arithmetic, r2 = std::abs(k(1, 1) - harmonic) / harmonic;
    const double dt = seconds_since(t0);
    return {r1 <= 0.01 && r2 <= 0.01 && std::abs(k(0, 1)) < 1e-3 && dt < 5.0,
            format("k* = (%.4f, %.4f, off %.1e) vs (%.4f, %.4f): errors %.2f%%, %.2f%% (tol 1%%), %.2f s", k(0, 0),
                   k(1, 1), k(0, 1), arithmetic, harmonic, 100 * r1, 100 * r2, dt)};
}

Outcome bounds_suite() {
    const auto t0 = Clock::now();
    const auto g = StructuredGrid::unit(2, 16);
    const auto basis = build_kl_basis(g, CovarianceSpec{2.0, {0.2, 0.2}});
    int ok = 0;
    double worst_asym = 0.0;
    const int total = 200;
    for (int s = 0; s < total; ++s) {
        const auto props = field_to_properties(sample_field(basis, 5000 + static_cast<std::uint64_t>(s)));
        const auto coeffs = nodal_coefficients(g, props.permeability, props.elastic_modulus, 0.25);
        const Eigen::MatrixXd raw = effective_permeability_raw(g, coeffs);
        const double asym = (raw - raw.transpose()).norm() / raw.norm();
        worst_asym = std::max(worst_asym, asym);
        const Eigen::MatrixXd k = 0.5 * (raw + raw.transpose());
        const Eigen::MatrixXd cs = effective_elasticity(g, coeffs);

        double arith = 0.0, harm = 0.0;
        Eigen::MatrixXd voigt = Eigen::MatrixXd::Zero(3, 3), compliance = Eigen::MatrixXd::Zero(3, 3);
        const double ne = static_cast<double>(g.element_count());
        for (std::size_t e = 0; e < g.element_count(); ++e) {
            const double ke = coeffs.permeability_at(e)(0, 0);
            arith += ke / ne;
            harm += 1.0 / (ke * ne);
            const Eigen::MatrixXd ce = coeffs.stiffness_at(e);
            voigt += ce / ne;
            compliance += ce.inverse() / ne;
        }
        const Eigen::MatrixXd reuss = compliance.inverse();
        const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(k).eigenvalues();
        const double scale = cs.norm();
        const bool pass = asym <= 1e-8 && ev.minCoeff() > 0.0 && min_eig(cs) > 0.0 &&
                          ev.minCoeff() >= (1.0 / harm) * (1 - 1e-8) && ev.maxCoeff() <= arith * (1 + 1e-8) &&
                          min_eig(cs - reuss) >= -1e-8 * scale && min_eig(voigt - cs) >= -1e-8 * scale;
        ok += pass;
    }
    const double dt = seconds_since(t0);
    return {ok == total && dt < 120.0,
            format("%d/%d patches symmetric, SPD and within harmonic/arithmetic (k) and Reuss/Voigt (C) bounds; "
                   "worst raw asymmetry %.1e; %.1f s",
                   ok, total, worst_asym, dt)};
}

Outcome gradient_check() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    for (const auto& [dim, nl, nout] : {std::tuple{2, 16, 3}, std::tuple{3, 8, 21}}) {
        Network net = make_surrogate(dim, nl, nout, 0.0);
        net.initialize(17);
        Rng rng(99);
        for (auto& w : net.parameters())
            if (w == 0.0) w = rng.uniform(-0.1, 0.1);  // biases off zero so every path is exercised
        std::vector<double> x(net.input_size()), r(net.output_size());
        for (auto& v : x) v = rng.uniform(0.0, 1.0);
        for (auto& v : r) v = rng.uniform(-1.0, 1.0);
        auto loss = [&] {
            const auto y = net.predict(x);
            return std::inner_product(y.begin(), y.end(), r.begin(), 0.0);
        };
        Workspace ws;
        net.forward(x, ws, nullptr);
        std::vector<double> grad(net.parameter_count(), 0.0);
        net.backward(ws, r, grad);
        for (int n = 0; n < 50; ++n) {
            const auto i = static_cast<std::size_t>(rng.uniform(0.0, 1.0) * static_cast<double>(net.parameter_count()));
            const double w = net.parameters()[i], h = 1e-6 * std::max(1.0, std::abs(w));
            net.parameters()[i] = w + h;
            const double lp = loss();
            net.parameters()[i] = w - h;
            const double lm = loss();
            net.parameters()[i] = w;
            const double fd = (lp - lm) / (2 * h);
            worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
        }
    }
    const double dt = seconds_since(t0);
    return {worst < 1e-4 && dt < 120.0,
            format("2D (N_l=16) and 3D (N_l=8) surrogates, 50 parameters each: worst relative error %.2e (tol 1e-4), "
                   "%.1f s",
                   worst, dt)};
}

Outcome metric_formulas() {
    const auto m = compute_metrics(std::vector<double>{2.0, 0.0}, std::vector<double>{1.0, 1.0});
    const double rmse = 100.0 / std::sqrt(2.0);
    const bool pass = std::abs(m.mse - 2.0) <= 1e-12 && std::abs(m.mae - 100.0) <= 1e-12 && std::abs(m.rmse - rmse) <= 1e-12;
    return {pass, format("MSE %.15g, MAE %.15g%%, RMSE %.15g%%", m.mse, m.mae, m.rmse)};
}

// Timing of direct local solves against surrogate inference for one coarse grid of
// 8x8 cells at several patch resolutions. Untrained networks cost the same to evaluate.
std::vector<double> speedup_by_resolution(const std::vector<int>& resolutions) {
    std::vector<double> out;
    const auto coarse = StructuredGrid::unit(2, 8);
    for (int nl : resolutions) {
        const auto fine = StructuredGrid::unit(2, 8 * nl);
        const auto props = field_to_properties(sample_field(build_kl_basis(fine, CovarianceSpec{2.0, {0.2, 0.2}}), 7));
        SurrogateModel mk, mc;
        for (auto [m, t] : {std::pair{&mk, Target::Permeability}, std::pair{&mc, Target::Elasticity}}) {
            const int nout = target_outputs(t, 2);
            m->net = make_surrogate(2, nl, nout);
            m->net.initialize(3);
            m->dim = 2;
            m->patch_resolution = nl;
            m->target = t;
            m->scaler.input_min = 0.0;
            m->scaler.input_max = 10.0;
            m->scaler.output_min.assign(static_cast<std::size_t>(nout), 1.0);
            m->scaler.output_max.assign(static_cast<std::size_t>(nout), 2.0);
            m->scaler.output_degenerate.assign(static_cast<std::size_t>(nout), 0);
        }
        double direct = 1e300, predicted = 1e300;
        for (int rep = 0; rep < 3; ++rep) {
            auto t0 = Clock::now();
            homogenize_domain(fine, props.permeability, props.elastic_modulus, coarse, 0.25);
            direct = std::min(direct, seconds_since(t0));
            t0 = Clock::now();
            predict_domain(mk, mc, fine, props.permeability, props.elastic_modulus, coarse);
            predicted = std::min(predicted, seconds_since(t0));
        }
        out.push_back(direct / predicted);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::string workdir = "acceptance_work";
    std::vector<int> known_fail;
    app.add_option("-w,--workdir", workdir, "scratch directory for the pipeline runs");
    app.add_option("--known-fail", known_fail, "criteria whose failure does not change the exit status")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::warn);

    std::vector<std::pair<std::string, Outcome>> results(10);
    auto record = [&](int id, std::string name, Outcome o) {
        results[static_cast<std::size_t>(id - 1)] = {std::move(name), std::move(o)};
        std::fprintf(stderr, "criterion %d done: %s\n", id, results[static_cast<std::size_t>(id - 1)].second.pass ? "pass" : "fail");
    };

    record(10, "metric formulas", metric_formulas());
    record(1, "homogeneous exactness", homogeneous_exactness());
    record(2, "laminate oracle", laminate_oracle());
    record(3, "bounds property suite", bounds_suite());
    record(5, "gradient correctness", gradient_check());

    // Desk-scale pipeline (desk-test1 with ten solve realizations), run twice.
    PipelineConfig cfg = preset("desk-test1");
    cfg.solve_realizations = 10;
    const fs::path run_a = fs::path(workdir) / "run_a", run_b = fs::path(workdir) / "run_b";
    double t_solve = 0.0, t_learn = 0.0, t_loop = 0.0;
    for (const fs::path& dir : {run_a, run_b}) {
        fs::remove_all(dir);
        Pipeline p(cfg, dir);
        auto t0 = Clock::now();
        p.generate_fields();
        p.homogenize();
        p.solve_fine();
        p.solve_coarse(false);
        t_solve = seconds_since(t0);
        t0 = Clock::now();
        p.build_dataset();
        p.train();
        p.evaluate();
        t_learn = seconds_since(t0);
        t0 = Clock::now();
        p.predict();
        p.solve_coarse(true);
        std::fflush(stdout);
        p.report();
        t_loop = seconds_since(t0);
        if (dir == run_a) std::fprintf(stderr, "pipeline run A: %.0f s solves, %.0f s learning\n", t_solve, t_learn);
    }

    {
        // homogenization error over the first three solve realizations (the preset's three)
        double sum[4] = {0, 0, 0, 0};
        int n = 0;
        for (const auto& row : read_csv(run_a / "reports/errors.csv"))
            if (row.at(1) == "direct" && std::stoi(row.at(2)) < 3) {
                for (int j = 0; j < 4; ++j) sum[j] += std::stod(row.at(3 + static_cast<std::size_t>(j)));
                ++n;
            }
        for (double& s : sum) s /= std::max(n, 1);
        const bool pass = n == 3 && sum[0] <= 10 && sum[1] <= 25 && sum[2] <= 15 && sum[3] <= 25 && t_solve < 600;
        record(4, "homogenization error, desk scale",
               {pass, format("mean of %d: e_p L2 %.2f%% (<=10), e_p energy %.2f%% (<=25), e_u L2 %.2f%% (<=15), "
                             "e_u energy %.2f%% (<=25); full-scale reference 2.86/16.39/8.84/16.27%%; %.0f s",
                             n, sum[0], sum[1], sum[2], sum[3], t_solve)});
    }
    {
        double rk = -1, rc = -1;
        for (const auto& row : read_csv(run_a / "reports/metrics.csv"))
            if (row.at(1) == "test" && row.at(2) == "all") (row.at(0) == "permeability" ? rk : rc) = std::stod(row.at(5));
        const Dataset ds = io::read_dataset(run_a / "dataset/permeability.nhds");
        const Split split = split_dataset(ds.samples.size(), cfg.split);
        const bool sizes = ds.samples.size() == 1280 && split.train.size() == 409 && split.val.size() == 103 &&
                           split.test.size() == 768;
        record(6, "learning, desk scale",
               {sizes && rk >= 0 && rk <= 8 && rc >= 0 && rc <= 5 && t_learn < 1800,
                format("%zu samples split %zu/%zu/%zu; test RMSE permeability %.3f%% (<=8), elasticity %.3f%% (<=5); "
                       "full-scale reference 2.671/1.287%%; %.0f s",
                       ds.samples.size(), split.train.size(), split.val.size(), split.test.size(), rk, rc, t_learn)});
    }
    {
        double worst_p = 0, worst_u = 0;
        int n = 0;
        for (const auto& row : read_csv(run_a / "reports/surrogate_consistency.csv")) {
            worst_p = std::max(worst_p, std::stod(row.at(2)));
            worst_u = std::max(worst_u, std::stod(row.at(3)));
            ++n;
        }
        record(7, "surrogate in the loop",
               {n == 10 && worst_p <= 5 && worst_u <= 5 && t_loop < 900,
                format("%d fresh realizations, predicted vs direct coarse solution, worst relative L2: p %.3f%%, "
                       "u %.3f%% (<=5)",
                       n, worst_p, worst_u)});
    }
    {
        double mean = 0, lowest = 1e300;
        int n = 0;
        for (const auto& row : read_csv(run_a / "reports/timing.csv")) {
            const double s = std::stod(row.at(6));
            mean += s;
            lowest = std::min(lowest, s);
            ++n;
        }
        mean /= std::max(n, 1);
        const std::vector<int> res{8, 16, 32};
        const auto scaling = speedup_by_resolution(res);
        const bool monotone = std::is_sorted(scaling.begin(), scaling.end()) &&
                              std::adjacent_find(scaling.begin(), scaling.end()) == scaling.end();
        record(8, "speedup",
               {n == 10 && mean >= 5 && lowest > 1 && monotone,
                format("desk N_l=16: mean %.1fx, min %.1fx over %d realizations (>=5); 8x8 cells at N_l=8/16/32: "
                       "%.1fx/%.1fx/%.1fx (increasing); GPU full-scale reference x76-x289",
                       mean, lowest, n, scaling[0], scaling[1], scaling[2])});
    }
    {
        std::vector<std::string> files;
        for (const char* dir : {"fields", "tensors", "dataset", "models", "predicted", "solutions"})
            for (const auto& e : fs::directory_iterator(run_a / dir))
                if (e.path().extension() != ".csv" || e.path().filename().string().find("timing") == std::string::npos)
                    files.push_back((fs::path(dir) / e.path().filename()).string());
        files.push_back("reports/errors.csv");
        files.push_back("reports/metrics.csv");
        files.push_back("reports/surrogate_consistency.csv");
        std::sort(files.begin(), files.end());
        int differing = 0;
        for (const auto& f : files) differing += !fs::exists(run_b / f) || slurp(run_a / f) != slurp(run_b / f);
        record(9, "determinism",
               {differing == 0 && files.size() > 20,
                format("%zu artifacts (fields, tensors, datasets, weights, solutions, error CSVs) compared, %d differ",
                       files.size(), differing)});
    }

    const std::set<int> allowed(known_fail.begin(), known_fail.end());
    int status = 0;
    std::printf("\n");
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& [name, o] = results[i];
        const int id = static_cast<int>(i) + 1;
        const bool known = allowed.count(id) > 0;
        std::printf("%s  %2d %s: %s%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
                    !o.pass && known ? " [known, not met]" : "");
        if (!o.pass && !known) status = 1;
    }
    std::fflush(stdout);
    return status;
}
