#include "nh/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "nh/array_io.hpp"
#include "nh/errors.hpp"
#include "nh/parallel.hpp"
#include "nh/random_field.hpp"

namespace fs = std::filesystem;

namespace nh {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string numbered(const std::string& stem, int index) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_%04d", index);
    return stem + buf + ".nhar";
}

NdArray require_array(const fs::path& p, const char* producer) {
    if (!fs::exists(p))
        throw MissingInputError("missing '" + p.string() + "'; run `nh " + producer + "` first");
    return io::read_array(p);
}

void ensure_dir(const fs::path& p) { fs::create_directories(p); }

std::vector<std::size_t> node_shape_with(const StructuredGrid& g, std::size_t components) {
    auto s = g.node_shape();
    if (components > 1) s.push_back(components);
    return s;
}

NdArray tensors_to_array(const std::vector<EffectiveTensors>& t, bool permeability) {
    std::vector<double> data;
    std::size_t width = 0;
    for (const auto& e : t) {
        const auto row = upper_triangle(permeability ? e.permeability : e.stiffness);
        width = row.size();
        data.insert(data.end(), row.begin(), row.end());
    }
    return NdArray({t.size(), width}, std::move(data));
}

std::vector<EffectiveTensors> arrays_to_tensors(const NdArray& k, const NdArray& c, int dim, std::size_t cells) {
    const auto nk = static_cast<std::size_t>(target_outputs(Target::Permeability, dim));
    const auto nc = static_cast<std::size_t>(target_outputs(Target::Elasticity, dim));
    if (k.shape != std::vector<std::size_t>{cells, nk} || c.shape != std::vector<std::size_t>{cells, nc})
        throw FormatError("tensor arrays do not match the coarse grid; rerun the producing stage");
    std::vector<EffectiveTensors> out(cells);
    for (std::size_t i = 0; i < cells; ++i) {
        out[i].permeability = from_upper_triangle(std::span(k.data).subspan(i * nk, nk), dim);
        out[i].stiffness = from_upper_triangle(std::span(c.data).subspan(i * nc, nc),
                                               target_matrix_size(Target::Elasticity, dim));
    }
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
    os << s;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p, const char* producer) {
    std::ifstream is(p);
    if (!is) throw MissingInputError("missing '" + p.string() + "'; run `nh " + producer + "` first");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, fs::path workdir, int threads)
    : cfg_(std::move(cfg)), dir_(std::move(workdir)), threads_(resolve_threads(threads)) {
    cfg_.validate();
}

fs::path Pipeline::field_path(bool solve_set, char property, int index) const {
    return dir_ / "fields" / numbered(std::string(solve_set ? "solve_" : "train_") + property, index);
}

fs::path Pipeline::tensor_path(bool solve_set, char kind, int index) const {
    return dir_ / "tensors" / numbered(std::string(solve_set ? "solve_" : "train_") + kind, index);
}

fs::path Pipeline::dataset_path(Target t) const { return dir_ / "dataset" / (std::string(target_name(t)) + ".nhds"); }

fs::path Pipeline::model_path(Target t) const { return dir_ / "models" / (std::string(target_name(t)) + ".nhnn"); }

fs::path Pipeline::predicted_path(char kind, int index) const {
    return dir_ / "predicted" / numbered(std::string("solve_") + kind, index);
}

fs::path Pipeline::solution_path(const std::string& which, char field, int index) const {
    return dir_ / "solutions" / numbered(which + "_" + field, index);
}

fs::path Pipeline::report_path(const std::string& name) const { return dir_ / "reports" / name; }

void Pipeline::generate_fields() {
    ensure_dir(dir_ / "fields");
    const StructuredGrid fine = cfg_.fine_grid();
    const auto basis = build_kl_basis(fine, CovarianceSpec{cfg_.field.sigma2, cfg_.field.l2}, cfg_.field.energy_fraction,
                                      static_cast<std::size_t>(cfg_.field.max_modes));
    spdlog::info("KL basis: {} modes, captured energy {:.4f}", basis.mode_count(), basis.captured_energy());
    const auto shape = fine.node_shape();
    auto emit = [&](bool solve_set, int count) {
        parallel_for(static_cast<std::size_t>(count), threads_, [&](std::size_t i) {
            const int l = static_cast<int>(i);
            const auto y = sample_field(basis, solve_set ? cfg_.solve_seed(l) : cfg_.train_seed(l));
            const auto props = field_to_properties(y, cfg_.field.e_bar, cfg_.field.alpha);
            io::write_array(field_path(solve_set, 'k', l), NdArray(shape, props.permeability));
            io::write_array(field_path(solve_set, 'E', l), NdArray(shape, props.elastic_modulus));
        });
    };
    emit(false, cfg_.realizations);
    emit(true, cfg_.solve_realizations);
    spdlog::info("wrote {} + {} realizations to {}", cfg_.realizations, cfg_.solve_realizations,
                 (dir_ / "fields").string());
}

void Pipeline::homogenize() {
    ensure_dir(dir_ / "tensors");
    ensure_dir(dir_ / "reports");
    const StructuredGrid fine = cfg_.fine_grid(), coarse = cfg_.coarse_grid();
    std::string timing = "realization,direct_solve_s\n";
    for (int set = 0; set < 2; ++set) {
        const bool solve_set = set == 1;
        const int count = solve_set ? cfg_.solve_realizations : cfg_.realizations;
        for (int l = 0; l < count; ++l) {
            const auto k = require_array(field_path(solve_set, 'k', l), "generate-fields");
            const auto e = require_array(field_path(solve_set, 'E', l), "generate-fields");
            if (k.size() != fine.node_count() || e.size() != fine.node_count())
                throw FormatError("field files do not match the fine grid; rerun `nh generate-fields`");
            const auto t0 = Clock::now();
            const auto tensors = homogenize_domain(fine, k.data, e.data, coarse, cfg_.poisson, threads_);
            const double dt = seconds_since(t0);
            if (solve_set) timing += std::to_string(l) + "," + fmt(dt) + "\n";
            io::write_array(tensor_path(solve_set, 'k', l), tensors_to_array(tensors, true));
            io::write_array(tensor_path(solve_set, 'C', l), tensors_to_array(tensors, false));
        }
    }
    write_text(report_path("direct_timing.csv"), timing);
    spdlog::info("homogenized {} + {} realizations", cfg_.realizations, cfg_.solve_realizations);
}

void Pipeline::build_dataset() {
    ensure_dir(dir_ / "dataset");
    const StructuredGrid fine = cfg_.fine_grid(), coarse = cfg_.coarse_grid();
    const int nl = patch_resolution(fine, coarse);
    for (Target t : {Target::Permeability, Target::Elasticity}) {
        std::vector<RawSample> raw;
        for (int l = 0; l < cfg_.realizations; ++l) {
            const auto field = require_array(field_path(false, t == Target::Permeability ? 'k' : 'E', l), "generate-fields");
            const auto k = require_array(tensor_path(false, 'k', l), "homogenize");
            const auto c = require_array(tensor_path(false, 'C', l), "homogenize");
            const auto tensors = arrays_to_tensors(k, c, cfg_.dim, coarse.cell_count());
            auto s = collect_samples(fine, coarse, static_cast<std::uint32_t>(l), field.data, tensors, t);
            raw.insert(raw.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
        }
        const Dataset ds = make_dataset(cfg_.dim, nl, coarse.cell_count(), t, std::move(raw));
        io::write_dataset(dataset_path(t), ds);
        spdlog::info("{} dataset: {} samples, {} inputs, {} outputs", target_name(t), ds.samples.size(),
                     ds.input_size(), ds.output_size());
    }
}

void Pipeline::train() {
    ensure_dir(dir_ / "models");
    ensure_dir(dir_ / "reports");
    std::string timing = "target,offline_train_s\n";
    for (Target t : {Target::Permeability, Target::Elasticity}) {
        if (!fs::exists(dataset_path(t)))
            throw MissingInputError("missing '" + dataset_path(t).string() + "'; run `nh build-dataset` first");
        const Dataset ds = io::read_dataset(dataset_path(t));
        const Split split = split_dataset(ds.samples.size(), cfg_.split);
        const auto t0 = Clock::now();
        Network net = make_surrogate(ds.dim, ds.patch_resolution, static_cast<int>(ds.output_size()), cfg_.train.dropout);
        net.initialize(cfg_.train.seed);
        const auto history = nh::train(net, ds, split.train, split.val, cfg_.train);
        const double dt = seconds_since(t0);
        timing += std::string(target_name(t)) + "," + fmt(dt) + "\n";
        io::write_model(model_path(t), make_model(std::move(net), ds));
        io::write_loss_history(dir_ / "models" / (std::string(target_name(t)) + "_loss.csv"), history);
        if (!history.empty())
            spdlog::info("{}: {} epochs in {:.1f} s, final train/val MSE {:.3e}/{:.3e}", target_name(t),
                         history.size(), dt, history.back().train_mse, history.back().val_mse);
    }
    write_text(report_path("train_timing.csv"), timing);
}

void Pipeline::evaluate() {
    ensure_dir(dir_ / "reports");
    std::string csv = "target,set,component,mse,mae_pct,rmse_pct,degenerate\n";
    for (Target t : {Target::Permeability, Target::Elasticity}) {
        if (!fs::exists(dataset_path(t)))
            throw MissingInputError("missing '" + dataset_path(t).string() + "'; run `nh build-dataset` first");
        if (!fs::exists(model_path(t)))
            throw MissingInputError("missing '" + model_path(t).string() + "'; run `nh train` first");
        const Dataset ds = io::read_dataset(dataset_path(t));
        const SurrogateModel model = io::read_model(model_path(t));
        const Split split = split_dataset(ds.samples.size(), cfg_.split);
        const std::pair<const char*, const std::vector<std::size_t>*> sets[] = {
            {"train", &split.train}, {"val", &split.val}, {"test", &split.test}};
        for (const auto& [name, idx] : sets) {
            const Evaluation ev = nh::evaluate(model.net, ds, *idx);
            auto row = [&](const std::string& comp, const Metrics& m) {
                csv += std::string(target_name(t)) + "," + name + "," + comp + "," + fmt(m.mse) + "," + fmt(m.mae) +
                       "," + fmt(m.rmse) + "," + (m.degenerate ? "1" : "0") + "\n";
            };
            for (std::size_t c = 0; c < ev.components.size(); ++c) row(std::to_string(c), ev.components[c]);
            row("all", ev.aggregate);
            spdlog::info("{} {}: MSE {:.4e}, MAE {:.3f}%, RMSE {:.3f}%", target_name(t), name, ev.aggregate.mse,
                         ev.aggregate.mae, ev.aggregate.rmse);
        }
    }
    write_text(report_path("metrics.csv"), csv);
}

void Pipeline::predict() {
    ensure_dir(dir_ / "predicted");
    ensure_dir(dir_ / "reports");
    const StructuredGrid fine = cfg_.fine_grid(), coarse = cfg_.coarse_grid();
    for (Target t : {Target::Permeability, Target::Elasticity})
        if (!fs::exists(model_path(t)))
            throw MissingInputError("missing '" + model_path(t).string() + "'; run `nh train` first");
    const auto t0 = Clock::now();
    const SurrogateModel mk = io::read_model(model_path(Target::Permeability));
    const SurrogateModel mc = io::read_model(model_path(Target::Elasticity));
    const double load_s = seconds_since(t0);
    std::string timing = "realization,online_load_s,online_predict_s\n";
    for (int r = 0; r < cfg_.solve_realizations; ++r) {
        const auto k = require_array(field_path(true, 'k', r), "generate-fields");
        const auto e = require_array(field_path(true, 'E', r), "generate-fields");
        const auto t1 = Clock::now();
        const auto tensors = predict_domain(mk, mc, fine, k.data, e.data, coarse);
        const double dt = seconds_since(t1);
        timing += std::to_string(r) + "," + fmt(load_s) + "," + fmt(dt) + "\n";
        io::write_array(predicted_path('k', r), tensors_to_array(tensors, true));
        io::write_array(predicted_path('C', r), tensors_to_array(tensors, false));
    }
    write_text(report_path("predict_timing.csv"), timing);
}

void Pipeline::solve_fine() {
    ensure_dir(dir_ / "solutions");
    const StructuredGrid fine = cfg_.fine_grid();
    const auto bcs = PoroBoundary::standard(cfg_.dim, cfg_.time.p_inlet);
    for (int r = 0; r < cfg_.solve_realizations; ++r) {
        const auto k = require_array(field_path(true, 'k', r), "generate-fields");
        const auto e = require_array(field_path(true, 'E', r), "generate-fields");
        const auto states = nh::solve_fine(fine, k.data, e.data, cfg_.poisson, cfg_.biot, bcs, cfg_.time);
        io::write_array(solution_path("fine", 'p', r), NdArray(fine.node_shape(), states.back().pressure));
        io::write_array(solution_path("fine", 'u', r),
                        NdArray(node_shape_with(fine, static_cast<std::size_t>(cfg_.dim)), states.back().displacement));
        spdlog::info("fine solve {} done ({} steps)", r, cfg_.time.n_steps);
    }
}

void Pipeline::solve_coarse(bool predicted) {
    ensure_dir(dir_ / "solutions");
    ensure_dir(dir_ / "reports");
    const StructuredGrid fine = cfg_.fine_grid(), coarse = cfg_.coarse_grid();
    const auto bcs = PoroBoundary::standard(cfg_.dim, cfg_.time.p_inlet);
    const std::string which = predicted ? "predicted" : "direct";
    std::string csv = std::string(kErrorsHeader) + "\n";
    for (int r = 0; r < cfg_.solve_realizations; ++r) {
        const auto kt = predicted ? require_array(predicted_path('k', r), "predict")
                                  : require_array(tensor_path(true, 'k', r), "homogenize");
        const auto ct = predicted ? require_array(predicted_path('C', r), "predict")
                                  : require_array(tensor_path(true, 'C', r), "homogenize");
        const auto tensors = arrays_to_tensors(kt, ct, cfg_.dim, coarse.cell_count());
        const auto states = nh::solve_coarse(coarse, tensors, cfg_.biot, bcs, cfg_.time);
        const PoroState& last = states.back();
        io::write_array(solution_path("coarse_" + which, 'p', r), NdArray(coarse.node_shape(), last.pressure));
        io::write_array(solution_path("coarse_" + which, 'u', r),
                        NdArray(node_shape_with(coarse, static_cast<std::size_t>(cfg_.dim)), last.displacement));

        PoroState ref;
        ref.time = last.time;
        ref.pressure = require_array(solution_path("fine", 'p', r), "solve-fine").data;
        ref.displacement = require_array(solution_path("fine", 'u', r), "solve-fine").data;
        const auto k = require_array(field_path(true, 'k', r), "generate-fields");
        const auto e = require_array(field_path(true, 'E', r), "generate-fields");
        const auto coeffs = nodal_coefficients(fine, k.data, e.data, cfg_.poisson);
        const ErrorReport er = error_norms(fine, ref, coarse, last, coeffs);
        csv += cfg_.name + "," + which + "," + std::to_string(r) + "," + fmt(er.p_l2) + "," + fmt(er.p_energy) + "," +
               fmt(er.u_l2) + "," + fmt(er.u_energy) + "\n";
        spdlog::info("{} coarse solve {}: e_p {:.2f}% / {:.2f}%, e_u {:.2f}% / {:.2f}%", which, r, er.p_l2,
                     er.p_energy, er.u_l2, er.u_energy);
    }
    write_text(report_path("errors_" + which + ".csv"), csv);
}

void Pipeline::report() {
    ensure_dir(dir_ / "reports");
    const StructuredGrid coarse = cfg_.coarse_grid();
    std::ostringstream summary;
    summary << "configuration: " << cfg_.name << " (d=" << cfg_.dim << ", fine " << cfg_.fine << ", coarse "
            << cfg_.coarse << ", M=" << cfg_.realizations << ")\n\n";

    // errors: concatenate whatever coarse cases exist
    std::string errors = std::string(kErrorsHeader) + "\n";
    bool any = false;
    for (const char* which : {"direct", "predicted"}) {
        const fs::path p = report_path(std::string("errors_") + which + ".csv");
        if (!fs::exists(p)) continue;
        any = true;
        const auto rows = read_csv(p, "solve-coarse");
        double sums[4] = {0, 0, 0, 0};
        for (const auto& row : rows) {
            std::string line;
            for (std::size_t i = 0; i < row.size(); ++i) line += (i ? "," : "") + row[i];
            errors += line + "\n";
            for (int j = 0; j < 4; ++j) sums[j] += std::stod(row.at(3 + j));
        }
        if (!rows.empty()) {
            const double n = static_cast<double>(rows.size());
            char buf[200];
            std::snprintf(buf, sizeof buf,
                          "%-9s mean over %zu realizations: e_p L2 %.3f%%  e_p energy %.3f%%  e_u L2 %.3f%%  "
                          "e_u energy %.3f%%\n",
                          which, rows.size(), sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n);
            summary << buf;
        }
    }
    if (!any) throw MissingInputError("no coarse-solve errors found; run `nh solve-coarse` first");
    write_text(report_path("errors.csv"), errors);

    // surrogate-in-loop consistency: predicted vs direct coarse solutions
    if (fs::exists(solution_path("coarse_predicted", 'p', 0)) && fs::exists(solution_path("coarse_direct", 'p', 0))) {
        std::string cons = "test,realization,dp_L2,du_L2\n";
        double worst_p = 0.0, worst_u = 0.0;
        for (int r = 0; r < cfg_.solve_realizations; ++r) {
            PoroState d, p;
            d.pressure = require_array(solution_path("coarse_direct", 'p', r), "solve-coarse --tensors direct").data;
            d.displacement = require_array(solution_path("coarse_direct", 'u', r), "solve-coarse --tensors direct").data;
            p.pressure = require_array(solution_path("coarse_predicted", 'p', r), "solve-coarse --tensors predicted").data;
            p.displacement =
                require_array(solution_path("coarse_predicted", 'u', r), "solve-coarse --tensors predicted").data;
            const auto tensors = arrays_to_tensors(require_array(tensor_path(true, 'k', r), "homogenize"),
                                                   require_array(tensor_path(true, 'C', r), "homogenize"), cfg_.dim,
                                                   coarse.cell_count());
            std::vector<Eigen::MatrixXd> kk, cc;
            for (const auto& t : tensors) {
                kk.push_back(t.permeability);
                cc.push_back(t.stiffness);
            }
            const ErrorReport er = relative_errors(coarse, cellwise_coefficients(coarse, kk, cc), d, p);
            worst_p = std::max(worst_p, er.p_l2);
            worst_u = std::max(worst_u, er.u_l2);
            cons += cfg_.name + "," + std::to_string(r) + "," + fmt(er.p_l2) + "," + fmt(er.u_l2) + "\n";
        }
        write_text(report_path("surrogate_consistency.csv"), cons);
        char buf[160];
        std::snprintf(buf, sizeof buf, "predicted vs direct coarse solution, worst relative L2: p %.3f%%, u %.3f%%\n",
                      worst_p, worst_u);
        summary << buf;
    }

    // metrics
    if (fs::exists(report_path("metrics.csv"))) {
        summary << "\nsurrogate test-set errors (aggregate):\n";
        for (const auto& row : read_csv(report_path("metrics.csv"), "evaluate"))
            if (row.size() >= 6 && row[1] == "test" && row[2] == "all")
                summary << "  " << row[0] << ": MAE " << row[4] << "%, RMSE " << row[5] << "%\n";
    }

    // timing
    const fs::path direct_t = report_path("direct_timing.csv"), predict_t = report_path("predict_timing.csv");
    if (fs::exists(direct_t) && fs::exists(predict_t)) {
        double offline = 0.0;
        if (fs::exists(report_path("train_timing.csv")))
            for (const auto& row : read_csv(report_path("train_timing.csv"), "train")) offline += std::stod(row.at(1));
        const auto direct = read_csv(direct_t, "homogenize");
        const auto pred = read_csv(predict_t, "predict");
        std::string timing = std::string(kTimingHeader) + "\n";
        double sum_speedup = 0.0;
        const std::size_t n = std::min(direct.size(), pred.size());
        for (std::size_t i = 0; i < n; ++i) {
            const double d = std::stod(direct[i].at(1)), load = std::stod(pred[i].at(1)), p = std::stod(pred[i].at(2));
            const double speedup = p > 0.0 ? d / p : 0.0;
            sum_speedup += speedup;
            timing += cfg_.name + "," + direct[i].at(0) + "," + fmt(offline) + "," + fmt(load) + "," + fmt(p) + "," +
                      fmt(d) + "," + fmt(speedup) + "\n";
        }
        write_text(report_path("timing.csv"), timing);
        if (n > 0) {
            char buf[200];
            std::snprintf(buf, sizeof buf, "\ntiming: offline training %.2f s; mean speedup (direct / predicted) %.1fx\n",
                          offline, sum_speedup / static_cast<double>(n));
            summary << buf;
        }
    }
    write_text(report_path("summary.txt"), summary.str());
    std::fputs(summary.str().c_str(), stdout);
}

void Pipeline::run_all() {
    generate_fields();
    homogenize();
    build_dataset();
    train();
    evaluate();
    predict();
    solve_fine();
    solve_coarse(false);
    solve_coarse(true);
    report();
}

}  // namespace nh
