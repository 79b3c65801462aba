// nh: command line driver for the homogenization / surrogate pipeline.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "nh/config.hpp"
#include "nh/errors.hpp"
#include "nh/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kBadParameter = 2, kMissingInput = 3, kNumeric = 4, kFormat = 5 };

nh::PipelineConfig resolve_config(const std::string& path, const std::string& preset) {
    if (!path.empty()) return nh::load_config(path);
    return nh::preset(preset.empty() ? "desk-test1" : preset);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical homogenization of random poroelastic media with a CNN surrogate"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand

    std::string config_path, preset_name, workdir = "work";
    int threads = 0;
    bool verbose = false, quiet = false;
    app.add_option("-c,--config", config_path, "configuration file (INI)")->check(CLI::ExistingFile);
    app.add_option("-p,--preset", preset_name, "built-in preset: test1 test2 test3 desk-test1 desk-test2 desk-test3");
    app.add_option("-w,--workdir", workdir, "directory for all stage outputs")->capture_default_str();
    app.add_option("-j,--threads", threads, "worker threads (default: NH_THREADS or 1)");
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_flag("-q,--quiet", quiet, "warnings and errors only");

    auto* gen = app.add_subcommand("generate-fields", "sample KL realizations of k and E");
    auto* hom = app.add_subcommand("homogenize", "effective tensors of every coarse cell by local solves");
    auto* bds = app.add_subcommand("build-dataset", "normalized (patch, tensor) datasets");
    auto* trn = app.add_subcommand("train", "train the permeability and elasticity networks");
    auto* evl = app.add_subcommand("evaluate", "MSE / MAE / RMSE of the trained networks");
    auto* prd = app.add_subcommand("predict", "surrogate tensors for the solve realizations");
    auto* sfn = app.add_subcommand("solve-fine", "reference poroelastic solves on the fine grid");
    auto* scr = app.add_subcommand("solve-coarse", "coarse poroelastic solves and their errors");
    std::string tensors = "direct";
    scr->add_option("--tensors", tensors, "source of the coarse coefficients")
        ->check(CLI::IsMember({"direct", "predicted"}))
        ->capture_default_str();
    auto* rep = app.add_subcommand("report", "aggregate errors and timings into CSV + summary");
    auto* run = app.add_subcommand("run", "all stages in order");
    auto* show = app.add_subcommand("show-config", "print the resolved configuration");

    CLI11_PARSE(app, argc, argv);

    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        const nh::PipelineConfig cfg = resolve_config(config_path, preset_name);
        if (show->parsed()) {
            std::fputs(nh::serialize_config(cfg).c_str(), stdout);
            return kOk;
        }
        std::filesystem::create_directories(workdir);
        nh::Pipeline p(cfg, workdir, threads);
        if (gen->parsed()) p.generate_fields();
        if (hom->parsed()) p.homogenize();
        if (bds->parsed()) p.build_dataset();
        if (trn->parsed()) p.train();
        if (evl->parsed()) p.evaluate();
        if (prd->parsed()) p.predict();
        if (sfn->parsed()) p.solve_fine();
        if (scr->parsed()) p.solve_coarse(tensors == "predicted");
        if (rep->parsed()) p.report();
        if (run->parsed()) p.run_all();
    } catch (const nh::MissingInputError& e) {
        spdlog::error("{}", e.what());
        return kMissingInput;
    } catch (const nh::ParameterError& e) {
        spdlog::error("invalid parameter: {}", e.what());
        return kBadParameter;
    } catch (const nh::NumericError& e) {
        spdlog::error("numerical failure: {}", e.what());
        return kNumeric;
    } catch (const nh::FormatError& e) {
        spdlog::error("bad file: {}", e.what());
        return kFormat;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kFailure;
    }
    return kOk;
}
