#pragma once

// Pipeline stages over a work directory. Every stage reads what earlier stages
// wrote and fails with MissingInputError naming the command to run first.
//
//   fields/train_{k,E}_LLLL.nhar   generate-fields   dataset realizations
//   fields/solve_{k,E}_RRRR.nhar   generate-fields   fresh realizations for solves
//   tensors/{train,solve}_{k,C}_NNNN.nhar   homogenize   (N_c x N_out) upper triangles
//   dataset/{permeability,elasticity}.nhds  build-dataset
//   models/{permeability,elasticity}.nhnn + *_loss.csv  train
//   predicted/solve_{k,C}_RRRR.nhar   predict
//   solutions/fine_{p,u}_RRRR.nhar, coarse_{direct,predicted}_{p,u}_RRRR.nhar   solve-*
//   reports/*.csv, reports/summary.txt

#include <filesystem>
#include <string>
#include <vector>

#include "nh/config.hpp"

namespace nh {

class Pipeline {
public:
    Pipeline(PipelineConfig cfg, std::filesystem::path workdir, int threads = 1);

    const PipelineConfig& config() const noexcept { return cfg_; }
    const std::filesystem::path& workdir() const noexcept { return dir_; }

    void generate_fields();
    void homogenize();
    void build_dataset();
    void train();
    void evaluate();
    void predict();
    void solve_fine();
    /// `predicted` selects surrogate tensors instead of direct homogenization.
    void solve_coarse(bool predicted);
    void report();

    /// All stages in order, coarse solves with both tensor sources.
    void run_all();

    // paths
    std::filesystem::path field_path(bool solve_set, char property, int index) const;
    std::filesystem::path tensor_path(bool solve_set, char kind, int index) const;
    std::filesystem::path dataset_path(Target t) const;
    std::filesystem::path model_path(Target t) const;
    std::filesystem::path predicted_path(char kind, int index) const;
    std::filesystem::path solution_path(const std::string& which, char field, int index) const;
    std::filesystem::path report_path(const std::string& name) const;

private:
    PipelineConfig cfg_;
    std::filesystem::path dir_;
    int threads_;
};

/// Errors CSV header used by solve-coarse and report.
inline constexpr const char* kErrorsHeader = "test,case,realization,e_p_L2,e_p_en,e_u_L2,e_u_en";
inline constexpr const char* kTimingHeader =
    "test,realization,offline_train_s,online_load_s,online_predict_s,direct_solve_s,speedup";

}  // namespace nh
