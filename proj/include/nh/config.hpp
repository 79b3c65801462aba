#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nh/dataset.hpp"
#include "nh/fem.hpp"
#include "nh/poro.hpp"
#include "nh/surrogate.hpp"

namespace nh {

struct FieldConfig {
    double sigma2 = 2.0;
    std::vector<double> l2{0.2, 0.2};  // squared correlation lengths, one per axis
    double energy_fraction = 0.95;
    int max_modes = 512;
    std::uint64_t seed_base = 1000;
    double e_bar = 10.0;
    double alpha = 1.0;  // strength of the random part of E
};

struct PipelineConfig {
    std::string name = "custom";
    int dim = 2;
    int fine = 128;   // cells per axis
    int coarse = 8;
    FieldConfig field;
    double poisson = 0.25;
    BiotConstants biot;
    TimeStepping time;
    int realizations = 20;        // M, dataset realizations
    SplitSpec split;
    TrainConfig train;
    int solve_realizations = 3;   // fresh realizations for the coarse/fine comparison
    std::uint64_t solve_seed_offset = 1000000;

    StructuredGrid fine_grid() const { return StructuredGrid::unit(dim, fine); }
    StructuredGrid coarse_grid() const { return StructuredGrid::unit(dim, coarse); }
    std::uint64_t train_seed(int l) const { return field.seed_base + static_cast<std::uint64_t>(l); }
    std::uint64_t solve_seed(int r) const {
        return field.seed_base + solve_seed_offset + static_cast<std::uint64_t>(r);
    }

    void validate() const;
    bool operator==(const PipelineConfig&) const;
};

/// Parse the INI-style text: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. A `preset = name` key in [pipeline] loads that preset first and the
/// remaining keys override it. Unknown sections or keys are errors.
PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Every key, with doubles printed round-trip exact.
std::string serialize_config(const PipelineConfig& cfg);

/// Built-in presets: test1, test2, test3 (full-scale sizes), desk-test1, desk-test2, desk-test3.
PipelineConfig preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace nh
