#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nh/dataset.hpp"
#include "nh/homogenize.hpp"
#include "nh/network.hpp"

namespace nh {

struct TrainConfig {
    int epochs = 100;
    std::size_t batch_size = 0;  // 0: one coarse grid's worth of cells (N_c)
    double learning_rate = 1e-3;
    double dropout = 0.1;
    std::uint64_t seed = 0;      // weight init, shuffling and dropout

    void validate() const;
};

struct EpochLoss {
    int epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

/// Mean over samples of |Y - F(X)|^2 in scaled units, dropout off.
double mean_squared_loss(const Network& net, const Dataset& ds, std::span<const std::size_t> indices);

/// Mini-batch Adam on (1/batch) sum |Y - F(X)|^2. The train set is reshuffled
/// every epoch; after each epoch the train and validation losses are recorded
/// without dropout. Throws NumericError on a non-finite loss.
std::vector<EpochLoss> train(Network& net, const Dataset& ds, std::span<const std::size_t> train_idx,
                             std::span<const std::size_t> val_idx, const TrainConfig& cfg);

struct Metrics {
    double mse = 0.0;   // sum |Y - Yhat|^2
    double mae = 0.0;   // 100 * sum |Y - Yhat| / sum |Y|
    double rmse = 0.0;  // 100 * sqrt(sum |Y - Yhat|^2 / sum |Y|^2)
    bool degenerate = false;  // sum |Y| or sum Y^2 is zero; relative errors reported as 0
};

Metrics compute_metrics(std::span<const double> truth, std::span<const double> prediction);

struct Evaluation {
    std::vector<Metrics> components;  // per output component
    Metrics aggregate;                // all components flattened
};

/// Metrics in original (de-scaled) units over the selected samples.
Evaluation evaluate(const Network& net, const Dataset& ds, std::span<const std::size_t> indices);

/// A trained network with what is needed to use it on raw patches.
struct SurrogateModel {
    Network net;
    Scaler scaler;
    int dim = 2;
    int patch_resolution = 0;
    Target target = Target::Permeability;

    bool operator==(const SurrogateModel&) const = default;
};

SurrogateModel make_model(Network net, const Dataset& ds);

/// Scale raw patch pixels, run the network, de-scale and rebuild the symmetric
/// tensor. Eigenvalues below 1e-10 are clamped so the result is always SPD.
Eigen::MatrixXd predict_effective(const SurrogateModel& model, std::span<const double> raw_pixels);

/// Predicted tensor pairs for every coarse cell of one realization.
std::vector<EffectiveTensors> predict_domain(const SurrogateModel& permeability, const SurrogateModel& elasticity,
                                             const StructuredGrid& fine, std::span<const double> k_field,
                                             std::span<const double> e_field, const StructuredGrid& coarse);

namespace io {

/// NHNN network block followed by a trailer with target, dim, N_l and the scaler.
void write_model(const std::filesystem::path& path, const SurrogateModel& model);
SurrogateModel read_model(const std::filesystem::path& path);

void write_loss_history(const std::filesystem::path& path, const std::vector<EpochLoss>& history);

}  // namespace io
}  // namespace nh
