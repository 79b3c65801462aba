#include "nh/surrogate.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "nh/binary_io.hpp"
#include "nh/errors.hpp"
#include "nh/rng.hpp"

namespace nh {

void TrainConfig::validate() const {
    if (epochs < 0) throw ParameterError("epochs must be non-negative");
    if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ParameterError("dropout rate must lie in [0, 1)");
}

double mean_squared_loss(const Network& net, const Dataset& ds, std::span<const std::size_t> indices) {
    if (indices.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t idx : indices) {
        const Sample& s = ds.samples.at(idx);
        const auto f = net.predict(s.x);
        for (std::size_t c = 0; c < f.size(); ++c) total += (s.y[c] - f[c]) * (s.y[c] - f[c]);
    }
    return total / static_cast<double>(indices.size());
}

std::vector<EpochLoss> train(Network& net, const Dataset& ds, std::span<const std::size_t> train_idx,
                             std::span<const std::size_t> val_idx, const TrainConfig& cfg) {
    cfg.validate();
    if (train_idx.empty()) throw ParameterError("training set is empty");
    if (net.input_size() != ds.input_size() || net.output_size() != ds.output_size())
        throw ParameterError("network shape does not match the dataset (" + std::to_string(ds.input_size()) + " -> " +
                             std::to_string(ds.output_size()) + ")");
    const std::size_t batch = cfg.batch_size > 0 ? cfg.batch_size : std::max<std::size_t>(ds.cells, 1);

    Adam adam(net.parameter_count(), cfg.learning_rate);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
    std::vector<double> grad(net.parameter_count());
    std::vector<double> gout(net.output_size());
    Workspace ws;
    std::vector<EpochLoss> history;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            const double scale = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            for (std::size_t b = start; b < stop; ++b) {
                const Sample& s = ds.samples[order[b]];
                const auto f = net.forward(s.x, ws, &rng);
                for (std::size_t c = 0; c < f.size(); ++c) {
                    const double r = f[c] - s.y[c];
                    loss += r * r;
                    gout[c] = 2.0 * r * scale;
                }
                net.backward(ws, gout, grad);
            }
            loss *= scale;
            if (!std::isfinite(loss))
                throw NumericError("training loss became " + std::to_string(loss) + " at epoch " +
                                   std::to_string(epoch) + " (learning rate " + std::to_string(cfg.learning_rate) +
                                   ", init seed " + std::to_string(cfg.seed) + "); try a smaller learning rate");
            adam.step(net.parameters(), grad);
        }
        EpochLoss e;
        e.epoch = epoch;
        e.train_mse = mean_squared_loss(net, ds, train_idx);
        e.val_mse = mean_squared_loss(net, ds, val_idx);
        if (!std::isfinite(e.train_mse))
            throw NumericError("training loss is not finite after epoch " + std::to_string(epoch));
        spdlog::debug("epoch {:3d}  train {:.6e}  val {:.6e}", epoch, e.train_mse, e.val_mse);
        history.push_back(e);
    }
    return history;
}

Metrics compute_metrics(std::span<const double> truth, std::span<const double> prediction) {
    if (truth.size() != prediction.size()) throw ParameterError("metric inputs differ in length");
    double se = 0.0, ae = 0.0, sy = 0.0, sy2 = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double e = truth[i] - prediction[i];
        se += e * e;
        ae += std::abs(e);
        sy += std::abs(truth[i]);
        sy2 += truth[i] * truth[i];
    }
    Metrics m;
    m.mse = se;
    if (sy > 0.0 && sy2 > 0.0) {
        m.mae = 100.0 * ae / sy;
        m.rmse = 100.0 * std::sqrt(se / sy2);
    } else {
        m.degenerate = true;
    }
    return m;
}

Evaluation evaluate(const Network& net, const Dataset& ds, std::span<const std::size_t> indices) {
    const std::size_t nout = ds.output_size();
    std::vector<std::vector<double>> truth(nout), pred(nout);
    std::vector<double> all_truth, all_pred;
    for (std::size_t idx : indices) {
        const Sample& s = ds.samples.at(idx);
        std::vector<double> y = s.y;
        std::vector<double> f = net.predict(s.x);
        ds.scaler.unscale_output(y);
        ds.scaler.unscale_output(f);
        for (std::size_t c = 0; c < nout; ++c) {
            truth[c].push_back(y[c]);
            pred[c].push_back(f[c]);
        }
        all_truth.insert(all_truth.end(), y.begin(), y.end());
        all_pred.insert(all_pred.end(), f.begin(), f.end());
    }
    Evaluation ev;
    for (std::size_t c = 0; c < nout; ++c) ev.components.push_back(compute_metrics(truth[c], pred[c]));
    ev.aggregate = compute_metrics(all_truth, all_pred);
    return ev;
}

SurrogateModel make_model(Network net, const Dataset& ds) {
    if (net.input_size() != ds.input_size() || net.output_size() != ds.output_size())
        throw ParameterError("network shape does not match the dataset");
    SurrogateModel m;
    m.net = std::move(net);
    m.scaler = ds.scaler;
    m.dim = ds.dim;
    m.patch_resolution = ds.patch_resolution;
    m.target = ds.target;
    return m;
}

Eigen::MatrixXd predict_effective(const SurrogateModel& model, std::span<const double> raw_pixels) {
    std::vector<double> x(raw_pixels.begin(), raw_pixels.end());
    model.scaler.scale_input(x);
    std::vector<double> y = model.net.predict(x);
    model.scaler.unscale_output(y);
    const Eigen::MatrixXd m = from_upper_triangle(y, target_matrix_size(model.target, model.dim));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues();
    if (ev.minCoeff() >= 1e-10) return m;
    spdlog::warn("predicted {} tensor has eigenvalue {:.3e}; clamped to 1e-10", target_name(model.target), ev.minCoeff());
    ev = ev.cwiseMax(1e-10);
    const Eigen::MatrixXd c = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (c + c.transpose());
}

std::vector<EffectiveTensors> predict_domain(const SurrogateModel& permeability, const SurrogateModel& elasticity,
                                             const StructuredGrid& fine, std::span<const double> k_field,
                                             std::span<const double> e_field, const StructuredGrid& coarse) {
    if (permeability.target != Target::Permeability || elasticity.target != Target::Elasticity)
        throw ParameterError("predict_domain needs a permeability model and an elasticity model");
    const int nl = patch_resolution(fine, coarse);
    for (const SurrogateModel* m : {&permeability, &elasticity})
        if (m->dim != fine.dim() || m->patch_resolution != nl)
            throw ParameterError(std::string(target_name(m->target)) + " model was trained for d=" +
                                 std::to_string(m->dim) + ", N_l=" + std::to_string(m->patch_resolution) +
                                 " but the grids give d=" + std::to_string(fine.dim()) + ", N_l=" + std::to_string(nl));
    const auto kp = extract_patches(fine, k_field, coarse);
    const auto ep = extract_patches(fine, e_field, coarse);
    std::vector<EffectiveTensors> out(coarse.cell_count());
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c].permeability = predict_effective(permeability, patch_pixels(kp[c]));
        out[c].stiffness = predict_effective(elasticity, patch_pixels(ep[c]));
    }
    return out;
}

namespace io {

void write_model(const std::filesystem::path& path, const SurrogateModel& model) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    write_network(os, model.net);
    put_u8(os, model.target == Target::Permeability ? 0 : 1);
    put_u8(os, static_cast<std::uint8_t>(model.dim));
    put_u32(os, static_cast<std::uint32_t>(model.patch_resolution));
    const Scaler& s = model.scaler;
    put_f64(os, s.input_min);
    put_f64(os, s.input_max);
    put_u8(os, s.input_degenerate ? 1 : 0);
    put_u32(os, static_cast<std::uint32_t>(s.output_count()));
    for (std::size_t c = 0; c < s.output_count(); ++c) {
        put_f64(os, s.output_min[c]);
        put_f64(os, s.output_max[c]);
        put_u8(os, s.output_degenerate[c]);
    }
    if (!os) throw std::runtime_error("write failed for '" + path.string() + "'");
}

SurrogateModel read_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open '" + path.string() + "'");
    SurrogateModel m;
    m.net = read_network(is);
    const auto target = get_u8(is, "model target");
    if (target > 1) throw FormatError("model target must be 0 or 1");
    m.target = target == 0 ? Target::Permeability : Target::Elasticity;
    m.dim = get_u8(is, "model dim");
    m.patch_resolution = static_cast<int>(get_u32(is, "model N_l"));
    Scaler& s = m.scaler;
    s.input_min = get_f64(is, "model scaler");
    s.input_max = get_f64(is, "model scaler");
    s.input_degenerate = get_u8(is, "model scaler") != 0;
    const auto n = get_u32(is, "model scaler");
    if (m.dim != 2 && m.dim != 3) throw FormatError("model dim must be 2 or 3");
    if (n != static_cast<std::uint32_t>(target_outputs(m.target, m.dim)) || n != m.net.output_size())
        throw FormatError("model scaler does not match the network outputs");
    s.output_min.resize(n);
    s.output_max.resize(n);
    s.output_degenerate.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        s.output_min[c] = get_f64(is, "model scaler");
        s.output_max[c] = get_f64(is, "model scaler");
        s.output_degenerate[c] = get_u8(is, "model scaler");
    }
    return m;
}

void write_loss_history(const std::filesystem::path& path, const std::vector<EpochLoss>& history) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    os << "epoch,train_mse,val_mse\n";
    char buf[96];
    for (const auto& e : history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", e.epoch, e.train_mse, e.val_mse);
        os << buf;
    }
}

}  // namespace io
}  // namespace nh
