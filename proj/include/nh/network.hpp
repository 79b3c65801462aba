#pragma once

// Small feed-forward CNN with hand-written reverse mode. Activations are kept
// as flat float64 buffers of shape (channels, depth, height, width); 2D inputs
// use depth 1.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace nh {

class Rng;

enum class LayerKind : std::uint8_t { Conv = 0, ReLU = 1, MaxPool = 2, Flatten = 3, Dense = 4, Dropout = 5 };

const char* layer_name(LayerKind k);

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    int filters = 0;     // Conv: output channels
    int kernel = 3;      // Conv: kernel extent along every spatial axis in use
    int units = 0;       // Dense: output width
    double rate = 0.0;   // Dropout

    static LayerSpec conv(int filters, int kernel = 3) { return {LayerKind::Conv, filters, kernel, 0, 0.0}; }
    static LayerSpec relu() { return {LayerKind::ReLU}; }
    static LayerSpec maxpool() { return {LayerKind::MaxPool}; }
    static LayerSpec flatten() { return {LayerKind::Flatten}; }
    static LayerSpec dense(int units) { return {LayerKind::Dense, 0, 0, units, 0.0}; }
    static LayerSpec dropout(double rate) { return {LayerKind::Dropout, 0, 0, 0, rate}; }

    bool operator==(const LayerSpec&) const = default;
};

struct Shape {
    int c = 1, d = 1, h = 1, w = 1;
    std::size_t size() const noexcept {
        return static_cast<std::size_t>(c) * static_cast<std::size_t>(d) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    bool operator==(const Shape&) const = default;
};

/// Per-sample scratch for training: activations of every layer plus pooling
/// argmax and dropout masks.
struct Workspace {
    std::vector<std::vector<double>> act;       // act[0] = input, act[i+1] = output of layer i
    std::vector<std::vector<std::uint32_t>> argmax;
    std::vector<std::vector<double>> mask;
    std::vector<double> grad_a, grad_b;         // ping-pong buffers for backward
};

class Network {
public:
    Network() = default;
    Network(Shape input, std::vector<LayerSpec> layers);

    const Shape& input_shape() const noexcept { return shapes_.front(); }
    const Shape& output_shape() const noexcept { return shapes_.back(); }
    /// shape(i) is the input of layer i; shape(layers().size()) is the output.
    const Shape& shape(std::size_t i) const { return shapes_.at(i); }
    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    std::size_t input_size() const noexcept { return input_shape().size(); }
    std::size_t output_size() const noexcept { return output_shape().size(); }

    std::size_t parameter_count() const noexcept { return params_.size(); }
    std::span<double> parameters() noexcept { return params_; }
    std::span<const double> parameters() const noexcept { return params_; }
    /// Offset of layer i's parameters (weights then biases) in parameters().
    std::size_t parameter_offset(std::size_t i) const { return offsets_.at(i); }

    /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
    void initialize(std::uint64_t seed);

    /// Inference: dropout is the identity.
    std::vector<double> predict(std::span<const double> x) const;

    /// Training forward pass; `dropout_rng` null disables dropout.
    /// Returns a view of the output stored in `ws`.
    std::span<const double> forward(std::span<const double> x, Workspace& ws, Rng* dropout_rng) const;

    /// Accumulate d(loss)/d(params) into `grad` given d(loss)/d(output), using the
    /// activations left in `ws` by the last forward().
    void backward(Workspace& ws, std::span<const double> grad_output, std::span<double> grad) const;

    bool operator==(const Network&) const = default;

private:
    std::vector<LayerSpec> layers_;
    std::vector<Shape> shapes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
};

/// Architectures of the 2D and 3D surrogates. 2D: four conv(3)/ReLU/pool stages
/// with 8, 16, 32, 64 filters; 3D: two stages with 16, 32 filters. Both end with
/// flatten, dense(512), ReLU, dropout, dense(outputs).
Network make_surrogate(int dim, int patch_resolution, int outputs, double dropout_rate = 0.1);

/// Adam with bias correction.
class Adam {
public:
    explicit Adam(std::size_t n, double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    void step(std::span<double> params, std::span<const double> grad);

    std::uint64_t steps() const noexcept { return t_; }
    std::span<const double> first_moment() const noexcept { return m_; }
    std::span<const double> second_moment() const noexcept { return v_; }

private:
    double lr_, b1_, b2_, eps_;
    std::vector<double> m_, v_;
    std::uint64_t t_ = 0;
};

namespace io {

inline constexpr char kNetworkMagic[] = "NHNN";
inline constexpr std::uint32_t kNetworkVersion = 1;

void write_network(std::ostream& os, const Network& net);
Network read_network(std::istream& is);

}  // namespace io
}  // namespace nh
