#include "nh/network.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nh/binary_io.hpp"
#include "nh/errors.hpp"
#include "nh/rng.hpp"

namespace nh {

const char* layer_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::ReLU: return "relu";
        case LayerKind::MaxPool: return "maxpool";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Dense: return "dense";
        case LayerKind::Dropout: return "dropout";
    }
    return "?";
}

namespace {

struct Kernel {
    int kd, kh, kw;
    int size() const { return kd * kh * kw; }
};

// Spatial rank of the network input: 3 for volumes, 2 for images.
int spatial_rank(const Shape& s) { return s.d > 1 ? 3 : (s.h > 1 ? 2 : 1); }

Kernel conv_kernel(int rank, int k) { return {rank >= 3 ? k : 1, rank >= 2 ? k : 1, k}; }

Kernel pool_kernel(int rank) { return {rank >= 3 ? 2 : 1, rank >= 2 ? 2 : 1, 2}; }

int ceil_div(int a, int b) { return (a + b - 1) / b; }

std::size_t layer_parameters(const LayerSpec& l, const Shape& in, int rank) {
    if (l.kind == LayerKind::Conv)
        return static_cast<std::size_t>(l.filters) * (static_cast<std::size_t>(in.c) * conv_kernel(rank, l.kernel).size() + 1);
    if (l.kind == LayerKind::Dense) return static_cast<std::size_t>(l.units) * (in.size() + 1);
    return 0;
}

}  // namespace

Network::Network(Shape input, std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
    if (input.size() == 0) throw ParameterError("network input must be non-empty");
    const int rank = spatial_rank(input);
    shapes_.push_back(input);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        const Shape in = shapes_.back();
        Shape out = in;
        const std::string where = "layer " + std::to_string(i) + " (" + layer_name(l.kind) + ")";
        switch (l.kind) {
            case LayerKind::Conv:
                if (l.filters < 1) throw ParameterError(where + ": filters must be positive");
                if (l.kernel < 1 || l.kernel % 2 == 0) throw ParameterError(where + ": kernel must be odd");
                out.c = l.filters;
                break;
            case LayerKind::MaxPool: {
                const Kernel k = pool_kernel(rank);
                out.d = ceil_div(in.d, k.kd);
                out.h = ceil_div(in.h, k.kh);
                out.w = ceil_div(in.w, k.kw);
                break;
            }
            case LayerKind::Flatten:
                out = Shape{static_cast<int>(in.size()), 1, 1, 1};
                break;
            case LayerKind::Dense:
                if (l.units < 1) throw ParameterError(where + ": units must be positive");
                if (in.d != 1 || in.h != 1 || in.w != 1) throw ParameterError(where + ": needs a flat input");
                out = Shape{l.units, 1, 1, 1};
                break;
            case LayerKind::Dropout:
                if (!(l.rate >= 0.0 && l.rate < 1.0)) throw ParameterError(where + ": rate must lie in [0, 1)");
                break;
            case LayerKind::ReLU:
                break;
        }
        offsets_.push_back(offset);
        offset += layer_parameters(l, in, rank);
        shapes_.push_back(out);
    }
    params_.assign(offset, 0.0);
}

void Network::initialize(std::uint64_t seed) {
    Rng rng(seed);
    const int rank = spatial_rank(input_shape());
    std::fill(params_.begin(), params_.end(), 0.0);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        const Shape& in = shapes_[i];
        std::size_t fan_in = 0, count = 0;
        if (l.kind == LayerKind::Conv) {
            fan_in = static_cast<std::size_t>(in.c) * conv_kernel(rank, l.kernel).size();
            count = fan_in * static_cast<std::size_t>(l.filters);
        } else if (l.kind == LayerKind::Dense) {
            fan_in = in.size();
            count = fan_in * static_cast<std::size_t>(l.units);
        } else {
            continue;
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::size_t k = 0; k < count; ++k) params_[offsets_[i] + k] = rng.uniform(-limit, limit);
    }
}

namespace {

// Zero-padded "same" convolution, stride 1, as one GEMM over an im2col buffer
// (rows: input channel x kernel tap, columns: output position).
void conv_forward(const Shape& in, const Shape& out, const Kernel& k, const double* w, const double* b,
                  const double* x, double* y) {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const int pd = k.kd / 2, ph = k.kh / 2, pw = k.kw / 2;
    const std::size_t plane = static_cast<std::size_t>(in.d) * in.h * in.w;
    const std::size_t taps = static_cast<std::size_t>(in.c) * k.size();
    thread_local std::vector<double> cols;
    cols.assign(taps * plane, 0.0);
    for (int i = 0; i < in.c; ++i) {
        const double* xi = x + i * plane;
        for (int a = 0; a < k.kd; ++a)
            for (int bb = 0; bb < k.kh; ++bb)
                for (int c = 0; c < k.kw; ++c) {
                    double* dst = cols.data() + (static_cast<std::size_t>(i) * k.size() + (a * k.kh + bb) * k.kw + c) * plane;
                    const int oz = a - pd, oy = bb - ph, ox = c - pw;
                    const int z0 = std::max(0, -oz), z1 = std::min(in.d, in.d - oz);
                    const int y0 = std::max(0, -oy), y1 = std::min(in.h, in.h - oy);
                    const int x0 = std::max(0, -ox), x1 = std::min(in.w, in.w - ox);
                    for (int z = z0; z < z1; ++z)
                        for (int yy = y0; yy < y1; ++yy) {
                            double* row = dst + (static_cast<std::size_t>(z) * in.h + yy) * in.w;
                            const double* src = xi + (static_cast<std::size_t>(z + oz) * in.h + (yy + oy)) * in.w + ox;
                            std::copy(src + x0, src + x1, row + x0);
                        }
                }
    }
    const Eigen::Map<const RowMat> W(w, out.c, static_cast<Eigen::Index>(taps));
    const Eigen::Map<const RowMat> C(cols.data(), static_cast<Eigen::Index>(taps), static_cast<Eigen::Index>(plane));
    Eigen::Map<RowMat> Y(y, out.c, static_cast<Eigen::Index>(plane));
    Y.noalias() = W * C;
    for (int o = 0; o < out.c; ++o) Y.row(o).array() += b[o];
}

void conv_backward(const Shape& in, const Shape& out, const Kernel& k, const double* w, const double* x,
                   const double* gy, double* gx, double* gw, double* gb) {
    const int pd = k.kd / 2, ph = k.kh / 2, pw = k.kw / 2;
    const std::size_t plane = static_cast<std::size_t>(in.d) * in.h * in.w;
    std::fill(gx, gx + in.size(), 0.0);
    for (int o = 0; o < out.c; ++o) {
        const double* go = gy + o * plane;
        double s = 0.0;
        for (std::size_t p = 0; p < plane; ++p) s += go[p];
        gb[o] += s;
        for (int i = 0; i < in.c; ++i) {
            const double* xi = x + i * plane;
            double* gxi = gx + i * plane;
            const std::size_t base = (static_cast<std::size_t>(o) * in.c + i) * k.size();
            for (int a = 0; a < k.kd; ++a)
                for (int bb = 0; bb < k.kh; ++bb)
                    for (int c = 0; c < k.kw; ++c) {
                        const std::size_t widx = base + (a * k.kh + bb) * k.kw + c;
                        const double wv = w[widx];
                        double acc = 0.0;
                        const int oz = a - pd, oy = bb - ph, ox = c - pw;
                        const int z0 = std::max(0, -oz), z1 = std::min(in.d, in.d - oz);
                        const int y0 = std::max(0, -oy), y1 = std::min(in.h, in.h - oy);
                        const int x0 = std::max(0, -ox), x1 = std::min(in.w, in.w - ox);
                        for (int z = z0; z < z1; ++z)
                            for (int yy = y0; yy < y1; ++yy) {
                                const double* grow = go + (static_cast<std::size_t>(z) * in.h + yy) * in.w;
                                const std::size_t src = (static_cast<std::size_t>(z + oz) * in.h + (yy + oy)) * in.w + ox;
                                for (int xx = x0; xx < x1; ++xx) {
                                    acc += grow[xx] * xi[src + xx];
                                    gxi[src + xx] += wv * grow[xx];
                                }
                            }
                        gw[widx] += acc;
                    }
        }
    }
}

void pool_forward(const Shape& in, const Shape& out, const Kernel& k, const double* x, double* y,
                  std::uint32_t* arg) {
    for (int c = 0; c < out.c; ++c)
        for (int z = 0; z < out.d; ++z)
            for (int yy = 0; yy < out.h; ++yy)
                for (int xx = 0; xx < out.w; ++xx) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::uint32_t where = 0;
                    for (int a = 0; a < k.kd && z * k.kd + a < in.d; ++a)
                        for (int b = 0; b < k.kh && yy * k.kh + b < in.h; ++b)
                            for (int e = 0; e < k.kw && xx * k.kw + e < in.w; ++e) {
                                const auto idx = static_cast<std::uint32_t>(
                                    ((static_cast<std::size_t>(c) * in.d + z * k.kd + a) * in.h + yy * k.kh + b) * in.w +
                                    xx * k.kw + e);
                                // first maximum wins on ties
                                if (x[idx] > best) {
                                    best = x[idx];
                                    where = idx;
                                }
                            }
                    const std::size_t o = ((static_cast<std::size_t>(c) * out.d + z) * out.h + yy) * out.w + xx;
                    y[o] = best;
                    if (arg) arg[o] = where;
                }
}

}  // namespace

std::vector<double> Network::predict(std::span<const double> x) const {
    if (x.size() != input_size())
        throw ParameterError("input has " + std::to_string(x.size()) + " values, network expects " +
                             std::to_string(input_size()));
    const int rank = spatial_rank(input_shape());
    std::vector<double> cur(x.begin(), x.end()), next;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        const Shape& in = shapes_[i];
        const Shape& out = shapes_[i + 1];
        const double* p = params_.data() + offsets_[i];
        switch (l.kind) {
            case LayerKind::Conv: {
                const Kernel k = conv_kernel(rank, l.kernel);
                next.assign(out.size(), 0.0);
                conv_forward(in, out, k, p, p + static_cast<std::size_t>(l.filters) * in.c * k.size(), cur.data(),
                             next.data());
                cur.swap(next);
                break;
            }
            case LayerKind::ReLU:
                for (double& v : cur) v = v > 0.0 ? v : 0.0;
                break;
            case LayerKind::MaxPool:
                next.assign(out.size(), 0.0);
                pool_forward(in, out, pool_kernel(rank), cur.data(), next.data(), nullptr);
                cur.swap(next);
                break;
            case LayerKind::Dense: {
                const std::size_t n = in.size();
                next.assign(out.size(), 0.0);
                const double* b = p + static_cast<std::size_t>(l.units) * n;
                for (int o = 0; o < l.units; ++o) {
                    const double* row = p + static_cast<std::size_t>(o) * n;
                    double s = b[o];
                    for (std::size_t j = 0; j < n; ++j) s += row[j] * cur[j];
                    next[o] = s;
                }
                cur.swap(next);
                break;
            }
            case LayerKind::Flatten:
            case LayerKind::Dropout:
                break;
        }
    }
    return cur;
}

std::span<const double> Network::forward(std::span<const double> x, Workspace& ws, Rng* dropout_rng) const {
    if (x.size() != input_size())
        throw ParameterError("input has " + std::to_string(x.size()) + " values, network expects " +
                             std::to_string(input_size()));
    const int rank = spatial_rank(input_shape());
    const std::size_t n_layers = layers_.size();
    ws.act.resize(n_layers + 1);
    ws.argmax.resize(n_layers);
    ws.mask.resize(n_layers);
    ws.act[0].assign(x.begin(), x.end());
    for (std::size_t i = 0; i < n_layers; ++i) {
        const LayerSpec& l = layers_[i];
        const Shape& in = shapes_[i];
        const Shape& out = shapes_[i + 1];
        const std::vector<double>& a = ws.act[i];
        std::vector<double>& y = ws.act[i + 1];
        y.resize(out.size());
        const double* p = params_.data() + offsets_[i];
        switch (l.kind) {
            case LayerKind::Conv: {
                const Kernel k = conv_kernel(rank, l.kernel);
                conv_forward(in, out, k, p, p + static_cast<std::size_t>(l.filters) * in.c * k.size(), a.data(),
                             y.data());
                break;
            }
            case LayerKind::ReLU:
                for (std::size_t j = 0; j < y.size(); ++j) y[j] = a[j] > 0.0 ? a[j] : 0.0;
                break;
            case LayerKind::MaxPool:
                ws.argmax[i].resize(out.size());
                pool_forward(in, out, pool_kernel(rank), a.data(), y.data(), ws.argmax[i].data());
                break;
            case LayerKind::Flatten:
                std::copy(a.begin(), a.end(), y.begin());
                break;
            case LayerKind::Dense: {
                const std::size_t n = in.size();
                const double* b = p + static_cast<std::size_t>(l.units) * n;
                for (int o = 0; o < l.units; ++o) {
                    const double* row = p + static_cast<std::size_t>(o) * n;
                    double s = b[o];
                    for (std::size_t j = 0; j < n; ++j) s += row[j] * a[j];
                    y[o] = s;
                }
                break;
            }
            case LayerKind::Dropout: {
                std::vector<double>& m = ws.mask[i];
                if (dropout_rng && l.rate > 0.0) {
                    m.resize(y.size());
                    const double keep = 1.0 / (1.0 - l.rate);
                    for (std::size_t j = 0; j < y.size(); ++j) {
                        m[j] = dropout_rng->uniform() < l.rate ? 0.0 : keep;
                        y[j] = a[j] * m[j];
                    }
                } else {
                    m.clear();
                    std::copy(a.begin(), a.end(), y.begin());
                }
                break;
            }
        }
    }
    return ws.act.back();
}

void Network::backward(Workspace& ws, std::span<const double> grad_output, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw ParameterError("gradient buffer has the wrong size");
    if (grad_output.size() != output_size()) throw ParameterError("output gradient has the wrong size");
    if (ws.act.size() != layers_.size() + 1) throw ParameterError("backward() called without forward()");
    const int rank = spatial_rank(input_shape());
    std::vector<double>& g = ws.grad_a;
    std::vector<double>& gin = ws.grad_b;
    g.assign(grad_output.begin(), grad_output.end());
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const LayerSpec& l = layers_[li];
        const Shape& in = shapes_[li];
        const Shape& out = shapes_[li + 1];
        const std::vector<double>& a = ws.act[li];
        const double* p = params_.data() + offsets_[li];
        double* gp = grad.data() + offsets_[li];
        gin.resize(in.size());
        switch (l.kind) {
            case LayerKind::Conv: {
                const Kernel k = conv_kernel(rank, l.kernel);
                const std::size_t nw = static_cast<std::size_t>(l.filters) * in.c * k.size();
                conv_backward(in, out, k, p, a.data(), g.data(), gin.data(), gp, gp + nw);
                break;
            }
            case LayerKind::ReLU:
                for (std::size_t j = 0; j < gin.size(); ++j) gin[j] = a[j] > 0.0 ? g[j] : 0.0;
                break;
            case LayerKind::MaxPool: {
                std::fill(gin.begin(), gin.end(), 0.0);
                const auto& arg = ws.argmax[li];
                for (std::size_t j = 0; j < g.size(); ++j) gin[arg[j]] += g[j];
                break;
            }
            case LayerKind::Flatten:
                std::copy(g.begin(), g.end(), gin.begin());
                break;
            case LayerKind::Dense: {
                const std::size_t n = in.size();
                double* gb = gp + static_cast<std::size_t>(l.units) * n;
                std::fill(gin.begin(), gin.end(), 0.0);
                for (int o = 0; o < l.units; ++o) {
                    const double go = g[o];
                    gb[o] += go;
                    if (go == 0.0) continue;
                    const double* row = p + static_cast<std::size_t>(o) * n;
                    double* grow = gp + static_cast<std::size_t>(o) * n;
                    for (std::size_t j = 0; j < n; ++j) {
                        grow[j] += go * a[j];
                        gin[j] += go * row[j];
                    }
                }
                break;
            }
            case LayerKind::Dropout: {
                const auto& m = ws.mask[li];
                if (m.empty())
                    std::copy(g.begin(), g.end(), gin.begin());
                else
                    for (std::size_t j = 0; j < gin.size(); ++j) gin[j] = g[j] * m[j];
                break;
            }
        }
        g.swap(gin);
    }
}

Network make_surrogate(int dim, int patch_resolution, int outputs, double dropout_rate) {
    if (dim != 2 && dim != 3) throw ParameterError("surrogate dimension must be 2 or 3");
    if (patch_resolution < 1) throw ParameterError("patch resolution must be positive");
    std::vector<LayerSpec> layers;
    const std::vector<int> filters = dim == 2 ? std::vector<int>{8, 16, 32, 64} : std::vector<int>{16, 32};
    for (int f : filters) {
        layers.push_back(LayerSpec::conv(f));
        layers.push_back(LayerSpec::relu());
        layers.push_back(LayerSpec::maxpool());
    }
    layers.push_back(LayerSpec::flatten());
    layers.push_back(LayerSpec::dense(512));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::dropout(dropout_rate));
    layers.push_back(LayerSpec::dense(outputs));
    const Shape input = dim == 2 ? Shape{1, 1, patch_resolution, patch_resolution}
                                 : Shape{1, patch_resolution, patch_resolution, patch_resolution};
    return Network(input, std::move(layers));
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon), m_(n, 0.0), v_(n, 0.0) {
    if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
}

void Adam::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw ParameterError("Adam: size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
}

namespace io {

void write_network(std::ostream& os, const Network& net) {
    put_magic(os, kNetworkMagic);
    put_u32(os, kNetworkVersion);
    const Shape& in = net.input_shape();
    put_u32(os, static_cast<std::uint32_t>(in.c));
    put_u32(os, static_cast<std::uint32_t>(in.d));
    put_u32(os, static_cast<std::uint32_t>(in.h));
    put_u32(os, static_cast<std::uint32_t>(in.w));
    put_u32(os, static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& l : net.layers()) {
        put_u8(os, static_cast<std::uint8_t>(l.kind));
        put_u32(os, static_cast<std::uint32_t>(l.filters));
        put_u32(os, static_cast<std::uint32_t>(l.kernel));
        put_u32(os, static_cast<std::uint32_t>(l.units));
        put_f64(os, l.rate);
    }
    put_u64(os, net.parameter_count());
    for (double v : net.parameters()) put_f64(os, v);
}

Network read_network(std::istream& is) {
    expect_magic(is, kNetworkMagic);
    const auto version = get_u32(is, "NHNN version");
    if (version != kNetworkVersion) throw FormatError("unsupported NHNN version " + std::to_string(version));
    Shape in;
    in.c = static_cast<int>(get_u32(is, "NHNN input shape"));
    in.d = static_cast<int>(get_u32(is, "NHNN input shape"));
    in.h = static_cast<int>(get_u32(is, "NHNN input shape"));
    in.w = static_cast<int>(get_u32(is, "NHNN input shape"));
    if (in.c < 1 || in.d < 1 || in.h < 1 || in.w < 1 || in.size() > (std::size_t{1} << 30))
        throw FormatError("NHNN input shape out of range");
    const auto n = get_u32(is, "NHNN layer count");
    if (n > 1024) throw FormatError("NHNN layer count out of range");
    std::vector<LayerSpec> layers(n);
    for (auto& l : layers) {
        const auto kind = get_u8(is, "NHNN layer");
        if (kind > static_cast<std::uint8_t>(LayerKind::Dropout)) throw FormatError("NHNN: unknown layer kind");
        l.kind = static_cast<LayerKind>(kind);
        l.filters = static_cast<int>(get_u32(is, "NHNN layer"));
        l.kernel = static_cast<int>(get_u32(is, "NHNN layer"));
        l.units = static_cast<int>(get_u32(is, "NHNN layer"));
        l.rate = get_f64(is, "NHNN layer");
    }
    Network net;
    try {
        net = Network(in, std::move(layers));
    } catch (const ParameterError& e) {
        throw FormatError(std::string("NHNN layer table is invalid: ") + e.what());
    }
    const auto count = get_u64(is, "NHNN parameter count");
    if (count != net.parameter_count())
        throw FormatError("NHNN parameter count " + std::to_string(count) + " does not match the layer table (" +
                          std::to_string(net.parameter_count()) + ")");
    for (double& v : net.parameters()) v = get_f64(is, "NHNN weights");
    return net;
}

}  // namespace io
}  // namespace nh
