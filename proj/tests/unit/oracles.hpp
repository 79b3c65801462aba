#pragma once

// Reference implementations used only by the tests. They are deliberately
// naive and share no code with the library.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// Cyclic Jacobi eigenvalues of a symmetric matrix, sorted descending.
inline std::vector<double> jacobi_eigenvalues(Matrix a, int sweeps = 100) {
    const std::size_t n = a.size();
    for (int s = 0; s < sweeps; ++s) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
    std::sort(ev.begin(), ev.end(), std::greater<>());
    return ev;
}

/// Direct nested-loop "same" convolution of one channel set, (c, d, h, w) layout.
/// Kernel extent kd along depth (1 for images), k along height and width.
inline std::vector<double> naive_conv(const std::vector<double>& x, int cin, int d, int h, int w,
                                      const std::vector<double>& weights, const std::vector<double>& bias, int cout,
                                      int kd, int k) {
    std::vector<double> y(static_cast<std::size_t>(cout) * d * h * w, 0.0);
    for (int o = 0; o < cout; ++o)
        for (int z = 0; z < d; ++z)
            for (int r = 0; r < h; ++r)
                for (int c = 0; c < w; ++c) {
                    double s = bias[o];
                    for (int i = 0; i < cin; ++i)
                        for (int a = 0; a < kd; ++a)
                            for (int b = 0; b < k; ++b)
                                for (int e = 0; e < k; ++e) {
                                    const int zz = z + a - kd / 2, rr = r + b - k / 2, cc = c + e - k / 2;
                                    if (zz < 0 || zz >= d || rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                                    const double wv = weights[((((o * cin + i) * kd + a) * k + b) * k) + e];
                                    s += wv * x[((i * d + zz) * h + rr) * w + cc];
                                }
                    y[((o * d + z) * h + r) * w + c] = s;
                }
    return y;
}

}  // namespace oracle
