#include "seglab/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "seglab/errors.hpp"

namespace seglab {

void ConvGeometry::validate() const
{
    if (kernel < 1 || kernel % 2 == 0) {
        throw ValidationError("conv kernel size must be odd and positive, got " + std::to_string(kernel));
    }
    if (in_channels < 1 || out_channels < 1 || height < 1 || width < 1) {
        throw ValidationError("conv geometry must have positive channels and spatial size");
    }
}

namespace {

void check_sizes(const ConvGeometry& g, std::size_t in, std::size_t w, std::size_t out)
{
    if (in != g.input_size() || w != g.weight_size() || out != g.output_size()) {
        throw DimensionError("conv2d: buffer sizes do not match geometry");
    }
}

// Row range [lo, hi) of output rows y for which y + dy stays inside the image.
inline void valid_range(int extent, int offset, int& lo, int& hi)
{
    lo = std::max(0, -offset);
    hi = std::min(extent, extent - offset);
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output)
{
    check_sizes(g, input.size(), weight.size(), output.size());
    const int H = g.height;
    const int W = g.width;
    const int K = g.kernel;
    const int p = g.pad();
    const std::size_t plane = g.plane();

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < g.out_channels; ++oc) {
        double* out = output.data() + oc * plane;
        std::fill(out, out + plane, bias[oc]);
        for (int ic = 0; ic < g.in_channels; ++ic) {
            const double* in = input.data() + ic * plane;
            const double* wk = weight.data() + (static_cast<std::size_t>(oc) * g.in_channels + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
                const int dy = ky - p;
                int y0, y1;
                valid_range(H, dy, y0, y1);
                for (int kx = 0; kx < K; ++kx) {
                    const int dx = kx - p;
                    int x0, x1;
                    valid_range(W, dx, x0, x1);
                    const double w = wk[ky * K + kx];
                    for (int y = y0; y < y1; ++y) {
                        double* orow = out + y * W;
                        const double* irow = in + (y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) {
                            orow[x] += w * irow[x];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input)
{
    check_sizes(g, grad_input.size(), weight.size(), grad_output.size());
    const int H = g.height;
    const int W = g.width;
    const int K = g.kernel;
    const int p = g.pad();
    const std::size_t plane = g.plane();

#pragma omp parallel for schedule(static)
    for (int ic = 0; ic < g.in_channels; ++ic) {
        double* gin = grad_input.data() + ic * plane;
        std::fill(gin, gin + plane, 0.0);
        for (int oc = 0; oc < g.out_channels; ++oc) {
            const double* gout = grad_output.data() + oc * plane;
            const double* wk = weight.data() + (static_cast<std::size_t>(oc) * g.in_channels + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
                const int dy = ky - p;
                int y0, y1;
                valid_range(H, dy, y0, y1);
                for (int kx = 0; kx < K; ++kx) {
                    const int dx = kx - p;
                    int x0, x1;
                    valid_range(W, dx, x0, x1);
                    const double w = wk[ky * K + kx];
                    // out[y][x] reads in[y+dy][x+dx], so scatter back along the same offset.
                    for (int y = y0; y < y1; ++y) {
                        const double* grow = gout + y * W;
                        double* irow = gin + (y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) {
                            irow[x] += w * grow[x];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_weight,
                            std::span<double> grad_bias)
{
    check_sizes(g, input.size(), grad_weight.size(), grad_output.size());
    if (grad_bias.size() != static_cast<std::size_t>(g.out_channels)) {
        throw DimensionError("conv2d_backward_params: bias gradient size mismatch");
    }
    const int H = g.height;
    const int W = g.width;
    const int K = g.kernel;
    const int p = g.pad();
    const std::size_t plane = g.plane();

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < g.out_channels; ++oc) {
        const double* gout = grad_output.data() + oc * plane;
        double bsum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            bsum += gout[i];
        }
        grad_bias[oc] = bsum;
        for (int ic = 0; ic < g.in_channels; ++ic) {
            const double* in = input.data() + ic * plane;
            double* gw = grad_weight.data() + (static_cast<std::size_t>(oc) * g.in_channels + ic) * K * K;
            for (int ky = 0; ky < K; ++ky) {
                const int dy = ky - p;
                int y0, y1;
                valid_range(H, dy, y0, y1);
                for (int kx = 0; kx < K; ++kx) {
                    const int dx = kx - p;
                    int x0, x1;
                    valid_range(W, dx, x0, x1);
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* grow = gout + y * W;
                        const double* irow = in + (y + dy) * W + dx;
                        for (int x = x0; x < x1; ++x) {
                            acc += grow[x] * irow[x];
                        }
                    }
                    gw[ky * K + kx] = acc;
                }
            }
        }
    }
}

namespace reference {

namespace {

inline double at_padded(const double* plane, int H, int W, int y, int x)
{
    return (y < 0 || y >= H || x < 0 || x >= W) ? 0.0 : plane[y * W + x];
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output)
{
    check_sizes(g, input.size(), weight.size(), output.size());
    const int K = g.kernel;
    const int p = g.pad();
    for (int oc = 0; oc < g.out_channels; ++oc) {
        for (int y = 0; y < g.height; ++y) {
            for (int x = 0; x < g.width; ++x) {
                double acc = bias[oc];
                for (int ic = 0; ic < g.in_channels; ++ic) {
                    const double* in = input.data() + ic * g.plane();
                    for (int ky = 0; ky < K; ++ky) {
                        for (int kx = 0; kx < K; ++kx) {
                            const double w = weight[((static_cast<std::size_t>(oc) * g.in_channels + ic) * K + ky) * K + kx];
                            acc += w * at_padded(in, g.height, g.width, y + ky - p, x + kx - p);
                        }
                    }
                }
                output[oc * g.plane() + y * g.width + x] = acc;
            }
        }
    }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input)
{
    check_sizes(g, grad_input.size(), weight.size(), grad_output.size());
    const int K = g.kernel;
    const int p = g.pad();
    // d out[oc][y][x] / d in[ic][v][u] = w[oc][ic][v-y+p][u-x+p]
    for (int ic = 0; ic < g.in_channels; ++ic) {
        for (int v = 0; v < g.height; ++v) {
            for (int u = 0; u < g.width; ++u) {
                double acc = 0.0;
                for (int oc = 0; oc < g.out_channels; ++oc) {
                    const double* gout = grad_output.data() + oc * g.plane();
                    for (int ky = 0; ky < K; ++ky) {
                        for (int kx = 0; kx < K; ++kx) {
                            const double w = weight[((static_cast<std::size_t>(oc) * g.in_channels + ic) * K + ky) * K + kx];
                            acc += w * at_padded(gout, g.height, g.width, v - ky + p, u - kx + p);
                        }
                    }
                }
                grad_input[ic * g.plane() + v * g.width + u] = acc;
            }
        }
    }
}

void conv2d_backward_params(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_weight,
                            std::span<double> grad_bias)
{
    check_sizes(g, input.size(), grad_weight.size(), grad_output.size());
    const int K = g.kernel;
    const int p = g.pad();
    for (int oc = 0; oc < g.out_channels; ++oc) {
        const double* gout = grad_output.data() + oc * g.plane();
        double bsum = 0.0;
        for (std::size_t i = 0; i < g.plane(); ++i) {
            bsum += gout[i];
        }
        grad_bias[oc] = bsum;
        for (int ic = 0; ic < g.in_channels; ++ic) {
            const double* in = input.data() + ic * g.plane();
            for (int ky = 0; ky < K; ++ky) {
                for (int kx = 0; kx < K; ++kx) {
                    double acc = 0.0;
                    for (int y = 0; y < g.height; ++y) {
                        for (int x = 0; x < g.width; ++x) {
                            acc += gout[y * g.width + x] * at_padded(in, g.height, g.width, y + ky - p, x + kx - p);
                        }
                    }
                    grad_weight[((static_cast<std::size_t>(oc) * g.in_channels + ic) * K + ky) * K + kx] = acc;
                }
            }
        }
    }
}

}  // namespace reference

int configure_threads()
{
#ifdef _OPENMP
    if (const char* env = std::getenv("SEGLAB_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) {
            omp_set_num_threads(std::min(cap, omp_get_num_procs()));
        }
    }
    return omp_get_max_threads();
#else
    return 1;
#endif
}

int max_threads()
{
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace seglab
