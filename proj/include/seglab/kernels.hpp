#pragma once

// Same-padded 2-D convolution kernels.
//
// Tensors are dense row-major: activations [channels][height][width], weights
// [out][in][kh][kw]. The default kernels are OpenMP-parallel over channels; each
// output element is produced by exactly one thread with a fixed summation order,
// so results do not depend on the thread count. The `reference` namespace keeps
// the direct serial formulas for testing and benchmarking.

#include <cstddef>
#include <span>

namespace seglab {

struct ConvGeometry {
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;  // odd, square
    int height = 1;
    int width = 1;

    int pad() const { return kernel / 2; }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::size_t input_size() const { return plane() * in_channels; }
    std::size_t output_size() const { return plane() * out_channels; }
    std::size_t weight_size() const { return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel; }

    // Throws ValidationError for even or non-positive kernel sizes.
    void validate() const;
};

// output = bias + weight (*) input
void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);

// grad_input = weight^T (*) grad_output (overwrites grad_input)
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);

// grad_weight, grad_bias from grad_output and the forward input (overwrites both)
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_weight,
                            std::span<double> grad_bias);

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight,
                    std::span<const double> bias, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_params(const ConvGeometry& g, std::span<const double> grad_output,
                            std::span<const double> input, std::span<double> grad_weight,
                            std::span<double> grad_bias);

}  // namespace reference

// Worker count for the parallel kernels and the batch loop. Reads SEGLAB_THREADS
// once when set; returns 1 when built without OpenMP.
int configure_threads();
int max_threads();

}  // namespace seglab
