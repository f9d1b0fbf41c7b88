#pragma once

#include <vector>

#include "crm/tensor.hpp"

namespace crm::ops {

/// Sets the thread count used by the GEMM backend. Default is 1; acceptance
/// runs must stay single threaded for reproducibility.
void set_compute_threads(int threads);

// Spatial tensors are H x W x C, channels last, row major. Convolution
// kernels are k x k x Cin x Cout.

/// 2D convolution, stride 1, odd kernel, zero "same" padding. Differentiable
/// in input, kernel and bias.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias);

/// 2x2 max pooling with stride 2; partial windows at the right/bottom edges.
/// Output is ceil(H/2) x ceil(W/2) x C. The gradient routes to the first
/// maximal cell of each window in row-major scan order.
Tensor maxpool2(Tape& tape, const Tensor& input);

Tensor relu(Tape& tape, const Tensor& input);

/// Concatenates along the channel axis; spatial dims must match. Either input
/// may have zero channels.
Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b);

/// H x W x C -> C, mean over all spatial positions.
Tensor global_avg_pool(Tape& tape, const Tensor& input);

/// Numerically stable softmax over a rank-1 tensor.
Tensor softmax(Tape& tape, const Tensor& input);

/// Bilinear resize (align_corners = false, edge clamped). Same-size resize is
/// the identity.
Tensor resize_bilinear(Tape& tape, const Tensor& input, int out_h, int out_w);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);

/// Elementwise mean of one or more equal-shaped tensors.
Tensor average(Tape& tape, const std::vector<Tensor>& inputs);

Tensor sum_all(Tape& tape, const Tensor& a);
Tensor sum_squares(Tape& tape, const Tensor& a);

/// -factor * log(max(values[index], floor)); scalar output. The gradient is
/// zero while the floor is active.
Tensor log_pick(Tape& tape, const Tensor& values, int index, double factor,
                double floor = 1e-12);

}  // namespace crm::ops
