#pragma once

#include "gsvin/tensor.hpp"

namespace gsvin {

/// Validates (B,C,H,W) input against an (O,C,f,f) kernel with odd f. Throws ShapeError naming both shapes.
void check_conv_shapes(const Shape& input, const Shape& kernel);

/// Zero-padded "same" cross-correlation without bias; output is (B,O,H,W).
Tensor conv2d_same(const Tensor& input, const Tensor& kernel);

/// Accumulates d(loss)/d(input) and d(loss)/d(kernel) given d(loss)/d(output).
/// Either destination may be null to skip it.
void conv2d_same_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output, Tensor* grad_input,
                          Tensor* grad_kernel);

}  // namespace gsvin
