#include "gsvin/conv.hpp"

#include <algorithm>
#include <vector>

#include "gsvin/errors.hpp"

namespace gsvin {
namespace {

// Column buffer for one sample: rows are (channel, ky, kx) taps, columns are output cells.
struct Columns {
  std::size_t taps = 0;
  std::size_t cells = 0;
  std::vector<double> data;  // taps x cells
};

void im2col(const double* input, std::size_t channels, std::size_t height, std::size_t width, std::size_t f,
            Columns& cols) {
  const auto h = static_cast<long>(height);
  const auto w = static_cast<long>(width);
  const long pad = static_cast<long>(f / 2);
  cols.taps = channels * f * f;
  cols.cells = height * width;
  cols.data.assign(cols.taps * cols.cells, 0.0);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = input + c * height * width;
    for (std::size_t ky = 0; ky < f; ++ky) {
      const long dy = static_cast<long>(ky) - pad;
      for (std::size_t kx = 0; kx < f; ++kx, ++row) {
        const long dx = static_cast<long>(kx) - pad;
        double* dst = cols.data.data() + row * cols.cells;
        const long y0 = std::max(0L, -dy), y1 = std::min(h, h - dy);
        const long x0 = std::max(0L, -dx), x1 = std::min(w, w - dx);
        for (long y = y0; y < y1; ++y) {
          const double* src = plane + (y + dy) * w + dx;
          double* out = dst + y * w;
          for (long x = x0; x < x1; ++x) out[x] = src[x];
        }
      }
    }
  }
}

// Inverse scatter of im2col: accumulates column gradients back into the input plane layout.
void col2im_add(const Columns& cols, std::size_t channels, std::size_t height, std::size_t width, std::size_t f,
                double* grad_input) {
  const auto h = static_cast<long>(height);
  const auto w = static_cast<long>(width);
  const long pad = static_cast<long>(f / 2);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = grad_input + c * height * width;
    for (std::size_t ky = 0; ky < f; ++ky) {
      const long dy = static_cast<long>(ky) - pad;
      for (std::size_t kx = 0; kx < f; ++kx, ++row) {
        const long dx = static_cast<long>(kx) - pad;
        const double* src = cols.data.data() + row * cols.cells;
        const long y0 = std::max(0L, -dy), y1 = std::min(h, h - dy);
        const long x0 = std::max(0L, -dx), x1 = std::min(w, w - dx);
        for (long y = y0; y < y1; ++y) {
          double* dst = plane + (y + dy) * w + dx;
          const double* in = src + y * w;
          for (long x = x0; x < x1; ++x) dst[x] += in[x];
        }
      }
    }
  }
}

// out[x] += sum_j w[j * w_stride] * rows[j][x], four rows per pass.
void accumulate_rows(double* out, const double* w, std::size_t w_stride, const double* rows, std::size_t count,
                     std::size_t cells) {
  std::size_t j = 0;
  for (; j + 4 <= count; j += 4) {
    const double w0 = w[j * w_stride], w1 = w[(j + 1) * w_stride];
    const double w2 = w[(j + 2) * w_stride], w3 = w[(j + 3) * w_stride];
    const double* r0 = rows + j * cells;
    const double* r1 = r0 + cells;
    const double* r2 = r1 + cells;
    const double* r3 = r2 + cells;
    for (std::size_t x = 0; x < cells; ++x) out[x] += w0 * r0[x] + w1 * r1[x] + w2 * r2[x] + w3 * r3[x];
  }
  for (; j < count; ++j) {
    const double wv = w[j * w_stride];
    const double* r = rows + j * cells;
    for (std::size_t x = 0; x < cells; ++x) out[x] += wv * r[x];
  }
}

}  // namespace

void check_conv_shapes(const Shape& input, const Shape& kernel) {
  if (kernel.height != kernel.width || kernel.height % 2 == 0) {
    throw ShapeError("conv2d_same: kernel must be square with odd size, got kernel " + kernel.str());
  }
  if (input.channels != kernel.channels) {
    throw ShapeError("conv2d_same: input " + input.str() + " has " + std::to_string(input.channels) +
                     " channels but kernel " + kernel.str() + " expects " + std::to_string(kernel.channels));
  }
}

Tensor conv2d_same(const Tensor& input, const Tensor& kernel) {
  const Shape& in = input.shape();
  const Shape& ks = kernel.shape();
  check_conv_shapes(in, ks);
  const std::size_t f = ks.height;
  const std::size_t outs = ks.batch;
  Tensor output({in.batch, outs, in.height, in.width});
  const std::size_t cells = in.plane();
  const std::size_t taps = in.channels * f * f;

  Columns cols;
  for (std::size_t b = 0; b < in.batch; ++b) {
    const double* src = input.ptr() + b * in.channels * cells;
    double* dst = output.ptr() + b * outs * cells;
    if (f == 1) {
      // A 1x1 kernel reads the input planes directly.
      for (std::size_t o = 0; o < outs; ++o) accumulate_rows(dst + o * cells, kernel.ptr() + o * taps, 1, src, taps, cells);
      continue;
    }
    im2col(src, in.channels, in.height, in.width, f, cols);
    for (std::size_t o = 0; o < outs; ++o) {
      accumulate_rows(dst + o * cells, kernel.ptr() + o * taps, 1, cols.data.data(), taps, cells);
    }
  }
  return output;
}

void conv2d_same_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_output, Tensor* grad_input,
                          Tensor* grad_kernel) {
  const Shape& in = input.shape();
  const Shape& ks = kernel.shape();
  check_conv_shapes(in, ks);
  require_same_shape(grad_output.shape(), Shape{in.batch, ks.batch, in.height, in.width}, "conv2d_same backward");
  const std::size_t f = ks.height;
  const std::size_t outs = ks.batch;
  const std::size_t cells = in.plane();
  const std::size_t taps = in.channels * f * f;

  Columns cols;
  Columns grad_cols;
  std::vector<double> transposed;
  for (std::size_t b = 0; b < in.batch; ++b) {
    const double* src = input.ptr() + b * in.channels * cells;
    const double* gout = grad_output.ptr() + b * outs * cells;
    const double* col_data = src;
    if (f != 1) {
      im2col(src, in.channels, in.height, in.width, f, cols);
      col_data = cols.data.data();
    }

    if (grad_kernel != nullptr) {
      // Transposed columns (cells x taps) keep the innermost loop free of reductions.
      transposed.resize(cells * taps);
      for (std::size_t j = 0; j < taps; ++j) {
        for (std::size_t x = 0; x < cells; ++x) transposed[x * taps + j] = col_data[j * cells + x];
      }
      for (std::size_t o = 0; o < outs; ++o) {
        accumulate_rows(grad_kernel->ptr() + o * taps, gout + o * cells, 1, transposed.data(), cells, taps);
      }
    }

    if (grad_input != nullptr) {
      double* gin = grad_input->ptr() + b * in.channels * cells;
      double* gcols = gin;
      if (f != 1) {
        grad_cols.taps = taps;
        grad_cols.cells = cells;
        grad_cols.data.assign(taps * cells, 0.0);
        gcols = grad_cols.data.data();
      }
      for (std::size_t j = 0; j < taps; ++j) accumulate_rows(gcols + j * cells, kernel.ptr() + j, taps, gout, outs, cells);
      if (f != 1) col2im_add(grad_cols, in.channels, in.height, in.width, f, gin);
    }
  }
}

}  // namespace gsvin
