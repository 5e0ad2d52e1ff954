// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace inferdb {

namespace {

thread_local int64_t t_cap_bytes = -1;
thread_local int64_t t_outstanding_bytes = 0;

int64_t checked_element_count(const std::vector<int64_t>& shape) {
  if (shape.empty() || shape.size() > 4) {
    raise(ErrorKind::InvalidArgument, "tensor rank must be 1..4");
  }
  int64_t count = 1;
  for (size_t i = 0; i < shape.size(); ++i) {
    int64_t d = shape[i];
    // A leading dimension of zero is a legal empty batch; every other
    // dimension must be at least one.
    if (d < 0 || (d == 0 && i != 0)) {
      raise(ErrorKind::InvalidArgument, "tensor dimensions must be >= 1");
    }
    if (d == 0) {
      count = 0;
      continue;
    }
    if (count > std::numeric_limits<int64_t>::max() / d) {
      raise(ErrorKind::InvalidArgument, "tensor element count overflows");
    }
    count *= d;
  }
  return count;
}

}  // namespace

ScopedAllocationCap::ScopedAllocationCap(int64_t cap_bytes) : previous_cap_(t_cap_bytes) {
  if (cap_bytes < 0) raise(ErrorKind::InvalidArgument, "allocation cap must be >= 0");
  t_cap_bytes = cap_bytes;
}

ScopedAllocationCap::~ScopedAllocationCap() { t_cap_bytes = previous_cap_; }

int64_t ScopedAllocationCap::active_cap_bytes() { return t_cap_bytes; }
int64_t ScopedAllocationCap::outstanding_bytes() { return t_outstanding_bytes; }

void DenseTensor::charge(int64_t bytes) {
  if (t_cap_bytes >= 0 && t_outstanding_bytes + bytes > t_cap_bytes) {
    raise(ErrorKind::CapacityExceeded,
          "dense allocation of " + std::to_string(bytes) + " bytes exceeds the " +
              std::to_string(t_cap_bytes) + "-byte cap (" +
              std::to_string(t_outstanding_bytes) + " bytes outstanding)");
  }
  t_outstanding_bytes += bytes;
}

void DenseTensor::discharge(int64_t bytes) noexcept { t_outstanding_bytes -= bytes; }

DenseTensor::DenseTensor(std::vector<int64_t> shape) {
  int64_t count = checked_element_count(shape);
  charge(count * 8);
  shape_ = std::move(shape);
  data_.assign(static_cast<size_t>(count), 0.0);
}

DenseTensor::DenseTensor(std::vector<int64_t> shape, std::vector<double> data) {
  int64_t count = checked_element_count(shape);
  if (count != static_cast<int64_t>(data.size())) {
    raise(ErrorKind::InvalidArgument, "tensor data length does not match shape");
  }
  charge(count * 8);
  shape_ = std::move(shape);
  data_ = std::move(data);
}

DenseTensor::~DenseTensor() { discharge(size_bytes()); }

DenseTensor::DenseTensor(const DenseTensor& other) {
  charge(other.size_bytes());
  shape_ = other.shape_;
  data_ = other.data_;
}

DenseTensor::DenseTensor(DenseTensor&& other) noexcept
    : shape_(std::move(other.shape_)), data_(std::move(other.data_)) {
  other.shape_.clear();
  other.data_.clear();
}

DenseTensor& DenseTensor::operator=(const DenseTensor& other) {
  if (this == &other) return *this;
  charge(other.size_bytes());
  discharge(size_bytes());
  shape_ = other.shape_;
  data_ = other.data_;
  return *this;
}

DenseTensor& DenseTensor::operator=(DenseTensor&& other) noexcept {
  if (this == &other) return *this;
  discharge(size_bytes());
  shape_ = std::move(other.shape_);
  data_ = std::move(other.data_);
  other.shape_.clear();
  other.data_.clear();
  return *this;
}

DenseTensor DenseTensor::matrix(int64_t rows, int64_t cols) { return DenseTensor({rows, cols}); }

DenseTensor reshape(DenseTensor t, std::vector<int64_t> new_shape) {
  int64_t count = checked_element_count(new_shape);
  if (count != t.size()) {
    raise(ErrorKind::InvalidArgument, "reshape changes the element count");
  }
  std::vector<double> data(t.data().begin(), t.data().end());
  return DenseTensor(std::move(new_shape), std::move(data));
}

BlockedMatrix::BlockedMatrix(int64_t logical_rows, int64_t logical_cols, int64_t block_rows,
                             int64_t block_cols)
    : logical_rows_(logical_rows),
      logical_cols_(logical_cols),
      block_rows_(block_rows),
      block_cols_(block_cols) {
  if (logical_rows < 1 || logical_cols < 1) {
    raise(ErrorKind::InvalidArgument, "blocked matrix dimensions must be >= 1");
  }
  if (block_rows < 1 || block_cols < 1) {
    raise(ErrorKind::InvalidArgument, "block size must be >= 1");
  }
  grid_rows_ = (logical_rows + block_rows - 1) / block_rows;
  grid_cols_ = (logical_cols + block_cols - 1) / block_cols;
  blocks_.resize(static_cast<size_t>(grid_rows_ * grid_cols_));
  present_.assign(static_cast<size_t>(grid_rows_ * grid_cols_), false);
}

int64_t BlockedMatrix::rows_of(int64_t block_row) const {
  return std::min(block_rows_, logical_rows_ - block_row * block_rows_);
}

int64_t BlockedMatrix::cols_of(int64_t block_col) const {
  return std::min(block_cols_, logical_cols_ - block_col * block_cols_);
}

size_t BlockedMatrix::slot(int64_t block_row, int64_t block_col) const {
  if (block_row < 0 || block_row >= grid_rows_ || block_col < 0 || block_col >= grid_cols_) {
    raise(ErrorKind::InvalidArgument, "block index outside the grid");
  }
  return static_cast<size_t>(block_row * grid_cols_ + block_col);
}

void BlockedMatrix::set_block(TensorBlock block) {
  size_t s = slot(block.block_row_id, block.block_col_id);
  if (present_[s]) {
    raise(ErrorKind::CorruptRelation, "duplicate block (" + std::to_string(block.block_row_id) +
                                          ", " + std::to_string(block.block_col_id) + ")");
  }
  if (block.rows != rows_of(block.block_row_id) || block.cols != cols_of(block.block_col_id)) {
    raise(ErrorKind::CorruptRelation, "block dimensions do not match its grid slot");
  }
  if (block.data.rank() != 2 || block.data.rows() != block.rows || block.data.cols() != block.cols) {
    raise(ErrorKind::CorruptRelation, "block payload does not match its declared dimensions");
  }
  blocks_[s] = std::move(block);
  present_[s] = true;
}

const TensorBlock& BlockedMatrix::block(int64_t block_row, int64_t block_col) const {
  size_t s = slot(block_row, block_col);
  if (!present_[s]) {
    raise(ErrorKind::CorruptRelation, "missing block (" + std::to_string(block_row) + ", " +
                                          std::to_string(block_col) + ")");
  }
  return blocks_[s];
}

bool BlockedMatrix::has_block(int64_t block_row, int64_t block_col) const {
  return present_[slot(block_row, block_col)];
}

void BlockedMatrix::validate() const {
  for (int64_t bi = 0; bi < grid_rows_; ++bi) {
    for (int64_t bj = 0; bj < grid_cols_; ++bj) {
      const TensorBlock& b = block(bi, bj);  // throws on a missing slot
      if (b.block_row_id != bi || b.block_col_id != bj) {
        raise(ErrorKind::CorruptRelation, "block ids disagree with the grid slot");
      }
    }
  }
}

BlockedMatrix block_partition(const DenseTensor& t, int64_t block_rows, int64_t block_cols) {
  if (t.rank() != 2) raise(ErrorKind::InvalidArgument, "block_partition expects a rank-2 tensor");
  if (block_rows < 1 || block_cols < 1) {
    raise(ErrorKind::InvalidArgument, "block size must be >= 1");
  }
  BlockedMatrix m(t.rows(), t.cols(), block_rows, block_cols);
  for (int64_t bi = 0; bi < m.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < m.grid_cols(); ++bj) {
      int64_t r0 = bi * block_rows;
      int64_t c0 = bj * block_cols;
      int64_t rows = m.rows_of(bi);
      int64_t cols = m.cols_of(bj);
      DenseTensor data = DenseTensor::matrix(rows, cols);
      for (int64_t r = 0; r < rows; ++r) {
        std::memcpy(data.raw() + r * cols, t.raw() + (r0 + r) * t.cols() + c0,
                    static_cast<size_t>(cols) * sizeof(double));
      }
      m.set_block(TensorBlock{bi, bj, rows, cols, std::move(data)});
    }
  }
  return m;
}

DenseTensor reassemble(const BlockedMatrix& m) {
  m.validate();
  DenseTensor out = DenseTensor::matrix(m.logical_rows(), m.logical_cols());
  for (int64_t bi = 0; bi < m.grid_rows(); ++bi) {
    for (int64_t bj = 0; bj < m.grid_cols(); ++bj) {
      const TensorBlock& b = m.block(bi, bj);
      int64_t r0 = bi * m.block_rows();
      int64_t c0 = bj * m.block_cols();
      for (int64_t r = 0; r < b.rows; ++r) {
        std::memcpy(out.raw() + (r0 + r) * m.logical_cols() + c0, b.data.raw() + r * b.cols,
                    static_cast<size_t>(b.cols) * sizeof(double));
      }
    }
  }
  return out;
}

DenseTensor dense_matmul(const DenseTensor& a, const DenseTensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    raise(ErrorKind::InvalidArgument, "dense_matmul expects rank-2 tensors");
  }
  if (a.cols() != b.rows()) {
    raise(ErrorKind::InvalidArgument,
          "dense_matmul shape mismatch: " + std::to_string(a.cols()) + " vs " +
              std::to_string(b.rows()));
  }
  int64_t m = a.rows(), k = a.cols(), n = b.cols();
  DenseTensor c = DenseTensor::matrix(m, n);
  const double* ap = a.raw();
  const double* bp = b.raw();
  double* cp = c.raw();
  // i-k-j loops: the j loop vectorizes and every c[i][j] accumulates in
  // ascending k order, which the blocked lowering relies on for exactness.
  for (int64_t i = 0; i < m; ++i) {
    double* crow = cp + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      double aik = ap[i * k + kk];
      const double* brow = bp + kk * n;
      for (int64_t j = 0; j < n; ++j) {
        crow[j] += aik * brow[j];
      }
    }
  }
  return c;
}

DenseTensor dense_matmul_nt(const DenseTensor& a, const DenseTensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    raise(ErrorKind::InvalidArgument, "dense_matmul_nt expects rank-2 tensors");
  }
  if (a.cols() != b.cols()) {
    raise(ErrorKind::InvalidArgument,
          "dense_matmul_nt shape mismatch: " + std::to_string(a.cols()) + " vs " +
              std::to_string(b.cols()));
  }
  int64_t m = a.rows(), k = a.cols(), n = b.rows();
  DenseTensor c = DenseTensor::matrix(m, n);
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a.raw() + i * k;
    double* crow = c.raw() + i * n;
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b.raw() + j * k;
      double sum = 0.0;
      for (int64_t kk = 0; kk < k; ++kk) sum += arow[kk] * brow[kk];
      crow[j] = sum;
    }
  }
  return c;
}

DenseTensor transpose(const DenseTensor& t) {
  if (t.rank() != 2) raise(ErrorKind::InvalidArgument, "transpose expects a rank-2 tensor");
  DenseTensor out = DenseTensor::matrix(t.cols(), t.rows());
  for (int64_t r = 0; r < t.rows(); ++r) {
    for (int64_t c = 0; c < t.cols(); ++c) out.at2(c, r) = t.at2(r, c);
  }
  return out;
}

DenseTensor dense_add(const DenseTensor& a, const DenseTensor& b) {
  DenseTensor out = a;
  dense_add_in_place(out, b);
  return out;
}

void dense_add_in_place(DenseTensor& a, const DenseTensor& b) {
  if (a.same_shape(b)) {
    double* ap = a.raw();
    const double* bp = b.raw();
    int64_t n = a.size();
    for (int64_t i = 0; i < n; ++i) ap[i] += bp[i];
    return;
  }
  // Row-vector broadcast over a's rows.
  bool row_vector = (b.rank() == 1 && a.rank() == 2 && b.dim(0) == a.cols()) ||
                    (b.rank() == 2 && a.rank() == 2 && b.rows() == 1 && b.cols() == a.cols());
  if (!row_vector) {
    raise(ErrorKind::InvalidArgument, "dense_add shapes are incompatible");
  }
  double* ap = a.raw();
  const double* bp = b.raw();
  for (int64_t r = 0; r < a.rows(); ++r) {
    double* arow = ap + r * a.cols();
    for (int64_t j = 0; j < a.cols(); ++j) arow[j] += bp[j];
  }
}

Activation activation_from_name(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "softmax") return Activation::Softmax;
  raise(ErrorKind::InvalidArgument, "unknown activation: " + std::string(name));
}

std::string_view to_string(Activation kind) {
  switch (kind) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "unknown";
}

DenseTensor apply_activation(const DenseTensor& t, Activation kind) {
  switch (kind) {
    case Activation::Identity:
      return t;
    case Activation::Relu: {
      DenseTensor out = t;
      for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
      return out;
    }
    case Activation::Sigmoid: {
      DenseTensor out = t;
      for (double& x : out.data()) x = 1.0 / (1.0 + std::exp(-x));
      return out;
    }
    case Activation::Softmax: {
      if (t.rank() != 2) {
        raise(ErrorKind::InvalidArgument, "softmax expects a rank-2 tensor (applied per row)");
      }
      DenseTensor out = t;
      for (int64_t r = 0; r < out.rows(); ++r) {
        double* row = out.raw() + r * out.cols();
        double mx = row[0];
        for (int64_t j = 1; j < out.cols(); ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int64_t j = 0; j < out.cols(); ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        for (int64_t j = 0; j < out.cols(); ++j) row[j] /= sum;
      }
      return out;
    }
  }
  raise(ErrorKind::InvalidArgument, "unknown activation kind");
}

DenseTensor spatial_rewrite(const DenseTensor& image, int64_t kernel_h, int64_t kernel_w) {
  if (image.rank() != 3) {
    raise(ErrorKind::InvalidArgument, "spatial_rewrite expects an HxWxC image");
  }
  int64_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (kernel_h < 1 || kernel_w < 1 || kernel_h > h || kernel_w > w) {
    raise(ErrorKind::InvalidArgument, "kernel does not fit inside the image");
  }
  int64_t out_h = h - kernel_h + 1;
  int64_t out_w = w - kernel_w + 1;
  int64_t cols = kernel_h * kernel_w * c + 1;  // trailing bias column
  DenseTensor f = DenseTensor::matrix(out_h * out_w, cols);
  double* fp = f.raw();
  const double* ip = image.raw();
  for (int64_t y = 0; y < out_h; ++y) {
    for (int64_t x = 0; x < out_w; ++x) {
      double* row = fp + (y * out_w + x) * cols;
      int64_t col = 0;
      for (int64_t dy = 0; dy < kernel_h; ++dy) {
        const double* src = ip + ((y + dy) * w + x) * c;
        for (int64_t dx = 0; dx < kernel_w; ++dx) {
          for (int64_t ch = 0; ch < c; ++ch) row[col++] = src[dx * c + ch];
        }
      }
      row[col] = 1.0;
    }
  }
  return f;
}

DenseTensor kernel_flatten(const DenseTensor& kernels, const DenseTensor& bias) {
  if (kernels.rank() != 4) {
    raise(ErrorKind::InvalidArgument, "kernel_flatten expects outC x kh x kw x C kernels");
  }
  if (bias.rank() != 1 || bias.dim(0) != kernels.dim(0)) {
    raise(ErrorKind::InvalidArgument, "bias length must equal the kernel count");
  }
  int64_t out_c = kernels.dim(0), kh = kernels.dim(1), kw = kernels.dim(2), c = kernels.dim(3);
  int64_t cols = kh * kw * c + 1;
  DenseTensor k = DenseTensor::matrix(out_c, cols);
  for (int64_t o = 0; o < out_c; ++o) {
    double* row = k.raw() + o * cols;
    // Same (dy, dx, channel) order as spatial_rewrite; kernels are stored in
    // that order already, so this is one contiguous copy per output channel.
    std::memcpy(row, kernels.raw() + o * (cols - 1), static_cast<size_t>(cols - 1) * sizeof(double));
    row[cols - 1] = bias.at(o);
  }
  return k;
}

}  // namespace inferdb
