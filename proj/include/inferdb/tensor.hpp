// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "inferdb/errors.hpp"

namespace inferdb {

/// Installs a hard byte cap on DenseTensor buffer allocations for the current
/// thread. Allocating past the cap throws capacity-error, which is how the
/// engine simulates running a too-large fused dense operator under a fixed
/// memory budget. Caps nest; the innermost one wins.
class ScopedAllocationCap {
 public:
  explicit ScopedAllocationCap(int64_t cap_bytes);
  ~ScopedAllocationCap();

  ScopedAllocationCap(const ScopedAllocationCap&) = delete;
  ScopedAllocationCap& operator=(const ScopedAllocationCap&) = delete;

  static int64_t active_cap_bytes();     // -1 when no cap installed
  static int64_t outstanding_bytes();

 private:
  int64_t previous_cap_;
};

/// Row-major tensor of 64-bit floats, rank 1 to 4. Immutable by convention
/// once built: operations return new tensors. The leading dimension may be
/// zero (an empty batch); the remaining dimensions are always >= 1.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<int64_t> shape);
  DenseTensor(std::vector<int64_t> shape, std::vector<double> data);
  ~DenseTensor();

  DenseTensor(const DenseTensor& other);
  DenseTensor(DenseTensor&& other) noexcept;
  DenseTensor& operator=(const DenseTensor& other);
  DenseTensor& operator=(DenseTensor&& other) noexcept;

  static DenseTensor matrix(int64_t rows, int64_t cols);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int64_t size_bytes() const { return size() * 8; }

  // Rank-2 helpers.
  int64_t rows() const { return shape_[0]; }
  int64_t cols() const { return shape_[1]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const double* raw() const { return data_.data(); }
  double* raw() { return data_.data(); }

  double at(int64_t i) const { return data_[static_cast<size_t>(i)]; }
  double& at2(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  double at2(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
  double& at3(int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double at3(int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double& at4(int64_t i, int64_t j, int64_t k, int64_t l) {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  double at4(int64_t i, int64_t j, int64_t k, int64_t l) const {
    return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

 private:
  void charge(int64_t bytes);
  void discharge(int64_t bytes) noexcept;

  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

/// Row-major reinterpretation of the same buffer; element count must match.
DenseTensor reshape(DenseTensor t, std::vector<int64_t> new_shape);

/// One tile of a blocked matrix. Edge tiles may be smaller than the grid's
/// block size (ragged), never empty.
struct TensorBlock {
  int64_t block_row_id = 0;
  int64_t block_col_id = 0;
  int64_t rows = 0;
  int64_t cols = 0;
  DenseTensor data;  // rows x cols
};

/// A matrix stored as a complete grid of tensor blocks, the relation-centric
/// twin of a rank-2 DenseTensor. All-zero blocks are stored explicitly.
class BlockedMatrix {
 public:
  BlockedMatrix(int64_t logical_rows, int64_t logical_cols, int64_t block_rows,
                int64_t block_cols);

  int64_t logical_rows() const { return logical_rows_; }
  int64_t logical_cols() const { return logical_cols_; }
  int64_t block_rows() const { return block_rows_; }
  int64_t block_cols() const { return block_cols_; }
  int64_t grid_rows() const { return grid_rows_; }
  int64_t grid_cols() const { return grid_cols_; }

  // Dimensions of the (possibly ragged) block at a grid slot.
  int64_t rows_of(int64_t block_row) const;
  int64_t cols_of(int64_t block_col) const;

  void set_block(TensorBlock block);
  const TensorBlock& block(int64_t block_row, int64_t block_col) const;
  bool has_block(int64_t block_row, int64_t block_col) const;

  /// Throws corrupt-relation unless the grid is complete and every block's
  /// ids and dimensions are consistent with its slot.
  void validate() const;

 private:
  size_t slot(int64_t block_row, int64_t block_col) const;

  int64_t logical_rows_, logical_cols_;
  int64_t block_rows_, block_cols_;
  int64_t grid_rows_, grid_cols_;
  std::vector<TensorBlock> blocks_;
  std::vector<bool> present_;
};

BlockedMatrix block_partition(const DenseTensor& t, int64_t block_rows, int64_t block_cols);
DenseTensor reassemble(const BlockedMatrix& m);

/// C = A * B with 64-bit accumulation, ascending-k inner order. The blocked
/// join+aggregate lowering reproduces this bit for bit because it performs the
/// same additions in the same order.
DenseTensor dense_matmul(const DenseTensor& a, const DenseTensor& b);

/// C = A * B^T; row-by-row dot products, ascending inner order. Rounding may
/// differ from dense_matmul(A, transpose(B)) where the compiler contracts the
/// reduction differently.
DenseTensor dense_matmul_nt(const DenseTensor& a, const DenseTensor& b);

DenseTensor transpose(const DenseTensor& t);

/// Elementwise sum; b may be a row vector broadcast over a's rows (bias add).
DenseTensor dense_add(const DenseTensor& a, const DenseTensor& b);

void dense_add_in_place(DenseTensor& a, const DenseTensor& b);

enum class Activation { Identity, Relu, Sigmoid, Softmax };

Activation activation_from_name(std::string_view name);
std::string_view to_string(Activation kind);

/// Softmax is applied per row (rank-2 input) with max subtraction.
DenseTensor apply_activation(const DenseTensor& t, Activation kind);

/// Flattens every receptive field of an HxWxC image into one row of F:
/// values in (dy, dx, channel) order plus a trailing 1.0 bias column, rows in
/// y-major output order. Stride 1, no padding.
DenseTensor spatial_rewrite(const DenseTensor& image, int64_t kernel_h, int64_t kernel_w);

/// Flattens outC x kh x kw x C kernels into K with the same column order as
/// spatial_rewrite and the bias in the trailing column, so that convolution
/// becomes F * K^T.
DenseTensor kernel_flatten(const DenseTensor& kernels, const DenseTensor& bias);

}  // namespace inferdb
