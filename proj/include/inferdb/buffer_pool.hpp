// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "inferdb/errors.hpp"
#include "inferdb/tensor.hpp"

namespace inferdb {

struct BlockKey {
  std::string relation_id;
  int64_t block_row = 0;
  int64_t block_col = 0;

  bool operator==(const BlockKey&) const = default;
};

struct BlockKeyHash {
  size_t operator()(const BlockKey& k) const {
    size_t h = std::hash<std::string>()(k.relation_id);
    h ^= std::hash<int64_t>()(k.block_row) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<int64_t>()(k.block_col) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

using PageBytes = std::shared_ptr<const std::vector<uint8_t>>;

struct BufferPoolStats {
  int64_t hits = 0;
  int64_t misses = 0;
  int64_t evictions = 0;
  int64_t spills = 0;
  int64_t resident_bytes = 0;
  int64_t peak_resident_bytes = 0;
};

/// Byte-budgeted page residency with LRU eviction and disk spilling. Pages are
/// opaque byte blobs keyed by (relation_id, block_row, block_col); evicted
/// pages land in `<spill_dir>/<relation_id>_<row>_<col>.blk` and are reloaded
/// transparently. Pinned pages are never evicted. All entry points are
/// internally synchronized.
class BufferPool {
 public:
  BufferPool(int64_t budget_bytes, std::filesystem::path spill_dir);
  ~BufferPool();

  void put(const BlockKey& key, std::vector<uint8_t> bytes);
  PageBytes get(const BlockKey& key);
  bool contains(const BlockKey& key) const;

  void pin(const BlockKey& key);
  void unpin(const BlockKey& key);

  /// Drops all pages and spill files of one relation (freeing an intermediate).
  void drop_relation(const std::string& relation_id);

  int64_t budget_bytes() const { return budget_bytes_; }
  BufferPoolStats stats() const;
  const std::filesystem::path& spill_dir() const { return spill_dir_; }

 private:
  struct Page {
    PageBytes bytes;                      // null while spilled out
    int pin_count = 0;
    bool dirty = false;                   // spill file absent or stale
    std::list<BlockKey>::iterator lru_it; // valid only while resident
    bool resident = false;
  };

  std::filesystem::path spill_path(const BlockKey& key) const;
  void make_room_locked(int64_t incoming_bytes);
  void spill_locked(const BlockKey& key, Page& page);
  void touch_locked(const BlockKey& key, Page& page);

  int64_t budget_bytes_;
  std::filesystem::path spill_dir_;
  mutable std::mutex mu_;
  std::unordered_map<BlockKey, Page, BlockKeyHash> pages_;
  std::list<BlockKey> lru_;  // front = most recent
  BufferPoolStats stats_;
};

/// Page byte layout for tensor blocks: two little-endian 64-bit dimensions
/// (rows, cols) followed by rows*cols little-endian 64-bit floats.
std::vector<uint8_t> encode_block(const DenseTensor& block);
DenseTensor decode_block(const std::vector<uint8_t>& bytes);

}  // namespace inferdb
