// Copyright 2026 The InferDB Authors
//
// Licensed under the Apache License v2.0.
// See https://www.apache.org/licenses/LICENSE-2.0 for license information.
// SPDX-License-Identifier: Apache-2.0

#include "inferdb/buffer_pool.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "spill files are little-endian; big-endian hosts are unsupported");

namespace inferdb {

BufferPool::BufferPool(int64_t budget_bytes, std::filesystem::path spill_dir)
    : budget_bytes_(budget_bytes), spill_dir_(std::move(spill_dir)) {
  if (budget_bytes < 1) raise(ErrorKind::InvalidArgument, "buffer pool budget must be positive");
  std::error_code ec;
  std::filesystem::create_directories(spill_dir_, ec);
  if (ec) raise(ErrorKind::IoError, "cannot create spill directory " + spill_dir_.string());
}

BufferPool::~BufferPool() {
  std::error_code ec;
  for (auto& [key, page] : pages_) {
    std::filesystem::remove(spill_path(key), ec);
  }
}

std::filesystem::path BufferPool::spill_path(const BlockKey& key) const {
  return spill_dir_ / (key.relation_id + "_" + std::to_string(key.block_row) + "_" +
                       std::to_string(key.block_col) + ".blk");
}

void BufferPool::touch_locked(const BlockKey& key, Page& page) {
  if (page.resident) lru_.erase(page.lru_it);
  lru_.push_front(key);
  page.lru_it = lru_.begin();
  page.resident = true;
}

void BufferPool::spill_locked(const BlockKey& key, Page& page) {
  if (page.dirty) {
    std::ofstream out(spill_path(key), std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorKind::IoError, "cannot open spill file " + spill_path(key).string());
    out.write(reinterpret_cast<const char*>(page.bytes->data()),
              static_cast<std::streamsize>(page.bytes->size()));
    if (!out) raise(ErrorKind::IoError, "short write to " + spill_path(key).string());
    page.dirty = false;
    stats_.spills++;
  }
  stats_.resident_bytes -= static_cast<int64_t>(page.bytes->size());
  page.bytes.reset();
  lru_.erase(page.lru_it);
  page.resident = false;
  stats_.evictions++;
}

void BufferPool::make_room_locked(int64_t incoming_bytes) {
  if (incoming_bytes > budget_bytes_) {
    raise(ErrorKind::CapacityExceeded, "page of " + std::to_string(incoming_bytes) +
                                           " bytes exceeds the pool budget of " +
                                           std::to_string(budget_bytes_));
  }
  while (stats_.resident_bytes + incoming_bytes > budget_bytes_) {
    // Evict from the cold end, skipping pinned pages.
    auto it = lru_.rbegin();
    while (it != lru_.rend() && pages_.at(*it).pin_count > 0) ++it;
    if (it == lru_.rend()) {
      raise(ErrorKind::CapacityExceeded, "pinned pages exceed the pool budget");
    }
    BlockKey victim = *it;
    spill_locked(victim, pages_.at(victim));
  }
}

void BufferPool::put(const BlockKey& key, std::vector<uint8_t> bytes) {
  std::lock_guard lock(mu_);
  auto incoming = static_cast<int64_t>(bytes.size());
  auto it = pages_.find(key);
  if (it != pages_.end() && it->second.resident) {
    stats_.resident_bytes -= static_cast<int64_t>(it->second.bytes->size());
    lru_.erase(it->second.lru_it);
    it->second.resident = false;
  }
  make_room_locked(incoming);
  Page& page = pages_[key];
  page.bytes = std::make_shared<const std::vector<uint8_t>>(std::move(bytes));
  page.dirty = true;
  touch_locked(key, page);
  stats_.resident_bytes += incoming;
  stats_.peak_resident_bytes = std::max(stats_.peak_resident_bytes, stats_.resident_bytes);
}

PageBytes BufferPool::get(const BlockKey& key) {
  std::lock_guard lock(mu_);
  auto it = pages_.find(key);
  if (it == pages_.end()) {
    raise(ErrorKind::NotFound, "no page for key " + key.relation_id + "(" +
                                   std::to_string(key.block_row) + ", " +
                                   std::to_string(key.block_col) + ")");
  }
  Page& page = it->second;
  if (page.resident) {
    stats_.hits++;
    touch_locked(key, page);
    return page.bytes;
  }
  stats_.misses++;
  std::ifstream in(spill_path(key), std::ios::binary | std::ios::ate);
  if (!in) raise(ErrorKind::IoError, "missing spill file " + spill_path(key).string());
  auto size = static_cast<int64_t>(in.tellg());
  in.seekg(0);
  make_room_locked(size);
  auto bytes = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(size));
  in.read(reinterpret_cast<char*>(bytes->data()), size);
  if (!in) raise(ErrorKind::IoError, "short read from " + spill_path(key).string());
  page.bytes = std::move(bytes);
  page.dirty = false;
  touch_locked(key, page);
  stats_.resident_bytes += size;
  stats_.peak_resident_bytes = std::max(stats_.peak_resident_bytes, stats_.resident_bytes);
  return page.bytes;
}

bool BufferPool::contains(const BlockKey& key) const {
  std::lock_guard lock(mu_);
  return pages_.contains(key);
}

void BufferPool::pin(const BlockKey& key) {
  std::lock_guard lock(mu_);
  auto it = pages_.find(key);
  if (it == pages_.end()) raise(ErrorKind::NotFound, "cannot pin an absent page");
  if (!it->second.resident) {
    raise(ErrorKind::InvalidArgument, "cannot pin a spilled page; get it first");
  }
  it->second.pin_count++;
}

void BufferPool::unpin(const BlockKey& key) {
  std::lock_guard lock(mu_);
  auto it = pages_.find(key);
  if (it == pages_.end() || it->second.pin_count == 0) {
    raise(ErrorKind::InvalidArgument, "unpin without a matching pin");
  }
  it->second.pin_count--;
}

void BufferPool::drop_relation(const std::string& relation_id) {
  std::lock_guard lock(mu_);
  std::error_code ec;
  for (auto it = pages_.begin(); it != pages_.end();) {
    if (it->first.relation_id != relation_id) {
      ++it;
      continue;
    }
    if (it->second.resident) {
      stats_.resident_bytes -= static_cast<int64_t>(it->second.bytes->size());
      lru_.erase(it->second.lru_it);
    }
    std::filesystem::remove(spill_path(it->first), ec);
    it = pages_.erase(it);
  }
}

BufferPoolStats BufferPool::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

std::vector<uint8_t> encode_block(const DenseTensor& block) {
  if (block.rank() != 2) raise(ErrorKind::InvalidArgument, "block pages hold rank-2 tensors");
  uint64_t rows = static_cast<uint64_t>(block.rows());
  uint64_t cols = static_cast<uint64_t>(block.cols());
  std::vector<uint8_t> bytes(16 + block.size() * 8);
  std::memcpy(bytes.data(), &rows, 8);
  std::memcpy(bytes.data() + 8, &cols, 8);
  std::memcpy(bytes.data() + 16, block.raw(), static_cast<size_t>(block.size()) * 8);
  return bytes;
}

DenseTensor decode_block(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 16) raise(ErrorKind::CorruptRelation, "block page shorter than its header");
  uint64_t rows = 0, cols = 0;
  std::memcpy(&rows, bytes.data(), 8);
  std::memcpy(&cols, bytes.data() + 8, 8);
  size_t expected = 16 + static_cast<size_t>(rows) * cols * 8;
  if (bytes.size() != expected) {
    raise(ErrorKind::CorruptRelation, "block page length disagrees with its dimensions");
  }
  std::vector<double> data(static_cast<size_t>(rows) * cols);
  std::memcpy(data.data(), bytes.data() + 16, data.size() * 8);
  return DenseTensor({static_cast<int64_t>(rows), static_cast<int64_t>(cols)}, std::move(data));
}

}  // namespace inferdb
