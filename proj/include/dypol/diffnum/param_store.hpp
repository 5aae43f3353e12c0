#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dypol/core/types.hpp"

namespace dypol::diffnum {

// Flat storage for named trainable arrays. Entries are fixed after
// construction; gradients use plain Vec buffers of the same total length.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::vector<int> shape;
    int offset = 0;
    int size = 0;
  };

  // Returns the offset of the new entry; duplicate names are rejected.
  int add(const std::string& name, std::vector<int> shape);

  bool has(const std::string& name) const;
  const Entry& entry(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  std::span<double> values(const std::string& name);
  std::span<const double> values(const std::string& name) const;

  Vec& data() { return data_; }
  const Vec& data() const { return data_; }
  int total() const { return static_cast<int>(data_.size()); }

  // Name of the entry covering flat index `offset` (for error reporting).
  const std::string& name_at(int offset) const;

  // FNV-1a over the raw bytes; used for update-purity checks.
  std::uint64_t checksum() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
  Vec data_;
};

}  // namespace dypol::diffnum
