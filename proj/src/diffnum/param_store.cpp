#include "dypol/diffnum/param_store.hpp"

#include <cstring>
#include <stdexcept>

namespace dypol::diffnum {

int ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (index_.count(name)) {
    throw std::invalid_argument("ParamStore: duplicate name " + name);
  }
  int size = 1;
  for (int s : shape) {
    if (s < 1) throw std::invalid_argument("ParamStore: bad shape for " + name);
    size *= s;
  }
  Entry e;
  e.name = name;
  e.shape = std::move(shape);
  e.offset = total();
  e.size = size;
  index_[name] = static_cast<int>(entries_.size());
  entries_.push_back(std::move(e));
  data_.resize(data_.size() + static_cast<std::size_t>(size), 0.0);
  return entries_.back().offset;
}

bool ParamStore::has(const std::string& name) const {
  return index_.count(name) > 0;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::invalid_argument("ParamStore: unknown name " + name);
  }
  return entries_[static_cast<std::size_t>(it->second)];
}

std::span<double> ParamStore::values(const std::string& name) {
  const Entry& e = entry(name);
  return {data_.data() + e.offset, static_cast<std::size_t>(e.size)};
}

std::span<const double> ParamStore::values(const std::string& name) const {
  const Entry& e = entry(name);
  return {data_.data() + e.offset, static_cast<std::size_t>(e.size)};
}

const std::string& ParamStore::name_at(int offset) const {
  for (const Entry& e : entries_) {
    if (offset >= e.offset && offset < e.offset + e.size) return e.name;
  }
  throw std::out_of_range("ParamStore: offset out of range");
}

std::uint64_t ParamStore::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (double v : data_) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  }
  return h;
}

}  // namespace dypol::diffnum
