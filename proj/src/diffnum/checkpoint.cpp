#include "dypol/diffnum/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace dypol::diffnum {

using nlohmann::json;

namespace {

void put_le64(std::uint64_t bits, unsigned char* out) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(bits >> (8 * i));
}

std::uint64_t get_le64(const unsigned char* in) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return bits;
}

}  // namespace

void save_checkpoint(const ParamStore& params, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["total"] = params.total();
  json entries = json::array();
  for (const ParamStore::Entry& e : params.entries()) {
    entries.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
  }
  manifest["entries"] = std::move(entries);
  {
    std::ofstream f(dir / "manifest.json");
    if (!f) throw std::runtime_error("cannot write manifest in " + dir.string());
    f << manifest.dump(2) << '\n';
  }

  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write params.bin in " + dir.string());
  std::vector<unsigned char> buf(params.data().size() * 8);
  for (std::size_t i = 0; i < params.data().size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &params.data()[i], 8);
    put_le64(bits, buf.data() + i * 8);
  }
  bin.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!bin) throw std::runtime_error("params.bin write failed in " + dir.string());
}

ParamStore load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("cannot read manifest in " + dir.string());
  json manifest = json::parse(f);

  ParamStore params;
  for (const json& e : manifest.at("entries")) {
    const int offset = params.add(e.at("name").get<std::string>(),
                                  e.at("shape").get<std::vector<int>>());
    if (offset != e.at("offset").get<int>()) {
      throw std::runtime_error("checkpoint manifest offsets are inconsistent");
    }
  }
  if (params.total() != manifest.at("total").get<int>()) {
    throw std::runtime_error("checkpoint manifest total mismatch");
  }

  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read params.bin in " + dir.string());
  std::vector<unsigned char> buf(static_cast<std::size_t>(params.total()) * 8);
  bin.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
  if (bin.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw std::runtime_error("params.bin truncated in " + dir.string());
  }
  for (int i = 0; i < params.total(); ++i) {
    const std::uint64_t bits = get_le64(buf.data() + static_cast<std::size_t>(i) * 8);
    std::memcpy(&params.data()[static_cast<std::size_t>(i)], &bits, 8);
  }
  return params;
}

}  // namespace dypol::diffnum
