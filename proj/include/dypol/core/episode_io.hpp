#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "dypol/core/types.hpp"

namespace dypol::core {

// JSONL: one episode object per line,
// {env_id, dynamics:{values, base, range_frac},
//  transitions:[{obs, action, next_obs, reward, step_index}]}.
void write_episodes_jsonl(const std::vector<Episode>& episodes,
                          std::ostream& out);
void write_episodes_jsonl(const std::vector<Episode>& episodes,
                          const std::filesystem::path& path);

std::vector<Episode> read_episodes_jsonl(std::istream& in);
std::vector<Episode> read_episodes_jsonl(const std::filesystem::path& path);

}  // namespace dypol::core
