#include "dypol/core/episode_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace dypol::core {

using nlohmann::json;

static json episode_to_json(const Episode& ep) {
  json j;
  j["env_id"] = ep.env_id;
  j["dynamics"] = {{"values", ep.dynamics.values},
                   {"base", ep.dynamics.base},
                   {"range_frac", ep.dynamics.range_frac}};
  json trs = json::array();
  for (const Transition& tr : ep.transitions) {
    trs.push_back({{"obs", tr.obs},
                   {"action", tr.action},
                   {"next_obs", tr.next_obs},
                   {"reward", tr.reward},
                   {"step_index", tr.step_index}});
  }
  j["transitions"] = std::move(trs);
  return j;
}

static Episode episode_from_json(const json& j) {
  Episode ep;
  ep.env_id = j.at("env_id").get<int>();
  const json& d = j.at("dynamics");
  ep.dynamics.values = d.at("values").get<Vec>();
  ep.dynamics.base = d.at("base").get<Vec>();
  ep.dynamics.range_frac = d.at("range_frac").get<double>();
  for (const json& t : j.at("transitions")) {
    Transition tr;
    tr.obs = t.at("obs").get<Vec>();
    tr.action = t.at("action").get<Vec>();
    tr.next_obs = t.at("next_obs").get<Vec>();
    tr.reward = t.at("reward").get<double>();
    tr.step_index = t.at("step_index").get<int>();
    ep.transitions.push_back(std::move(tr));
  }
  return ep;
}

void write_episodes_jsonl(const std::vector<Episode>& episodes,
                          std::ostream& out) {
  for (const Episode& ep : episodes) {
    out << episode_to_json(ep).dump() << '\n';
  }
}

void write_episodes_jsonl(const std::vector<Episode>& episodes,
                          const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path.string());
  write_episodes_jsonl(episodes, f);
  f.flush();
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Episode> read_episodes_jsonl(std::istream& in) {
  std::vector<Episode> episodes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    episodes.push_back(episode_from_json(json::parse(line)));
  }
  return episodes;
}

std::vector<Episode> read_episodes_jsonl(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for read: " + path.string());
  return read_episodes_jsonl(f);
}

}  // namespace dypol::core
