#pragma once

#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "esi/envs/checklist.hpp"
#include "esi/envs/grid_nav.hpp"
#include "esi/envs/line_walk.hpp"

namespace esi::envs {

// Name plus the parameters of every built-in environment. Only the fields of
// the named environment are used.
struct EnvConfig {
  std::string name = "linewalk";
  std::optional<int> max_steps;
  // gridnav
  int grid_size = GridNav::Params{}.size;
  int walls = GridNav::Params{}.walls;
  std::uint64_t level_start = 0;
  std::uint64_t num_levels = 200;
  // checklist
  int checklist_length = Checklist::Params{}.length;
  int checklist_actions = Checklist::Params{}.actions;
  std::uint64_t plant_seed = 0;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

inline bool is_builtin(const std::string& name) {
  return name == "linewalk" || name == "gridnav" || name == "checklist";
}

inline std::unique_ptr<Environment> make_env(const EnvConfig& c) {
  if (c.name == "linewalk") {
    LineWalk::Params p;
    if (c.max_steps) p.max_steps = *c.max_steps;
    return std::make_unique<LineWalk>(p);
  }
  if (c.name == "gridnav") {
    GridNav::Params p;
    if (c.max_steps) p.max_steps = *c.max_steps;
    p.size = c.grid_size;
    p.walls = c.walls;
    p.level_start = c.level_start;
    p.num_levels = c.num_levels;
    return std::make_unique<GridNav>(p);
  }
  if (c.name == "checklist") {
    Checklist::Params p;
    p.length = c.checklist_length;
    p.actions = c.checklist_actions;
    p.plant_seed = c.plant_seed;
    return std::make_unique<Checklist>(p);
  }
  throw std::invalid_argument("unknown environment '" + c.name + "' (expected linewalk, gridnav or checklist)");
}

inline EnvFactory make_env_factory(const EnvConfig& c) {
  make_env(c);  // validate eagerly
  return [c] { return make_env(c); };
}

inline nlohmann::json to_json(const EnvConfig& c) {
  nlohmann::json j{{"name", c.name},
                   {"grid_size", c.grid_size},
                   {"walls", c.walls},
                   {"level_start", c.level_start},
                   {"num_levels", c.num_levels},
                   {"checklist_length", c.checklist_length},
                   {"checklist_actions", c.checklist_actions},
                   {"plant_seed", c.plant_seed}};
  j["max_steps"] = c.max_steps ? nlohmann::json(*c.max_steps) : nlohmann::json(nullptr);
  return j;
}

inline EnvConfig env_config_from_json(const nlohmann::json& j) {
  EnvConfig c;
  c.name = j.at("name").get<std::string>();
  if (!j.at("max_steps").is_null()) c.max_steps = j.at("max_steps").get<int>();
  c.grid_size = j.at("grid_size").get<int>();
  c.walls = j.at("walls").get<int>();
  c.level_start = j.at("level_start").get<std::uint64_t>();
  c.num_levels = j.at("num_levels").get<std::uint64_t>();
  c.checklist_length = j.at("checklist_length").get<int>();
  c.checklist_actions = j.at("checklist_actions").get<int>();
  c.plant_seed = j.at("plant_seed").get<std::uint64_t>();
  return c;
}

}  // namespace esi::envs
