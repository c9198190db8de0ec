#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "esi/env.hpp"
#include "esi/rng.hpp"
#include "esi/types.hpp"

namespace esi {

// Where an active-set sample was recorded: trajectory id, step index in that
// trajectory, and the engine episode in which it was drawn (-1 = bootstrap).
struct Provenance {
  std::uint64_t trajectory_id = 0;
  std::size_t step = 0;
  std::int64_t episode = -1;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ActiveSample {
  Sample sample;
  Provenance source;

  friend bool operator==(const ActiveSample&, const ActiveSample&) = default;
};

// The multiset of samples the policy imitates; duplicates allowed.
struct ActiveSet {
  std::vector<ActiveSample> samples;

  std::size_t size() const { return samples.size(); }

  std::vector<Sample> imitation_data() const {
    std::vector<Sample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.sample);
    return out;
  }

  friend bool operator==(const ActiveSet&, const ActiveSet&) = default;
};

// P = round(M * lambda), ties to even.
inline std::size_t replaced_count(std::size_t set_size, double mutation_strength) {
  if (!(mutation_strength >= 0.0 && mutation_strength <= 1.0))
    throw std::invalid_argument("mutation strength must lie in [0, 1]");
  // nearbyint under the default FE_TONEAREST mode.
  const double p = std::nearbyint(static_cast<double>(set_size) * mutation_strength);
  return std::min(set_size, static_cast<std::size_t>(p));
}

inline ActiveSample sample_from(const Trajectory& t, std::uint64_t trajectory_id, std::size_t step,
                                std::int64_t episode) {
  return {t.samples.at(step), {trajectory_id, step, episode}};
}

// Keeps M-P samples of `active` (drawn without replacement) and adds P samples
// drawn with replacement from the first min(scope, |best|) steps of `best`.
// The result always holds exactly M samples; `active` is not modified.
inline ActiveSet mutate_set(const ActiveSet& active, const Trajectory& best, std::uint64_t best_id,
                            std::size_t scope, double mutation_strength, std::int64_t episode, Rng& rng) {
  if (best.empty()) throw std::invalid_argument("mutate_set: best trajectory is empty");
  if (scope < 1) throw std::invalid_argument("mutate_set: sampling scope must be >= 1");
  const std::size_t m = active.size();
  const std::size_t p = replaced_count(m, mutation_strength);
  const std::size_t window = std::min(scope, best.size());

  ActiveSet out;
  out.samples.reserve(m);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t k = 0; k < m - p; ++k) {  // partial Fisher-Yates
    const std::size_t j = k + uniform_index(rng, m - k);
    std::swap(order[k], order[j]);
    out.samples.push_back(active.samples[order[k]]);
  }
  for (std::size_t k = 0; k < p; ++k) out.samples.push_back(sample_from(best, best_id, uniform_index(rng, window), episode));
  return out;
}

// Initial active set: M samples of the bootstrap trajectory, without
// replacement when it is long enough and with replacement otherwise.
inline ActiveSet initial_active_set(const Trajectory& t, std::uint64_t trajectory_id, std::size_t m, Rng& rng) {
  if (t.empty()) throw std::invalid_argument("initial_active_set: empty trajectory");
  ActiveSet out;
  out.samples.reserve(m);
  if (t.size() >= m) {
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t j = k + uniform_index(rng, order.size() - k);
      std::swap(order[k], order[j]);
      out.samples.push_back(sample_from(t, trajectory_id, order[k], -1));
    }
  } else {
    for (std::size_t k = 0; k < m; ++k) out.samples.push_back(sample_from(t, trajectory_id, uniform_index(rng, t.size()), -1));
  }
  return out;
}

inline nlohmann::json to_json(const ActiveSample& s) {
  nlohmann::json j = to_json(s.sample);
  j["trajectory_id"] = s.source.trajectory_id;
  j["step"] = s.source.step;
  j["episode"] = s.source.episode;
  return j;
}

inline ActiveSample active_sample_from_json(const nlohmann::json& j) {
  return {sample_from_json(j),
          {j.at("trajectory_id").get<std::uint64_t>(), j.at("step").get<std::size_t>(),
           j.at("episode").get<std::int64_t>()}};
}

inline nlohmann::json to_json(const ActiveSet& a) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : a.samples) arr.push_back(to_json(s));
  return arr;
}

inline ActiveSet active_set_from_json(const nlohmann::json& j) {
  ActiveSet a;
  for (const auto& s : j) a.samples.push_back(active_sample_from_json(s));
  return a;
}

}  // namespace esi
