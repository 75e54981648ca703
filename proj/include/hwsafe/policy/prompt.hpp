#ifndef HWSAFE__POLICY__PROMPT_HPP_
#define HWSAFE__POLICY__PROMPT_HPP_

/**
 * @file
 * @brief Text rendering of a scene for a language-model policy backend.
 */

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "hwsafe/policy/features.hpp"

namespace hwsafe {

struct PromptConfig
{
  /// vehicles listed under the current scenario
  int nearest{6};
  /// vehicles farther than this (m, longitudinal) are omitted
  double range{150.0};
  /// optional extra section, rendered after the scenario when non-empty
  std::vector<std::string> cautions;
};

namespace detail {

template <typename... Args>
std::string fmt(const char * f, Args... args)
{
  const int n = std::snprintf(nullptr, 0, f, args...);
  std::string s(static_cast<std::size_t>(n), '\0');
  std::snprintf(s.data(), s.size() + 1, f, args...);
  return s;
}

// avoids "-0.00" for tiny negatives so equal scenes render equal bytes
inline double tidy(double v, double quantum) { return std::abs(v) < 0.5 * quantum ? 0.0 : v; }

}  // namespace detail

/**
 * @brief Four labeled sections: task, preference, actions, scene.
 *
 * Lane 0 is the leftmost lane. Distances and speeds use two decimals, headings three.
 */
inline std::string render_prompt(const WorldState & w, const RoadModel & road, const PromptConfig & cfg = {})
{
  using detail::fmt;
  using detail::tidy;
  const auto & ego = w.ego;
  std::string out;

  out += "## Task Definition\n";
  out += fmt(
    "You control the ego vehicle on a straight %d-lane highway. Pick one high-level action for the "
    "next decision step. A low-level controller executes it and keeps the vehicle safe.\n\n",
    road.lane_count);

  out += "## Traffic Preference\n";
  out += fmt(
    "Drive close to the speed limit of %.2f m/s, overtake slower traffic when there is room, keep clear "
    "gaps to other vehicles, and avoid changing lanes back and forth.\n\n",
    road.v_max);

  out += "## Available Actions\n";
  out += "LC: change to the lane on the left (lower lane index)\n";
  out += "LK: keep the current lane\n";
  out += "RC: change to the lane on the right (higher lane index)\n\n";

  out += "## Current Scenario\n";
  out += fmt(
    "Ego vehicle: lane %d of %d, speed %.2f m/s, position (%.2f, %.2f) m, heading %.3f rad.\n",
    road.nearest_lane(ego.y), road.lane_count, tidy(ego.v, 1e-2), tidy(ego.x, 1e-2), tidy(ego.y, 1e-2),
    tidy(ego.psi, 1e-3));

  std::vector<const Hdv *> near;
  for (const Hdv * h : nearest_vehicles(w, cfg.nearest)) {
    if (std::abs(h->state.x - ego.x) <= cfg.range) { near.push_back(h); }
  }
  if (near.empty()) {
    out += "There are no other vehicles nearby.\n";
  } else {
    out += "Nearby vehicles:\n";
    for (const Hdv * h : near) {
      const double dx = h->state.x - ego.x;
      out += fmt(
        "- vehicle %d: lane %d, %.2f m %s, speed %.2f m/s, lateral speed %.2f m/s.\n", h->id,
        road.nearest_lane(h->state.y), tidy(std::abs(dx), 1e-2), dx >= 0.0 ? "ahead" : "behind",
        tidy(h->state.vx(), 1e-2), tidy(h->state.vy(), 1e-2));
    }
  }

  if (!cfg.cautions.empty()) {
    out += "\n## Decision Cautions\n";
    for (const auto & c : cfg.cautions) { out += "- " + c + "\n"; }
  }
  return out;
}

}  // namespace hwsafe

#endif  // HWSAFE__POLICY__PROMPT_HPP_
