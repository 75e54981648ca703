#ifndef HWSAFE__COMMON_HPP_
#define HWSAFE__COMMON_HPP_

/**
 * @file
 * @brief Shared vocabulary: actions, angle helpers, numeric constants.
 */

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hwsafe {

/// Discrete lane decision. Indices are stable and used as network outputs.
enum class Action : int { LC = 0, LK = 1, RC = 2 };

inline constexpr int kNumActions = 3;

inline constexpr std::array<Action, kNumActions> kAllActions{Action::LC, Action::LK, Action::RC};

constexpr int action_index(Action a) { return static_cast<int>(a); }

inline Action action_from_index(int i)
{
  if (i < 0 || i >= kNumActions) { throw std::out_of_range("action index out of range"); }
  return static_cast<Action>(i);
}

constexpr std::string_view action_name(Action a)
{
  switch (a) {
    case Action::LC: return "LC";
    case Action::LK: return "LK";
    case Action::RC: return "RC";
  }
  return "LK";
}

inline std::optional<Action> parse_action(std::string_view s)
{
  if (s == "LC") { return Action::LC; }
  if (s == "LK") { return Action::LK; }
  if (s == "RC") { return Action::RC; }
  return std::nullopt;
}

/// Lane offset implied by an action: LC moves toward lower lane indices.
constexpr int action_lane_offset(Action a) { return a == Action::LC ? -1 : (a == Action::RC ? 1 : 0); }

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a)
{
  constexpr double pi    = std::numbers::pi;
  constexpr double twopi = 2.0 * std::numbers::pi;
  if (a > -pi && a <= pi) { return a; }
  double r = std::fmod(a + pi, twopi);
  if (r <= 0.0) { r += twopi; }
  return r - pi;
}

/// Thrown for malformed user configuration (files, CLI values).
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace hwsafe

#endif  // HWSAFE__COMMON_HPP_
