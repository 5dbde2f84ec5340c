#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace apf {

using Rng = std::mt19937_64;

/// Thrown when a configuration value or input range is unusable.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Tolerance used to break containment ties toward "unstable".
inline constexpr double kStabilityEps = 1e-9;

/// Quarter-turn yaw about the vertical axis.
enum class Yaw : std::uint8_t { k0 = 0, k90 = 1, k180 = 2, k270 = 3 };

inline Yaw compose(Yaw a, Yaw b) {
  return static_cast<Yaw>((static_cast<int>(a) + static_cast<int>(b)) % 4);
}

inline int quarter_turns(Yaw y) { return static_cast<int>(y); }

/// Rotates a vector about +z by a quarter-turn multiple. Exact: only swaps and
/// negations, no trigonometry.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> rotate(Yaw yaw, const Eigen::MatrixBase<Derived>& v) {
  using Vec = Eigen::Matrix<typename Derived::Scalar, 3, 1>;
  switch (yaw) {
    case Yaw::k90:
      return Vec(-v(1), v(0), v(2));
    case Yaw::k180:
      return Vec(-v(0), -v(1), v(2));
    case Yaw::k270:
      return Vec(v(1), -v(0), v(2));
    case Yaw::k0:
    default:
      return Vec(v(0), v(1), v(2));
  }
}

/// A cuboid with dimensions, center-of-mass offset from its geometric center,
/// and mass. Lengths in meters, mass in kilograms.
struct Block {
  int id = 0;
  Eigen::Vector3d dims = Eigen::Vector3d::Constant(0.1);
  Eigen::Vector3d com_offset = Eigen::Vector3d::Zero();
  double mass = 1.0;

  bool valid() const;
  friend bool operator==(const Block&, const Block&) = default;
};

struct RelPose {
  double dx = 0.0;
  double dy = 0.0;
  Yaw rot = Yaw::k0;
  friend bool operator==(const RelPose&, const RelPose&) = default;
};

/// Place `block` offset by `pose` from the previously placed block (or the
/// table origin). Offsets are expressed in the world frame; `pose.rot` is the
/// block's absolute yaw.
struct Action {
  Block block;
  RelPose pose;
  friend bool operator==(const Action&, const Action&) = default;
};

struct Plan {
  std::vector<Action> actions;

  std::size_t size() const { return actions.size(); }
  bool empty() const { return actions.empty(); }
  /// First `n` actions.
  Plan prefix(std::size_t n) const;
  /// Non-empty, no repeated block id, every block valid, length <= max_length.
  bool valid(std::size_t max_length = 64) const;
  friend bool operator==(const Plan&, const Plan&) = default;
};

/// Absolute pose of a placed block.
struct Placement {
  Block block;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Yaw yaw = Yaw::k0;

  /// Horizontal half-extents after yaw (x, y).
  Eigen::Vector2d half_extents() const;
  double height() const { return block.dims.z(); }
  Eigen::Vector3d world_com() const { return center + rotate(yaw, block.com_offset); }
  double footprint_area() const;
};

/// Axis-aligned horizontal rectangle.
struct Rect {
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;

  double width() const { return xmax - xmin; }
  double depth() const { return ymax - ymin; }
  double area() const { return width() * depth(); }
  /// Strict containment with `margin` shaved from every side.
  bool strictly_contains(const Eigen::Vector2d& p, double margin = kStabilityEps) const;
  /// Smallest signed distance from `p` to an edge; negative when outside.
  double signed_clearance(const Eigen::Vector2d& p) const;
};

struct LabeledPlan {
  Plan plan;
  std::vector<bool> step_labels;
  bool overall = false;
};

struct NoiseConfig {
  double sigma_xy = 0.0;
  bool enabled = false;

  static NoiseConfig none() { return {}; }
  static NoiseConfig gaussian(double sigma) { return {sigma, true}; }
};

enum class TaskObjective { TallestTower, LongestOverhang, MaxUnsupportedArea };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Distribution over block parameters. Defaults are stand-ins; no published
/// ranges exist for the physical block set.
struct BlockSampling {
  std::array<Interval, 3> dim_range{Interval{0.05, 0.15}, Interval{0.05, 0.15}, Interval{0.05, 0.15}};
  Interval com_fraction{-0.4, 0.4};
  Interval mass_range{0.1, 1.0};
};

/// Distribution over relative placements. Offsets are uniform in
/// +/- offset_fraction times the half-sum of the adjacent footprint extents.
struct PoseSampling {
  double offset_fraction = 0.6;
};

Block sample_block(Rng& rng, const BlockSampling& sampling = {}, int id = 0);
std::vector<Block> sample_block_set(Rng& rng, std::size_t count, const BlockSampling& sampling = {});

/// Random relative pose for `upper` placed on `lower` (nullptr for the table).
RelPose sample_pose(Rng& rng, const Block* lower, Yaw lower_yaw, const Block& upper, const PoseSampling& sampling = {});

/// `length` distinct blocks drawn without replacement, random poses.
Plan sample_plan(Rng& rng, std::span<const Block> blocks, std::size_t length, const PoseSampling& sampling = {});

/// Appends one action with a random pose for `block` on top of `plan`.
Plan extend_plan(Rng& rng, const Plan& plan, const Block& block, const PoseSampling& sampling = {});

std::vector<Placement> resolve_geometry(const Plan& plan);

std::optional<Rect> contact_patch(const Placement& lower, const Placement& upper);

/// Horizontal projection of the combined center of mass of placements[from..].
Eigen::Vector2d subtower_com(std::span<const Placement> placements, std::size_t from);

/// Whole-tower static stability: every subtower's COM strictly inside the
/// contact patch it rests on.
bool is_stable(const Plan& plan, double eps = kStabilityEps);
bool is_stable(std::span<const Placement> placements, double eps = kStabilityEps);

/// Per-step labels: step i is feasible iff prefix 1..i is stable and step i-1
/// was feasible. Step 1 is always feasible.
std::vector<bool> constructability_labels(const Plan& plan, double eps = kStabilityEps);
bool is_constructable(const Plan& plan, double eps = kStabilityEps);

/// Minimum signed clearance (m) of any subtower COM to the edge of its
/// contact patch, over every prefix. Positive iff constructable (up to eps).
/// Returns +inf for single-block plans.
double constructability_margin(const Plan& plan);

Plan perturb(const Plan& plan, const NoiseConfig& noise, Rng& rng);

/// Simulated sequential construction: perturb once, then label every step.
LabeledPlan execute(const Plan& plan, const NoiseConfig& noise, Rng& rng);

LabeledPlan label_noiseless(const Plan& plan);

double reward(const Plan& plan, TaskObjective task);

/// Rotates the whole plan about the vertical axis through the table origin.
Plan rotate_plan(const Plan& plan, Yaw yaw);

const char* to_string(TaskObjective task);
TaskObjective task_from_string(const std::string& name);

}  // namespace apf
