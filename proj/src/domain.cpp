#include "apf/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>

namespace apf {

namespace {

void check_interval(const Interval& r, const char* what) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ConfigError(std::string("invalid range for ") + what);
  }
}

double uniform(Rng& rng, const Interval& r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

Eigen::Vector2d rotated_half_extents(const Block& b, Yaw yaw) {
  const bool swap = quarter_turns(yaw) % 2 == 1;
  return swap ? Eigen::Vector2d(b.dims.y() / 2, b.dims.x() / 2) : Eigen::Vector2d(b.dims.x() / 2, b.dims.y() / 2);
}

Rect footprint(const Placement& p) {
  const Eigen::Vector2d h = p.half_extents();
  return {p.center.x() - h.x(), p.center.x() + h.x(), p.center.y() - h.y(), p.center.y() + h.y()};
}

}  // namespace

bool Block::valid() const {
  if (!(mass > 0) || !std::isfinite(mass)) return false;
  for (int k = 0; k < 3; ++k) {
    if (!(dims[k] > 0) || !std::isfinite(dims[k])) return false;
    if (!(std::abs(com_offset[k]) < dims[k] / 2)) return false;
  }
  return true;
}

Plan Plan::prefix(std::size_t n) const {
  Plan p;
  p.actions.assign(actions.begin(), actions.begin() + static_cast<std::ptrdiff_t>(std::min(n, actions.size())));
  return p;
}

bool Plan::valid(std::size_t max_length) const {
  if (actions.empty() || actions.size() > max_length) return false;
  std::unordered_set<int> seen;
  for (const auto& a : actions) {
    if (!a.block.valid() || !seen.insert(a.block.id).second) return false;
    if (!std::isfinite(a.pose.dx) || !std::isfinite(a.pose.dy)) return false;
  }
  return true;
}

Eigen::Vector2d Placement::half_extents() const { return rotated_half_extents(block, yaw); }

double Placement::footprint_area() const { return block.dims.x() * block.dims.y(); }

bool Rect::strictly_contains(const Eigen::Vector2d& p, double margin) const {
  return p.x() > xmin + margin && p.x() < xmax - margin && p.y() > ymin + margin && p.y() < ymax - margin;
}

double Rect::signed_clearance(const Eigen::Vector2d& p) const {
  return std::min({p.x() - xmin, xmax - p.x(), p.y() - ymin, ymax - p.y()});
}

Block sample_block(Rng& rng, const BlockSampling& s, int id) {
  for (const auto& r : s.dim_range) {
    check_interval(r, "block dimensions");
    if (!(r.lo > 0)) throw ConfigError("block dimensions must be positive");
  }
  check_interval(s.com_fraction, "center-of-mass fraction");
  if (!(s.com_fraction.lo > -0.5 && s.com_fraction.hi < 0.5)) {
    throw ConfigError("center-of-mass fraction must lie inside (-0.5, 0.5)");
  }
  check_interval(s.mass_range, "mass");
  if (!(s.mass_range.lo > 0)) throw ConfigError("mass must be positive");

  Block b;
  b.id = id;
  for (int k = 0; k < 3; ++k) b.dims[k] = uniform(rng, s.dim_range[k]);
  for (int k = 0; k < 3; ++k) b.com_offset[k] = b.dims[k] * uniform(rng, s.com_fraction);
  b.mass = uniform(rng, s.mass_range);
  return b;
}

std::vector<Block> sample_block_set(Rng& rng, std::size_t count, const BlockSampling& sampling) {
  std::vector<Block> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_block(rng, sampling, static_cast<int>(i)));
  return out;
}

RelPose sample_pose(Rng& rng, const Block* lower, Yaw lower_yaw, const Block& upper, const PoseSampling& sampling) {
  RelPose pose;
  pose.rot = static_cast<Yaw>(std::uniform_int_distribution<int>(0, 3)(rng));
  if (lower == nullptr) return pose;
  const Eigen::Vector2d reach =
      sampling.offset_fraction * (rotated_half_extents(*lower, lower_yaw) + rotated_half_extents(upper, pose.rot));
  pose.dx = std::uniform_real_distribution<double>(-reach.x(), reach.x())(rng);
  pose.dy = std::uniform_real_distribution<double>(-reach.y(), reach.y())(rng);
  return pose;
}

Plan sample_plan(Rng& rng, std::span<const Block> blocks, std::size_t length, const PoseSampling& sampling) {
  if (blocks.empty()) throw ConfigError("empty block set");
  if (length == 0 || length > blocks.size()) throw ConfigError("plan length exceeds the block set");
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: only the first `length` slots are needed.
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, order.size() - 1)(rng);
    std::swap(order[i], order[j]);
  }
  Plan plan;
  plan.actions.reserve(length);
  for (std::size_t i = 0; i < length; ++i) plan = extend_plan(rng, plan, blocks[order[i]], sampling);
  return plan;
}

Plan extend_plan(Rng& rng, const Plan& plan, const Block& block, const PoseSampling& sampling) {
  Plan out = plan;
  const Action* below = plan.empty() ? nullptr : &plan.actions.back();
  RelPose pose = below ? sample_pose(rng, &below->block, below->pose.rot, block, sampling)
                       : sample_pose(rng, nullptr, Yaw::k0, block, sampling);
  out.actions.push_back({block, pose});
  return out;
}

std::vector<Placement> resolve_geometry(const Plan& plan) {
  std::vector<Placement> out;
  out.reserve(plan.size());
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
  double z_base = 0.0;
  for (const auto& a : plan.actions) {
    xy += Eigen::Vector2d(a.pose.dx, a.pose.dy);
    Placement p;
    p.block = a.block;
    p.yaw = a.pose.rot;
    p.center = Eigen::Vector3d(xy.x(), xy.y(), z_base + a.block.dims.z() / 2);
    z_base += a.block.dims.z();
    out.push_back(p);
  }
  return out;
}

std::optional<Rect> contact_patch(const Placement& lower, const Placement& upper) {
  const Rect a = footprint(lower);
  const Rect b = footprint(upper);
  Rect r{std::max(a.xmin, b.xmin), std::min(a.xmax, b.xmax), std::max(a.ymin, b.ymin), std::min(a.ymax, b.ymax)};
  if (!(r.xmin < r.xmax) || !(r.ymin < r.ymax)) return std::nullopt;
  return r;
}

Eigen::Vector2d subtower_com(std::span<const Placement> placements, std::size_t from) {
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  double mass = 0.0;
  for (std::size_t i = from; i < placements.size(); ++i) {
    acc += placements[i].block.mass * placements[i].world_com().head<2>();
    mass += placements[i].block.mass;
  }
  return acc / mass;
}

namespace {

// Subtower COMs for every split point of placements[0..n), computed from the
// top down so a prefix costs O(n).
template <typename Visit>
void for_each_support(std::span<const Placement> placements, Visit&& visit) {
  Eigen::Vector2d moment = Eigen::Vector2d::Zero();
  double mass = 0.0;
  for (std::size_t i = placements.size(); i-- > 1;) {
    moment += placements[i].block.mass * placements[i].world_com().head<2>();
    mass += placements[i].block.mass;
    if (!visit(contact_patch(placements[i - 1], placements[i]), Eigen::Vector2d(moment / mass))) return;
  }
}

}  // namespace

bool is_stable(std::span<const Placement> placements, double eps) {
  bool stable = true;
  for_each_support(placements, [&](const std::optional<Rect>& patch, const Eigen::Vector2d& com) {
    stable = patch && patch->strictly_contains(com, eps);
    return stable;
  });
  return stable;
}

bool is_stable(const Plan& plan, double eps) {
  const auto placements = resolve_geometry(plan);
  return is_stable(placements, eps);
}

std::vector<bool> constructability_labels(const Plan& plan, double eps) {
  const auto placements = resolve_geometry(plan);
  std::vector<bool> labels(plan.size(), false);
  if (labels.empty()) return labels;
  labels[0] = true;
  for (std::size_t i = 1; i < placements.size(); ++i) {
    if (!labels[i - 1]) break;
    labels[i] = is_stable(std::span<const Placement>(placements).first(i + 1), eps);
  }
  return labels;
}

bool is_constructable(const Plan& plan, double eps) {
  const auto labels = constructability_labels(plan, eps);
  return std::all_of(labels.begin(), labels.end(), [](bool b) { return b; });
}

double constructability_margin(const Plan& plan) {
  const auto placements = resolve_geometry(plan);
  double margin = std::numeric_limits<double>::infinity();
  const std::span<const Placement> all(placements);
  for (std::size_t k = 2; k <= placements.size(); ++k) {
    for_each_support(all.first(k), [&](const std::optional<Rect>& patch, const Eigen::Vector2d& com) {
      // A missing patch counts as a full footprint outside.
      const double c = patch ? patch->signed_clearance(com) : -std::numeric_limits<double>::infinity();
      margin = std::min(margin, c);
      return true;
    });
  }
  return margin;
}

Plan perturb(const Plan& plan, const NoiseConfig& noise, Rng& rng) {
  if (noise.sigma_xy < 0) throw ConfigError("noise sigma must be non-negative");
  if (!noise.enabled || noise.sigma_xy == 0.0) return plan;
  Plan out = plan;
  std::normal_distribution<double> gauss(0.0, noise.sigma_xy);
  for (auto& a : out.actions) {
    a.pose.dx += gauss(rng);
    a.pose.dy += gauss(rng);
  }
  return out;
}

LabeledPlan execute(const Plan& plan, const NoiseConfig& noise, Rng& rng) {
  const Plan realized = perturb(plan, noise, rng);
  LabeledPlan out;
  out.plan = plan;
  out.step_labels = constructability_labels(realized);
  out.overall = std::all_of(out.step_labels.begin(), out.step_labels.end(), [](bool b) { return b; });
  return out;
}

LabeledPlan label_noiseless(const Plan& plan) {
  Rng unused(0);
  return execute(plan, NoiseConfig::none(), unused);
}

double reward(const Plan& plan, TaskObjective task) {
  const auto placements = resolve_geometry(plan);
  if (placements.empty()) return 0.0;
  switch (task) {
    case TaskObjective::TallestTower: {
      double h = 0.0;
      for (const auto& p : placements) h += p.height();
      return h;
    }
    case TaskObjective::LongestOverhang: {
      const Placement& bottom = placements.front();
      const Placement& top = placements.back();
      const Eigen::Vector2d d = (top.center - bottom.center).head<2>().cwiseAbs() + top.half_extents();
      return d.maxCoeff();
    }
    case TaskObjective::MaxUnsupportedArea: {
      double area = 0.0;
      for (std::size_t i = 1; i < placements.size(); ++i) {
        const auto patch = contact_patch(placements[i - 1], placements[i]);
        area += placements[i].footprint_area() - (patch ? patch->area() : 0.0);
      }
      return area;
    }
  }
  return 0.0;
}

Plan rotate_plan(const Plan& plan, Yaw yaw) {
  Plan out = plan;
  for (auto& a : out.actions) {
    const Eigen::Vector3d d = rotate(yaw, Eigen::Vector3d(a.pose.dx, a.pose.dy, 0.0));
    a.pose.dx = d.x();
    a.pose.dy = d.y();
    a.pose.rot = compose(a.pose.rot, yaw);
  }
  return out;
}

const char* to_string(TaskObjective task) {
  switch (task) {
    case TaskObjective::TallestTower:
      return "tallest";
    case TaskObjective::LongestOverhang:
      return "overhang";
    case TaskObjective::MaxUnsupportedArea:
      return "unsupported";
  }
  return "?";
}

TaskObjective task_from_string(const std::string& name) {
  if (name == "tallest") return TaskObjective::TallestTower;
  if (name == "overhang") return TaskObjective::LongestOverhang;
  if (name == "unsupported") return TaskObjective::MaxUnsupportedArea;
  throw ConfigError("unknown task '" + name + "' (expected tallest, overhang or unsupported)");
}

}  // namespace apf
