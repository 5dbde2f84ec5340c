#pragma once

#include "apf/domain.hpp"

namespace apf::test {

inline Block cube(int id, double side = 0.1, double mass = 1.0) {
  Block b;
  b.id = id;
  b.dims = Eigen::Vector3d::Constant(side);
  b.mass = mass;
  return b;
}

inline Plan stack(std::initializer_list<Action> actions) {
  Plan p;
  p.actions.assign(actions.begin(), actions.end());
  return p;
}

inline Action at(const Block& b, double dx, double dy = 0.0, Yaw rot = Yaw::k0) { return {b, {dx, dy, rot}}; }

/// Stable as a whole, but the middle block tips over before the heavy top
/// block is placed on it.
inline Plan counterweight_tower() {
  return stack({at(cube(0), 0.0), at(cube(1), 0.07), at(cube(2, 0.1, 3.0), -0.04)});
}

}  // namespace apf::test
