// Copyright 2026 The lidarmt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Independent reference implementations used only by tests.

#pragma once

#include <cmath>

#include "lidarmt/data.hpp"

namespace lmt::testing {

// Point-in-oriented-box via the box's corner frame: project p - corner0
// onto the box's edge vectors and require each projection in [0, |e|^2].
inline bool oracle_point_in_box(double x, double y, double z, const data::Box& b) {
  const double c = std::cos(static_cast<double>(b.yaw)), s = std::sin(static_cast<double>(b.yaw));
  const double hl = 0.5 * b.size[0], hw = 0.5 * b.size[1], hh = 0.5 * b.size[2];
  // corner0 = center - hl*u - hw*v - hh*w, with u=(c,s,0), v=(-s,c,0), w=(0,0,1)
  const double x0 = b.center[0] - hl * c + hw * s;
  const double y0 = b.center[1] - hl * s - hw * c;
  const double z0 = b.center[2] - hh;
  const double ux = 2 * hl * c, uy = 2 * hl * s;
  const double vx = -2 * hw * s, vy = 2 * hw * c;
  const double px = x - x0, py = y - y0, pz = z - z0;
  const double du = px * ux + py * uy;
  const double dv = px * vx + py * vy;
  const double tol = 1e-9;
  return du >= -tol && du <= ux * ux + uy * uy + tol && dv >= -tol &&
         dv <= vx * vx + vy * vy + tol && pz >= -tol && pz <= 2 * hh + tol;
}

}  // namespace lmt::testing
