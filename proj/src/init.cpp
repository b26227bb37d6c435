// SPDX-License-Identifier: Apache-2.0

#include "uavrelay/init.hpp"

#include <cmath>

#include "uavrelay/model.hpp"

namespace uavrelay {

namespace {
constexpr double kPi = 3.141592653589793;
}

Vec2 mass_center(const Mat2X& users) { return users.rowwise().mean(); }

double max_orbit_radius(double vmax, double slot_s, int points) {
  return 0.5 * vmax * slot_s / std::sin(kPi / points);
}

double gamma_max(const Scenario& cfg, double radius_m, double vmax) {
  const int moves = cfg.num_slots - 1;
  const double hover = cfg.num_slots * cfg.prop.blade_power_w;
  if (hover > cfg.battery_wslots)
    throw HoverInfeasible("battery cannot sustain hovering for the whole horizon");
  if (radius_m <= 0.0) return 1.0;

  auto energy = [&](double gamma) {
    const double chord = 2.0 * gamma * radius_m * std::sin(kPi / moves);
    const double speed = chord / cfg.slot_s;
    return moves * propulsion_power(cfg.prop, speed) + cfg.prop.blade_power_w;
  };
  if (energy(1.0) <= cfg.battery_wslots) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (energy(mid) <= cfg.battery_wslots ? lo : hi) = mid;
  }
  // stop a hair below the boundary: the result must be strictly feasible
  (void)vmax;
  return lo;
}

Packing unit_disk_packing(int count) {
  Packing p;
  auto ring = [&](int n, double r, double phase) {
    for (int i = 0; i < n; ++i) {
      const double a = phase + 2.0 * kPi * i / n;
      p.centers.push_back(Vec2((1.0 - r) * std::cos(a), (1.0 - r) * std::sin(a)));
    }
    p.radius = r;
  };
  switch (count) {
    case 1:
      p.centers.push_back(Vec2(0.0, 0.0));
      p.radius = 1.0;
      return p;
    case 2:
      ring(2, 0.5, 0.0);
      return p;
    case 3:
      ring(3, 2.0 * std::sqrt(3.0) - 3.0, kPi / 2.0);
      return p;
    case 4:
      ring(4, std::sqrt(2.0) - 1.0, kPi / 4.0);
      return p;
    case 5:
      ring(5, 0.370191908158750, kPi / 2.0);
      return p;
    default:
      break;
  }
  // deterministic Lloyd relaxation on a sampled disk
  const int n = count;
  std::vector<Vec2> centers(n);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * kPi * i / n;
    centers[i] = Vec2(0.6 * std::cos(a), 0.6 * std::sin(a));
  }
  const int grid = 80;
  std::vector<Vec2> samples;
  for (int ix = 0; ix < grid; ++ix)
    for (int iy = 0; iy < grid; ++iy) {
      const Vec2 q(-1.0 + 2.0 * (ix + 0.5) / grid, -1.0 + 2.0 * (iy + 0.5) / grid);
      if (q.squaredNorm() <= 1.0) samples.push_back(q);
    }
  for (int iter = 0; iter < 60; ++iter) {
    std::vector<Vec2> sum(n, Vec2::Zero());
    std::vector<int> cnt(n, 0);
    for (const Vec2& q : samples) {
      int best = 0;
      for (int i = 1; i < n; ++i)
        if ((q - centers[i]).squaredNorm() < (q - centers[best]).squaredNorm()) best = i;
      sum[best] += q;
      ++cnt[best];
    }
    for (int i = 0; i < n; ++i)
      if (cnt[i] > 0) centers[i] = sum[i] / cnt[i];
  }
  double r = 1.0;
  for (int i = 0; i < n; ++i) {
    r = std::min(r, 1.0 - centers[i].norm());
    for (int j = i + 1; j < n; ++j) r = std::min(r, 0.5 * (centers[i] - centers[j]).norm());
  }
  p.centers = centers;
  p.radius = std::max(r, 1e-3);
  return p;
}

InitTrajectories init_trajectories(const Scenario& cfg) {
  cfg.validate();
  const int M = cfg.num_relays, N = cfg.num_slots;
  const int moves = N - 1;
  const Vec2 center = mass_center(cfg.user_pos);
  double user_radius = 0.0;
  for (int k = 0; k < cfg.num_users; ++k)
    user_radius = std::max(user_radius, (cfg.user_pos.col(k) - center).norm());

  const Packing packing = unit_disk_packing(M);
  std::vector<Vec2> relay_centers(M);
  for (int m = 0; m < M; ++m) relay_centers[m] = center + user_radius * packing.centers[m];

  const double mbs_radius = max_orbit_radius(cfg.vmax_mbs, cfg.slot_s, moves);
  const double relay_cap = max_orbit_radius(cfg.vmax_relay, cfg.slot_s, moves);
  const double relay_radius = std::min(relay_cap, 0.5 * packing.radius * user_radius);

  double gamma = gamma_max(cfg, mbs_radius, cfg.vmax_mbs);
  gamma = std::min(gamma, gamma_max(cfg, relay_radius, cfg.vmax_relay));

  // keep symmetric layouts out of collision: if the scaled orbits could touch,
  // dilate the relay centroids around the mass center
  if (M > 1) {
    double sep = std::numeric_limits<double>::infinity();
    for (int m = 0; m < M; ++m)
      for (int j = m + 1; j < M; ++j)
        sep = std::min(sep, (relay_centers[m] - relay_centers[j]).norm());
    const double needed = cfg.min_dist_m + 2.0 * gamma * relay_radius + 1.0;
    if (sep < 1e-9) {
      const double ring = needed / (2.0 * std::sin(kPi / M));
      for (int m = 0; m < M; ++m) {
        const double a = 2.0 * kPi * m / M;
        relay_centers[m] = center + ring * Vec2(std::cos(a), std::sin(a));
      }
    } else if (sep < needed) {
      const double scale = needed / sep;
      for (int m = 0; m < M; ++m)
        relay_centers[m] = center + scale * (relay_centers[m] - center);
    }
  }

  InitTrajectories out;
  out.gamma = gamma;
  out.traj_mbs.resize(2, N);
  out.traj_relay.assign(M, Mat2X(2, N));
  auto orbit = [&](const Vec2& c, double r, double phase, Mat2X& q) {
    for (int n = 0; n < N; ++n) {
      const double a = phase + 2.0 * kPi * n / moves;
      q.col(n) = c + r * Vec2(std::cos(a), std::sin(a));
    }
    q.col(N - 1) = q.col(0);  // bitwise closure
  };
  orbit(center, gamma * mbs_radius, 0.0, out.traj_mbs);
  for (int m = 0; m < M; ++m)
    orbit(relay_centers[m], gamma * relay_radius, 2.0 * kPi * m / M, out.traj_relay[m]);
  return out;
}

NetworkState init_state(const Scenario& cfg) {
  NetworkState s = NetworkState::zeros(cfg);
  const InitTrajectories t = init_trajectories(cfg);
  s.traj_mbs = t.traj_mbs;
  s.traj_relay = t.traj_relay;
  s.beam_mbs.setConstant(2.0);
  s.beam_relay.setConstant(2.0);
  return s;
}

}  // namespace uavrelay
