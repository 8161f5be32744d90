// Copyright 2026 The vfhand Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Quasi-static simulation of a two-finger variable-friction gripper
// manipulating a planar polygon.
//
// Conventions (world frame: x right, y up, palm along the x axis):
//  * Finger bases sit at (-palm_width/2, 0) and (+palm_width/2, 0).
//  * A finger is a line segment of length finger_length; its inner face is
//    the contact surface, parameterized by arc length s in [0, L] from base.
//  * Joint angle q is measured from the straight-up pose, positive inward
//    (toward the other finger). World direction: left finger at angle
//    pi/2 - q, right finger at pi/2 + q.
//  * Discrete action modes (friction/slide table):
//      mode 0: slide, object stuck to LEFT  finger, LEFT  prescribed (retracts)
//      mode 1: slide, object stuck to LEFT  finger, RIGHT prescribed (retracts)
//      mode 2: slide, object stuck to RIGHT finger, RIGHT prescribed (retracts)
//      mode 3: slide, object stuck to RIGHT finger, LEFT  prescribed (retracts)
//      mode 4: pivot (both high friction), RIGHT prescribed (advances)
//      mode 5: pivot (both high friction), LEFT  prescribed (advances)
//    Slides retract the prescribed finger (q decreases); pivots advance it
//    (q increases). The non-prescribed ("torque-controlled") finger follows
//    by solving the contact constraint, which models a constant pinch torque.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "vf/common.hpp"
#include "vf/shape.hpp"

namespace vf {

// ---------------------------------------------------------------------------
// Hand description.

struct HandParams {
  double palm_width = 0.10;     // distance between finger bases [m]
  double finger_length = 0.12;  // contact segment length [m]
  double joint_low = rad(-30.0);
  double joint_high = rad(120.0);
  // Solve target for the pinch: 0 closes fingers to exact touch. Domain
  // randomization may set a small offset (approximate in the penetration
  // regime, where depth is a max-interior-distance proxy).
  double contact_clearance = 0.0;

  Vec2 base(Side side) const {
    return {side == Side::Left ? -palm_width / 2.0 : palm_width / 2.0, 0.0};
  }
};

inline double finger_world_angle(Side side, double q) {
  return side == Side::Left ? kPi / 2.0 - q : kPi / 2.0 + q;
}

inline double joint_from_world_angle(Side side, double world_angle) {
  return side == Side::Left ? kPi / 2.0 - world_angle : world_angle - kPi / 2.0;
}

inline Vec2 finger_dir(Side side, double q) {
  const double a = finger_world_angle(side, q);
  return {std::cos(a), std::sin(a)};
}

struct Segment {
  Vec2 a, b;
};

// Inner contact segment of a finger. Throws when q violates joint limits.
inline Segment finger_segment(const HandParams& p, Side side, double q) {
  if (!(q >= p.joint_low - 1e-12 && q <= p.joint_high + 1e-12))
    throw std::out_of_range("finger_segment: joint angle outside limits");
  const Vec2 base = p.base(side);
  return {base, base + p.finger_length * finger_dir(side, q)};
}

// Rigid frame attached to a finger (origin at the base, x axis along the
// finger). Object poses are glued in this frame during high-friction sticks.
inline Pose2 finger_frame(const HandParams& p, Side side, double q) {
  const Vec2 base = p.base(side);
  return {base.x, base.y, finger_world_angle(side, q)};
}

// ---------------------------------------------------------------------------
// Distances.

// Closest point parameter of p on segment [a, b], clamped to [0, 1].
inline double closest_param(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double dd = norm2(d);
  if (dd <= 0.0) return 0.0;
  return std::clamp(dot(p - a, d) / dd, 0.0, 1.0);
}

inline double point_segment_dist(Vec2 p, Vec2 a, Vec2 b) {
  const double t = closest_param(p, a, b);
  return norm(p - (a + t * (b - a)));
}

// Closest points between segments [p1,q1] and [p2,q2] (Ericson, RTCD 5.1.9).
// Returns squared distance; s/t are the parameters on each segment.
inline double segment_segment_dist2(Vec2 p1, Vec2 q1, Vec2 p2, Vec2 q2,
                                    double* s_out, double* t_out) {
  const Vec2 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  const double a = norm2(d1), e = norm2(d2), f = dot(d2, r);
  double s, t;
  if (a <= 1e-30 && e <= 1e-30) {
    s = t = 0.0;
  } else if (a <= 1e-30) {
    s = 0.0;
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = dot(d1, r);
    if (e <= 1e-30) {
      t = 0.0;
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = dot(d1, d2);
      const double denom = a * e - b * b;
      s = denom > 1e-18 * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  if (s_out) *s_out = s;
  if (t_out) *t_out = t;
  const Vec2 c1 = p1 + s * d1, c2 = p2 + t * d2;
  return norm2(c1 - c2);
}

// Minimum distance from a point to the polygon boundary.
inline double boundary_dist(Vec2 p, const Vec2* v, size_t n) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0, j = n - 1; i < n; j = i++)
    best = std::min(best, point_segment_dist(p, v[j], v[i]));
  return best;
}

// Signed clearance between a segment and a posed polygon:
//  > 0  minimum separation when disjoint,
//  = 0  touching,
//  < 0  negative penetration depth, measured as the maximum over the
//       contained part of the segment of the distance to the boundary.
inline double signed_clearance(const Segment& seg, const Vec2* v, size_t n) {
  // Cut the segment at every boundary crossing, then classify the pieces by
  // the containment of their midpoints. Relying on an exact zero minimum
  // distance to detect crossings is not robust in floating point.
  const Vec2 d = seg.b - seg.a;
  std::vector<double> cuts;
  cuts.reserve(8);
  cuts.push_back(0.0);
  cuts.push_back(1.0);
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 e = v[i] - v[j];
    const double rxs = cross(d, e);
    if (std::abs(rxs) < 1e-18) continue;
    const Vec2 w = v[j] - seg.a;
    const double t = cross(w, e) / rxs;
    const double u = cross(w, d) / rxs;
    if (t > -1e-12 && t < 1.0 + 1e-12 && u > -1e-12 && u < 1.0 + 1e-12)
      cuts.push_back(std::clamp(t, 0.0, 1.0));
  }
  std::sort(cuts.begin(), cuts.end());

  auto depth_at = [&](double t) { return boundary_dist(seg.a + t * d, v, n); };
  double depth = 0.0;
  bool any_inside = false;
  const double gold = 0.5 * (std::sqrt(5.0) - 1.0);
  for (size_t k = 0; k + 1 < cuts.size(); ++k) {
    double lo = cuts[k], hi = cuts[k + 1];
    if (hi - lo < 1e-12) continue;
    const Vec2 mid_pt = seg.a + (0.5 * (lo + hi)) * d;
    if (!point_in_polygon(mid_pt, v, n)) continue;
    any_inside = true;
    // Coarse grid, then golden-section refinement around the best cell.
    constexpr int kGrid = 24;
    int best_i = 0;
    double best_f = -1.0;
    for (int i = 0; i <= kGrid; ++i) {
      const double t = lo + (hi - lo) * i / kGrid;
      const double f = depth_at(t);
      if (f > best_f) {
        best_f = f;
        best_i = i;
      }
    }
    double ga = lo + (hi - lo) * std::max(0, best_i - 1) / kGrid;
    double gb = lo + (hi - lo) * std::min(kGrid, best_i + 1) / kGrid;
    double x1 = gb - gold * (gb - ga), x2 = ga + gold * (gb - ga);
    double f1 = depth_at(x1), f2 = depth_at(x2);
    for (int it = 0; it < 48 && gb - ga > 1e-13; ++it) {
      if (f1 < f2) {
        ga = x1;
        x1 = x2;
        f1 = f2;
        x2 = ga + gold * (gb - ga);
        f2 = depth_at(x2);
      } else {
        gb = x2;
        x2 = x1;
        f2 = f1;
        x1 = gb - gold * (gb - ga);
        f1 = depth_at(x1);
      }
    }
    depth = std::max({depth, best_f, f1, f2});
  }
  if (any_inside) return depth == 0.0 ? 0.0 : -depth;

  double dmin2 = std::numeric_limits<double>::infinity();
  for (size_t i = 0, j = n - 1; i < n; j = i++)
    dmin2 = std::min(dmin2, segment_segment_dist2(seg.a, seg.b, v[j], v[i], nullptr, nullptr));
  return std::sqrt(dmin2);
}

inline double signed_clearance(const Segment& seg, const Shape2& shape, const Pose2& pose) {
  std::vector<Vec2> posed(shape.vertices.size());
  for (size_t i = 0; i < posed.size(); ++i) posed[i] = pose.apply(shape.vertices[i]);
  return signed_clearance(seg, posed.data(), posed.size());
}

// Location (segment parameter s in meters) of the deepest contained point;
// used to steer feature re-anchoring after pivot contact events.
inline double penetration_argmin_s(const Segment& seg, const Vec2* v, size_t n) {
  const Vec2 d = seg.b - seg.a;
  const double len = norm(d);
  double best_f = -1.0, best_t = 0.0;
  constexpr int kGrid = 64;
  for (int i = 0; i <= kGrid; ++i) {
    const double t = static_cast<double>(i) / kGrid;
    const Vec2 p = seg.a + t * d;
    if (!point_in_polygon(p, v, n)) continue;
    const double f = boundary_dist(p, v, n);
    if (f > best_f) {
      best_f = f;
      best_t = t;
    }
  }
  return best_t * len;
}

// ---------------------------------------------------------------------------
// Contact features.

// A contact pairs a location on a finger (arc length s from the base) with a
// feature of the object outline: either a vertex or a point on an edge
// (index + parameter in [0,1] toward the next vertex).
struct ContactFeature {
  Side finger = Side::Left;
  double s = 0.0;
  bool on_vertex = false;
  int index = -1;
  double param = 0.0;
  bool flush = false;  // edge-edge contact (outline face lies along the finger)
};

inline Vec2 body_point(const Shape2& shape, const ContactFeature& f) {
  const auto& v = shape.vertices;
  if (f.on_vertex) return v[f.index];
  const Vec2 a = v[f.index], b = v[(f.index + 1) % v.size()];
  return a + f.param * (b - a);
}

struct ContactInfo {
  ContactFeature feat;
  double distance = 0.0;  // unsigned closest-pair distance
  Vec2 world_on_finger;
  Vec2 world_on_object;
  // Flush extras: overlap interval of the object face along the finger.
  double overlap_lo = 0.0, overlap_hi = 0.0;
};

// Candidates whose closest-pair distances differ by less than this are
// treated as ties (resolved toward the tracking hint). Kept well below the
// contact-agreement tolerance so the winning feature describes the true
// touch point even on finely faceted arcs.
inline constexpr double kFeatureMergeDist = 5e-8;
inline constexpr double kFlushAngle = rad(0.5);  // edge alignment threshold

// Closest contact feature between a finger and the posed object. Among
// candidates whose distance ties within kFeatureMergeDist, the one with s
// closest to s_hint wins (s_hint < 0 means "smallest s"), which keeps feature
// tracking stable across substeps.
inline ContactInfo detect_contact(const HandParams& p, Side side, double q,
                                  const Vec2* v, size_t n, double s_hint = -1.0) {
  const Segment seg = finger_segment(p, side, q);
  const double len = p.finger_length;
  double dmin = std::numeric_limits<double>::infinity();
  struct Cand {
    double d, t_seg, u_edge;
    size_t edge;
  };
  std::vector<Cand> cands;
  cands.reserve(n);
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    double t, u;
    const double d2 = segment_segment_dist2(seg.a, seg.b, v[j], v[i], &t, &u);
    const double d = std::sqrt(d2);
    cands.push_back({d, t, u, j});
    dmin = std::min(dmin, d);
  }
  // Pick the winner among ties.
  const Cand* best = nullptr;
  for (const Cand& c : cands) {
    if (c.d > dmin + kFeatureMergeDist) continue;
    if (!best) {
      best = &c;
      continue;
    }
    const double sc = c.t_seg * len, sb = best->t_seg * len;
    const bool better = s_hint < 0.0 ? sc < sb - 1e-12
                                     : std::abs(sc - s_hint) < std::abs(sb - s_hint) - 1e-12;
    if (better) best = &c;
  }

  ContactInfo out;
  out.feat.finger = side;
  const size_t i0 = best->edge;
  const size_t i1 = (i0 + 1) % n;
  const Vec2 ea = v[i0], eb = v[i1];

  // Flush classification: face nearly parallel to the finger with a real
  // overlap along it.
  const Vec2 fdir = (seg.b - seg.a) * (1.0 / len);
  const Vec2 edir = eb - ea;
  const double elen = norm(edir);
  double s_lo = 0.0, s_hi = 0.0;
  bool flush = false;
  if (elen > 1e-12) {
    const Vec2 eu = edir * (1.0 / elen);
    const double align = std::atan2(std::abs(cross(fdir, eu)), std::abs(dot(fdir, eu)));
    if (align < kFlushAngle) {
      const double sa = dot(ea - seg.a, fdir), sb2 = dot(eb - seg.a, fdir);
      s_lo = std::clamp(std::min(sa, sb2), 0.0, len);
      s_hi = std::clamp(std::max(sa, sb2), 0.0, len);
      flush = s_hi - s_lo > 1e-6;
    }
  }

  double t_seg = best->t_seg, u_edge = best->u_edge;
  if (flush) {
    out.overlap_lo = s_lo;
    out.overlap_hi = s_hi;
    // For a truly parallel overlap the closest pair is ambiguous; pin the
    // representative to the overlap midpoint. A merely near-parallel face
    // keeps the closest-pair point so that the finger-frame and object-frame
    // descriptions of the contact agree.
    const double align2 =
        std::atan2(std::abs(cross(fdir, edir)), std::abs(dot(fdir, edir)) + 1e-300);
    if (align2 < 1e-6) {
      const double s_mid = 0.5 * (s_lo + s_hi);
      t_seg = s_mid / len;
      const Vec2 pf = seg.a + s_mid * fdir;
      u_edge = closest_param(pf, ea, eb);
    }
  }
  out.feat.flush = flush;
  out.feat.s = t_seg * len;
  out.world_on_finger = seg.a + t_seg * (seg.b - seg.a);
  out.world_on_object = ea + u_edge * (eb - ea);
  out.distance = norm(out.world_on_finger - out.world_on_object);
  if (u_edge <= 1e-9) {
    out.feat.on_vertex = true;
    out.feat.index = static_cast<int>(i0);
  } else if (u_edge >= 1.0 - 1e-9) {
    out.feat.on_vertex = true;
    out.feat.index = static_cast<int>(i1);
  } else {
    out.feat.on_vertex = false;
    out.feat.index = static_cast<int>(i0);
    out.feat.param = u_edge;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation state.

enum class Status : uint8_t { Ok = 0, LostContact, OutOfRange, JointLimit, Jammed };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::LostContact: return "lost_contact";
    case Status::OutOfRange: return "out_of_range";
    case Status::JointLimit: return "joint_limit";
    case Status::Jammed: return "jammed";
  }
  return "?";
}

struct SimState {
  HandParams params;
  Shape2 shape;
  double q_left = 0.0, q_right = 0.0;
  FrictionMode friction_left = FrictionMode::High;
  FrictionMode friction_right = FrictionMode::High;
  Pose2 object_pose;
  ContactFeature contact_left, contact_right;
  uint64_t step_count = 0;

  double q(Side s) const { return s == Side::Left ? q_left : q_right; }
  void set_q(Side s, double v) { (s == Side::Left ? q_left : q_right) = v; }
  const ContactFeature& contact(Side s) const {
    return s == Side::Left ? contact_left : contact_right;
  }
  void set_contact(const ContactFeature& f) {
    (f.finger == Side::Left ? contact_left : contact_right) = f;
  }
};

struct StepOutcome {
  SimState state;
  Status status = Status::Ok;
};

// Mode tables (see header comment).
inline constexpr FrictionMode kModeFrictionLeft[kNumModes] = {
    FrictionMode::High, FrictionMode::High, FrictionMode::Low,
    FrictionMode::Low,  FrictionMode::High, FrictionMode::High};
inline constexpr FrictionMode kModeFrictionRight[kNumModes] = {
    FrictionMode::Low,  FrictionMode::Low,  FrictionMode::High,
    FrictionMode::High, FrictionMode::High, FrictionMode::High};
inline constexpr Side kModePcSide[kNumModes] = {Side::Left,  Side::Right, Side::Right,
                                                Side::Left,  Side::Right, Side::Left};
// Slides only: the finger the object sticks to.
inline constexpr Side kModeHfSide[4] = {Side::Left, Side::Left, Side::Right, Side::Right};

inline bool is_pivot_mode(int mode) { return mode >= 4; }

// Workspace bounds for the object frame origin, derived from the hand size.
inline bool workspace_legal(const HandParams& p, Vec2 centroid) {
  return std::abs(centroid.x) <= p.palm_width && centroid.y >= 0.01 &&
         centroid.y <= p.finger_length + 0.02;
}

// Joint sweep per integration substep.
inline constexpr double kSubstep = rad(0.5);
inline constexpr double kRootTolRad = 1e-9;
inline constexpr int kRootMaxIter = 100;

namespace detail {

struct PosedPoly {
  std::vector<Vec2> v;
  void set(const Shape2& shape, const Pose2& pose) {
    v.resize(shape.vertices.size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = pose.apply(shape.vertices[i]);
  }
};

// Safeguarded secant/bisection on a bracketed sign change. Requires
// fa * fb <= 0. Converges to kRootTolRad on the abscissa.
template <class F>
inline bool solve_bracketed(F&& f, double qa, double qb, double fa, double fb,
                            double* root) {
  if (fa == 0.0) {
    *root = qa;
    return true;
  }
  if (fb == 0.0) {
    *root = qb;
    return true;
  }
  for (int it = 0; it < kRootMaxIter; ++it) {
    if (std::abs(qb - qa) <= kRootTolRad) {
      *root = std::abs(fa) < std::abs(fb) ? qa : qb;
      return true;
    }
    // Secant proposal, clipped to the interior; fall back to midpoint.
    double qm = 0.5 * (qa + qb);
    const double denom = fb - fa;
    if (std::abs(denom) > 1e-300) {
      const double qs = qa - fa * (qb - qa) / denom;
      const double margin = 0.05 * std::abs(qb - qa);
      if (qs > std::min(qa, qb) + margin && qs < std::max(qa, qb) - margin) qm = qs;
    }
    const double fm = f(qm);
    if (fm == 0.0) {
      *root = qm;
      return true;
    }
    if ((fa < 0.0) != (fm < 0.0)) {
      qb = qm;
      fb = fm;
    } else {
      qa = qm;
      fa = fm;
    }
  }
  *root = 0.5 * (qa + qb);
  return std::abs(qb - qa) <= 16.0 * kRootTolRad;  // close enough, else jammed
}

// Expands a bracket for the pinch solve around q0. The clearance function
// decreases as the torque-controlled finger sweeps inward (larger q), so the
// search direction follows the sign of f(q0). On failure, reports the status
// describing which way the solve ran out of travel.
template <class F>
inline bool expand_bracket(F&& f, double q0, double f0, double lo, double hi,
                           double step0, double* qa, double* qb, double* fa,
                           double* fb, Status* fail) {
  const double dir = f0 > 0.0 ? 1.0 : -1.0;
  double h = step0;
  double q_prev = q0, f_prev = f0;
  for (int it = 0; it < 64; ++it) {
    double q_next = q_prev + dir * h;
    bool at_edge = false;
    if (q_next >= hi) {
      q_next = hi;
      at_edge = true;
    }
    if (q_next <= lo) {
      q_next = lo;
      at_edge = true;
    }
    const double f_next = f(q_next);
    if ((f_prev < 0.0) != (f_next < 0.0) || f_next == 0.0) {
      *qa = q_prev;
      *qb = q_next;
      *fa = f_prev;
      *fb = f_next;
      return true;
    }
    if (at_edge) {
      // No crossing inside the joint range: a persistent gap means the finger
      // cannot reach the object; persistent penetration means it cannot back
      // out within its travel.
      *fail = f0 > 0.0 ? Status::LostContact : Status::JointLimit;
      return false;
    }
    q_prev = q_next;
    f_prev = f_next;
    h *= 2.0;
  }
  *fail = Status::Jammed;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Slide primitive (modes 0-3).
//
// The object is rigidly glued to the high-friction finger; the prescribed
// finger retracts by `delta` in substeps; after each substep the
// torque-controlled finger angle is re-solved so the low-friction contact
// stays at the clearance target, and the sliding contact feature is
// re-detected.
inline StepOutcome step_slide(const SimState& state, const HybridAction& action,
                              double substep = kSubstep) {
  // Primitives accept any finite non-negative sweep: the physical travel may
  // exceed the agent-command bound (actuation gain); apply_action enforces it.
  if (action.mode < 0 || action.mode >= kNumModes || is_pivot_mode(action.mode) ||
      !std::isfinite(action.delta) || action.delta < 0.0)
    throw std::invalid_argument("step_slide: invalid action");
  SimState s = state;
  s.step_count += 1;
  if (action.delta <= 0.0) return {s, Status::Ok};

  const Side pc = kModePcSide[action.mode];
  const Side hf = kModeHfSide[action.mode];
  const Side lf = other(hf);
  const Side tc = other(pc);
  const HandParams& hp = s.params;
  const double target = hp.contact_clearance;

  // Object pose in the frame of the sticking finger; held fixed all step.
  const Pose2 rel = relative_pose(finger_frame(hp, hf, s.q(hf)), s.object_pose);

  const int nsub = static_cast<int>(std::ceil(action.delta / substep));
  const double sub = action.delta / nsub;
  detail::PosedPoly poly;

  for (int i = 0; i < nsub; ++i) {
    const double q_pc_new = s.q(pc) - sub;
    if (q_pc_new < hp.joint_low || q_pc_new > hp.joint_high)
      return {s, Status::JointLimit};

    double q_tc_new = s.q(tc);
    Pose2 pose_new;
    if (hf == pc) {
      // Pose follows the prescribed finger; solve the free finger directly.
      pose_new = compose(finger_frame(hp, pc, q_pc_new), rel);
      poly.set(s.shape, pose_new);
      auto f = [&](double q) {
        return signed_clearance(finger_segment(hp, tc, q), poly.v.data(), poly.v.size()) -
               target;
      };
      const double f0 = f(s.q(tc));
      double qa, qb, fa, fb;
      Status fail;
      if (!detail::expand_bracket(f, s.q(tc), f0, hp.joint_low, hp.joint_high,
                                  std::max(2.0 * sub, 1e-3), &qa, &qb, &fa, &fb, &fail))
        return {s, fail};
      if (!detail::solve_bracketed(f, qa, qb, fa, fb, &q_tc_new)) return {s, Status::Jammed};
    } else {
      // Pose rides on the torque-controlled finger; the prescribed finger is
      // the sliding surface, fixed for this substep.
      const Segment lf_seg = finger_segment(hp, lf, q_pc_new);
      auto pose_of = [&](double q) { return compose(finger_frame(hp, tc, q), rel); };
      auto f = [&](double q) {
        poly.set(s.shape, pose_of(q));
        return signed_clearance(lf_seg, poly.v.data(), poly.v.size()) - target;
      };
      const double f0 = f(s.q(tc));
      double qa, qb, fa, fb;
      Status fail;
      if (!detail::expand_bracket(f, s.q(tc), f0, hp.joint_low, hp.joint_high,
                                  std::max(2.0 * sub, 1e-3), &qa, &qb, &fa, &fb, &fail))
        return {s, fail};
      if (!detail::solve_bracketed(f, qa, qb, fa, fb, &q_tc_new)) return {s, Status::Jammed};
      pose_new = pose_of(q_tc_new);
      poly.set(s.shape, pose_new);
    }

    if (q_tc_new < hp.joint_low || q_tc_new > hp.joint_high) return {s, Status::JointLimit};

    // Commit the substep.
    s.set_q(pc, q_pc_new);
    s.set_q(tc, q_tc_new);
    s.object_pose = pose_new;

    if (!workspace_legal(hp, s.object_pose.translation())) {
      // Keep the escaped pose: the overshoot itself is the terminal event.
      s.set_contact(detect_contact(hp, lf, s.q(lf), poly.v.data(), poly.v.size(),
                                   s.contact(lf).s).feat);
      return {s, Status::OutOfRange};
    }

    // Track the sliding feature; losing the segment interior ends the episode.
    const ContactInfo ci =
        detect_contact(hp, lf, s.q(lf), poly.v.data(), poly.v.size(), s.contact(lf).s);
    if (ci.feat.s <= 1e-6 || ci.feat.s >= hp.finger_length - 1e-6)
      return {s, Status::LostContact};
    s.set_contact(ci.feat);
  }

  // Refresh both stored features from the final configuration.
  poly.set(s.shape, s.object_pose);
  s.set_contact(detect_contact(hp, Side::Left, s.q_left, poly.v.data(), poly.v.size(),
                               s.contact_left.s).feat);
  s.set_contact(detect_contact(hp, Side::Right, s.q_right, poly.v.data(), poly.v.size(),
                               s.contact_right.s).feat);
  return {s, Status::Ok};
}

// ---------------------------------------------------------------------------
// Pivot primitive (modes 4-5).

namespace detail {

struct Anchor {
  double s = 0.0;  // fixed arc length on the finger
  Vec2 body;       // fixed object-frame point
};

// Object pose from two point correspondences body -> world.
inline Pose2 pose_from_correspondence(Vec2 b1, Vec2 p1, Vec2 b2, Vec2 p2) {
  const double phi =
      std::atan2(p2.y - p1.y, p2.x - p1.x) - std::atan2(b2.y - b1.y, b2.x - b1.x);
  const double c = std::cos(phi), sn = std::sin(phi);
  const Vec2 rb1{c * b1.x - sn * b1.y, sn * b1.x + c * b1.y};
  return {p1.x - rb1.x, p1.y - rb1.y, wrap_angle(phi)};
}

// Circle-circle step of the pivot chain: given the prescribed contact point
// p1, find the torque-controlled joint angle placing its anchor (radius s_tc
// from the base) at chord distance d from p1. Among the two intersections,
// the joint angle closest to q_prev wins; exact ties go toward the palm
// (larger q).
inline std::optional<double> solve_pivot_tc(const HandParams& hp, Side tc_side,
                                            double s_tc, Vec2 p1, double d,
                                            double q_prev) {
  const Vec2 c = hp.base(tc_side);
  const Vec2 v = p1 - c;
  const double D = norm(v);
  if (D < 1e-12) return std::nullopt;
  const double lo = std::abs(s_tc - d), hi = s_tc + d;
  double Dc = D;
  const double slack = 1e-9 * std::max(1.0, hi);
  if (Dc > hi) {
    if (Dc > hi + slack) return std::nullopt;
    Dc = hi;
  }
  if (Dc < lo) {
    if (Dc < lo - slack) return std::nullopt;
    Dc = lo;
  }
  const double a = (s_tc * s_tc - d * d + Dc * Dc) / (2.0 * Dc);
  const double h = std::sqrt(std::max(0.0, s_tc * s_tc - a * a));
  const Vec2 u = v * (1.0 / D);
  const Vec2 mid = c + a * u;
  const Vec2 n = perp(u);
  double best_q = 0.0, best_cost = std::numeric_limits<double>::infinity();
  for (const double sgn : {1.0, -1.0}) {
    const Vec2 p2 = mid + sgn * h * n;
    const Vec2 r = p2 - c;
    if (norm(r) < 1e-12) continue;
    const double q = joint_from_world_angle(tc_side, std::atan2(r.y, r.x));
    const double cost = std::abs(q - q_prev);
    if (cost < best_cost - 1e-12 ||
        (std::abs(cost - best_cost) <= 1e-12 && q > best_q)) {
      best_cost = cost;
      best_q = q;
    }
  }
  if (!std::isfinite(best_cost)) return std::nullopt;
  return best_q;
}

}  // namespace detail

// Pivot: both contacts stick (high friction); the prescribed finger advances
// and the object pose follows from the rigid two-anchor linkage. Contact
// changes (a face rolling flat, a new vertex landing) are located by
// penetration-sign bisection, after which the anchors are rebuilt and the
// remaining sweep continues.
inline StepOutcome step_pivot(const SimState& state, const HybridAction& action,
                              double substep = kSubstep) {
  if (action.mode < 0 || action.mode >= kNumModes || !is_pivot_mode(action.mode) ||
      !std::isfinite(action.delta) || action.delta < 0.0)
    throw std::invalid_argument("step_pivot: invalid action");
  SimState s = state;
  s.step_count += 1;
  if (action.delta <= 0.0) return {s, Status::Ok};

  const Side pc = kModePcSide[action.mode];
  const Side tc = other(pc);
  const HandParams& hp = s.params;
  const double L = hp.finger_length;

  detail::PosedPoly poly;
  poly.set(s.shape, s.object_pose);

  detail::Anchor anc[2];  // indexed by Side
  auto anchor_of = [&](Side side) -> detail::Anchor& { return anc[static_cast<int>(side)]; };

  // Builds anchors from freshly detected contacts; flush contacts are pinned
  // to the overlap corner chosen by the rolling direction (micro-trial).
  auto rebuild_anchors = [&](double hint_l, double hint_r) -> bool {
    const ContactInfo il =
        detect_contact(hp, Side::Left, s.q_left, poly.v.data(), poly.v.size(), hint_l);
    const ContactInfo ir =
        detect_contact(hp, Side::Right, s.q_right, poly.v.data(), poly.v.size(), hint_r);
    for (const ContactInfo* ci : {&il, &ir}) {
      detail::Anchor& a = anchor_of(ci->feat.finger);
      a.s = ci->feat.s;
      a.body = s.object_pose.apply_inverse(ci->world_on_finger);
    }
    // Micro-trial to orient flush anchors.
    if (il.feat.flush || ir.feat.flush) {
      const double d_mid = norm(anchor_of(pc).body - anchor_of(tc).body);
      const double dq = 1e-6;
      const double q_pc_t = s.q(pc) + dq;
      const Vec2 p1 =
          hp.base(pc) + anchor_of(pc).s * finger_dir(pc, q_pc_t);
      const auto q_tc_t =
          detail::solve_pivot_tc(hp, tc, anchor_of(tc).s, p1, d_mid, s.q(tc));
      if (!q_tc_t) return false;
      const Pose2 pose_t = detail::pose_from_correspondence(
          anchor_of(pc).body, p1, anchor_of(tc).body,
          hp.base(tc) + anchor_of(tc).s * finger_dir(tc, *q_tc_t));
      const double dphi_obj = wrap_angle(pose_t.theta - s.object_pose.theta);
      for (const ContactInfo* ci : {&il, &ir}) {
        if (!ci->feat.flush) continue;
        const Side side = ci->feat.finger;
        const double dq_f = side == pc ? dq : *q_tc_t - s.q(tc);
        const double dphi_finger = side == Side::Left ? -dq_f : dq_f;
        const double dphi_rel = dphi_obj - dphi_finger;
        if (std::abs(dphi_rel) < 1e-12) continue;  // no relative roll; keep midpoint
        const Vec2 fu = finger_dir(side, s.q(side));
        const Vec2 fp = hp.base(side) + ci->feat.s * fu;
        Vec2 to_obj = s.object_pose.translation() - fp;
        to_obj -= dot(to_obj, fu) * fu;
        const double nrm = norm(to_obj);
        if (nrm < 1e-12) continue;
        const double kappa = cross(fu, to_obj * (1.0 / nrm)) > 0.0 ? 1.0 : -1.0;
        const double s_end = dphi_rel * kappa > 0.0 ? ci->overlap_lo : ci->overlap_hi;
        detail::Anchor& a = anchor_of(side);
        a.s = s_end;
        a.body = s.object_pose.apply_inverse(hp.base(side) + s_end * fu);
      }
    }
    return true;
  };

  if (!rebuild_anchors(s.contact_left.s, s.contact_right.s)) return {s, Status::LostContact};
  double d_chord = norm(anchor_of(pc).body - anchor_of(tc).body);

  const int nsub = static_cast<int>(std::ceil(action.delta / substep));
  const double sub = action.delta / nsub;

  // Evaluates the linkage at a given prescribed angle. Returns false when the
  // chain has no solution there.
  struct Linkage {
    double q_tc;
    Pose2 pose;
    double pen;  // most negative clearance across both fingers
    double pen_s_left, pen_s_right;
  };
  auto eval_linkage = [&](double q_pc_new, Linkage* out) -> bool {
    const Vec2 p1 = hp.base(pc) + anchor_of(pc).s * finger_dir(pc, q_pc_new);
    const auto q_tc = detail::solve_pivot_tc(hp, tc, anchor_of(tc).s, p1, d_chord, s.q(tc));
    if (!q_tc) return false;
    const Vec2 p2 = hp.base(tc) + anchor_of(tc).s * finger_dir(tc, *q_tc);
    const Pose2 pose = detail::pose_from_correspondence(anchor_of(pc).body, p1,
                                                        anchor_of(tc).body, p2);
    // The chord is preserved by construction; enforce as a runtime check.
    if (std::abs(norm(p1 - p2) - d_chord) > 1e-9)
      throw std::logic_error("step_pivot: chord constraint violated");
    poly.set(s.shape, pose);
    double pen = std::numeric_limits<double>::infinity();
    for (const Side side : {Side::Left, Side::Right}) {
      const double qv = side == pc ? q_pc_new : *q_tc;
      if (qv < hp.joint_low || qv > hp.joint_high) return false;
      const double c =
          signed_clearance(finger_segment(hp, side, qv), poly.v.data(), poly.v.size());
      pen = std::min(pen, c);
      (side == Side::Left ? out->pen_s_left : out->pen_s_right) =
          c < 0.0 ? penetration_argmin_s(finger_segment(hp, side, qv), poly.v.data(),
                                         poly.v.size())
                  : -1.0;
    }
    out->q_tc = *q_tc;
    out->pose = pose;
    out->pen = pen;
    return true;
  };

  int events = 0;
  for (int i = 0; i < nsub; ++i) {
    double remaining = sub;
    while (remaining > 1e-15) {
      const double q_pc_goal = s.q(pc) + remaining;
      if (q_pc_goal > hp.joint_high || q_pc_goal < hp.joint_low) return {s, Status::JointLimit};
      Linkage full;
      if (!eval_linkage(q_pc_goal, &full)) return {s, Status::LostContact};
      if (full.pen >= -1e-9) {
        // Clean sweep: commit.
        s.set_q(pc, q_pc_goal);
        s.set_q(tc, full.q_tc);
        s.object_pose = full.pose;
        poly.set(s.shape, s.object_pose);
        remaining = 0.0;
        break;
      }
      // A new feature is about to land: bisect the fraction to the touch.
      double t_lo = 0.0, t_hi = 1.0;
      Linkage at_event = full;
      for (int it = 0; it < 60 && t_hi - t_lo > 1e-12; ++it) {
        const double t_mid = 0.5 * (t_lo + t_hi);
        Linkage m;
        if (!eval_linkage(s.q(pc) + t_mid * remaining, &m)) {
          t_hi = t_mid;  // treat unsolvable as "past the event"
          continue;
        }
        if (m.pen < -1e-9) {
          t_hi = t_mid;
        } else {
          t_lo = t_mid;
          at_event = m;
        }
      }
      ++events;
      if (events > 16) return {s, Status::Jammed};
      const bool immediate = t_lo <= 1e-9;
      if (!immediate) {
        // Commit motion up to the event.
        const double q_pc_new = s.q(pc) + t_lo * remaining;
        Linkage le;
        if (!eval_linkage(q_pc_new, &le)) return {s, Status::LostContact};
        s.set_q(pc, q_pc_new);
        s.set_q(tc, le.q_tc);
        s.object_pose = le.pose;
        remaining *= 1.0 - t_lo;
      }
      poly.set(s.shape, s.object_pose);
      // Re-anchor: steer the event finger's feature toward the landing spot.
      const double hint_l = full.pen_s_left >= 0.0 ? full.pen_s_left : anchor_of(Side::Left).s;
      const double hint_r =
          full.pen_s_right >= 0.0 ? full.pen_s_right : anchor_of(Side::Right).s;
      if (!rebuild_anchors(hint_l, hint_r)) return {s, Status::LostContact};
      d_chord = norm(anchor_of(pc).body - anchor_of(tc).body);
      if (immediate) {
        // The fresh anchors must allow progress; otherwise flip flush ends.
        Linkage probe;
        if (eval_linkage(s.q(pc) + std::min(remaining, 1e-5), &probe) && probe.pen < -1e-9) {
          for (const Side side : {Side::Left, Side::Right}) {
            detail::Anchor& a = anchor_of(side);
            const ContactInfo ci = detect_contact(hp, side, s.q(side), poly.v.data(),
                                                  poly.v.size(), a.s);
            if (!ci.feat.flush) continue;
            const double s_other = std::abs(a.s - ci.overlap_lo) <
                                           std::abs(a.s - ci.overlap_hi)
                                       ? ci.overlap_hi
                                       : ci.overlap_lo;
            a.s = s_other;
            a.body = s.object_pose.apply_inverse(hp.base(side) +
                                                 s_other * finger_dir(side, s.q(side)));
          }
          d_chord = norm(anchor_of(pc).body - anchor_of(tc).body);
        }
      }
    }
    if (!workspace_legal(hp, s.object_pose.translation())) {
      s.contact_left = detect_contact(hp, Side::Left, s.q_left, poly.v.data(),
                                      poly.v.size(), anchor_of(Side::Left).s).feat;
      s.contact_right = detect_contact(hp, Side::Right, s.q_right, poly.v.data(),
                                       poly.v.size(), anchor_of(Side::Right).s).feat;
      return {s, Status::OutOfRange};
    }
  }

  s.contact_left = detect_contact(hp, Side::Left, s.q_left, poly.v.data(), poly.v.size(),
                                  anchor_of(Side::Left).s).feat;
  s.contact_right = detect_contact(hp, Side::Right, s.q_right, poly.v.data(),
                                   poly.v.size(), anchor_of(Side::Right).s).feat;
  return {s, Status::Ok};
}

// ---------------------------------------------------------------------------
// Friction bookkeeping, then the motion primitive. execute_action places no
// upper bound on the sweep (the executed travel may exceed the commanded one,
// e.g. under an actuation-gain error); apply_action is the agent-facing entry
// point and enforces the command range.
inline StepOutcome execute_action(const SimState& state, const HybridAction& action,
                                  double substep = kSubstep) {
  SimState s = state;
  s.friction_left = kModeFrictionLeft[action.mode];
  s.friction_right = kModeFrictionRight[action.mode];
  return is_pivot_mode(action.mode) ? step_pivot(s, action, substep)
                                    : step_slide(s, action, substep);
}

inline StepOutcome apply_action(const SimState& state, const HybridAction& action,
                                double substep = kSubstep) {
  if (!action_valid(action)) throw std::invalid_argument("apply_action: invalid action");
  return execute_action(state, action, substep);
}

// ---------------------------------------------------------------------------
// Placement: close both fingers onto an object at a given pose.

struct Placement {
  double q_left = 0.0, q_right = 0.0;
  ContactFeature contact_left, contact_right;
};

// Sweeps each finger inward from wide open to its first touch (clearance
// target), requiring a comfortable joint margin and a contact on the segment
// interior. Returns nullopt when the pose cannot be held.
inline std::optional<Placement> place_held(const HandParams& hp, const Shape2& shape,
                                           const Pose2& pose,
                                           double joint_margin = rad(5.0)) {
  detail::PosedPoly poly;
  poly.set(shape, pose);
  Placement out;
  for (const Side side : {Side::Left, Side::Right}) {
    auto f = [&](double q) {
      return signed_clearance(finger_segment(hp, side, q), poly.v.data(), poly.v.size()) -
             hp.contact_clearance;
    };
    const double scan = rad(1.0);
    double q_prev = hp.joint_low;
    double f_prev = f(q_prev);
    if (f_prev <= 0.0) return std::nullopt;  // penetrating even wide open
    bool found = false;
    double qa = 0, qb = 0, fa = 0, fb = 0;
    while (q_prev < hp.joint_high) {
      const double q_next = std::min(q_prev + scan, hp.joint_high);
      const double f_next = f(q_next);
      if (f_next <= 0.0) {
        qa = q_prev;
        qb = q_next;
        fa = f_prev;
        fb = f_next;
        found = true;
        break;
      }
      q_prev = q_next;
      f_prev = f_next;
    }
    if (!found) return std::nullopt;
    double q_touch;
    if (!detail::solve_bracketed(f, qa, qb, fa, fb, &q_touch)) return std::nullopt;
    if (q_touch < hp.joint_low + joint_margin || q_touch > hp.joint_high - joint_margin)
      return std::nullopt;
    const ContactInfo ci =
        detect_contact(hp, side, q_touch, poly.v.data(), poly.v.size());
    if (ci.feat.s < 0.003 || ci.feat.s > hp.finger_length - 0.003) return std::nullopt;
    if (side == Side::Left) {
      out.q_left = q_touch;
      out.contact_left = ci.feat;
    } else {
      out.q_right = q_touch;
      out.contact_right = ci.feat;
    }
  }
  // Paranoia: the solved fingers must not cross each other.
  const Segment sl = finger_segment(hp, Side::Left, out.q_left);
  const Segment sr = finger_segment(hp, Side::Right, out.q_right);
  if (detail::segments_properly_intersect(sl.a, sl.b, sr.a, sr.b)) return std::nullopt;
  return out;
}

// Rotates the object in place about its frame origin, then re-solves both
// finger angles to restore the clearance target (small compliance motions
// standing in for unmodeled slip). Used by the surrogate-real domain drift.
inline Status perturb_object_rotation(SimState& s, double dtheta) {
  const HandParams& hp = s.params;
  s.object_pose.theta = wrap_angle(s.object_pose.theta + dtheta);
  detail::PosedPoly poly;
  poly.set(s.shape, s.object_pose);
  for (const Side side : {Side::Left, Side::Right}) {
    auto f = [&](double q) {
      return signed_clearance(finger_segment(hp, side, q), poly.v.data(), poly.v.size()) -
             hp.contact_clearance;
    };
    const double q0 = s.q(side);
    const double f0 = f(q0);
    double qa, qb, fa, fb;
    Status fail;
    if (!detail::expand_bracket(f, q0, f0, hp.joint_low, hp.joint_high, 1e-3, &qa, &qb,
                                &fa, &fb, &fail))
      return fail;
    double q_new;
    if (!detail::solve_bracketed(f, qa, qb, fa, fb, &q_new)) return Status::Jammed;
    s.set_q(side, q_new);
    s.set_contact(
        detect_contact(hp, side, q_new, poly.v.data(), poly.v.size(), s.contact(side).s)
            .feat);
  }
  if (!workspace_legal(hp, s.object_pose.translation())) return Status::OutOfRange;
  return Status::Ok;
}

}  // namespace vf
