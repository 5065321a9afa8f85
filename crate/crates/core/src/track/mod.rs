//! Race tracks as centerline polylines of constant width.

mod builder;
mod io;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::error::ConfigError;

pub use builder::{Builtin, BUILTIN_TRACKS};

/// Look-ahead distances of the forward observation (m).
pub const DEFAULT_FORWARD_DISTANCES: [f64; 12] = [
    10.0, 20.0, 30.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 160.0, 180.0, 200.0,
];

/// Arc length searched on either side of a projection hint (m).
const HINT_WINDOW: f64 = 30.0;

/// Turning angle below which consecutive segments count as one straight (rad).
const STRAIGHT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    points: Vec<[f64; 2]>,
    cum: Vec<f64>,
    half_width: f64,
    closed: bool,
    finish_s: f64,
}

/// Orthogonal projection of a point onto the centerline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    /// Arc length of the projected point, in `[0, L)` (m).
    pub s: f64,
    /// Signed distance to the centerline, positive to the left of travel (m).
    pub d_raw: f64,
    /// `d_raw / half_width`.
    pub d_c: f64,
    /// Centerline direction at `s` (rad).
    pub tangent: f64,
}

/// Track-relative pose of the car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPose {
    pub s: f64,
    pub d_raw: f64,
    pub d_c: f64,
    /// Heading relative to the centerline tangent, in `(-pi, pi]`.
    pub phi: f64,
    pub tangent: f64,
}

impl TrackPose {
    pub fn new(proj: Projection, psi: f64) -> Self {
        TrackPose {
            s: proj.s,
            d_raw: proj.d_raw,
            d_c: proj.d_c,
            phi: wrap_angle(psi - proj.tangent),
            tangent: proj.tangent,
        }
    }
}

/// Body-frame vectors from the car to centerline points ahead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardObservation {
    pub vectors: Vec<[f64; 2]>,
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LapEvent {
    pub crossed_finish: bool,
    pub direction: Direction,
}

impl LapEvent {
    /// A forward crossing completes a lap; backward ones do not.
    pub fn completes_lap(&self) -> bool {
        self.crossed_finish && self.direction == Direction::Forward
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Termination {
    pub off_track: bool,
    pub wrong_way: bool,
}

impl Termination {
    pub fn any(&self) -> bool {
        self.off_track || self.wrong_way
    }
}

/// `|d_c| > 1` leaves the track, `|phi| > pi/2` is wrong-way driving.
pub fn terminal_predicates(pose: &TrackPose) -> Termination {
    Termination {
        off_track: pose.d_c.abs() > 1.0,
        wrong_way: pose.phi.abs() > FRAC_PI_2,
    }
}

impl Track {
    /// Builds a track from centerline vertices. A closed track repeats its first vertex
    /// at the end.
    pub fn new(points: Vec<[f64; 2]>, width: f64, closed: bool, finish_s: f64) -> Result<Self, ConfigError> {
        if points.len() < 3 {
            return Err(ConfigError::validation(format!(
                "track needs at least 3 vertices, got {}",
                points.len()
            )));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(ConfigError::validation(format!("track width must be positive, got {width}")));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ConfigError::validation("non-finite vertex coordinate"));
        }
        if closed && points.first() != points.last() {
            return Err(ConfigError::validation(
                "track flagged closed but last vertex differs from the first",
            ));
        }
        let mut cum = Vec::with_capacity(points.len());
        cum.push(0.0);
        for (i, w) in points.windows(2).enumerate() {
            let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
            if len <= 0.0 {
                return Err(ConfigError::validation(format!(
                    "zero-length segment between vertices {} and {}",
                    i,
                    i + 1
                )));
            }
            cum.push(cum[i] + len);
        }
        let length = *cum.last().unwrap();
        if !(finish_s.is_finite() && (0.0..length).contains(&finish_s)) {
            return Err(ConfigError::validation(format!(
                "finish_s {finish_s} outside [0, {length})"
            )));
        }
        Ok(Track {
            points,
            cum,
            half_width: 0.5 * width,
            closed,
            finish_s,
        })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Arc length at each vertex (m).
    pub fn stations(&self) -> &[f64] {
        &self.cum
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn finish_s(&self) -> f64 {
        self.finish_s
    }

    fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    /// Maps an arc length into the track's range: modulo `L` on a loop, clamped otherwise.
    pub fn normalize_s(&self, s: f64) -> f64 {
        let l = self.length();
        if self.closed {
            let r = s.rem_euclid(l);
            if r >= l {
                0.0
            } else {
                r
            }
        } else {
            s.clamp(0.0, l)
        }
    }

    fn segment_at(&self, s: f64) -> usize {
        let idx = self.cum.partition_point(|&c| c <= s);
        idx.saturating_sub(1).min(self.segment_count() - 1)
    }

    fn segment_dir(&self, i: usize) -> [f64; 2] {
        let (a, b) = (self.points[i], self.points[i + 1]);
        let len = self.cum[i + 1] - self.cum[i];
        [(b[0] - a[0]) / len, (b[1] - a[1]) / len]
    }

    /// Centerline point at arc length `s`.
    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let s = self.normalize_s(s);
        let i = self.segment_at(s);
        let t = s - self.cum[i];
        let d = self.segment_dir(i);
        let a = self.points[i];
        [a[0] + t * d[0], a[1] + t * d[1]]
    }

    /// Centerline direction at arc length `s` (rad).
    pub fn tangent_at(&self, s: f64) -> f64 {
        let d = self.segment_dir(self.segment_at(self.normalize_s(s)));
        d[1].atan2(d[0])
    }

    fn project_onto(&self, i: usize, pos: [f64; 2]) -> (f64, f64, f64) {
        let a = self.points[i];
        let d = self.segment_dir(i);
        let len = self.cum[i + 1] - self.cum[i];
        let rel = [pos[0] - a[0], pos[1] - a[1]];
        let t = (rel[0] * d[0] + rel[1] * d[1]).clamp(0.0, len);
        let off = [rel[0] - t * d[0], rel[1] - t * d[1]];
        let dist = off[0].hypot(off[1]);
        let cross = d[0] * off[1] - d[1] * off[0];
        let signed = if cross < 0.0 { -dist } else { dist };
        (self.cum[i] + t, signed, dist)
    }

    fn candidate_segments(&self, hint: Option<f64>) -> Vec<usize> {
        let n = self.segment_count();
        let Some(hint) = hint else {
            return (0..n).collect();
        };
        let h = self.segment_at(self.normalize_s(hint));
        let mut out = vec![h];
        // walk forward
        let mut covered = self.cum[h + 1] - self.cum[h];
        let mut i = h;
        while covered < HINT_WINDOW && out.len() < n {
            i += 1;
            if i == n {
                if !self.closed {
                    break;
                }
                i = 0;
            }
            out.push(i);
            covered += self.cum[i + 1] - self.cum[i];
        }
        // walk backward
        let mut covered = 0.0;
        let mut i = h;
        while covered < HINT_WINDOW && out.len() < n {
            if i == 0 {
                if !self.closed {
                    break;
                }
                i = n;
            }
            i -= 1;
            if out.contains(&i) {
                break;
            }
            out.push(i);
            covered += self.cum[i + 1] - self.cum[i];
        }
        out
    }

    /// Nearest point on the centerline. With a hint, only segments within a window of
    /// the hinted station are searched; equal distances resolve to the smaller `s`.
    pub fn project(&self, pos: [f64; 2], hint: Option<f64>) -> Projection {
        let mut best: Option<(f64, f64, f64, usize)> = None;
        for i in self.candidate_segments(hint) {
            let (s, signed, dist) = self.project_onto(i, pos);
            let better = match best {
                None => true,
                Some((bs, _, bd, _)) => {
                    let tol = 1e-12 * bd.max(1.0);
                    dist < bd - tol || ((dist - bd).abs() <= tol && s < bs)
                }
            };
            if better {
                best = Some((s, signed, dist, i));
            }
        }
        let (s, d_raw, _, seg) = best.expect("track has at least one segment");
        let d = self.segment_dir(seg);
        Projection {
            s: self.normalize_s(s),
            d_raw,
            d_c: d_raw / self.half_width,
            tangent: d[1].atan2(d[0]),
        }
    }

    /// Projection plus relative heading for a car at `pos` heading `psi`.
    pub fn pose(&self, pos: [f64; 2], psi: f64, hint: Option<f64>) -> TrackPose {
        TrackPose::new(self.project(pos, hint), psi)
    }

    /// Heading relative to the centerline at `s`, in `(-pi, pi]`.
    pub fn relative_heading(&self, s: f64, psi: f64) -> f64 {
        wrap_angle(psi - self.tangent_at(s))
    }

    /// Body-frame vectors from `pos` to the centerline points `distances` ahead of `s`.
    pub fn forward_observation(&self, s: f64, pos: [f64; 2], psi: f64, distances: &[f64]) -> ForwardObservation {
        let (sin, cos) = psi.sin_cos();
        let vectors = distances
            .iter()
            .map(|&d| {
                let q = self.point_at(s + d);
                let (ex, ey) = (q[0] - pos[0], q[1] - pos[1]);
                [cos * ex + sin * ey, -sin * ex + cos * ey]
            })
            .collect();
        ForwardObservation {
            vectors,
            distances: distances.to_vec(),
        }
    }

    /// Finish-line crossing between two consecutive stations.
    ///
    /// The move is taken as the shorter way around the loop.
    pub fn lap_events(&self, s_prev: f64, s_new: f64) -> LapEvent {
        let l = self.length();
        let mut delta = s_new - s_prev;
        if self.closed {
            delta = (delta + 0.5 * l).rem_euclid(l) - 0.5 * l;
        }
        let direction = if delta >= 0.0 {
            Direction::Forward
        } else {
            Direction::Backward
        };
        let from_finish = if self.closed {
            (s_prev - self.finish_s).rem_euclid(l)
        } else {
            s_prev - self.finish_s
        };
        let crossed_finish = if self.closed {
            let reached = from_finish + delta;
            (delta > 0.0 && reached >= l) || (delta < 0.0 && reached < 0.0)
        } else {
            let reached = from_finish + delta;
            (from_finish < 0.0 && reached >= 0.0) || (from_finish >= 0.0 && reached < 0.0)
        };
        LapEvent {
            crossed_finish,
            direction,
        }
    }

    /// Maximal straight stretches as `(start_s, length)` pairs, longest first order
    /// preserved by station. Only stretches of at least `min_len` metres are returned.
    pub fn straights(&self, min_len: f64) -> Vec<(f64, f64)> {
        let n = self.segment_count();
        let heading = |i: usize| {
            let d = self.segment_dir(i);
            d[1].atan2(d[0])
        };
        let seg_len = |i: usize| self.cum[i + 1] - self.cum[i];
        let mut runs: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            let continues = i > 0 && wrap_angle(heading(i) - heading(i - 1)).abs() < STRAIGHT_TOL;
            if continues {
                runs.last_mut().unwrap().1 += seg_len(i);
            } else {
                runs.push((i, seg_len(i)));
            }
        }
        if self.closed && runs.len() > 1 && wrap_angle(heading(0) - heading(n - 1)).abs() < STRAIGHT_TOL {
            let (_, first_len) = runs.remove(0);
            runs.last_mut().unwrap().1 += first_len;
        }
        runs.into_iter()
            .filter(|&(_, len)| len >= min_len)
            .map(|(i, len)| (self.cum[i], len))
            .collect()
    }
}
