use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Track;
use crate::error::ConfigError;

/// Maximum vertex spacing on straights (m).
const STRAIGHT_SPACING: f64 = 5.0;
/// Maximum chord length in corners (m).
const ARC_SPACING: f64 = 0.5;
const TRACK_WIDTH: f64 = 20.0;

/// Tracks shipped with the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builtin {
    /// Two 200 m straights joined by 50 m radius half circles.
    OvalShort,
    /// Five-corner circuit of about 860 m.
    TrackA,
}

pub const BUILTIN_TRACKS: [Builtin; 2] = [Builtin::OvalShort, Builtin::TrackA];

impl Builtin {
    pub fn name(&self) -> &'static str {
        match self {
            Builtin::OvalShort => "oval-short",
            Builtin::TrackA => "track-a",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        BUILTIN_TRACKS.into_iter().find(|b| b.name() == name)
    }
}

impl std::fmt::Display for Builtin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

const TRACK_A_CORNERS: [[f64; 2]; 5] = [
    [0.0, 0.0],
    [300.0, 0.0],
    [345.0, 140.0],
    [150.0, 250.0],
    [-45.0, 120.0],
];
const TRACK_A_RADII: [f64; 5] = [35.0, 25.0, 30.0, 20.0, 40.0];
const TRACK_A_LENGTH: f64 = 860.0;

struct Polyline(Vec<[f64; 2]>);

impl Polyline {
    fn push(&mut self, p: [f64; 2]) {
        if let Some(last) = self.0.last() {
            if (last[0] - p[0]).hypot(last[1] - p[1]) < 1e-9 {
                return;
            }
        }
        self.0.push(p);
    }

    fn line_to(&mut self, to: [f64; 2]) {
        let from = *self.0.last().expect("polyline has a start");
        let len = (to[0] - from[0]).hypot(to[1] - from[1]);
        let n = (len / STRAIGHT_SPACING).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            self.push([from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])]);
        }
    }

    /// Counter-clockwise arc about `center` from angle `start` through `sweep`.
    fn arc(&mut self, center: [f64; 2], radius: f64, start: f64, sweep: f64) {
        let n = (radius * sweep / ARC_SPACING).ceil().max(1.0) as usize;
        for k in 1..=n {
            let a = start + sweep * k as f64 / n as f64;
            self.push([center[0] + radius * a.cos(), center[1] + radius * a.sin()]);
        }
    }
}

fn unit(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    [(b[0] - a[0]) / len, (b[1] - a[1]) / len]
}

fn turn_angle(d_in: [f64; 2], d_out: [f64; 2]) -> f64 {
    (d_in[0] * d_out[1] - d_in[1] * d_out[0]).atan2(d_in[0] * d_out[0] + d_in[1] * d_out[1])
}

fn polygon_edges_fit(corners: &[[f64; 2]], radii: &[f64]) -> Result<(), ConfigError> {
    let n = corners.len();
    let tangent_len = |i: usize| {
        let d_in = unit(corners[(i + n - 1) % n], corners[i]);
        let d_out = unit(corners[i], corners[(i + 1) % n]);
        radii[i] * (0.5 * turn_angle(d_in, d_out)).tan()
    };
    for i in 0..n {
        let j = (i + 1) % n;
        let edge = (corners[j][0] - corners[i][0]).hypot(corners[j][1] - corners[i][1]);
        if tangent_len(i) + tangent_len(j) > edge + 1e-9 {
            return Err(ConfigError::validation(format!(
                "fillets at corners {i} and {j} overlap"
            )));
        }
    }
    Ok(())
}

impl Track {
    /// Closed track around a convex counter-clockwise polygon with its corners rounded
    /// to the given radii. Arc length zero is the midpoint of the first edge.
    pub fn filleted_polygon(corners: &[[f64; 2]], radii: &[f64], width: f64) -> Result<Track, ConfigError> {
        let n = corners.len();
        if n < 3 || radii.len() != n {
            return Err(ConfigError::validation(
                "filleted polygon needs at least 3 corners and one radius per corner",
            ));
        }
        for i in 0..n {
            let d_in = unit(corners[(i + n - 1) % n], corners[i]);
            let d_out = unit(corners[i], corners[(i + 1) % n]);
            let tau = turn_angle(d_in, d_out);
            if !(tau > 0.0 && tau < PI) || !(radii[i] > 0.0) {
                return Err(ConfigError::validation(format!(
                    "corner {i} is not a left turn with positive radius"
                )));
            }
        }
        polygon_edges_fit(corners, radii)?;

        let start = [
            0.5 * (corners[0][0] + corners[1][0]),
            0.5 * (corners[0][1] + corners[1][1]),
        ];
        let mut line = Polyline(vec![start]);
        for k in 1..=n {
            let i = k % n;
            let c = corners[i];
            let d_in = unit(corners[(i + n - 1) % n], c);
            let d_out = unit(c, corners[(i + 1) % n]);
            let tau = turn_angle(d_in, d_out);
            let r = radii[i];
            let t = r * (0.5 * tau).tan();
            let entry = [c[0] - t * d_in[0], c[1] - t * d_in[1]];
            let center = [entry[0] - r * d_in[1], entry[1] + r * d_in[0]];
            line.line_to(entry);
            let start_angle = (entry[1] - center[1]).atan2(entry[0] - center[0]);
            line.arc(center, r, start_angle, tau);
        }
        line.line_to(start);
        let mut points = line.0;
        *points.last_mut().unwrap() = start;
        Track::new(points, width, true, 0.0)
    }

    /// Oval of two straights and two half circles, travelled counter-clockwise.
    pub fn oval(straight: f64, radius: f64, width: f64) -> Result<Track, ConfigError> {
        let half = 0.5 * straight + radius;
        let corners = [
            [-half, 0.0],
            [half, 0.0],
            [half, 2.0 * radius],
            [-half, 2.0 * radius],
        ];
        Track::filleted_polygon(&corners, &[radius; 4], width)
    }

    pub fn from_builtin(which: Builtin) -> Track {
        match which {
            Builtin::OvalShort => Track::oval(200.0, 50.0, TRACK_WIDTH),
            Builtin::TrackA => track_a(),
        }
        .expect("built-in track geometry is valid")
    }
}

fn track_a() -> Result<Track, ConfigError> {
    // Scaling the corners leaves the fillets alone, so the length is affine in the scale.
    let at = |k: f64| {
        let corners: Vec<[f64; 2]> = TRACK_A_CORNERS.iter().map(|c| [k * c[0], k * c[1]]).collect();
        Track::filleted_polygon(&corners, &TRACK_A_RADII, TRACK_WIDTH)
    };
    let l1 = at(1.0)?.length();
    let l2 = at(2.0)?.length();
    let k = 1.0 + (TRACK_A_LENGTH - l1) / (l2 - l1);
    at(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oval_length() {
        let t = Track::from_builtin(Builtin::OvalShort);
        let expect = 400.0 + 2.0 * PI * 50.0;
        assert!((t.length() - expect).abs() < 0.01, "{}", t.length());
        assert_eq!(t.width(), 20.0);
        assert_eq!(t.points()[0], [0.0, 0.0]);
        assert_eq!(t.points().first(), t.points().last());
    }

    #[test]
    fn oval_vertex_spacing() {
        let t = Track::from_builtin(Builtin::OvalShort);
        for w in t.stations().windows(2) {
            assert!(w[1] - w[0] <= STRAIGHT_SPACING + 1e-9);
        }
    }

    #[test]
    fn oval_corner_radius() {
        let t = Track::from_builtin(Builtin::OvalShort);
        // right-hand half circle is centred at (100, 50)
        for p in t.points() {
            if p[0] > 100.0 + 1e-9 {
                let r = (p[0] - 100.0).hypot(p[1] - 50.0);
                assert!((r - 50.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn track_a_shape() {
        let t = Track::from_builtin(Builtin::TrackA);
        assert!((t.length() - 860.0).abs() < 0.5, "{}", t.length());
        assert_eq!(t.width(), 20.0);
        assert_eq!(t.straights(10.0).len(), 5);
    }

    #[test]
    fn names_round_trip() {
        for b in BUILTIN_TRACKS {
            assert_eq!(Builtin::from_name(b.name()), Some(b));
        }
        assert_eq!(Builtin::from_name("nope"), None);
    }

    #[test]
    fn overlapping_fillets_are_rejected() {
        let sq = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];
        assert!(Track::filleted_polygon(&sq, &[6.0; 4], 2.0).is_err());
        assert!(Track::filleted_polygon(&sq, &[5.0; 4], 2.0).is_ok());
    }
}
