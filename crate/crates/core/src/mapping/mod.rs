//! Friction-constrained action mapping.
//!
//! The admissible control set at car state `(v, delta)` is described in polar form by
//! its boundary `rho_bar(v, delta, theta)`: the longest input in direction `theta`
//! that passes [`check_friction`]. The boundary is sampled on a grid, interpolated
//! trilinearly, and used to shorten (never rotate) out-of-bounds actions.

mod io;
mod mapper;

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::wrap_angle;
use crate::vehicle::{
    check_friction, kinematic_sideslip, kinematic_yaw_rate, CheckHorizon, ControlInput,
    VehicleParams, VehicleState,
};

pub use io::{HashPolicy, FORMAT_VERSION, MAGIC};
pub use mapper::ActionMapper;

/// Bisection tolerance on the boundary length.
pub const BISECTION_TOL: f64 = 1e-3;

/// Upper end of the speed axis (m/s).
pub const DEFAULT_V_MAX: f64 = 30.0;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a boundary table file")]
    BadMagic,
    #[error("unsupported table format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("table file length {found} bytes, expected {expected}")]
    Length { found: usize, expected: usize },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid table data: {0}")]
    Data(String),
    #[error("vehicle parameters differ from the ones the table was built with")]
    HashMismatch,
}

/// Sampling grid over speed, steering angle and action direction.
///
/// Speed and steering nodes include both range ends. Direction nodes are
/// `-pi + (k + 1) 2 pi / n_theta`, so the last node is `pi` and the axis is periodic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_v: usize,
    pub n_delta: usize,
    pub n_theta: usize,
    pub v_range: (f64, f64),
    pub delta_range: (f64, f64),
}

impl GridSpec {
    pub fn new(n_v: usize, n_delta: usize, n_theta: usize, p: &VehicleParams) -> Self {
        GridSpec {
            n_v,
            n_delta,
            n_theta,
            v_range: (0.0, DEFAULT_V_MAX),
            delta_range: (-p.max_steer, p.max_steer),
        }
    }

    /// 64 x 64 x 72, quick to build.
    pub fn desk(p: &VehicleParams) -> Self {
        Self::new(64, 64, 72, p)
    }

    /// 200 points per axis.
    pub fn full(p: &VehicleParams) -> Self {
        Self::new(200, 200, 200, p)
    }

    /// Parses `"Nv,Nd,Nt"`.
    pub fn parse_counts(text: &str, p: &VehicleParams) -> Result<Self, TableError> {
        let counts: Vec<usize> = text
            .split(',')
            .map(|c| c.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| TableError::Grid(format!("`{text}`: {e}")))?;
        let [n_v, n_d, n_t] = counts[..] else {
            return Err(TableError::Grid(format!("`{text}`: expected three counts")));
        };
        let g = Self::new(n_v, n_d, n_t, p);
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), TableError> {
        if self.n_v < 2 || self.n_delta < 2 || self.n_theta < 2 {
            return Err(TableError::Grid(format!(
                "every axis needs at least 2 points, got {}x{}x{}",
                self.n_v, self.n_delta, self.n_theta
            )));
        }
        self.len_checked()
            .ok_or_else(|| TableError::Grid("node count overflows".into()))?;
        let (v0, v1) = self.v_range;
        let (d0, d1) = self.delta_range;
        if !(v0.is_finite() && v1.is_finite() && v0 >= 0.0 && v1 > v0) {
            return Err(TableError::Grid(format!("bad speed range [{v0}, {v1}]")));
        }
        if !(d0.is_finite() && d1.is_finite() && d1 > d0) {
            return Err(TableError::Grid(format!("bad steering range [{d0}, {d1}]")));
        }
        Ok(())
    }

    fn len_checked(&self) -> Option<usize> {
        self.n_v.checked_mul(self.n_delta)?.checked_mul(self.n_theta)
    }

    pub fn len(&self) -> usize {
        self.n_v * self.n_delta * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn v_step(&self) -> f64 {
        (self.v_range.1 - self.v_range.0) / (self.n_v - 1) as f64
    }

    pub fn delta_step(&self) -> f64 {
        (self.delta_range.1 - self.delta_range.0) / (self.n_delta - 1) as f64
    }

    pub fn theta_step(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn v_node(&self, i: usize) -> f64 {
        if i + 1 == self.n_v {
            return self.v_range.1;
        }
        self.v_range.0 + i as f64 * self.v_step()
    }

    pub fn delta_node(&self, j: usize) -> f64 {
        if j + 1 == self.n_delta {
            return self.delta_range.1;
        }
        self.delta_range.0 + j as f64 * self.delta_step()
    }

    pub fn theta_node(&self, k: usize) -> f64 {
        if k + 1 == self.n_theta {
            return PI;
        }
        -PI + (k + 1) as f64 * self.theta_step()
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_delta + j) * self.n_theta + k
    }
}

/// Radial distance from the origin to the unit-square boundary in direction `theta`.
pub fn rho_square(theta: f64) -> f64 {
    (1.0 / theta.cos().abs()).min(1.0 / theta.sin().abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarAction {
    pub rho: f64,
    /// Direction in `(-pi, pi]`; zero for the origin.
    pub theta: f64,
}

impl PolarAction {
    pub fn from_cartesian(a: [f64; 2]) -> Self {
        PolarAction {
            rho: a[0].hypot(a[1]),
            theta: wrap_angle(a[1].atan2(a[0])),
        }
    }

    pub fn to_cartesian(&self) -> [f64; 2] {
        let (s, c) = self.theta.sin_cos();
        [self.rho * c, self.rho * s]
    }
}

/// Steady kinematic cornering state at longitudinal speed `v` and steering `delta`.
pub fn steady_state_for(v: f64, delta: f64, p: &VehicleParams) -> VehicleState {
    let beta = kinematic_sideslip(delta, p);
    VehicleState {
        vx: v,
        vy: v * beta.tan(),
        omega: kinematic_yaw_rate(v, delta, p),
        delta,
        ..Default::default()
    }
}

/// Longest admissible input in direction `theta`, capped by the unit square.
///
/// Bisection returns the feasible end of the final bracket, so the result always passes
/// the check. Zero means the state is already infeasible.
pub fn max_safe_length(state: &VehicleState, theta: f64, p: &VehicleParams, horizon: &CheckHorizon) -> f64 {
    let (s, c) = theta.sin_cos();
    let ok = |rho: f64| check_friction(state, &ControlInput::clamped(rho * c, rho * s), horizon, p);
    let cap = rho_square(theta);
    if ok(cap) {
        return cap;
    }
    if !ok(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, cap);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Sampled boundary `rho_bar[i][j][k]`, row-major over speed, steering, direction.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTable {
    grid: GridSpec,
    mu_max: f64,
    params_hash: [u8; 32],
    data: Vec<f64>,
}

/// Summary of a table's contents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Largest `|rho(v, delta, theta) - rho(v, -delta, -theta)|` over mirrored node pairs.
    pub symmetry_residual: f64,
}

/// Samples the boundary on `grid`. Rows are computed in parallel and assembled in
/// index order, so the result does not depend on the thread count.
pub fn build_table(p: &VehicleParams, grid: &GridSpec, horizon: &CheckHorizon) -> Result<BoundaryTable, TableError> {
    grid.validate()?;
    let thetas: Vec<f64> = (0..grid.n_theta).map(|k| grid.theta_node(k)).collect();
    // At the steering stop the actuator rate is cut to zero, which is not representative
    // of the cell just inside it, so edge nodes are sampled a hair inside the stop.
    let inner = p.max_steer * (1.0 - 1e-12);
    let rows: Vec<Vec<f64>> = (0..grid.n_v * grid.n_delta)
        .into_par_iter()
        .map(|ij| {
            let delta = grid.delta_node(ij % grid.n_delta).clamp(-inner, inner);
            let state = steady_state_for(grid.v_node(ij / grid.n_delta), delta, p);
            thetas
                .iter()
                .map(|&th| max_safe_length(&state, th, p, horizon))
                .collect()
        })
        .collect();
    Ok(BoundaryTable {
        grid: *grid,
        mu_max: p.mu_max,
        params_hash: p.hash(),
        data: rows.concat(),
    })
}

/// Fractional position on a clamped non-periodic axis: lower index and weight.
fn axis_position(x: f64, lo: f64, step: f64, n: usize) -> (usize, f64) {
    let hi = lo + step * (n - 1) as f64;
    let f = (x.clamp(lo, hi) - lo) / step;
    let f = snap(f);
    let i = (f.floor() as usize).min(n - 2);
    (i, (f - i as f64).clamp(0.0, 1.0))
}

/// Angle from the direction node just below `theta`, in `[0, h)`.
fn theta_offset(theta: f64, h: f64) -> f64 {
    let f = snap((wrap_angle(theta) + PI) / h - 1.0);
    (f - f.floor()) * h
}

/// Rounds values within 1e-9 of an integer so grid nodes are hit exactly.
fn snap(f: f64) -> f64 {
    let r = f.round();
    if (f - r).abs() < 1e-9 {
        r
    } else {
        f
    }
}

impl BoundaryTable {
    /// Assembles a table from raw values; checks shape, finiteness and the square cap.
    pub fn from_parts(grid: GridSpec, mu_max: f64, params_hash: [u8; 32], data: Vec<f64>) -> Result<Self, TableError> {
        grid.validate()?;
        if data.len() != grid.len() {
            return Err(TableError::Data(format!(
                "{} values for a grid of {}",
                data.len(),
                grid.len()
            )));
        }
        if !(mu_max.is_finite() && mu_max > 0.0) {
            return Err(TableError::Data(format!("mu_max {mu_max}")));
        }
        for k in 0..grid.n_theta {
            let cap = rho_square(grid.theta_node(k)) * (1.0 + 1e-12);
            for ij in 0..grid.n_v * grid.n_delta {
                let v = data[ij * grid.n_theta + k];
                if !(v.is_finite() && (0.0..=cap).contains(&v)) {
                    return Err(TableError::Data(format!("entry {} = {v}", ij * grid.n_theta + k)));
                }
            }
        }
        Ok(BoundaryTable {
            grid,
            mu_max,
            params_hash,
            data,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }

    pub fn params_hash(&self) -> &[u8; 32] {
        &self.params_hash
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    /// The 8 enclosing nodes and their trilinear weights.
    fn cell(&self, v: f64, delta: f64, theta: f64) -> [(usize, f64); 8] {
        let g = &self.grid;
        let (i, tv) = axis_position(v, g.v_range.0, g.v_step(), g.n_v);
        let (j, td) = axis_position(delta, g.delta_range.0, g.delta_step(), g.n_delta);
        let h = g.theta_step();
        let f = snap((wrap_angle(theta) + PI) / h - 1.0);
        let fl = f.floor();
        let tt = f - fl;
        let k0 = (fl as i64).rem_euclid(g.n_theta as i64) as usize;
        let k1 = (k0 + 1) % g.n_theta;
        let mut out = [(0, 0.0); 8];
        let mut n = 0;
        for (ii, wv) in [(i, 1.0 - tv), (i + 1, tv)] {
            for (jj, wd) in [(j, 1.0 - td), (j + 1, td)] {
                for (kk, wt) in [(k0, 1.0 - tt), (k1, tt)] {
                    out[n] = (g.index(ii, jj, kk), wv * wd * wt);
                    n += 1;
                }
            }
        }
        out
    }

    /// Trilinear interpolation, periodic in `theta`, with `v` and `delta` clamped to the
    /// grid. Exact at nodes.
    pub fn lookup(&self, v: f64, delta: f64, theta: f64) -> f64 {
        self.cell(v, delta, theta)
            .iter()
            .map(|&(idx, w)| w * self.data[idx])
            .sum()
    }

    /// Lower bound for the boundary anywhere inside the enclosing cell.
    ///
    /// Each bracketing direction takes the smallest of its 4 speed/steering nodes; the
    /// result is the radial distance to the chord joining those two points, which lies
    /// inside any convex admissible set containing them. Exact on the unit square.
    pub fn lookup_conservative(&self, v: f64, delta: f64, theta: f64) -> f64 {
        let mut m = [f64::INFINITY; 2];
        for (n, &(idx, _)) in self.cell(v, delta, theta).iter().enumerate() {
            m[n % 2] = m[n % 2].min(self.data[idx]);
        }
        let [m0, m1] = m;
        let h = self.grid.theta_step();
        let alpha = theta_offset(theta, h);
        if alpha == 0.0 {
            return m0;
        }
        if m0 <= 0.0 || m1 <= 0.0 || h >= PI {
            return m0.min(m1);
        }
        m0 * m1 * h.sin() / (m0 * alpha.sin() + m1 * (h - alpha).sin())
    }

    /// Largest minus smallest node value of the enclosing cell.
    pub fn cell_spread(&self, v: f64, delta: f64, theta: f64) -> f64 {
        let vals = self.cell(v, delta, theta).map(|(idx, _)| self.data[idx]);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Clips action `a` radially to the interpolated boundary at `(v, delta)`.
    pub fn map_action(&self, v: f64, delta: f64, a: [f64; 2], conservative: bool) -> [f64; 2] {
        clip_to(a, |theta| {
            if conservative {
                self.lookup_conservative(v, delta, theta)
            } else {
                self.lookup(v, delta, theta)
            }
        })
    }

    pub fn stats(&self) -> TableStats {
        let g = &self.grid;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for &v in &self.data {
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        let mut residual = 0.0f64;
        for i in 0..g.n_v {
            for j in 0..g.n_delta {
                for k in 0..g.n_theta {
                    let mk = (g.n_theta + g.n_theta - k - 2) % g.n_theta;
                    let a = self.node(i, j, k);
                    let b = self.node(i, g.n_delta - 1 - j, mk);
                    residual = residual.max((a - b).abs());
                }
            }
        }
        TableStats {
            min,
            mean: sum / self.data.len() as f64,
            max,
            symmetry_residual: residual,
        }
    }
}

/// Shortens `a` to `bound(theta_a)` when it is longer; the origin stays put.
fn clip_to(a: [f64; 2], bound: impl Fn(f64) -> f64) -> [f64; 2] {
    let polar = PolarAction::from_cartesian(a);
    if polar.rho == 0.0 {
        return [0.0, 0.0];
    }
    let rho_hat = bound(polar.theta);
    if polar.rho <= rho_hat {
        return a;
    }
    let scale = rho_hat.max(0.0) / polar.rho;
    [a[0] * scale, a[1] * scale]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::resultant_tire_force;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    fn small_table() -> &'static BoundaryTable {
        static T: OnceLock<BoundaryTable> = OnceLock::new();
        T.get_or_init(|| {
            let p = params();
            build_table(&p, &GridSpec::new(16, 17, 72, &p), &CheckHorizon::default()).unwrap()
        })
    }

    fn cornering() -> VehicleState {
        steady_state_for(15.4, 7.9f64.to_radians(), &params())
    }

    #[test]
    fn grid_nodes() {
        let p = params();
        let g = GridSpec::full(&p);
        assert!((g.v_step() - 0.15075).abs() < 1e-4);
        assert!((g.delta_step().to_degrees() - 0.3518).abs() < 1e-3);
        assert!((g.theta_step().to_degrees() - 1.8).abs() < 1e-12);
        assert_eq!(g.v_node(0), 0.0);
        assert_eq!(g.v_node(199), 30.0);
        assert_eq!(g.theta_node(199), PI);
        assert!(g.theta_node(0) > -PI);
        assert!(GridSpec::new(1, 4, 4, &p).validate().is_err());
        assert!(GridSpec::parse_counts("2,2,4", &p).is_ok());
        assert!(GridSpec::parse_counts("1,64,72", &p).is_err());
        assert!(GridSpec::parse_counts("64,72", &p).is_err());
    }

    #[test]
    fn square_bound() {
        assert!((rho_square(0.0) - 1.0).abs() < 1e-15);
        assert!((rho_square(PI / 4.0) - 2f64.sqrt()).abs() < 1e-12);
        assert!((rho_square(-PI / 2.0) - 1.0).abs() < 1e-15);
        assert!((rho_square(PI) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn steady_state_examples() {
        let p = params();
        let s = steady_state_for(0.0, 0.3, &p);
        assert_eq!((s.vy, s.omega), (0.0, 0.0));
        let s = steady_state_for(20.0, 0.0, &p);
        assert_eq!((s.vy, s.omega), (0.0, 0.0));
        let s = cornering();
        let delta = 7.9f64.to_radians();
        let beta = (1.77 * delta.tan() / 2.94).atan();
        let speed = 15.4 / beta.cos();
        assert!((s.omega - speed * delta.tan() * beta.cos() / 2.94).abs() < 1e-12);
        assert!((s.vy.atan2(s.vx) - beta).abs() < 1e-12);
    }

    #[test]
    fn full_authority_at_standstill() {
        let p = params();
        let s = steady_state_for(0.0, 0.2, &p);
        for k in 0..36 {
            let th = -PI + (k + 1) as f64 * PI / 18.0;
            assert_eq!(max_safe_length(&s, th, &p, &CheckHorizon::default()), rho_square(th));
        }
    }

    #[test]
    fn cornering_example_lengths() {
        let p = params();
        let s = cornering();
        let h = CheckHorizon::default();
        let a1 = PolarAction::from_cartesian([-0.75, 0.25]);
        let a2 = PolarAction::from_cartesian([0.75, -0.75]);
        let r1 = max_safe_length(&s, a1.theta, &p, &h);
        let r2 = max_safe_length(&s, a2.theta, &p, &h);
        assert!(r1 < a1.rho, "{r1} vs {}", a1.rho);
        assert!(r2 >= a2.rho, "{r2} vs {}", a2.rho);
        // the returned length is feasible and a tolerance step beyond it is not
        let (sn, cs) = a1.theta.sin_cos();
        assert!(check_friction(&s, &ControlInput::clamped(r1 * cs, r1 * sn), &h, &p));
        let over = r1 + BISECTION_TOL;
        assert!(!check_friction(&s, &ControlInput::clamped(over * cs, over * sn), &h, &p));
    }

    #[test]
    fn infeasible_state_has_zero_length() {
        let p = params();
        let s = steady_state_for(30.0, p.max_steer, &p);
        assert!(resultant_tire_force(&s, &ControlInput::ZERO, &p).resultant > p.friction_limit());
        assert_eq!(max_safe_length(&s, 0.3, &p, &CheckHorizon::default()), 0.0);
    }

    #[test]
    fn toy_table_respects_square_bound() {
        let p = params();
        let g = GridSpec::new(2, 2, 4, &p);
        let t = build_table(&p, &g, &CheckHorizon::default()).unwrap();
        assert_eq!(t.data().len(), 16);
        for k in 0..4 {
            for ij in 0..4 {
                let v = t.node(ij / 2, ij % 2, k);
                assert!(v >= 0.0 && v <= rho_square(g.theta_node(k)));
            }
        }
    }

    #[test]
    fn build_is_independent_of_thread_count() {
        let p = params();
        let g = GridSpec::new(6, 7, 12, &p);
        let h = CheckHorizon::default();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| build_table(&p, &g, &h).unwrap());
        let b = many.install(|| build_table(&p, &g, &h).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn table_is_mirror_symmetric() {
        let stats = small_table().stats();
        assert!(stats.symmetry_residual <= 2.0 * BISECTION_TOL, "{stats:?}");
        assert!(stats.min >= 0.0 && stats.max <= 2f64.sqrt());
    }

    #[test]
    fn lateral_authority_shrinks_with_steering() {
        // at 15.4 m/s pure steering-out authority falls as the wheel turns further in
        let p = params();
        let h = CheckHorizon::default();
        let steer_in = PI / 2.0;
        let mut last = f64::INFINITY;
        for deg in [2.0f64, 5.0, 8.0, 11.0] {
            let s = steady_state_for(15.4, deg.to_radians(), &p);
            let r = max_safe_length(&s, steer_in, &p, &h);
            assert!(r <= last + BISECTION_TOL);
            last = r;
        }
        assert!(last < 1.0);
    }

    #[test]
    fn lookup_hits_nodes_exactly() {
        let t = small_table();
        let g = *t.grid();
        for (i, j, k) in [(0, 0, 0), (3, 8, 17), (15, 16, 71), (7, 0, 71), (15, 3, 0)] {
            let got = t.lookup(g.v_node(i), g.delta_node(j), g.theta_node(k));
            assert_eq!(got, t.node(i, j, k), "node {i},{j},{k}");
        }
    }

    #[test]
    fn lookup_is_periodic_in_theta() {
        let t = small_table();
        for th in [-3.0, -1.0, 0.1, 2.5, 3.1] {
            let a = t.lookup(12.3, 0.1, th);
            let b = t.lookup(12.3, 0.1, th + 2.0 * PI);
            assert!((a - b).abs() < 1e-12);
        }
        // wrap across the seam between the last node (pi) and the first
        let g = t.grid();
        let mid = -PI + 0.5 * g.theta_step();
        let expect = 0.5 * (t.node(4, 4, g.n_theta - 1) + t.node(4, 4, 0));
        assert!((t.lookup(g.v_node(4), g.delta_node(4), mid) - expect).abs() < 1e-12);
    }

    #[test]
    fn lookup_at_cell_center_is_the_node_average() {
        let t = small_table();
        let g = t.grid();
        let v = 0.5 * (g.v_node(5) + g.v_node(6));
        let d = 0.5 * (g.delta_node(9) + g.delta_node(10));
        let th = 0.5 * (g.theta_node(40) + g.theta_node(41));
        let mut sum = 0.0;
        for i in 5..=6 {
            for j in 9..=10 {
                for k in 40..=41 {
                    sum += t.node(i, j, k);
                }
            }
        }
        assert!((t.lookup(v, d, th) - sum / 8.0).abs() < 1e-12);
    }

    #[test]
    fn map_action_examples() {
        let t = small_table();
        assert_eq!(t.map_action(15.4, 0.1, [0.0, 0.0], false), [0.0, 0.0]);
        // low speed straight running: the full square is admissible
        assert_eq!(t.map_action(2.0, 0.0, [1.0, 0.0], false), [1.0, 0.0]);
        let delta = 7.9f64.to_radians();
        let a = [-0.75, 0.25];
        let u = t.map_action(15.4, delta, a, false);
        let pa = PolarAction::from_cartesian(a);
        let pu = PolarAction::from_cartesian(u);
        assert!(pu.rho < pa.rho);
        assert!((pu.theta - pa.theta).abs() < 1e-12);
        assert!((pu.rho - t.lookup(15.4, delta, pa.theta)).abs() < 1e-12);
    }

    #[test]
    fn interpolation_stays_within_cell_spread() {
        let p = params();
        let t = small_table();
        let h = CheckHorizon::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v = rng.gen_range(0.0..30.0);
            let d = rng.gen_range(-p.max_steer..p.max_steer);
            let th = rng.gen_range(-PI..PI);
            let oracle = max_safe_length(&steady_state_for(v, d, &p), th, &p, &h);
            let bound = t.cell_spread(v, d, th) + BISECTION_TOL;
            assert!((t.lookup(v, d, th) - oracle).abs() <= bound);
        }
    }

    proptest! {
        #[test]
        fn polar_round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let back = PolarAction::from_cartesian([x, y]).to_cartesian();
            prop_assert!((back[0] - x).abs() < 1e-9 && (back[1] - y).abs() < 1e-9);
        }

        #[test]
        fn map_action_invariants(v in 0.0f64..30.0, d in -0.6f64..0.6, x in -1.0f64..1.0, y in -1.0f64..1.0, cons in any::<bool>()) {
            let t = small_table();
            let a = [x, y];
            let u = t.map_action(v, d, a, cons);
            let pa = PolarAction::from_cartesian(a);
            let pu = PolarAction::from_cartesian(u);
            prop_assert!(pu.rho <= pa.rho);
            prop_assert!(pu.rho <= rho_square(pa.theta) * (1.0 + 1e-9));
            prop_assert!(u[0].abs() <= 1.0 && u[1].abs() <= 1.0);
            if pu.rho > 1e-12 {
                prop_assert!(wrap_angle(pu.theta - pa.theta).abs() < 1e-9);
            }
            let again = t.map_action(v, d, u, cons);
            prop_assert!((again[0] - u[0]).abs() < 1e-9 && (again[1] - u[1]).abs() < 1e-9);
        }
    }
}
