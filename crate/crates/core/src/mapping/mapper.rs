use super::{clip_to, max_safe_length, steady_state_for, BoundaryTable};
use crate::vehicle::{check_friction, CheckHorizon, ControlInput, VehicleParams, VehicleState};

/// Maps virtual actions to admissible controls for a running car.
///
/// Speeds above the table's range fall back to bisecting the boundary directly, using
/// the friction limit the table was built for. A mapped control that still fails the
/// friction check is replaced by the directly bisected one along the same direction.
#[derive(Debug, Clone)]
pub struct ActionMapper {
    table: BoundaryTable,
    params: VehicleParams,
    horizon: CheckHorizon,
    conservative: bool,
}

impl ActionMapper {
    pub fn new(table: BoundaryTable, params: &VehicleParams, horizon: CheckHorizon, conservative: bool) -> Self {
        let params = params.with_mu_max(table.mu_max());
        ActionMapper {
            table,
            params,
            horizon,
            conservative,
        }
    }

    pub fn table(&self) -> &BoundaryTable {
        &self.table
    }

    pub fn is_conservative(&self) -> bool {
        self.conservative
    }

    /// Boundary length in direction `theta` at the car's `(v_x, delta)`.
    pub fn boundary(&self, state: &VehicleState, theta: f64) -> f64 {
        let (vx, delta) = (state.vx.max(0.0), state.delta);
        if vx > self.table.grid().v_range.1 {
            let s = steady_state_for(vx, delta, &self.params);
            max_safe_length(&s, theta, &self.params, &self.horizon)
        } else if self.conservative {
            self.table.lookup_conservative(vx, delta, theta)
        } else {
            self.table.lookup(vx, delta, theta)
        }
    }

    pub fn map(&self, state: &VehicleState, a: [f64; 2]) -> [f64; 2] {
        let u = clip_to(a, |theta| self.boundary(state, theta));
        if check_friction(state, &ControlInput::from_array(u), &self.horizon, &self.params) {
            return u;
        }
        let s = steady_state_for(state.vx.max(0.0), state.delta, &self.params);
        clip_to(a, |theta| max_safe_length(&s, theta, &self.params, &self.horizon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{build_table, GridSpec};
    use crate::vehicle::{check_friction, ControlInput};

    #[test]
    fn fast_car_uses_direct_boundary() {
        let p = VehicleParams::default();
        let t = build_table(&p, &GridSpec::new(4, 9, 24, &p), &CheckHorizon::default()).unwrap();
        let m = ActionMapper::new(t, &p, CheckHorizon::default(), true);
        let s = steady_state_for(38.0, 0.01, &p);
        for a in [[1.0, 1.0], [-1.0, 0.6], [0.2, -1.0]] {
            let u = m.map(&s, a);
            assert!(check_friction(&s, &ControlInput::from_array(u), &CheckHorizon::default(), &p));
        }
    }

    #[test]
    fn uses_the_table_friction_limit() {
        let p = VehicleParams::default();
        let low = p.with_mu_max(0.6);
        let t = build_table(&low, &GridSpec::new(4, 9, 24, &low), &CheckHorizon::default()).unwrap();
        let m = ActionMapper::new(t, &p, CheckHorizon::default(), false);
        let s = steady_state_for(40.0, 0.0, &p);
        // at 0.6 g full braking exceeds the limit even on a straight
        let u = m.map(&s, [-1.0, 0.0]);
        assert!(u[0] > -1.0);
    }
}
