use crate::model::UnicycleState;

/// Lie derivatives of `D = (x−cx)² + (y−cy)² − r²` along the unicycle
/// drift `f` and input matrix `g`. `D` has relative degree two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DiskTerms {
    pub value: f64,
    /// `L_f D`
    pub lf: f64,
    /// `L_f² D`
    pub lf2: f64,
    /// `L_g L_f D`, coefficients of `(u1, u2)`
    pub lglf: [f64; 2],
}

impl DiskTerms {
    pub fn new(cx: f64, cy: f64, r: f64, s: &UnicycleState) -> Self {
        let dx = s.x - cx;
        let dy = s.y - cy;
        let (sin, cos) = s.theta.sin_cos();
        let radial = dx * cos + dy * sin;
        let lateral = -dx * sin + dy * cos;
        Self {
            value: dx * dx + dy * dy - r * r,
            lf: 2.0 * s.v * radial,
            lf2: 2.0 * s.v * s.v,
            lglf: [2.0 * s.v * lateral, 2.0 * radial],
        }
    }

    pub fn negated(self) -> Self {
        Self {
            value: -self.value,
            lf: -self.lf,
            lf2: -self.lf2,
            lglf: [-self.lglf[0], -self.lglf[1]],
        }
    }

}
