//! Numerical integration inside one block, the transit map from the incoming
//! to the outgoing face, cone-field expansion across a gluing, and a sampled
//! checklist of the qualitative block properties.
//!
//! Integration is fixed-step RK4; the crossing of `y = π/2` inside the last
//! step is located by bisection on the step length.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifold_assembly::{preserves_fiber, Matrix};
use crate::model_block::{BlockField, BlockPoint, BlockVectorField, FaceLabel, OrbitEnd, Velocity, HALF_PI};

/// Tolerance on the crossing time found by bisection.
pub const CROSSING_TOL: f64 = 1e-10;

/// Step of the central differences used for the transit differential.
pub const FD_STEP: f64 = 1e-5;

/// A coordinate within this distance of `±π/2` is on the face.
const FACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Keep every `stride`-th step in the trajectory (endpoints always kept).
    pub stride: usize,
    /// `|y|` below which an orbit on a tangent face counts as near `y = 0`.
    pub asymptotic_proximity: f64,
    /// Fraction of `t_max` after which the orbit must stay near `y = 0`.
    pub asymptotic_persistence: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig { dt: 1e-3, t_max: 100.0, stride: 1, asymptotic_proximity: 1e-3, asymptotic_persistence: 0.5 }
    }
}

impl IntegrationConfig {
    pub fn new(dt: f64, t_max: f64) -> IntegrationConfig {
        IntegrationConfig { dt, t_max, ..IntegrationConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("step and time budget must be positive and finite (dt = {dt}, t_max = {t_max})")]
    InvalidStep { dt: f64, t_max: f64 },
    #[error("entry point must lie on the incoming face y = -π/2 (got y = {0})")]
    NotOnIncomingFace(f64),
    #[error("entry x = {0} is outside the block")]
    OutOfBlock(f64),
    #[error("orbit is asymptotic to the closed orbit {0:?}")]
    Asymptotic(OrbitEnd),
    #[error("time budget exhausted before the orbit left the block")]
    Budget,
    #[error("gluing matrix sends the fiber to ±fiber")]
    FiberGluedToFiber,
    #[error("cone half-width {0} must be positive and keep ∂/∂z outside the cone")]
    InvalidCone(f64),
    #[error("sample grid must be non-empty")]
    EmptyGrid,
}

/// `z` is kept lifted to `ℝ` so that windings are visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Sample {
    pub fn point(&self) -> BlockPoint {
        BlockPoint {
            x: self.x.clamp(-HALF_PI, HALF_PI),
            y: self.y.clamp(-HALF_PI, HALF_PI),
            z: crate::model_block::wrap_unit(self.z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    /// `z_lift` is the unwrapped exit height.
    ExitFace {
        face: FaceLabel,
        point: BlockPoint,
        time: f64,
        z_lift: f64,
    },
    AsymptoticToOrbit {
        orbit: OrbitEnd,
    },
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn points(&self) -> impl Iterator<Item = (f64, BlockPoint)> + '_ {
        self.samples.iter().map(|s| (s.t, s.point()))
    }

    /// Writes `t,x,y,z` rows, `z` unwrapped.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "x", "y", "z"])?;
        for s in &self.samples {
            out.serialize((s.t, s.x, s.y, s.z))?;
        }
        out.flush()?;
        Ok(())
    }
}

type State = [f64; 3];

fn deriv<F: BlockVectorField + ?Sized>(f: &F, s: &State) -> State {
    let Velocity { dx, dy, dz } = f.velocity(s[0], s[1], s[2]);
    [dx, dy, dz]
}

fn rk4<F: BlockVectorField + ?Sized>(f: &F, s: &State, h: f64) -> State {
    let add = |a: &State, k: &State, c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]];
    let k1 = deriv(f, s);
    let k2 = deriv(f, &add(s, &k1, h / 2.0));
    let k3 = deriv(f, &add(s, &k2, h / 2.0));
    let k4 = deriv(f, &add(s, &k3, h));
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

fn check_step(dt: f64, t_max: f64) -> Result<(), NumericsError> {
    if dt.is_finite() && dt > 0.0 && t_max.is_finite() && t_max > 0.0 {
        Ok(())
    } else {
        Err(NumericsError::InvalidStep { dt, t_max })
    }
}

/// Integrates forward from `p0` (with `z` taken as given, not wrapped) until
/// the orbit crosses `y = π/2` or the budget runs out.
pub fn integrate_field<F: BlockVectorField + ?Sized>(
    f: &F,
    p0: (f64, f64, f64),
    cfg: &IntegrationConfig,
    record: bool,
) -> Result<Trajectory, NumericsError> {
    check_step(cfg.dt, cfg.t_max)?;
    let mut s: State = [p0.0, p0.1, p0.2];
    let mut t = 0.0;
    let mut samples = Vec::new();
    let push = |samples: &mut Vec<Sample>, t: f64, s: &State| samples.push(Sample { t, x: s[0], y: s[1], z: s[2] });
    push(&mut samples, t, &s);
    if s[1] >= HALF_PI - FACE_TOL {
        let point = Sample { t, x: s[0], y: HALF_PI, z: s[2] }.point();
        return Ok(Trajectory {
            samples,
            termination: Termination::ExitFace { face: FaceLabel::Outgoing, point, time: 0.0, z_lift: s[2] },
        });
    }
    let on_tangent = (s[0].abs() - HALF_PI).abs() <= FACE_TOL;
    // last time |y| was at or above the proximity threshold
    let mut last_far = 0.0;
    let mut step = 0usize;
    while t < cfg.t_max {
        let h = cfg.dt.min(cfg.t_max - t);
        let next = rk4(f, &s, h);
        if next[1] >= HALF_PI {
            let (hc, sc) = locate_crossing(f, &s, h);
            let time = t + hc;
            push(&mut samples, time, &sc);
            let point = Sample { t: time, x: sc[0], y: HALF_PI, z: sc[2] }.point();
            return Ok(Trajectory {
                samples,
                termination: Termination::ExitFace { face: FaceLabel::Outgoing, point, time, z_lift: sc[2] },
            });
        }
        s = next;
        t += h;
        step += 1;
        if s[1].abs() >= cfg.asymptotic_proximity {
            last_far = t;
        }
        if record && step.is_multiple_of(cfg.stride.max(1)) {
            push(&mut samples, t, &s);
        }
    }
    if samples.last().map(|x| x.t) != Some(t) {
        push(&mut samples, t, &s);
    }
    let termination = if on_tangent && last_far <= cfg.asymptotic_persistence * cfg.t_max {
        let orbit = if s[0] < 0.0 { OrbitEnd::Alpha1 } else { OrbitEnd::Alpha2 };
        Termination::AsymptoticToOrbit { orbit }
    } else {
        Termination::Budget
    };
    Ok(Trajectory { samples, termination })
}

/// Step length in `(0, h]` at which a single RK4 step from `s` reaches
/// `y = π/2`, and the state there.
fn locate_crossing<F: BlockVectorField + ?Sized>(f: &F, s: &State, h: f64) -> (f64, State) {
    let (mut lo, mut hi) = (0.0, h);
    while hi - lo > CROSSING_TOL {
        let mid = 0.5 * (lo + hi);
        if rk4(f, s, mid)[1] >= HALF_PI {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut end = rk4(f, s, hi);
    end[1] = HALF_PI;
    (hi, end)
}

/// Orbit of `b` through `p0`, sampled at every step.
pub fn integrate_orbit(b: &BlockField, p0: BlockPoint, dt: f64, t_max: f64) -> Result<Trajectory, NumericsError> {
    integrate_field(b, (p0.x, p0.y, p0.z), &IntegrationConfig::new(dt, t_max), true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transit {
    pub exit: BlockPoint,
    pub time: f64,
    /// Unwrapped change of `z`.
    pub dz: f64,
}

/// Transit from the incoming face point `(x, -π/2, z)` to the outgoing face.
pub fn block_transit(b: &BlockField, entry: BlockPoint, cfg: &IntegrationConfig) -> Result<Transit, NumericsError> {
    if (entry.y + HALF_PI).abs() > FACE_TOL {
        return Err(NumericsError::NotOnIncomingFace(entry.y));
    }
    transit_lifted(b, entry.x, entry.z, cfg)
}

fn transit_lifted(b: &BlockField, x: f64, z: f64, cfg: &IntegrationConfig) -> Result<Transit, NumericsError> {
    if !(x.is_finite() && x.abs() <= HALF_PI + FACE_TOL) {
        return Err(NumericsError::OutOfBlock(x));
    }
    let tr = integrate_field(b, (x, -HALF_PI, z), cfg, false)?;
    match tr.termination {
        Termination::ExitFace { point, time, z_lift, .. } => Ok(Transit { exit: point, time, dz: z_lift - z }),
        Termination::AsymptoticToOrbit { orbit } => Err(NumericsError::Asymptotic(orbit)),
        Termination::Budget => Err(NumericsError::Budget),
    }
}

/// Transit time `π / cos x` of the entry at `x`.
pub fn transit_time_exact(x: f64) -> f64 {
    PI / x.cos()
}

/// Change of `z` across the block for the entry at `x`: `2λ·s·x / cos x`.
pub fn transit_dz_exact(b: &BlockField, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    2.0 * b.lambda() * b.sign().as_f64() * x / x.cos()
}

/// Entry points for the cone computation: `nx` values of `x` strictly inside
/// the face, evenly spaced, times `nz` heights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub nz: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.nx * self.nz);
        for i in 0..self.nx {
            let x = -HALF_PI + PI * (i as f64 + 1.0) / (self.nx as f64 + 1.0);
            for j in 0..self.nz {
                out.push((x, j as f64 / self.nz as f64));
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSample {
    pub x: f64,
    pub z: f64,
    /// Minimal expansion over the cone, `None` if the entry does not cross.
    pub expansion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub lambda: f64,
    pub sign: crate::model_block::Sign,
    pub matrix: Matrix,
    pub grid: GridSpec,
    pub cone_halfwidth: f64,
    pub min_expansion: f64,
    pub max_expansion: f64,
    pub threshold: f64,
    pub verdict: bool,
    /// Grid entries with no transit (asymptotic or out of budget).
    pub excluded: usize,
    pub samples: Vec<ConeSample>,
}

impl ConeReport {
    /// Writes `x,z,expansion` rows; excluded entries have an empty expansion.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "z", "expansion"])?;
        for s in &self.samples {
            out.serialize((s.x, s.z, s.expansion))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    pub grid: GridSpec,
    pub cone_halfwidth: f64,
    pub threshold: f64,
    pub integration: IntegrationConfig,
}

impl Default for ConeParams {
    fn default() -> Self {
        ConeParams {
            grid: GridSpec { nx: 30, nz: 1 },
            cone_halfwidth: 0.25,
            threshold: 1.0,
            integration: IntegrationConfig { t_max: 400.0, ..IntegrationConfig::default() },
        }
    }
}

fn apply(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Least `|M v|` over unit vectors within `halfwidth` of direction `theta`.
/// `|M v|²` is a quadratic form on the circle, so the minimum is attained at
/// an end of the arc or along an eigenvector of `MᵀM`.
pub fn min_expansion_on_cone(m: &[[f64; 2]; 2], theta: f64, halfwidth: f64) -> f64 {
    let unit = |a: f64| [a.cos(), a.sin()];
    let mut best = norm(apply(m, unit(theta - halfwidth))).min(norm(apply(m, unit(theta + halfwidth))));
    // MᵀM = [[p, q], [q, r]]
    let p = m[0][0] * m[0][0] + m[1][0] * m[1][0];
    let q = m[0][0] * m[0][1] + m[1][0] * m[1][1];
    let r = m[0][1] * m[0][1] + m[1][1] * m[1][1];
    let phi = 0.5 * (2.0 * q).atan2(p - r);
    for k in 0..4 {
        let a = phi + k as f64 * PI / 2.0;
        let diff = (a - theta + PI).rem_euclid(2.0 * PI) - PI;
        if diff.abs() <= halfwidth {
            best = best.min(norm(apply(m, unit(a))));
        }
    }
    best
}

/// Differential of the transit map `(x, z) ↦ (x, z + Δz)` at an entry by
/// central differences.
pub fn transit_differential(
    b: &BlockField,
    x: f64,
    z: f64,
    cfg: &IntegrationConfig,
) -> Result<[[f64; 2]; 2], NumericsError> {
    let h = FD_STEP;
    let image = |x: f64, z: f64| -> Result<[f64; 2], NumericsError> {
        let t = transit_lifted(b, x, z, cfg)?;
        Ok([x, z + t.dz])
    };
    let (xp, xm) = (image(x + h, z)?, image(x - h, z)?);
    let (zp, zm) = (image(x, z + h)?, image(x, z - h)?);
    let col = |a: [f64; 2], c: [f64; 2]| [(a[0] - c[0]) / (2.0 * h), (a[1] - c[1]) / (2.0 * h)];
    let (cx, cz) = (col(xp, xm), col(zp, zm));
    Ok([[cx[0], cz[0]], [cx[1], cz[1]]])
}

/// Measures how much the composite `A ∘ (transit)` stretches vectors in the
/// cone of half-width `cone_halfwidth` about `A·∂/∂z`, at every grid entry.
pub fn cone_expansion(b: &BlockField, a: &Matrix, params: &ConeParams) -> Result<ConeReport, NumericsError> {
    if preserves_fiber(a) {
        return Err(NumericsError::FiberGluedToFiber);
    }
    if params.grid.is_empty() {
        return Err(NumericsError::EmptyGrid);
    }
    let af = a.map(|row| row.map(|v| v as f64));
    let c = apply(&af, [0.0, 1.0]);
    let theta = c[1].atan2(c[0]);
    // angle between the cone axis and ±∂/∂z
    let to_fiber = (c[0].abs()).atan2(c[1].abs());
    let hw = params.cone_halfwidth;
    if !(hw > 0.0 && hw < to_fiber) {
        return Err(NumericsError::InvalidCone(hw));
    }
    let samples: Vec<ConeSample> = params
        .grid
        .points()
        .into_par_iter()
        .map(|(x, z)| {
            let expansion = transit_differential(b, x, z, &params.integration).ok().map(|d| {
                let m = [
                    [af[0][0] * d[0][0] + af[0][1] * d[1][0], af[0][0] * d[0][1] + af[0][1] * d[1][1]],
                    [af[1][0] * d[0][0] + af[1][1] * d[1][0], af[1][0] * d[0][1] + af[1][1] * d[1][1]],
                ];
                min_expansion_on_cone(&m, theta, hw)
            });
            ConeSample { x, z, expansion }
        })
        .collect();
    let values: Vec<f64> = samples.iter().filter_map(|s| s.expansion).collect();
    let excluded = samples.len() - values.len();
    let min_expansion = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max_expansion = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ConeReport {
        lambda: b.lambda(),
        sign: b.sign(),
        matrix: *a,
        grid: params.grid,
        cone_halfwidth: hw,
        min_expansion,
        max_expansion,
        threshold: params.threshold,
        verdict: !values.is_empty() && min_expansion >= params.threshold,
        excluded,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockCheck {
    /// `ẏ > 0` on the open incoming face and in the interior.
    IncreasingY,
    /// `ẋ = 0` everywhere.
    ConstantX,
    /// `ẋ = 0` on `x = ±π/2`.
    TangentFaces,
    /// `y = 0` crossed positively except at the closed orbits.
    CrossesMiddle,
    /// Half-faces of `x = ±π/2` approach `y = 0` forward (`y < 0`) or
    /// backward (`y > 0`) in time.
    HalfFaces,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: BlockCheck,
    pub samples: usize,
    pub failures: usize,
    /// `(x, y)` of the first failing sample.
    pub first_failure: Option<(f64, f64)>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockChecklist {
    pub checks: Vec<CheckResult>,
}

impl BlockChecklist {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }

    pub fn get(&self, check: BlockCheck) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == check)
    }
}

struct Tally {
    check: BlockCheck,
    samples: usize,
    failures: usize,
    first: Option<(f64, f64)>,
}

impl Tally {
    fn new(check: BlockCheck) -> Tally {
        Tally { check, samples: 0, failures: 0, first: None }
    }

    fn record(&mut self, ok: bool, x: f64, y: f64) {
        self.samples += 1;
        if !ok {
            self.failures += 1;
            self.first.get_or_insert((x, y));
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult { check: self.check, samples: self.samples, failures: self.failures, first_failure: self.first }
    }
}

/// Samples the block properties on an `n × n` grid (and `n` points per face).
/// `tol` bounds quantities that should vanish.
pub fn verify_block_properties<F: BlockVectorField + Sync>(f: &F, n: usize, tol: f64) -> BlockChecklist {
    let n = n.max(2);
    // open interval samples
    let open: Vec<f64> = (1..=n).map(|i| -HALF_PI + PI * i as f64 / (n as f64 + 1.0)).collect();
    // closed interval samples
    let closed: Vec<f64> = (0..n).map(|i| -HALF_PI + PI * i as f64 / (n as f64 - 1.0)).collect();
    let z = 0.37;

    let mut inc = Tally::new(BlockCheck::IncreasingY);
    for &x in &open {
        inc.record(f.velocity(x, -HALF_PI, z).dy > 0.0, x, -HALF_PI);
        for &y in &open {
            inc.record(f.velocity(x, y, z).dy > 0.0, x, y);
        }
    }

    let mut cx = Tally::new(BlockCheck::ConstantX);
    for &x in &closed {
        for &y in &closed {
            cx.record(f.velocity(x, y, z).dx.abs() <= tol, x, y);
        }
    }

    let mut tan = Tally::new(BlockCheck::TangentFaces);
    for x in [-HALF_PI, HALF_PI] {
        for &y in &closed {
            tan.record(f.velocity(x, y, z).dx.abs() <= tol, x, y);
        }
    }

    let mut mid = Tally::new(BlockCheck::CrossesMiddle);
    for &x in &open {
        mid.record(f.velocity(x, 0.0, z).dy > 0.0, x, 0.0);
    }
    for x in [-HALF_PI, HALF_PI] {
        mid.record(f.velocity(x, 0.0, z).dy.abs() <= tol, x, 0.0);
    }

    let mut half = Tally::new(BlockCheck::HalfFaces);
    let results: Vec<(f64, f64, bool)> = [-HALF_PI, HALF_PI]
        .into_iter()
        .flat_map(|x| open.iter().filter(|y| y.abs() > 1e-9).map(move |&y| (x, y)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(x, y)| (x, y, approaches_middle(f, x, y, z)))
        .collect();
    for (x, y, ok) in results {
        half.record(ok, x, y);
    }

    BlockChecklist { checks: vec![inc.finish(), cx.finish(), tan.finish(), mid.finish(), half.finish()] }
}

/// Integrates from `(x, y)` forward if `y < 0` and backward if `y > 0` and
/// checks that `|y|` shrinks monotonically without changing sign until it is
/// below a tenth of its start. Near the face `|y|` decays like `1/t`, so the
/// step budget grows with `1/|y|`.
fn approaches_middle<F: BlockVectorField + ?Sized>(f: &F, x: f64, y: f64, z: f64) -> bool {
    let h = if y < 0.0 { 0.01 } else { -0.01 };
    let steps = (100.0 / (y.abs() * 0.01)) as usize + 10_000;
    let mut s: State = [x, y, z];
    for _ in 0..steps {
        let next = rk4(f, &s, h);
        if next[1].abs() > s[1].abs() || next[1].signum() != y.signum() && next[1] != 0.0 {
            return false;
        }
        s = next;
        if s[1].abs() < 0.1 * y.abs() {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_block::Sign;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn field(sign: Sign, lambda: f64) -> BlockField {
        BlockField::new(sign, lambda).unwrap()
    }

    fn entry(x: f64, z: f64) -> BlockPoint {
        BlockPoint::new(x, -HALF_PI, z).unwrap()
    }

    /// Quadrature of `∫ dy / ẏ` and `∫ ż dy / ẏ` over `[-π/2, π/2]` by the
    /// composite Simpson rule, independent of the integrator.
    fn quadrature(b: &BlockField, x: f64) -> (f64, f64) {
        let n = 20_000;
        let h = PI / n as f64;
        let (mut t, mut dz) = (0.0, 0.0);
        for i in 0..=n {
            let y = -HALF_PI + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let v = b.velocity_unchecked(x, y);
            t += w / v.dy;
            dz += w * v.dz / v.dy;
        }
        (t * h / 3.0, dz * h / 3.0)
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let b = field(Sign::Plus, 7.0);
        for x in [-1.2, -0.5, 0.1, 0.8] {
            let (t, dz) = quadrature(&b, x);
            assert_abs_diff_eq!(transit_time_exact(x), t, epsilon = 1e-8);
            assert_abs_diff_eq!(transit_dz_exact(&b, x), dz, epsilon = 1e-7);
        }
    }

    #[test]
    fn center_transit() {
        let b = field(Sign::Plus, 10.0);
        let tr = integrate_orbit(&b, BlockPoint::new(0.0, -HALF_PI, 0.0).unwrap(), 1e-3, 10.0).unwrap();
        match tr.termination {
            Termination::ExitFace { face, time, z_lift, .. } => {
                assert_eq!(face, FaceLabel::Outgoing);
                assert_abs_diff_eq!(time, PI, epsilon = 1e-6);
                assert_abs_diff_eq!(z_lift, 0.0, epsilon = 1e-6);
            }
            other => panic!("{other:?}"),
        }
        assert!(tr.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn transit_matches_closed_form() {
        for sign in [Sign::Plus, Sign::Minus] {
            let b = field(sign, 10.0);
            for x in [-1.0, -0.3, 0.0, 0.5, 1.2] {
                let t = block_transit(&b, entry(x, 0.2), &IntegrationConfig::default()).unwrap();
                assert_abs_diff_eq!(t.time, transit_time_exact(x), epsilon = 1e-7);
                assert_abs_diff_eq!(t.dz, transit_dz_exact(&b, x), epsilon = 1e-7);
                assert_abs_diff_eq!(t.exit.x, x, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn tangent_face_is_asymptotic() {
        let b = field(Sign::Plus, 10.0);
        let cfg = IntegrationConfig { stride: 1000, ..IntegrationConfig::new(1e-2, 4000.0) };
        for (x, orbit) in [(HALF_PI, OrbitEnd::Alpha2), (-HALF_PI, OrbitEnd::Alpha1)] {
            let tr = integrate_field(&b, (x, -HALF_PI, 0.0), &cfg, true).unwrap();
            assert_eq!(tr.termination, Termination::AsymptoticToOrbit { orbit });
        }
        // too short a budget to see persistence
        let tr = integrate_field(&b, (HALF_PI, -HALF_PI, 0.0), &IntegrationConfig::new(1e-2, 100.0), false).unwrap();
        assert_eq!(tr.termination, Termination::Budget);
        assert_eq!(
            block_transit(&b, entry(HALF_PI, 0.0), &cfg).unwrap_err(),
            NumericsError::Asymptotic(OrbitEnd::Alpha2)
        );
    }

    #[test]
    fn outgoing_face_exits_at_once() {
        let b = field(Sign::Minus, 10.0);
        let tr = integrate_orbit(&b, BlockPoint::new(0.4, HALF_PI, 0.5).unwrap(), 1e-3, 1.0).unwrap();
        assert!(matches!(tr.termination, Termination::ExitFace { time, .. } if time == 0.0));
        assert_eq!(tr.samples.len(), 1);
    }

    #[test]
    fn bad_inputs() {
        let b = field(Sign::Plus, 10.0);
        let p = BlockPoint::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(integrate_orbit(&b, p, 0.0, 1.0), Err(NumericsError::InvalidStep { .. })));
        assert!(matches!(integrate_orbit(&b, p, 1e-3, f64::NAN), Err(NumericsError::InvalidStep { .. })));
        assert_eq!(
            block_transit(&b, p, &IntegrationConfig::default()).unwrap_err(),
            NumericsError::NotOnIncomingFace(0.0)
        );
        let long = BlockPoint::new(1.5, -HALF_PI, 0.0).unwrap();
        assert_eq!(block_transit(&b, long, &IntegrationConfig::new(1e-2, 5.0)).unwrap_err(), NumericsError::Budget);
    }

    #[test]
    fn dz_sign_follows_x_and_lambda() {
        let cfg = IntegrationConfig::default();
        for sign in [Sign::Plus, Sign::Minus] {
            let b = field(sign, 10.0);
            let right = block_transit(&b, entry(0.5, 0.0), &cfg).unwrap().dz;
            let left = block_transit(&b, entry(-0.5, 0.0), &cfg).unwrap().dz;
            assert_eq!(right.signum(), sign.as_f64());
            assert_eq!(left.signum(), -sign.as_f64());
        }
        let dz: Vec<f64> = [5.0, 10.0, 20.0]
            .iter()
            .map(|l| block_transit(&field(Sign::Plus, *l), entry(0.5, 0.0), &cfg).unwrap().dz.abs())
            .collect();
        assert!(dz[0] < dz[1] && dz[1] < dz[2]);
    }

    #[test]
    fn step_halving_converges() {
        let b = field(Sign::Plus, 10.0);
        let a = block_transit(&b, entry(0.3, 0.0), &IntegrationConfig::new(1e-3, 100.0)).unwrap();
        let c = block_transit(&b, entry(0.3, 0.0), &IntegrationConfig::new(5e-4, 100.0)).unwrap();
        assert!((a.time - c.time).abs() < 1e-7);
        assert!((a.dz - c.dz).abs() < 1e-7);
    }

    #[test]
    fn cone_minimum_matches_dense_sampling() {
        let ms = [[[1.0, 0.0], [20.0, 1.0]], [[0.3, -2.0], [1.5, 0.7]], [[2.0, 1.0], [1.0, 1.0]]];
        for m in &ms {
            for (theta, hw) in [(0.0, 0.25), (1.0, 0.6), (-2.5, 0.1)] {
                let dense = (0..=20_000)
                    .map(|i| theta - hw + 2.0 * hw * i as f64 / 20_000.0)
                    .map(|a| norm(apply(m, [a.cos(), a.sin()])))
                    .fold(f64::INFINITY, f64::min);
                let exact = min_expansion_on_cone(m, theta, hw);
                assert!(exact <= dense + 1e-12);
                assert!(dense - exact < 1e-6, "{exact} vs {dense}");
            }
        }
    }

    #[test]
    fn transit_differential_is_a_shear() {
        let b = field(Sign::Plus, 10.0);
        let d = transit_differential(&b, 0.4, 0.1, &IntegrationConfig::default()).unwrap();
        // d(Δz)/dx = 2λ(cos x + x sin x)/cos² x
        let shear = 2.0 * 10.0 * (0.4f64.cos() + 0.4 * 0.4f64.sin()) / 0.4f64.cos().powi(2);
        assert_abs_diff_eq!(d[0][0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d[0][1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d[1][1], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(d[1][0], shear, epsilon = 1e-4);
    }

    fn small_params() -> ConeParams {
        ConeParams { grid: GridSpec { nx: 6, nz: 2 }, ..ConeParams::default() }
    }

    #[test]
    fn cone_expansion_grows_with_lambda() {
        let mins: Vec<f64> = [5.0, 10.0, 20.0]
            .iter()
            .map(|l| cone_expansion(&field(Sign::Plus, *l), &[[0, 1], [1, 0]], &small_params()).unwrap().min_expansion)
            .collect();
        assert!(mins[0] < mins[1] && mins[1] < mins[2], "{mins:?}");
        assert!(mins[2] > 1.0);
    }

    #[test]
    fn cone_report_is_complete() {
        let r = cone_expansion(&field(Sign::Plus, 10.0), &[[0, 1], [1, 0]], &small_params()).unwrap();
        assert_eq!(r.samples.len(), 12);
        assert_eq!(r.excluded, 0);
        assert!(r.min_expansion <= r.max_expansion);
        assert!(r.verdict);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("x,z,expansion"));
    }

    #[test]
    fn cone_is_symmetric_under_sign_change() {
        let a = [[0, 1], [1, 0]];
        let p = cone_expansion(&field(Sign::Plus, 10.0), &a, &small_params()).unwrap();
        let m = cone_expansion(&field(Sign::Minus, 10.0), &a, &small_params()).unwrap();
        for s in &p.samples {
            let zr = crate::model_block::wrap_unit(-s.z);
            let t = m.samples.iter().find(|t| t.x == s.x && (t.z - zr).abs() < 1e-12).unwrap();
            let (u, v) = (s.expansion.unwrap(), t.expansion.unwrap());
            assert!((u - v).abs() <= 1e-6 * u, "{u} vs {v}");
        }
    }

    #[test]
    fn cone_rejects_fiber_gluing_and_bad_cones() {
        let b = field(Sign::Plus, 10.0);
        for a in [[[1, 0], [0, 1]], [[1, 0], [3, -1]]] {
            assert_eq!(cone_expansion(&b, &a, &small_params()).unwrap_err(), NumericsError::FiberGluedToFiber);
        }
        let wide = ConeParams { cone_halfwidth: 2.0, ..small_params() };
        assert!(matches!(cone_expansion(&b, &[[0, 1], [1, 0]], &wide), Err(NumericsError::InvalidCone(_))));
        let empty = ConeParams { grid: GridSpec { nx: 0, nz: 3 }, ..small_params() };
        assert_eq!(cone_expansion(&b, &[[0, 1], [1, 0]], &empty).unwrap_err(), NumericsError::EmptyGrid);
    }

    #[test]
    fn trajectory_csv() {
        let b = field(Sign::Plus, 10.0);
        let cfg = IntegrationConfig { stride: 100, ..IntegrationConfig::default() };
        let tr = integrate_field(&b, (0.2, -HALF_PI, 0.0), &cfg, true).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), tr.samples.len() + 1);
        assert!(tr.samples.len() > 30 && tr.samples.len() < 40);
    }

    struct Corrupted(BlockField);

    impl BlockVectorField for Corrupted {
        fn velocity(&self, x: f64, y: f64, z: f64) -> Velocity {
            let v = self.0.velocity(x, y, z);
            Velocity { dy: -v.dy, ..v }
        }
    }

    #[test]
    fn checklist_passes_for_both_fields() {
        for sign in [Sign::Plus, Sign::Minus] {
            let r = verify_block_properties(&field(sign, 10.0), 12, 1e-12);
            assert!(r.all_passed(), "{r:?}");
            assert_eq!(r.checks.len(), 5);
        }
    }

    #[test]
    fn corrupted_field_fails_the_first_check() {
        let r = verify_block_properties(&Corrupted(field(Sign::Plus, 10.0)), 12, 1e-12);
        assert!(!r.get(BlockCheck::IncreasingY).unwrap().passed());
        assert!(r.get(BlockCheck::ConstantX).unwrap().passed());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn x_is_conserved(x in -1.4f64..1.4, y in -1.5f64..1.5, lambda in 1.0f64..30.0) {
            let b = field(Sign::Plus, lambda);
            let tr = integrate_field(&b, (x, y, 0.0), &IntegrationConfig::new(1e-2, 50.0), true).unwrap();
            for s in &tr.samples {
                prop_assert!((s.x - x).abs() <= 1e-12);
            }
        }

        #[test]
        fn transit_is_z_equivariant(x in -1.2f64..1.2, z in 0.0f64..1.0, c in -3.0f64..3.0) {
            let b = field(Sign::Minus, 10.0);
            let cfg = IntegrationConfig::new(1e-2, 100.0);
            let a = transit_lifted(&b, x, z, &cfg).unwrap();
            let s = transit_lifted(&b, x, z + c, &cfg).unwrap();
            prop_assert!((a.dz - s.dz).abs() <= 1e-10);
            prop_assert!((a.time - s.time).abs() <= 1e-10);
        }
    }
}
