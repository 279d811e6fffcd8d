//! Zero-free disks by the argument principle.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::CharFnModel;
use crate::error::{Error, Result};
use crate::numeric::Complex64;

/// Tuning for disk scans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Relative modulus (against `1 + |f(0)|`) below which a scan is only
    /// reported as heuristic.
    pub tol: f64,
    pub initial_angles: usize,
    /// Cap on angular samples per circle.
    pub max_angles: usize,
    /// Width at which radius bisection stops, relative to the scan radius.
    pub bisect_rel_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            tol: 1e-9,
            initial_angles: 64,
            max_angles: 1 << 16,
            bisect_rel_tol: 1e-7,
        }
    }
}

/// Samples of a function along one circle.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleTrace {
    pub radius: f64,
    /// Net number of turns of the argument (zeros enclosed, for entire
    /// functions).
    pub winding: i64,
    /// Every consecutive argument step stayed below `π/2`.
    pub converged: bool,
    pub min_modulus: f64,
    pub argmin: Complex64,
    pub max_modulus: f64,
    /// Mean of `log|f|` over the circle (trapezoid on the refined nodes).
    /// By Jensen's formula this is `log|f(0)|` when the disk is zero-free.
    pub mean_log_modulus: f64,
    pub samples: usize,
}

impl CircleTrace {
    /// Argument-principle certificate: the trace resolved every argument
    /// step and the net winding is zero.
    pub fn is_zero_free(&self) -> bool {
        self.converged && self.winding == 0
    }
}

fn wrap(d: f64) -> f64 {
    let mut x = d % TAU;
    if x > PI {
        x -= TAU;
    } else if x <= -PI {
        x += TAU;
    }
    x
}

fn eval_values(f: &CharFnModel, pts: &[Complex64]) -> Result<Vec<Complex64>> {
    pts.par_iter().map(|&u| f.eval_unchecked(u)).collect()
}

/// Step of the tangential difference quotient for `d log f/dθ`.
const ANGLE_STEP: f64 = 1e-6;

/// `f(u)` together with `d log f(r e^{iθ})/dθ`, the latter from a
/// one-sided rotation of `u` (infinite when `f(u) = 0`).
fn eval_with_rate(f: &CharFnModel, pts: &[Complex64]) -> Result<Vec<(Complex64, f64)>> {
    let rot = Complex64::from_polar(1.0, ANGLE_STEP);
    pts.par_iter()
        .map(|&u| {
            let v = f.eval_unchecked(u)?;
            if v.norm() == 0.0 {
                return Ok((v, f64::INFINITY));
            }
            let w = f.eval_unchecked(u * rot)?;
            Ok((v, (w / v).ln().norm() / ANGLE_STEP))
        })
        .collect()
}

/// Traces `f` around `|u| = radius`, bisecting any arc on which the
/// increment of `log f` (modulus ratio and argument together) reaches `π/2`
/// or on which the arc width times the local rate `|d log f/dθ|` at either
/// end does. The rate test catches nearby zeros whose full turns the
/// endpoint increment alone would alias. Refinement stops when every arc
/// passes or the angular budget is spent.
pub fn winding_number(f: &CharFnModel, radius: f64, opts: &ScanOptions) -> Result<CircleTrace> {
    if radius <= 0.0 {
        let v = f.eval_unchecked(Complex64::new(0.0, 0.0))?;
        return Ok(CircleTrace {
            radius: 0.0,
            winding: 0,
            converged: v.norm() > 0.0,
            min_modulus: v.norm(),
            argmin: Complex64::new(0.0, 0.0),
            max_modulus: v.norm(),
            mean_log_modulus: v.norm().ln(),
            samples: 1,
        });
    }
    let n0 = opts.initial_angles.max(8);
    let min_width = TAU / opts.max_angles as f64;
    let mut thetas: Vec<f64> = (0..n0).map(|k| TAU * k as f64 / n0 as f64).collect();
    let pts: Vec<Complex64> = thetas.iter().map(|&t| Complex64::from_polar(radius, t)).collect();
    let mut samples = eval_with_rate(f, &pts)?;
    let mut converged = false;
    loop {
        let n = thetas.len();
        let mut bad = Vec::new();
        let mut stuck = false;
        for i in 0..n {
            let j = (i + 1) % n;
            let ((a, ra), (b, rb)) = (samples[i], samples[j]);
            let width = if j == 0 { TAU - thetas[i] } else { thetas[j] - thetas[i] };
            // increment of log f: a large modulus ratio signals a nearby
            // zero that the argument increment alone can alias past
            let needs = a.norm() == 0.0
                || b.norm() == 0.0
                || Complex64::new((b.norm() / a.norm()).ln(), wrap(b.arg() - a.arg())).norm() >= PI / 2.0
                || width * ra.max(rb) >= PI / 2.0;
            if needs {
                if width <= min_width {
                    stuck = true;
                } else {
                    bad.push((i, thetas[i] + 0.5 * width));
                }
            }
        }
        if bad.is_empty() {
            converged = !stuck;
            break;
        }
        let new_pts: Vec<Complex64> = bad.iter().map(|&(_, t)| Complex64::from_polar(radius, t)).collect();
        let new_vals = eval_with_rate(f, &new_pts)?;
        let mut merged_t = Vec::with_capacity(n + bad.len());
        let mut merged_v = Vec::with_capacity(n + bad.len());
        let mut k = 0;
        for i in 0..n {
            merged_t.push(thetas[i]);
            merged_v.push(samples[i]);
            if k < bad.len() && bad[k].0 == i {
                merged_t.push(bad[k].1);
                merged_v.push(new_vals[k]);
                k += 1;
            }
        }
        thetas = merged_t;
        samples = merged_v;
        if stuck {
            break;
        }
    }
    let values: Vec<Complex64> = samples.iter().map(|s| s.0).collect();
    let n = thetas.len();
    let mut total = 0.0;
    let mut mean_log = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        total += wrap(values[j].arg() - values[i].arg());
        let width = if j == 0 { TAU - thetas[i] } else { thetas[j] - thetas[i] };
        mean_log += 0.5 * width * (values[i].norm().ln() + values[j].norm().ln());
    }
    mean_log /= TAU;
    let (imin, min_modulus) = values
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.norm()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    let max_modulus = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(CircleTrace {
        radius,
        winding: (total / TAU).round() as i64,
        converged,
        min_modulus,
        argmin: Complex64::from_polar(radius, thetas[imin]),
        max_modulus,
        mean_log_modulus: mean_log,
        samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanStatus {
    Certified,
    Heuristic,
}

/// Outcome of a disk scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskScanReport {
    pub radius_scanned: f64,
    pub zero_free_radius: f64,
    pub min_modulus: f64,
    pub argmin_point: Complex64,
    pub winding_numbers: Vec<(f64, i64)>,
    pub status: ScanStatus,
}

impl DiskScanReport {
    pub fn is_certified(&self) -> bool {
        self.status == ScanStatus::Certified
    }
}

/// Scans circles of radius `grid_step, 2·grid_step, …, r_max`, certifying
/// each by its winding number. At the first circle that encloses or touches
/// a zero the radius is bisected between it and the previous good circle.
/// The minimum modulus over the zero-free disk is then refined by a local
/// pattern search from the best sampled point.
pub fn zero_free_radius(
    model: &CharFnModel,
    r_max: f64,
    grid_step: f64,
    opts: &ScanOptions,
) -> Result<DiskScanReport> {
    if grid_step <= 0.0 || !grid_step.is_finite() {
        return Err(Error::Argument(format!("grid_step must be positive, got {grid_step}")));
    }
    if r_max < 0.0 || r_max > model.validity_radius {
        return Err(Error::Argument(format!(
            "r_max = {r_max} must lie in [0, validity radius {}]",
            model.validity_radius
        )));
    }
    let origin = model.eval_unchecked(Complex64::new(0.0, 0.0))?;
    if origin.norm() < opts.tol {
        return Ok(DiskScanReport {
            radius_scanned: r_max,
            zero_free_radius: 0.0,
            min_modulus: origin.norm(),
            argmin_point: Complex64::new(0.0, 0.0),
            winding_numbers: vec![],
            status: ScanStatus::Heuristic,
        });
    }
    let mut radii: Vec<f64> = Vec::new();
    let mut k = 1;
    loop {
        let r = k as f64 * grid_step;
        if r >= r_max * (1.0 - 1e-12) {
            break;
        }
        radii.push(r);
        k += 1;
    }
    if r_max > 0.0 {
        radii.push(r_max);
    }

    let mut windings = Vec::new();
    let mut best = (origin.norm(), Complex64::new(0.0, 0.0));
    let mut good = 0.0;
    let mut failing: Option<f64> = None;
    for &r in &radii {
        let trace = winding_number(model, r, opts)?;
        windings.push((r, trace.winding));
        if trace.is_zero_free() {
            good = r;
            if trace.min_modulus < best.0 {
                best = (trace.min_modulus, trace.argmin);
            }
        } else {
            failing = Some(r);
            break;
        }
    }

    if let Some(mut hi) = failing {
        let mut hi_argmin = winding_number(model, hi, opts)?.argmin;
        let mut lo = good;
        let width_tol = opts.bisect_rel_tol * r_max.max(grid_step);
        while hi - lo > width_tol {
            let mid = 0.5 * (lo + hi);
            let trace = winding_number(model, mid, opts)?;
            if trace.is_zero_free() {
                lo = mid;
                if trace.min_modulus < best.0 {
                    best = (trace.min_modulus, trace.argmin);
                }
            } else {
                hi = mid;
                hi_argmin = trace.argmin;
            }
        }
        good = lo;
        // The bisection cannot resolve a zero closer to the circle than a
        // few of the finest arcs (more for multiple zeros); polish the
        // nearby zero and take its modulus instead.
        let slack = 32.0 * TAU * hi / opts.max_angles as f64;
        if let Some(z) = polish_zero(model, hi_argmin, r_max + slack)? {
            if z.norm() >= lo - slack && z.norm() <= hi + slack {
                good = z.norm().min(r_max).max(lo);
            }
        }
        if lo > 0.0 {
            let trace = winding_number(model, lo, opts)?;
            windings.push((lo, trace.winding));
        }
    }

    let (min_modulus, argmin_point) = refine_minimum(model, best, good)?;
    // Jensen: on a zero-free disk the circle mean of log|f| is log|f(0)|
    let status = if good > 0.0 && min_modulus >= opts.tol * (1.0 + origin.norm()) {
        ScanStatus::Certified
    } else {
        ScanStatus::Heuristic
    };
    Ok(DiskScanReport {
        radius_scanned: r_max,
        zero_free_radius: good,
        min_modulus,
        argmin_point,
        winding_numbers: windings,
        status,
    })
}

/// Newton iteration from `start` with a central-difference derivative.
/// Returns the limit when it converges to a point where `f` is negligible
/// relative to `f(0)`.
fn polish_zero(model: &CharFnModel, start: Complex64, limit: f64) -> Result<Option<Complex64>> {
    let scale = model.eval_unchecked(Complex64::new(0.0, 0.0))?.norm();
    let mut z = start;
    let mut converged = false;
    for _ in 0..200 {
        if z.norm() > limit.min(model.validity_radius) {
            return Ok(None);
        }
        let f = model.eval_unchecked(z)?;
        if f.norm() == 0.0 {
            converged = true;
            break;
        }
        let h = 1e-6 * (1.0 + z.norm());
        let df = (model.eval_unchecked(z + h)? - model.eval_unchecked(z - h)?) / (2.0 * h);
        if df.norm() == 0.0 || !df.is_finite() {
            break;
        }
        let step = f / df;
        z -= step;
        if step.norm() < 1e-14 * (1.0 + z.norm()) {
            converged = true;
            break;
        }
    }
    let residual = model.eval_unchecked(z)?.norm();
    if converged || residual < 1e-12 * scale.max(1.0) {
        if residual < 1e-6 * scale.max(1.0) {
            return Ok(Some(z));
        }
    }
    Ok(None)
}

/// Compass search for a smaller `|f|` within the closed disk of radius
/// `bound`, starting from `start`.
fn refine_minimum(model: &CharFnModel, start: (f64, Complex64), bound: f64) -> Result<(f64, Complex64)> {
    let (mut best_val, mut best_pt) = start;
    if bound <= 0.0 {
        return Ok((best_val, best_pt));
    }
    let mut step = bound / 32.0;
    let dirs = [
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, -1.0),
    ];
    while step > bound * 1e-9 {
        let candidates: Vec<Complex64> = dirs
            .iter()
            .map(|d| {
                let p = best_pt + d * step;
                if p.norm() > bound {
                    p * (bound / p.norm())
                } else {
                    p
                }
            })
            .collect();
        let vals = eval_values(model, &candidates)?;
        let mut improved = false;
        for (p, v) in candidates.iter().zip(vals) {
            if v.norm() < best_val {
                best_val = v.norm();
                best_pt = *p;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((best_val, best_pt))
}

/// Maximum of `|f|` over a circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleMax {
    pub max_modulus: f64,
    pub argmax: Complex64,
}

/// Maximizes `|f|` on `|u| = radius`: 256 equispaced angles, then golden
/// section search on the bracket around each of the best few samples.
pub fn circle_max(model: &CharFnModel, radius: f64) -> Result<CircleMax> {
    const N: usize = 256;
    if radius == 0.0 {
        let v = model.eval_unchecked(Complex64::new(0.0, 0.0))?;
        return Ok(CircleMax {
            max_modulus: v.norm(),
            argmax: Complex64::new(0.0, 0.0),
        });
    }
    let h = TAU / N as f64;
    let pts: Vec<Complex64> = (0..N).map(|k| Complex64::from_polar(radius, k as f64 * h)).collect();
    let vals: Vec<f64> = eval_values(model, &pts)?.iter().map(|v| v.norm()).collect();
    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let modulus_at = |t: f64| -> Result<f64> { Ok(model.eval_unchecked(Complex64::from_polar(radius, t))?.norm()) };
    let refined: Vec<(f64, f64)> = order[..4]
        .par_iter()
        .map(|&i| golden_max(&modulus_at, (i as f64 - 1.0) * h, (i as f64 + 1.0) * h))
        .collect::<Result<_>>()?;
    let (mut best_t, mut best_v) = (order[0] as f64 * h, vals[order[0]]);
    for (t, v) in refined {
        if v > best_v {
            best_v = v;
            best_t = t;
        }
    }
    Ok(CircleMax {
        max_modulus: best_v,
        argmax: Complex64::from_polar(radius, best_t),
    })
}

fn golden_max(f: &(dyn Fn(f64) -> Result<f64> + Sync), mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfn::model::cosh_shift_first_zero;
    use approx::assert_abs_diff_eq;

    fn cosine() -> CharFnModel {
        // cos(u) has real zeros ±π/2
        CharFnModel::from_fn(|u| Ok(u.cos()), f64::INFINITY, 0.0, 1.0, "cos")
    }

    #[test]
    fn cosine_winds_twice_on_radius_two() {
        let t = winding_number(&cosine(), 2.0, &ScanOptions::default()).unwrap();
        assert!(t.converged);
        assert_eq!(t.winding, 2);
        let t = winding_number(&cosine(), 1.0, &ScanOptions::default()).unwrap();
        assert_eq!(t.winding, 0);
        // Jensen: mean log|cos| on a zero-free circle is log|cos 0| = 0
        assert_abs_diff_eq!(t.mean_log_modulus, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_has_no_zeros() {
        let g = CharFnModel::gaussian(0.0, 1.0);
        let rep = zero_free_radius(&g, 5.0, 0.25, &ScanOptions::default()).unwrap();
        assert_eq!(rep.zero_free_radius, 5.0);
        assert!(rep.winding_numbers.iter().all(|w| w.1 == 0));
        assert!(rep.is_certified());
        assert!(rep.zero_free_radius <= rep.radius_scanned);
        // smallest |e^{u²/2}| on the disk is at ±5i
        assert_abs_diff_eq!(rep.min_modulus, (-12.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn rademacher_radius_is_half_pi() {
        let rep = zero_free_radius(&CharFnModel::rademacher(), 3.0, 0.1, &ScanOptions::default()).unwrap();
        assert!((rep.zero_free_radius - PI / 2.0).abs() < 1e-5, "{}", rep.zero_free_radius);
        assert!(rep.zero_free_radius <= PI / 2.0 + 1e-12);
    }

    #[test]
    fn ising_site_radius() {
        let m = CharFnModel::ising_site(1.0, 1.0);
        let rep = zero_free_radius(&m, 3.0, 0.1, &ScanOptions::default()).unwrap();
        let expected = cosh_shift_first_zero(1.0);
        assert!((rep.zero_free_radius - expected).abs() < 1e-5, "{rep:?}");
    }

    #[test]
    fn rademacher_sums_share_the_radius() {
        for n in [1, 2, 4, 8] {
            let m = CharFnModel::rademacher().iid_sum(n);
            let rep = zero_free_radius(&m, 2.0, 0.1, &ScanOptions::default()).unwrap();
            assert!((rep.zero_free_radius - PI / 2.0).abs() < 1e-5, "n={n} {rep:?}");
        }
    }

    #[test]
    fn zero_at_origin_reports_zero_radius() {
        let m = CharFnModel::from_fn(|u| Ok(u), f64::INFINITY, 0.0, 1.0, "identity");
        let rep = zero_free_radius(&m, 1.0, 0.1, &ScanOptions::default()).unwrap();
        assert_eq!(rep.zero_free_radius, 0.0);
    }

    #[test]
    fn scan_argument_checks() {
        let m = CharFnModel::from_fn(|_| Ok(Complex64::new(1.0, 0.0)), 1.0, 0.0, 0.0, "one");
        assert!(zero_free_radius(&m, 2.0, 0.1, &ScanOptions::default()).is_err());
        assert!(zero_free_radius(&m, 0.5, 0.0, &ScanOptions::default()).is_err());
    }

    #[test]
    fn gaussian_circle_max_is_on_real_axis() {
        let g = CharFnModel::gaussian(0.0, 1.0);
        let m = circle_max(&g, 10.0).unwrap();
        assert_abs_diff_eq!(m.max_modulus.ln(), 50.0, epsilon = 1e-9);
    }

    #[test]
    fn cosine_circle_max_off_grid() {
        // |cos(u)| on |u| = r peaks at ±ir with value cosh r
        let m = circle_max(&cosine(), 0.77).unwrap();
        assert_abs_diff_eq!(m.max_modulus, 0.77f64.cosh(), epsilon = 1e-12);
    }
}
