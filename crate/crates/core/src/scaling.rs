//! Finite-size scaling: crossings, data collapse, dynamical collapse and
//! boundary fits.
//!
//! Uncertainties come from a parametric bootstrap: every mean is redrawn
//! from a normal distribution with its standard error and the fit is
//! repeated. This is the disorder bootstrap expressed through the
//! aggregated `(mean, se)` rows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ResultTable;

/// Observable against a control parameter at one system size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub size: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub err: Vec<f64>,
}

impl Series {
    pub fn new(size: f64, x: Vec<f64>, y: Vec<f64>, err: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != err.len() {
            return Err(Error::ShapeMismatch(
                "series columns differ in length".into(),
            ));
        }
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        Ok(Self {
            size,
            x: idx.iter().map(|&k| x[k]).collect(),
            y: idx.iter().map(|&k| y[k]).collect(),
            err: idx.iter().map(|&k| err[k]).collect(),
        })
    }

    fn resampled(&self, rng: &mut ChaCha8Rng) -> Self {
        let y = self
            .y
            .iter()
            .zip(&self.err)
            .map(|(y, e)| {
                y + e * {
                    let z: f64 = StandardNormal.sample(rng);
                    z
                }
            })
            .collect();
        Self { y, ..self.clone() }
    }
}

/// One series per width for observable `obs`, against `p`. Rows with
/// several heights per width are kept apart only by width; use a table
/// with one height per width.
pub fn series_by_size(table: &ResultTable, obs: &str) -> Result<Vec<Series>> {
    let mut widths: Vec<usize> = table.observable(obs).map(|r| r.width).collect();
    widths.sort_unstable();
    widths.dedup();
    if widths.is_empty() {
        return Err(Error::Fit(format!("no rows for observable `{obs}`")));
    }
    widths
        .into_iter()
        .map(|w| {
            let rows: Vec<_> = table.observable(obs).filter(|r| r.width == w).collect();
            Series::new(
                w as f64,
                rows.iter().map(|r| r.p).collect(),
                rows.iter().map(|r| r.mean).collect(),
                rows.iter().map(|r| r.se).collect(),
            )
        })
        .collect()
}

/// Least-squares line `y = slope * x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::Fit("linear fit needs at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("linear fit over a single abscissa".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCrossing {
    pub size_a: f64,
    pub size_b: f64,
    pub p: f64,
    /// Difference of slopes at the crossing; the weight in the mean.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub p_c: f64,
    pub err: f64,
    pub pairs: Vec<PairCrossing>,
}

/// Steepest sign change of `a - b`; flat tails cross only through noise.
fn pair_crossing(a: &Series, b: &Series) -> Option<PairCrossing> {
    let common: Vec<(f64, f64)> =
        a.x.iter()
            .zip(&a.y)
            .filter_map(|(&x, &ya)| {
                b.x.iter()
                    .position(|&xb| (xb - x).abs() <= 1e-12 * x.abs().max(1.0))
                    .map(|k| (x, ya - b.y[k]))
            })
            .collect();
    let mut out = None;
    for w in common.windows(2) {
        let ((x0, d0), (x1, d1)) = (w[0], w[1]);
        let crosses = d0 == 0.0 || d1 == 0.0 || (d0 < 0.0) != (d1 < 0.0);
        if !crosses || (d0 == 0.0 && d1 == 0.0) {
            continue;
        }
        let p = if d1 == d0 {
            x0
        } else {
            x0 - d0 * (x1 - x0) / (d1 - d0)
        };
        let weight = ((d1 - d0) / (x1 - x0)).abs();
        if out
            .as_ref()
            .is_none_or(|c: &PairCrossing| weight > c.weight)
        {
            out = Some(PairCrossing {
                size_a: a.size,
                size_b: b.size,
                p,
                weight,
            });
        }
    }
    out
}

fn crossing_point(curves: &[Series]) -> Result<(f64, Vec<PairCrossing>)> {
    if curves.len() < 2 {
        return Err(Error::Fit("crossing needs at least two sizes".into()));
    }
    let mut pairs = Vec::new();
    for (i, a) in curves.iter().enumerate() {
        for b in &curves[i + 1..] {
            pairs.extend(pair_crossing(a, b));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Fit("curves never cross on the common grid".into()));
    }
    let wsum: f64 = pairs.iter().map(|c| c.weight).sum();
    let p_c = if wsum > 0.0 {
        pairs.iter().map(|c| c.weight * c.p).sum::<f64>() / wsum
    } else {
        pairs.iter().map(|c| c.p).sum::<f64>() / pairs.len() as f64
    };
    Ok((p_c, pairs))
}

/// Crossing point of curves for different sizes: pairwise intersections
/// of piecewise-linear interpolants on the common grid, combined by a
/// slope-weighted mean; bootstrap error from `n_boot` resamples.
pub fn estimate_crossing(curves: &[Series], n_boot: usize, seed: u64) -> Result<Crossing> {
    let (p_c, pairs) = crossing_point(curves)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boots: Vec<f64> = (0..n_boot)
        .filter_map(|_| {
            let resampled: Vec<Series> = curves.iter().map(|c| c.resampled(&mut rng)).collect();
            crossing_point(&resampled).ok().map(|(p, _)| p)
        })
        .collect();
    Ok(Crossing {
        p_c,
        err: std_dev(&boots),
        pairs,
    })
}

/// Point of a collapse plot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledPoint {
    pub size: f64,
    pub x: f64,
    pub y: f64,
}

/// Spread of points around one curve: every point is compared with a
/// straight line through the bracketing points of every other size. The
/// mean squared residual is divided by the variance of `y`, so the value
/// is invariant under affine maps of the observable. Infinite when fewer
/// than three points overlap another size.
pub fn collapse_quality(groups: &[Vec<(f64, f64)>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().map(|p| p.1).collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
    let mut total = 0.0;
    let mut count = 0usize;
    let mut xs = Vec::with_capacity(2 * groups.len());
    let mut ys = Vec::with_capacity(2 * groups.len());
    for (k, g) in groups.iter().enumerate() {
        for &(x, y) in g {
            xs.clear();
            ys.clear();
            for (m, other) in groups.iter().enumerate() {
                if m == k || other.len() < 2 {
                    continue;
                }
                let i = other.partition_point(|p| p.0 <= x);
                if i == 0 || i == other.len() {
                    continue;
                }
                for p in &other[i - 1..=i] {
                    xs.push(p.0);
                    ys.push(p.1);
                }
            }
            if let Ok((slope, icpt)) = linear_fit(&xs, &ys) {
                total += (y - slope * x - icpt).powi(2);
                count += 1;
            }
        }
    }
    if count < 3 {
        return f64::INFINITY;
    }
    if var == 0.0 {
        return 0.0;
    }
    total / count as f64 / var
}

fn sorted_groups(groups: Vec<Vec<(f64, f64)>>) -> Vec<Vec<(f64, f64)>> {
    groups
        .into_iter()
        .map(|mut g| {
            g.sort_by(|a, b| a.0.total_cmp(&b.0));
            g
        })
        .collect()
}

fn static_groups(data: &[Series], p_c: f64, nu: f64) -> Vec<Vec<(f64, f64)>> {
    sorted_groups(
        data.iter()
            .map(|s| {
                let scale = s.size.powf(1.0 / nu);
                s.x.iter()
                    .zip(&s.y)
                    .map(|(&p, &y)| ((p - p_c) * scale, y))
                    .collect()
            })
            .collect(),
    )
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimizes `f` on `[lo, hi]`: a coarse scan picks a bracket, a golden
/// section search refines it to `tol`.
pub fn line_minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const SCAN: usize = 40;
    let step = (hi - lo) / SCAN as f64;
    let (best_k, _) =
        (0..=SCAN)
            .map(|k| (k, f(lo + step * k as f64)))
            .fold(
                (0, f64::INFINITY),
                |acc, (k, v)| if v < acc.1 { (k, v) } else { acc },
            );
    let mut a = lo + step * best_k.saturating_sub(1) as f64;
    let mut b = (lo + step * (best_k + 1) as f64).min(hi);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    let centre = f(lo + step * best_k as f64);
    let x = 0.5 * (a + b);
    let fx = f(x);
    if centre < fx {
        (lo + step * best_k as f64, centre)
    } else {
        (x, fx)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    /// Half-width of the `p_c` search interval around the start value.
    pub p_window: f64,
    /// `nu` is searched in `[nu0 / nu_factor, nu0 * nu_factor]`.
    pub nu_factor: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self {
            p_window: 0.15,
            nu_factor: 3.0,
            tol: 1e-4,
            max_iter: 50,
            n_boot: 40,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub p_c: f64,
    pub p_c_err: f64,
    pub nu: f64,
    pub nu_err: f64,
    pub quality: f64,
    /// False if coordinate descent hit the iteration limit.
    pub converged: bool,
    pub points: Vec<ScaledPoint>,
}

fn collapse_search(
    data: &[Series],
    p0: f64,
    nu0: f64,
    o: &CollapseOptions,
) -> (f64, f64, f64, bool) {
    let xmin = data
        .iter()
        .flat_map(|s| s.x.first())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let xmax = data
        .iter()
        .flat_map(|s| s.x.last())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let (plo, phi) = ((p0 - o.p_window).max(xmin), (p0 + o.p_window).min(xmax));
    let (nlo, nhi) = (nu0 / o.nu_factor, nu0 * o.nu_factor);
    let (mut pc, mut nu) = (p0.clamp(plo, phi), nu0);
    let mut q = collapse_quality(&static_groups(data, pc, nu));
    for _ in 0..o.max_iter {
        let (new_pc, _) = line_minimize(
            |p| collapse_quality(&static_groups(data, p, nu)),
            plo,
            phi,
            o.tol / 10.0,
        );
        let (new_nu, new_q) = line_minimize(
            |n| collapse_quality(&static_groups(data, new_pc, n)),
            nlo,
            nhi,
            o.tol / 10.0,
        );
        let moved = (new_pc - pc).abs().max((new_nu - nu).abs());
        let improved = new_q <= q;
        if improved {
            pc = new_pc;
            nu = new_nu;
            q = new_q;
        }
        if moved < o.tol || !improved {
            return (pc, nu, q, true);
        }
    }
    (pc, nu, q, false)
}

/// Fits `y = f((p - p_c) L^{1/nu})` by coordinate descent from
/// `(p0, nu0)`, with bootstrap errors.
pub fn fit_collapse(
    data: &[Series],
    p0: f64,
    nu0: f64,
    opts: &CollapseOptions,
) -> Result<CollapseFit> {
    if data.len() < 3 {
        return Err(Error::Fit("collapse needs at least three sizes".into()));
    }
    let (p_c, nu, quality, converged) = collapse_search(data, p0, nu0, opts);
    if !quality.is_finite() {
        return Err(Error::Fit("scaled curves do not overlap".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pcs = Vec::new();
    let mut nus = Vec::new();
    let boot_opts = CollapseOptions {
        p_window: opts.p_window.min(0.05),
        ..opts.clone()
    };
    for _ in 0..opts.n_boot {
        let resampled: Vec<Series> = data.iter().map(|s| s.resampled(&mut rng)).collect();
        let (p, n, q, _) = collapse_search(&resampled, p_c, nu, &boot_opts);
        if q.is_finite() {
            pcs.push(p);
            nus.push(n);
        }
    }
    let points = data
        .iter()
        .flat_map(|s| {
            let scale = s.size.powf(1.0 / nu);
            s.x.iter().zip(&s.y).map(move |(&p, &y)| ScaledPoint {
                size: s.size,
                x: (p - p_c) * scale,
                y,
            })
        })
        .collect();
    Ok(CollapseFit {
        p_c,
        p_c_err: std_dev(&pcs),
        nu,
        nu_err: std_dev(&nus),
        quality,
        converged,
        points,
    })
}

/// Observable at one `(L, L_tau)` point of a dynamical scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynPoint {
    pub width: f64,
    pub height: f64,
    pub y: f64,
    pub err: f64,
}

/// All `(L, L_tau)` points of observable `obs` at control value `p`.
pub fn dynamic_points(table: &ResultTable, obs: &str, p: f64) -> Vec<DynPoint> {
    table
        .observable(obs)
        .filter(|r| (r.p - p).abs() < 1e-12)
        .map(|r| DynPoint {
            width: r.width as f64,
            height: r.height as f64,
            y: r.mean,
            err: r.se,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicOptions {
    /// Early window is `theta < early_max`.
    pub early_max: f64,
    /// Late window is `theta > late_min`.
    pub late_min: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Skips the `z` search.
    pub fixed_z: Option<f64>,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for DynamicOptions {
    fn default() -> Self {
        Self {
            early_max: 0.3,
            late_min: 1.5,
            z_min: 0.5,
            z_max: 3.0,
            fixed_z: None,
            n_boot: 40,
            seed: 1,
        }
    }
}

/// `h(theta)` with `theta = L_tau / L^z`: early form `A theta^{-1/z}` with
/// `A = pi h0`, late form `B exp(-2 pi h1 theta)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicCollapse {
    pub z: f64,
    pub z_err: f64,
    /// Early amplitude `A`.
    pub amplitude: f64,
    pub h0: f64,
    pub h0_err: f64,
    pub h1: f64,
    pub h1_err: f64,
    pub quality: f64,
    pub early_window: (f64, f64),
    pub late_window: (f64, f64),
    pub n_early: usize,
    pub n_late: usize,
    pub points: Vec<ScaledPoint>,
}

fn theta(p: &DynPoint, z: f64) -> f64 {
    p.height / p.width.powf(z)
}

fn dynamic_groups(points: &[DynPoint], z: f64) -> Vec<Vec<(f64, f64)>> {
    let mut widths: Vec<f64> = points.iter().map(|p| p.width).collect();
    widths.sort_by(f64::total_cmp);
    widths.dedup();
    sorted_groups(
        widths
            .iter()
            .map(|&w| {
                points
                    .iter()
                    .filter(|p| p.width == w)
                    .map(|p| (theta(p, z).ln(), p.y))
                    .collect()
            })
            .collect(),
    )
}

struct Windows {
    amplitude: f64,
    h1: f64,
    n_early: usize,
    n_late: usize,
}

fn window_fits(points: &[DynPoint], z: f64, o: &DynamicOptions) -> Result<Windows> {
    let early: Vec<f64> = points
        .iter()
        .filter(|p| theta(p, z) < o.early_max)
        .map(|p| {
            if p.y <= 0.0 {
                Err(Error::Fit("nonpositive value in the early window".into()))
            } else {
                Ok(p.y.ln() + theta(p, z).ln() / z)
            }
        })
        .collect::<Result<_>>()?;
    if early.is_empty() {
        return Err(Error::Fit(format!(
            "no points with theta < {}",
            o.early_max
        )));
    }
    let amplitude = (early.iter().sum::<f64>() / early.len() as f64).exp();
    let late: Vec<&DynPoint> = points.iter().filter(|p| theta(p, z) > o.late_min).collect();
    if late.iter().any(|p| p.y <= 0.0) {
        return Err(Error::Fit("nonpositive value in the late window".into()));
    }
    let xs: Vec<f64> = late.iter().map(|p| theta(p, z)).collect();
    let ys: Vec<f64> = late.iter().map(|p| p.y.ln()).collect();
    let (slope, _) = linear_fit(&xs, &ys)
        .map_err(|_| Error::Fit(format!("need two distinct theta > {}", o.late_min)))?;
    Ok(Windows {
        amplitude,
        h1: -slope / (2.0 * std::f64::consts::PI),
        n_early: early.len(),
        n_late: late.len(),
    })
}

fn dynamic_z(points: &[DynPoint], o: &DynamicOptions) -> (f64, f64) {
    match o.fixed_z {
        Some(z) => (z, collapse_quality(&dynamic_groups(points, z))),
        None => line_minimize(
            |z| collapse_quality(&dynamic_groups(points, z)),
            o.z_min,
            o.z_max,
            1e-5,
        ),
    }
}

/// Dynamical exponent minimizing the collapse spread, and that spread. Needs
/// no window coverage, unlike [`fit_dynamic_collapse`].
pub fn fit_dynamical_exponent(points: &[DynPoint], opts: &DynamicOptions) -> Result<(f64, f64)> {
    let (z, quality) = dynamic_z(points, opts);
    if !quality.is_finite() {
        return Err(Error::Fit("dynamical curves do not overlap".into()));
    }
    Ok((z, quality))
}

/// Collapses `y(L, L_tau)` onto `h(L_tau / L^z)` and fits the early and
/// late forms in their windows.
pub fn fit_dynamic_collapse(points: &[DynPoint], opts: &DynamicOptions) -> Result<DynamicCollapse> {
    if opts.early_max >= opts.late_min {
        return Err(Error::Fit("early and late windows overlap".into()));
    }
    let (z, quality) = fit_dynamical_exponent(points, opts)?;
    let w = window_fits(points, z, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut zs, mut h0s, mut h1s) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..opts.n_boot {
        let resampled: Vec<DynPoint> = points
            .iter()
            .map(|p| DynPoint {
                y: p.y
                    + p.err * {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    },
                ..*p
            })
            .collect();
        let (zb, q) = dynamic_z(&resampled, opts);
        if !q.is_finite() {
            continue;
        }
        if let Ok(wb) = window_fits(&resampled, zb, opts) {
            zs.push(zb);
            h0s.push(wb.amplitude / std::f64::consts::PI);
            h1s.push(wb.h1);
        }
    }
    let points_out = points
        .iter()
        .map(|p| ScaledPoint {
            size: p.width,
            x: theta(p, z),
            y: p.y,
        })
        .collect();
    Ok(DynamicCollapse {
        z,
        z_err: std_dev(&zs),
        amplitude: w.amplitude,
        h0: w.amplitude / std::f64::consts::PI,
        h0_err: std_dev(&h0s),
        h1: w.h1,
        h1_err: std_dev(&h1s),
        quality,
        early_window: (0.0, opts.early_max),
        late_window: (opts.late_min, f64::INFINITY),
        n_early: w.n_early,
        n_late: w.n_late,
        points: points_out,
    })
}

/// Chord distance `(L / pi) sin(pi |a - b| / L)` on a ring of length `l`.
pub fn chord(a: f64, b: f64, l: f64) -> f64 {
    l / std::f64::consts::PI * (std::f64::consts::PI * (a - b).abs() / l).sin()
}

/// Cross-ratio `x12 x34 / (x13 x24)` of four ordered points on a ring.
pub fn cross_ratio(x1: f64, x2: f64, x3: f64, x4: f64, l: f64) -> Result<f64> {
    let den = chord(x1, x3, l) * chord(x2, x4, l);
    if den.abs() < 1e-12 {
        return Err(Error::Fit("coincident points in cross-ratio".into()));
    }
    Ok(chord(x1, x2, l) * chord(x3, x4, l) / den)
}

/// Logarithm used by the log-sin fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    Two,
    #[default]
    E,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Two => x.log2(),
            LogBase::E => x.ln(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogSinFit {
    pub c: f64,
    pub b: f64,
    pub rms: f64,
    pub base: LogBase,
}

/// Fits `y = c log[(L / pi) sin(pi L_A / L)] + b`.
pub fn fit_log_sin(la: &[f64], y: &[f64], l: f64, base: LogBase) -> Result<LogSinFit> {
    if la.len() < 3 || la.len() != y.len() {
        return Err(Error::Fit("log-sin fit needs at least three points".into()));
    }
    if la.iter().any(|&a| a <= 0.0 || a >= l) {
        return Err(Error::Fit(
            "interval lengths must lie strictly inside (0, L)".into(),
        ));
    }
    let xs: Vec<f64> = la.iter().map(|&a| base.log(chord(a, 0.0, l))).collect();
    let (c, b) = linear_fit(&xs, y)?;
    let rms = (xs
        .iter()
        .zip(y)
        .map(|(x, y)| (y - c * x - b).powi(2))
        .sum::<f64>()
        / xs.len() as f64)
        .sqrt();
    Ok(LogSinFit { c, b, rms, base })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub delta: f64,
    pub amplitude: f64,
    pub n: usize,
}

/// Slope of `log y` against `log chi` over the points with `chi <= chi_max`.
pub fn fit_power_tail(chi: &[f64], y: &[f64], chi_max: f64) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = chi
        .iter()
        .zip(y)
        .filter(|(c, _)| **c <= chi_max)
        .map(|(&c, &v)| (c, v))
        .collect();
    if pts.iter().any(|&(c, v)| c <= 0.0 || v <= 0.0) {
        return Err(Error::Fit(
            "nonpositive value in the power-law window".into(),
        ));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (delta, icpt) = linear_fit(&xs, &ys)?;
    Ok(PowerFit {
        delta,
        amplitude: icpt.exp(),
        n: pts.len(),
    })
}

/// Antipodal segments `[0, len]` and `[L/2, L/2 + len]`; equals
/// `sin^2(pi len / L)`.
pub fn antipodal_cross_ratio(len: f64, l: f64) -> Result<f64> {
    cross_ratio(0.0, len, l / 2.0, l / 2.0 + len, l)
}

/// `(index, mean, se)` of the rows `prefix@index` at width `width` and
/// control value `p`, sorted by index.
pub fn profile(table: &ResultTable, prefix: &str, width: usize, p: f64) -> Vec<(f64, f64, f64)> {
    let tag = format!("{prefix}@");
    let mut out: Vec<(f64, f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.width == width && (r.p - p).abs() < 1e-12)
        .filter_map(|r| {
            let idx: f64 = r.obs.strip_prefix(&tag)?.parse().ok()?;
            Some((idx, r.mean, r.se))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "two" | "2" => Ok(LogBase::Two),
            "e" => Ok(LogBase::E),
            _ => Err(format!("unknown log base `{s}` (two, e)")),
        }
    }
}

/// Scatter data grouped by system size, plus axis labels for a plot script.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub log_x: bool,
    pub log_y: bool,
    /// `(size, x, y)`.
    pub points: Vec<(f64, f64, f64)>,
}

impl PlotSpec {
    pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: Vec<(f64, f64, f64)>) -> Self {
        Self {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            log_x: false,
            log_y: false,
            points,
        }
    }

    /// gnuplot script reading `data`; one block per size.
    pub fn gnuplot(&self, data: &str) -> String {
        let mut sizes: Vec<f64> = self.points.iter().map(|p| p.0).collect();
        sizes.sort_by(f64::total_cmp);
        sizes.dedup();
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str(&format!("set title \"{}\"\n", self.title));
        s.push_str(&format!("set xlabel \"{}\"\n", self.xlabel));
        s.push_str(&format!("set ylabel \"{}\"\n", self.ylabel));
        if self.log_x {
            s.push_str("set logscale x\n");
        }
        if self.log_y {
            s.push_str("set logscale y\n");
        }
        let curves: Vec<String> = sizes
            .iter()
            .map(|l| {
                format!("'{data}' using ($1=={l} ? $2 : 1/0):3 skip 1 with linespoints title 'L={l}'")
            })
            .collect();
        s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
        s
    }
}

/// Writes `<stem>.csv` (size,x,y) and `<stem>.gp` into `dir`; returns the
/// file names.
pub fn write_plot_files(dir: &std::path::Path, stem: &str, plot: &PlotSpec) -> Result<Vec<String>> {
    let csv_name = format!("{stem}.csv");
    let gp_name = format!("{stem}.gp");
    let mut w = csv::Writer::from_path(dir.join(&csv_name))?;
    w.write_record(["size", "x", "y"])?;
    for (l, x, y) in &plot.points {
        w.write_record([l.to_string(), x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    std::fs::write(dir.join(&gp_name), plot.gnuplot(&csv_name))?;
    Ok(vec![csv_name, gp_name])
}
