use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;

use super::{ResponsibilityMatrix, SogmmConfig};
use crate::error::{Error, Result};
use crate::gaussian::{LogSumExp, PreparedGaussian};
use crate::types::{Component, Gmm4, Mixture};

/// Result of an EM run.
#[derive(Clone, Debug)]
pub struct EmOutcome {
    pub model: Gmm4,
    /// Number of E-steps performed.
    pub iterations: usize,
    /// Data log-likelihood after each E-step.
    pub log_likelihood_trace: Vec<f64>,
    /// Components removed for falling below one point of effective support.
    pub removed_components: usize,
    pub converged: bool,
}

/// Log-space E-step.
///
/// `ln γ_nb = ln π_b + ln N(x_n; μ_b, Σ_b) - ln Σ_a π_a N(x_n; μ_a, Σ_a)`,
/// with the Gaussian term in Cholesky form. Returns the responsibilities and
/// the data log-likelihood.
pub fn e_step(
    points: &[Vector4<f64>],
    components: &[Component<4>],
) -> Result<(ResponsibilityMatrix, f64)> {
    if components.is_empty() {
        return Err(Error::EmptySubset);
    }
    let prepared = components
        .iter()
        .map(PreparedGaussian::from_component)
        .collect::<Result<Vec<_>>>()?;
    let log_w: Vec<f64> = components.iter().map(|c| c.weight.ln()).collect();
    let j = components.len();
    let mut resp = ResponsibilityMatrix::zeros(points.len(), j);
    let mut per_point = vec![0.0; points.len()];
    resp.data_mut()
        .par_chunks_mut(j)
        .zip(per_point.par_iter_mut())
        .zip(points.par_iter())
        .with_min_len(64)
        .for_each(|((row, ll), x)| {
            let mut acc = LogSumExp::new();
            for ((slot, g), lw) in row.iter_mut().zip(&prepared).zip(&log_w) {
                let t = lw + g.log_density(x);
                *slot = t;
                acc.add(t);
            }
            let norm = acc.value();
            for slot in row.iter_mut() {
                *slot = (*slot - norm).exp();
            }
            *ll = norm;
        });
    let total: f64 = per_point.iter().sum();
    if !total.is_finite() {
        return Err(Error::NonFinite("data log-likelihood"));
    }
    Ok((resp, total))
}

/// M-step: weights from mean responsibility, weighted means and scatter plus
/// `regularization · I`. Components whose total responsibility is below one
/// point are dropped and the remaining weights renormalized; the second
/// return value counts them.
pub fn m_step(
    points: &[Vector4<f64>],
    resp: &ResponsibilityMatrix,
    regularization: f64,
) -> Result<(Vec<Component<4>>, usize)> {
    let n = points.len();
    if n == 0 || resp.n_points() != n {
        return Err(Error::InvalidInput(format!(
            "{} responsibility rows for {} points",
            resp.n_points(),
            n
        )));
    }
    let j = resp.n_components();
    let mut mass = vec![0.0f64; j];
    let mut first = vec![Vector4::<f64>::zeros(); j];
    for (x, row) in points.iter().zip((0..n).map(|i| resp.row(i))) {
        for (b, &g) in row.iter().enumerate() {
            if g != 0.0 {
                mass[b] += g;
                first[b] += g * x;
            }
        }
    }
    let means: Vec<Vector4<f64>> = first
        .iter()
        .zip(&mass)
        .map(|(s, &m)| if m > 0.0 { s / m } else { *s })
        .collect();
    // Upper triangle of the weighted scatter, two-pass for accuracy.
    let mut scatter = vec![[0.0f64; 10]; j];
    for (x, row) in points.iter().zip((0..n).map(|i| resp.row(i))) {
        for (b, &g) in row.iter().enumerate() {
            if g != 0.0 {
                let d = x - means[b];
                let s = &mut scatter[b];
                let gd0 = g * d[0];
                let gd1 = g * d[1];
                let gd2 = g * d[2];
                s[0] += gd0 * d[0];
                s[1] += gd0 * d[1];
                s[2] += gd0 * d[2];
                s[3] += gd0 * d[3];
                s[4] += gd1 * d[1];
                s[5] += gd1 * d[2];
                s[6] += gd1 * d[3];
                s[7] += gd2 * d[2];
                s[8] += gd2 * d[3];
                s[9] += g * d[3] * d[3];
            }
        }
    }
    let min_mass = 1.0;
    let kept_mass: f64 = mass.iter().filter(|&&m| m >= min_mass).sum();
    let mut comps = Vec::with_capacity(j);
    let mut removed = 0;
    for b in 0..j {
        if mass[b] < min_mass {
            removed += 1;
            continue;
        }
        let s = &scatter[b];
        let m = mass[b];
        let mut cov = Matrix4::new(
            s[0], s[1], s[2], s[3], //
            s[1], s[4], s[5], s[6], //
            s[2], s[5], s[7], s[8], //
            s[3], s[6], s[8], s[9],
        ) / m;
        for d in 0..4 {
            cov[(d, d)] += regularization;
        }
        comps.push(Component::new(m / kept_mass, means[b], cov));
    }
    if comps.is_empty() {
        return Err(Error::InvalidModel(
            "every component lost its support".into(),
        ));
    }
    Ok((comps, removed))
}

/// Per-component terms for the fused EM pass, stored by field so the
/// inner loop over components vectorizes.
#[derive(Default)]
struct Packed {
    mean: [Vec<f64>; 4],
    /// Lower-triangular precision factor entries, row-major.
    p: [Vec<f64>; 10],
    /// `ln π + ln normalizer`.
    c: Vec<f64>,
}

impl Packed {
    fn new(components: &[Component<4>]) -> Result<Self> {
        let mut out = Packed::default();
        for comp in components {
            let g = PreparedGaussian::from_component(comp)?;
            let f = &g.precision_factor;
            for d in 0..4 {
                out.mean[d].push(comp.mean[d]);
            }
            let tri = [
                f[(0, 0)],
                f[(1, 0)],
                f[(1, 1)],
                f[(2, 0)],
                f[(2, 1)],
                f[(2, 2)],
                f[(3, 0)],
                f[(3, 1)],
                f[(3, 2)],
                f[(3, 3)],
            ];
            for (v, t) in out.p.iter_mut().zip(tri) {
                v.push(t);
            }
            out.c.push(comp.weight.ln() + g.log_normalizer);
        }
        Ok(out)
    }

    fn len(&self) -> usize {
        self.c.len()
    }

    /// Weighted log-densities of `x` under every component.
    #[inline]
    fn log_terms(&self, x: &Vector4<f64>, out: &mut [f64]) {
        let [m0, m1, m2, m3] = &self.mean;
        let [p0, p1, p2, p3, p4, p5, p6, p7, p8, p9] = &self.p;
        let n = out.len();
        let (m0, m1, m2, m3) = (&m0[..n], &m1[..n], &m2[..n], &m3[..n]);
        let (p0, p1, p2, p3, p4) = (&p0[..n], &p1[..n], &p2[..n], &p3[..n], &p4[..n]);
        let (p5, p6, p7, p8, p9) = (&p5[..n], &p6[..n], &p7[..n], &p8[..n], &p9[..n]);
        let c = &self.c[..n];
        for b in 0..n {
            let d0 = x[0] - m0[b];
            let d1 = x[1] - m1[b];
            let d2 = x[2] - m2[b];
            let d3 = x[3] - m3[b];
            let y0 = p0[b] * d0;
            let y1 = p1[b] * d0 + p2[b] * d1;
            let y2 = p3[b] * d0 + p4[b] * d1 + p5[b] * d2;
            let y3 = p6[b] * d0 + p7[b] * d1 + p8[b] * d2 + p9[b] * d3;
            out[b] = c[b] - 0.5 * (y0 * y0 + y1 * y1 + y2 * y2 + y3 * y3);
        }
    }

    #[inline]
    fn offset(&self, b: usize, x: &Vector4<f64>) -> [f64; 4] {
        [
            x[0] - self.mean[0][b],
            x[1] - self.mean[1][b],
            x[2] - self.mean[2][b],
            x[3] - self.mean[3][b],
        ]
    }
}

/// Responsibility mass, first and second moments about the current mean.
type Stats = [f64; 15];

/// Below this, `exp` of a log-ratio is exactly zero in `f64`.
const EXP_UNDERFLOW: f64 = -745.2;

/// One E-step fused with the sufficient statistics of the following M-step.
/// Points are split into chunks that depend only on `N`, and chunk results
/// are reduced in order, so the result does not depend on thread count.
fn fused_pass(points: &[Vector4<f64>], packed: &Packed) -> Result<(Vec<Stats>, f64)> {
    let j = packed.len();
    let chunk = (points.len() / 64).max(1024);
    let partial: Vec<(Vec<Stats>, f64)> = points
        .par_chunks(chunk)
        .map(|pts| {
            let mut stats = vec![[0.0; 15]; j];
            let mut terms = vec![0.0; j];
            let mut ll = 0.0;
            for x in pts {
                packed.log_terms(x, &mut terms);
                let max = terms.iter().fold(f64::NEG_INFINITY, |m, &t| m.max(t));
                // Reuse exp(t - max) for both the normalizer and the responsibilities.
                let mut sum = 0.0;
                for t in terms.iter_mut() {
                    let r = *t - max;
                    *t = if r > EXP_UNDERFLOW { r.exp() } else { 0.0 };
                    sum += *t;
                }
                ll += max + sum.ln();
                let inv = 1.0 / sum;
                for (b, (&e, s)) in terms.iter().zip(stats.iter_mut()).enumerate() {
                    if e == 0.0 {
                        continue;
                    }
                    let g = e * inv;
                    let d = packed.offset(b, x);
                    let gd = [g * d[0], g * d[1], g * d[2], g * d[3]];
                    s[0] += g;
                    s[1] += gd[0];
                    s[2] += gd[1];
                    s[3] += gd[2];
                    s[4] += gd[3];
                    s[5] += gd[0] * d[0];
                    s[6] += gd[0] * d[1];
                    s[7] += gd[0] * d[2];
                    s[8] += gd[0] * d[3];
                    s[9] += gd[1] * d[1];
                    s[10] += gd[1] * d[2];
                    s[11] += gd[1] * d[3];
                    s[12] += gd[2] * d[2];
                    s[13] += gd[2] * d[3];
                    s[14] += gd[3] * d[3];
                }
            }
            (stats, ll)
        })
        .collect();
    let mut total = vec![[0.0; 15]; j];
    let mut ll = 0.0;
    for (stats, l) in partial {
        ll += l;
        for (t, s) in total.iter_mut().zip(&stats) {
            for (a, b) in t.iter_mut().zip(s) {
                *a += b;
            }
        }
    }
    if !ll.is_finite() {
        return Err(Error::NonFinite("data log-likelihood"));
    }
    Ok((total, ll))
}

/// M-step from centered statistics; same dropping rule as [`m_step`].
fn update_from_stats(
    components: &[Component<4>],
    stats: &[Stats],
    regularization: f64,
) -> Result<(Vec<Component<4>>, usize)> {
    let kept_mass: f64 = stats.iter().map(|s| s[0]).filter(|&m| m >= 1.0).sum();
    let mut out = Vec::with_capacity(components.len());
    let mut removed = 0;
    for (c, s) in components.iter().zip(stats) {
        let m = s[0];
        if m < 1.0 {
            removed += 1;
            continue;
        }
        let shift = Vector4::new(s[1], s[2], s[3], s[4]) / m;
        let second = Matrix4::new(
            s[5], s[6], s[7], s[8], //
            s[6], s[9], s[10], s[11], //
            s[7], s[10], s[12], s[13], //
            s[8], s[11], s[13], s[14],
        ) / m;
        let mut cov = second - shift * shift.transpose();
        for d in 0..4 {
            cov[(d, d)] += regularization;
        }
        out.push(Component::new(m / kept_mass, c.mean + shift, cov));
    }
    if out.is_empty() {
        return Err(Error::InvalidModel("every component lost its support".into()));
    }
    Ok((out, removed))
}

/// Expectation-maximization from an initial responsibility matrix.
///
/// Stops when the relative change of the data log-likelihood falls below
/// `cfg.em_tol` or after `cfg.em_max_iters` E-steps.
pub fn em_fit(
    points: &[Vector4<f64>],
    init: &ResponsibilityMatrix,
    cfg: &SogmmConfig,
) -> Result<EmOutcome> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::Empty("EM points"));
    }
    if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("EM point"));
    }
    let j = init.n_components();
    if j == 0 {
        return Err(Error::InvalidInput("no initial components".into()));
    }
    if points.len() < j * cfg.min_points_per_component {
        return Err(Error::InvalidInput(format!(
            "{} points cannot support {j} components at {} points each",
            points.len(),
            cfg.min_points_per_component
        )));
    }
    let (mut comps, mut removed) = m_step(points, init, cfg.regularization)?;
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.em_max_iters {
        let packed = Packed::new(&comps)?;
        let (stats, ll) = fused_pass(points, &packed)?;
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(prev) = prev {
            if (ll - prev).abs() <= cfg.em_tol * prev.abs() {
                converged = true;
                break;
            }
        }
        let (next, r) = update_from_stats(&comps, &stats, cfg.regularization)?;
        comps = next;
        removed += r;
    }
    Ok(EmOutcome {
        model: Mixture::from_parts_unchecked(comps, points.len() as u64),
        iterations: trace.len(),
        log_likelihood_trace: trace,
        removed_components: removed,
        converged,
    })
}
