//! Tangential singularities of a potential along the leaves `v = const`:
//! leafwise Newton root finding, Morse/birth-death classification,
//! transversality certificates, Morse inequalities and the almost-Morse
//! audit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense;
use crate::error::{Error, Result};
use crate::potential::{Chart, TrigPotential};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Points closer than this (chart units) are merged.
    pub dedup: f64,
    /// Morse iff `min |eig H| > nondegeneracy · max(‖Hess f‖, 1)`.
    pub nondegeneracy: f64,
    /// Birth-death iff the cubic term along the kernel exceeds this.
    pub cubic: f64,
    /// Accepted leafwise gradient norm at a root.
    pub residual: f64,
    /// Seeds per leaf axis.
    pub seed_resolution: usize,
    pub max_newton_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            dedup: 1e-6,
            nondegeneracy: 1e-8,
            cubic: 1e-8,
            residual: 1e-10,
            seed_resolution: 64,
            max_newton_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Morse { index: usize },
    BirthDeath,
    Degenerate,
}

impl Classification {
    pub fn is_morse(&self) -> bool {
        matches!(self, Classification::Morse { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularPoint {
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    pub classification: Classification,
    /// ascending
    pub hessian_eigenvalues: Vec<f64>,
    /// `‖d_F f‖` at the point
    pub newton_residual: f64,
    /// Third derivative along the Hessian kernel, when it is one-dimensional.
    pub cubic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeafScan {
    pub v: Vec<f64>,
    pub points: Vec<SingularPoint>,
    /// Morse points by index `0..=p`.
    pub counts: Vec<usize>,
    pub non_morse: usize,
    pub warnings: Vec<String>,
}

impl LeafScan {
    pub fn is_morse(&self) -> bool {
        self.non_morse == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MorseReport {
    pub leaf_dim: usize,
    pub leaves: Vec<LeafScan>,
    pub degenerate_leaf_fraction: f64,
}

/// Result of classifying one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub classification: Classification,
    pub hessian_eigenvalues: Vec<f64>,
    pub cubic: Option<f64>,
}

fn sorted_eigen(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| e.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn nondegeneracy_scale(f: &TrigPotential, point: &[f64]) -> Result<f64> {
    Ok(f.full_hessian(point)?.norm().max(1.0))
}

pub fn classify_singularity(f: &TrigPotential, point: &[f64], tol: &Tolerances) -> Result<Classified> {
    let hess = f.tangential_hessian(point)?;
    let (values, vectors) = sorted_eigen(&hess);
    let scale = nondegeneracy_scale(f, point)?;
    let cut = tol.nondegeneracy * scale;
    let kernel: Vec<usize> = (0..values.len()).filter(|&i| values[i].abs() <= cut).collect();
    if kernel.is_empty() {
        let index = values.iter().filter(|&&x| x < 0.0).count();
        return Ok(Classified {
            classification: Classification::Morse { index },
            hessian_eigenvalues: values,
            cubic: None,
        });
    }
    if kernel.len() == 1 {
        let u: Vec<f64> = vectors.column(kernel[0]).iter().copied().collect();
        let c = f.tangential_cubic(point, &u)?;
        let classification =
            if c.abs() > tol.cubic { Classification::BirthDeath } else { Classification::Degenerate };
        return Ok(Classified { classification, hessian_eigenvalues: values, cubic: Some(c) });
    }
    Ok(Classified { classification: Classification::Degenerate, hessian_eigenvalues: values, cubic: None })
}

/// Leaf box for the `h` coordinates, and whether it wraps around.
fn leaf_box(f: &TrigPotential) -> (Vec<(f64, f64)>, bool) {
    let p = f.leaf_dim();
    match f.chart() {
        Chart::Periodic => (vec![(0.0, 1.0); p], true),
        Chart::Window { bounds } => (bounds[..p].to_vec(), false),
    }
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(1.0);
    if y >= 1.0 - 1e-14 {
        0.0
    } else {
        y
    }
}

struct Leaf<'a> {
    index: usize,
    f: &'a TrigPotential,
    v: &'a [f64],
    bounds: Vec<(f64, f64)>,
    periodic: bool,
    tol: &'a Tolerances,
}

impl Leaf<'_> {
    fn point(&self, h: &[f64]) -> Vec<f64> {
        h.iter().chain(self.v).copied().collect()
    }

    fn gradient(&self, h: &[f64]) -> DVector<f64> {
        let x = self.point(h);
        let p = h.len();
        DVector::from_fn(p, |i, _| {
            let mut o = vec![0; x.len()];
            o[i] = 1;
            self.f.partial(&x, &o)
        })
    }

    fn hessian(&self, h: &[f64]) -> DMatrix<f64> {
        let x = self.point(h);
        let p = h.len();
        DMatrix::from_fn(p, p, |i, j| {
            let mut o = vec![0; x.len()];
            o[i] += 1;
            o[j] += 1;
            self.f.partial(&x, &o)
        })
    }

    fn third(&self, h: &[f64], i: usize, j: usize, k: usize) -> f64 {
        self.f.third_partial(&self.point(h), i, j, k)
    }

    fn canonical(&self, mut h: Vec<f64>) -> Option<Vec<f64>> {
        if self.periodic {
            for x in &mut h {
                *x = wrap(*x);
            }
            Some(h)
        } else {
            let inside = h.iter().zip(&self.bounds).all(|(&x, &(lo, hi))| {
                let slack = 1e-12 * (hi - lo);
                x >= lo - slack && x <= hi + slack
            });
            inside.then_some(h)
        }
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = (x - y).abs();
                if self.periodic {
                    d.min(1.0 - d)
                } else {
                    d
                }
            })
            .fold(0.0, f64::max)
    }

    /// Damped Newton on the leafwise gradient; `None` if it leaves the box or
    /// stalls above the residual tolerance.
    fn newton(&self, start: Vec<f64>) -> Option<Vec<f64>> {
        let mut h = start;
        for _ in 0..self.tol.max_newton_steps {
            let g = self.gradient(&h);
            let hess = self.hessian(&h);
            let mu = 1e-14 * hess.norm_squared().max(1e-300);
            let lhs = hess.transpose() * &hess + DMatrix::identity(h.len(), h.len()) * mu;
            let step = lhs.cholesky()?.solve(&-(hess.transpose() * &g));
            for (x, s) in h.iter_mut().zip(step.iter()) {
                *x += s;
            }
            h = self.canonical(h)?;
            let size = step.amax();
            if size <= 1e-15 * (1.0 + h.iter().fold(0.0_f64, |a, x| a.max(x.abs()))) {
                break;
            }
        }
        (self.gradient(&h).norm() <= self.tol.residual).then_some(h)
    }

    /// Gauss–Newton on `(∇f, det Hess)`, pulling a degenerate root onto the
    /// degeneracy locus.
    fn refine_degenerate(&self, start: &[f64]) -> Vec<f64> {
        let p = start.len();
        let mut h = start.to_vec();
        for _ in 0..self.tol.max_newton_steps {
            let g = self.gradient(&h);
            let hess = self.hessian(&h);
            let (det, grad_det) = if p == 1 {
                (hess[(0, 0)], DVector::from_element(1, self.third(&h, 0, 0, 0)))
            } else {
                let adj = DMatrix::from_row_slice(2, 2, &[hess[(1, 1)], -hess[(0, 1)], -hess[(1, 0)], hess[(0, 0)]]);
                let gd = DVector::from_fn(2, |i, _| {
                    let di = DMatrix::from_fn(2, 2, |a, b| self.third(&h, i, a, b));
                    (&adj * di).trace()
                });
                (hess.determinant(), gd)
            };
            let r = g.clone().push(det);
            let mut jac = DMatrix::zeros(p + 1, p);
            jac.view_mut((0, 0), (p, p)).copy_from(&hess);
            for i in 0..p {
                jac[(p, i)] = grad_det[i];
            }
            let step = match jac.clone().svd(true, true).solve(&-r, 1e-14) {
                Ok(s) => s,
                Err(_) => break,
            };
            let trial: Vec<f64> = h.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
            match self.canonical(trial) {
                Some(t) => h = t,
                None => break,
            }
            if step.amax() <= 1e-16 {
                break;
            }
        }
        if self.gradient(&h).norm() <= self.gradient(start).norm().max(self.tol.residual) {
            h
        } else {
            start.to_vec()
        }
    }

    fn seeds(&self) -> Vec<Vec<f64>> {
        let r = self.tol.seed_resolution;
        let axis = |&(lo, hi): &(f64, f64)| -> Vec<f64> {
            let n = if self.periodic { r } else { r + 1 };
            (0..n).map(|i| lo + (hi - lo) * i as f64 / r as f64).collect()
        };
        let axes: Vec<Vec<f64>> = self.bounds.iter().map(axis).collect();
        let mut out = vec![Vec::new()];
        for a in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<f64>| {
                    a.iter().map(move |&x| {
                        let mut q = prefix.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out
    }

    /// Safeguarded Newton–bisection on a bracket of `f'` (p = 1).
    fn bracket_root(&self, mut a: f64, mut b: f64) -> f64 {
        let g = |x: f64| self.gradient(&[x])[0];
        let (mut ga, gb) = (g(a), g(b));
        if ga == 0.0 {
            return a;
        }
        if gb == 0.0 {
            return b;
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let gx = g(x);
            if gx == 0.0 {
                return x;
            }
            if (gx < 0.0) == (ga < 0.0) {
                a = x;
                ga = gx;
            } else {
                b = x;
            }
            let d = self.hessian(&[x])[(0, 0)];
            let newton = x - gx / d;
            x = if d != 0.0 && newton > a.min(b) && newton < a.max(b) { newton } else { 0.5 * (a + b) };
            if (b - a).abs() <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }

    fn scan(&self) -> Result<LeafScan> {
        let p = self.f.leaf_dim();
        let seeds = self.seeds();
        let critical_seeds = seeds.iter().filter(|s| self.gradient(s).norm() <= self.tol.residual).count();
        if critical_seeds == seeds.len() {
            return Err(Error::IdenticallyCritical { leaf: self.index });
        }

        let mut roots: Vec<Vec<f64>> = Vec::new();
        let mut warnings = Vec::new();
        let push = |h: Vec<f64>, roots: &mut Vec<Vec<f64>>| {
            if !roots.iter().any(|r| self.distance(r, &h) <= self.tol.dedup) {
                roots.push(h);
            }
        };

        if p == 1 {
            let xs: Vec<f64> = seeds.iter().map(|s| s[0]).collect();
            let n = xs.len();
            let pairs = if self.periodic { n } else { n - 1 };
            for i in 0..pairs {
                let a = xs[i];
                let b = if i + 1 < n { xs[i + 1] } else { xs[0] + 1.0 };
                let (ga, gb) = (self.gradient(&[a])[0], self.gradient(&[b])[0]);
                if ga != 0.0 && gb != 0.0 && (ga < 0.0) != (gb < 0.0) {
                    let x = self.bracket_root(a, b);
                    let polished = self.newton(vec![x]).or_else(|| self.canonical(vec![x]));
                    match polished {
                        Some(h) if self.gradient(&h).norm() <= self.tol.residual => push(h, &mut roots),
                        _ => warnings.push(format!(
                            "no converged root in sign-change bracket [{a}, {b}] (residual {:e})",
                            self.gradient(&[x]).norm()
                        )),
                    }
                }
            }
        }
        for s in &seeds {
            if let Some(h) = self.newton(s.clone()) {
                push(h, &mut roots);
            }
        }

        let mut points = Vec::with_capacity(roots.len());
        for h in roots {
            let mut h = h;
            let mut c = classify_singularity(self.f, &self.point(&h), self.tol)?;
            if !c.classification.is_morse() {
                h = self.refine_degenerate(&h);
                c = classify_singularity(self.f, &self.point(&h), self.tol)?;
            }
            points.push(SingularPoint {
                newton_residual: self.gradient(&h).norm(),
                h,
                v: self.v.to_vec(),
                classification: c.classification,
                hessian_eigenvalues: c.hessian_eigenvalues,
                cubic: c.cubic,
            });
        }
        // refinement may have merged neighbours
        let mut merged: Vec<SingularPoint> = Vec::with_capacity(points.len());
        for pt in points {
            if !merged.iter().any(|q| self.distance(&q.h, &pt.h) <= self.tol.dedup) {
                merged.push(pt);
            }
        }
        merged.sort_by(|a, b| {
            a.h.iter().zip(&b.h).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut counts = vec![0; p + 1];
        let mut non_morse = 0;
        for pt in &merged {
            match pt.classification {
                Classification::Morse { index } => counts[index] += 1,
                _ => non_morse += 1,
            }
        }
        Ok(LeafScan { v: self.v.to_vec(), points: merged, counts, non_morse, warnings })
    }
}

/// Scans every leaf `v = sample` of the potential's chart for zeros of the
/// leafwise gradient. Leaves are processed in parallel and reported in
/// sample order.
pub fn find_tangential_singularities(
    f: &TrigPotential,
    samples: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<MorseReport> {
    if tol.seed_resolution < 8 {
        return Err(Error::Config(format!("seed_resolution {} < 8", tol.seed_resolution)));
    }
    if samples.is_empty() {
        return Err(Error::Config("no transversal samples".into()));
    }
    let (bounds, periodic) = leaf_box(f);
    for s in samples {
        if s.len() != f.transverse_dim() {
            return Err(Error::DimensionMismatch(format!(
                "sample has {} coordinates, potential has {} transverse coordinates",
                s.len(),
                f.transverse_dim()
            )));
        }
        let probe: Vec<f64> = bounds.iter().map(|&(lo, _)| lo).chain(s.iter().copied()).collect();
        f.locate(&probe)?;
    }
    let leaves = samples
        .par_iter()
        .enumerate()
        .map(|(index, v)| Leaf { index, f, v, bounds: bounds.clone(), periodic, tol }.scan())
        .collect::<Result<Vec<_>>>()?;
    let flagged = leaves.iter().filter(|l| !l.is_morse()).count();
    Ok(MorseReport {
        leaf_dim: f.leaf_dim(),
        degenerate_leaf_fraction: flagged as f64 / leaves.len() as f64,
        leaves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransversalityCertificate {
    /// Smallest singular value of `[f_hh | f_hv]`.
    pub sigma_min: f64,
    /// For Morse points: whether `f_hh X_h + f_hv X_v = 0`, `X ≠ 0` forces
    /// `X_v ≠ 0`. `None` for non-Morse points.
    pub transverse_part_nonzero: Option<bool>,
}

pub fn transversality_certificate(
    f: &TrigPotential,
    point: &SingularPoint,
    tol: &Tolerances,
) -> Result<TransversalityCertificate> {
    let x: Vec<f64> = point.h.iter().chain(&point.v).copied().collect();
    let hh = f.tangential_hessian(&x)?;
    let hv = f.mixed_hessian(&x)?;
    let p = hh.nrows();
    let mut m = DMatrix::zeros(p, p + hv.ncols());
    m.view_mut((0, 0), (p, p)).copy_from(&hh);
    m.view_mut((0, p), (p, hv.ncols())).copy_from(&hv);
    let sigma_min = dense::singular_values(&m).last().copied().unwrap_or(0.0);
    let transverse_part_nonzero = if point.classification.is_morse() {
        let scale = nondegeneracy_scale(f, &x)?;
        Some(dense::singular_values(&hh).last().copied().unwrap_or(0.0) > tol.nondegeneracy * scale)
    } else {
        None
    };
    Ok(TransversalityCertificate { sigma_min, transverse_part_nonzero })
}

/// Certificates for every point, grouped like `report.leaves`.
pub fn transversality_check(
    f: &TrigPotential,
    report: &MorseReport,
    tol: &Tolerances,
) -> Result<Vec<Vec<TransversalityCertificate>>> {
    report
        .leaves
        .iter()
        .map(|l| l.points.iter().map(|pt| transversality_certificate(f, pt, tol)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InequalityCheck {
    pub counts: Vec<usize>,
    pub betti: Vec<usize>,
    /// `m_k ≥ β_k`
    pub weak: Vec<bool>,
    /// `Σ_{i≤k} (-1)^{k-i} (m_i - β_i) ≥ 0`
    pub strong: Vec<bool>,
    pub euler_equal: bool,
    /// every strong inequality holds with equality
    pub tight: bool,
    pub violated: Vec<usize>,
    pub pass: bool,
}

pub fn check_inequalities(counts: &[usize], betti: &[usize]) -> Result<InequalityCheck> {
    if counts.len() != betti.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} critical counts vs {} Betti numbers",
            counts.len(),
            betti.len()
        )));
    }
    let n = counts.len();
    let weak: Vec<bool> = (0..n).map(|k| counts[k] >= betti[k]).collect();
    let partial: Vec<i64> = (0..n)
        .map(|k| {
            (0..=k)
                .map(|i| {
                    let s = if (k - i) % 2 == 0 { 1 } else { -1 };
                    s * (counts[i] as i64 - betti[i] as i64)
                })
                .sum()
        })
        .collect();
    let strong: Vec<bool> = partial.iter().map(|&x| x >= 0).collect();
    let chi = |xs: &[usize]| -> i64 { xs.iter().enumerate().map(|(k, &x)| if k % 2 == 0 { x as i64 } else { -(x as i64) }).sum() };
    let euler_equal = chi(counts) == chi(betti);
    let violated: Vec<usize> = (0..n).filter(|&k| !weak[k] || !strong[k]).collect();
    let pass = violated.is_empty() && euler_equal;
    Ok(InequalityCheck {
        counts: counts.to_vec(),
        betti: betti.to_vec(),
        tight: partial.iter().all(|&x| x == 0),
        weak,
        strong,
        euler_equal,
        violated,
        pass,
    })
}

/// Morse inequalities on every leaf of the report against one Betti vector.
pub fn morse_inequalities(report: &MorseReport, betti: &[usize]) -> Result<Vec<InequalityCheck>> {
    if let Some(leaf) = report.leaves.iter().position(|l| !l.is_morse()) {
        return Err(Error::DegenerateLeaves { leaf });
    }
    report.leaves.iter().map(|l| check_inequalities(&l.counts, betti)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Good,
    GoodAlmostMorse,
    Indeterminate,
    NotGood,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedLeaf {
    pub sample: usize,
    pub v: Vec<f64>,
    pub points: Vec<SingularPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub degenerate_leaf_fraction: f64,
    pub flagged: Vec<FlaggedLeaf>,
    pub verdict: Verdict,
}

/// Audit of an existing scan. Flagged samples are adjacent when their
/// positions in the sample list are consecutive.
pub fn audit(report: &MorseReport) -> AuditReport {
    let flagged: Vec<FlaggedLeaf> = report
        .leaves
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_morse())
        .map(|(i, l)| FlaggedLeaf {
            sample: i,
            v: l.v.clone(),
            points: l.points.iter().filter(|p| !p.classification.is_morse()).cloned().collect(),
        })
        .collect();
    let any_degenerate =
        flagged.iter().flat_map(|f| &f.points).any(|p| p.classification == Classification::Degenerate);
    let adjacent = flagged.windows(2).any(|w| w[1].sample == w[0].sample + 1);
    let verdict = if flagged.is_empty() {
        Verdict::Good
    } else if any_degenerate || flagged.len() == report.leaves.len() {
        Verdict::NotGood
    } else if adjacent {
        Verdict::Indeterminate
    } else {
        Verdict::GoodAlmostMorse
    };
    AuditReport { degenerate_leaf_fraction: report.degenerate_leaf_fraction, flagged, verdict }
}

pub fn almost_morse_audit(f: &TrigPotential, samples: &[Vec<f64>], tol: &Tolerances) -> Result<AuditReport> {
    Ok(audit(&find_tangential_singularities(f, samples, tol)?))
}
