//! Analytic potentials on chart coordinates `(h, v)`: finite sums of
//! products of `cos(2πnx)`, `sin(2πnx)` and monomials `x^e`, one factor per
//! coordinate. Every partial derivative is evaluated exactly from the term
//! list.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One univariate factor of a term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    Cos(u32),
    Sin(u32),
    Pow(u32),
}

impl Factor {
    /// `order`-th derivative at `x`.
    pub fn derivative(&self, x: f64, order: usize) -> f64 {
        match *self {
            Factor::Cos(n) | Factor::Sin(n) => {
                let w = 2.0 * PI * n as f64;
                if n == 0 {
                    return match (self, order) {
                        (Factor::Cos(_), 0) => 1.0,
                        _ => 0.0,
                    };
                }
                // cos^{(j)} = cos(wx + jπ/2) w^j ; sin = cos shifted by -π/2
                let shift = if matches!(self, Factor::Sin(_)) { 3 } else { 0 };
                let phase = (order + shift) % 4;
                let t = w * x;
                let base = match phase {
                    0 => t.cos(),
                    1 => -t.sin(),
                    2 => -t.cos(),
                    _ => t.sin(),
                };
                base * w.powi(order as i32)
            }
            Factor::Pow(e) => {
                let e = e as usize;
                if order > e {
                    return 0.0;
                }
                let coeff: f64 = ((e - order + 1)..=e).map(|j| j as f64).product();
                coeff * x.powi((e - order) as i32)
            }
        }
    }

    fn is_periodic(&self) -> bool {
        !matches!(self, Factor::Pow(e) if *e > 0)
    }

    fn is_constant(&self) -> bool {
        matches!(self, Factor::Cos(0) | Factor::Pow(0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub factors: Vec<Factor>,
}

/// Domain of the chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// Unit torus in every coordinate; points are taken modulo 1.
    Periodic,
    /// Closed box `[lo_i, hi_i]` per coordinate; polynomial terms allowed.
    Window { bounds: Vec<(f64, f64)> },
}

/// Real-analytic function of `p` leaf coordinates followed by `q`
/// transverse coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPotential {
    p: usize,
    q: usize,
    terms: Vec<Term>,
    chart: Chart,
}

impl TrigPotential {
    pub fn new(p: usize, q: usize, terms: Vec<Term>, chart: Chart) -> Result<Self> {
        let n = p + q;
        if p == 0 {
            return Err(Error::InvalidPotential("need at least one leaf coordinate".into()));
        }
        for t in &terms {
            if t.factors.len() != n {
                return Err(Error::InvalidPotential(format!(
                    "term has {} factors, expected {n}",
                    t.factors.len()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidPotential("non-finite coefficient".into()));
            }
        }
        match &chart {
            Chart::Periodic => {
                if terms.iter().any(|t| !t.factors.iter().all(Factor::is_periodic)) {
                    return Err(Error::InvalidPotential(
                        "polynomial terms require a window chart".into(),
                    ));
                }
            }
            Chart::Window { bounds } => {
                if bounds.len() != n {
                    return Err(Error::InvalidPotential(format!(
                        "window has {} bounds, expected {n}",
                        bounds.len()
                    )));
                }
                if bounds.iter().any(|&(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite())) {
                    return Err(Error::InvalidPotential("window bounds must satisfy lo < hi".into()));
                }
            }
        }
        Ok(Self { p, q, terms, chart })
    }

    /// Periodic potential built from `(coeff, [factor per coordinate])`.
    pub fn periodic(p: usize, q: usize, terms: &[(f64, &[Factor])]) -> Result<Self> {
        let terms = terms.iter().map(|(c, f)| Term { coeff: *c, factors: f.to_vec() }).collect();
        Self::new(p, q, terms, Chart::Periodic)
    }

    /// Seeded random trigonometric polynomial: `n_terms` products with
    /// integer frequencies in `0..=3`, random cos/sin phases and coefficients
    /// uniform in `[-1, 1]`. Every term depends on at least one leaf
    /// coordinate.
    pub fn random<R: Rng>(p: usize, q: usize, n_terms: usize, rng: &mut R) -> Self {
        let terms = (0..n_terms)
            .map(|_| {
                let coeff = rng.gen_range(-1.0..=1.0);
                loop {
                    let factors: Vec<Factor> = (0..p + q)
                        .map(|_| {
                            let n = rng.gen_range(0..=3u32);
                            if n > 0 && rng.gen_bool(0.5) {
                                Factor::Sin(n)
                            } else {
                                Factor::Cos(n)
                            }
                        })
                        .collect();
                    if factors[..p].iter().any(|f| !f.is_constant()) {
                        break Term { coeff, factors };
                    }
                }
            })
            .collect();
        Self { p, q, terms, chart: Chart::Periodic }
    }

    pub fn leaf_dim(&self) -> usize {
        self.p
    }

    pub fn transverse_dim(&self) -> usize {
        self.q
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn with_chart(mut self, chart: Chart) -> Result<Self> {
        let terms = std::mem::take(&mut self.terms);
        Self::new(self.p, self.q, terms, chart)
    }

    /// Checks the point against the chart and returns it in canonical form.
    pub fn locate(&self, point: &[f64]) -> Result<Vec<f64>> {
        if point.len() != self.p + self.q {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, potential expects {}",
                point.len(),
                self.p + self.q
            )));
        }
        match &self.chart {
            Chart::Periodic => Ok(point.iter().map(|x| x.rem_euclid(1.0)).collect()),
            Chart::Window { bounds } => {
                for (index, (&value, &(lo, hi))) in point.iter().zip(bounds).enumerate() {
                    let slack = 1e-12 * (hi - lo);
                    if !(value >= lo - slack && value <= hi + slack) {
                        return Err(Error::OutsideChart { index, value, lo, hi });
                    }
                }
                Ok(point.to_vec())
            }
        }
    }

    /// Mixed partial derivative with multi-index `orders` (one entry per
    /// coordinate). No chart check.
    pub fn partial(&self, point: &[f64], orders: &[usize]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coeff
                    * t.factors
                        .iter()
                        .zip(point)
                        .zip(orders)
                        .map(|((f, &x), &o)| f.derivative(x, o))
                        .product::<f64>()
            })
            .sum()
    }

    pub fn value_unchecked(&self, point: &[f64]) -> f64 {
        self.partial(point, &vec![0; point.len()])
    }

    pub fn value(&self, point: &[f64]) -> Result<f64> {
        let x = self.locate(point)?;
        Ok(self.value_unchecked(&x))
    }

    fn derivative_along(&self, point: &[f64], axes: &[usize]) -> f64 {
        let mut orders = vec![0; point.len()];
        for &a in axes {
            orders[a] += 1;
        }
        self.partial(point, &orders)
    }

    /// Leafwise differential `d_F f`: partials in the `h` coordinates.
    pub fn leafwise_gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        let x = self.locate(point)?;
        Ok((0..self.p).map(|i| self.derivative_along(&x, &[i])).collect())
    }

    /// Tangential Hessian `d²_F f`: second partials in the `h` coordinates.
    pub fn tangential_hessian(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let x = self.locate(point)?;
        Ok(self.block_hessian(&x, 0..self.p, 0..self.p))
    }

    /// Mixed block `f_{h v}` (p × q).
    pub fn mixed_hessian(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let x = self.locate(point)?;
        Ok(self.block_hessian(&x, 0..self.p, self.p..self.p + self.q))
    }

    /// Full Hessian in all `p + q` coordinates.
    pub fn full_hessian(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let x = self.locate(point)?;
        let n = self.p + self.q;
        Ok(self.block_hessian(&x, 0..n, 0..n))
    }

    fn block_hessian(
        &self,
        x: &[f64],
        rows: std::ops::Range<usize>,
        cols: std::ops::Range<usize>,
    ) -> nalgebra::DMatrix<f64> {
        let (r0, c0) = (rows.start, cols.start);
        nalgebra::DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            self.derivative_along(x, &[r0 + i, c0 + j])
        })
    }

    /// Third leafwise derivative contracted with `u` three times.
    pub fn tangential_cubic(&self, point: &[f64], u: &[f64]) -> Result<f64> {
        let x = self.locate(point)?;
        let mut total = 0.0;
        for i in 0..self.p {
            for j in 0..self.p {
                for k in 0..self.p {
                    let w = u[i] * u[j] * u[k];
                    if w != 0.0 {
                        total += w * self.derivative_along(&x, &[i, j, k]);
                    }
                }
            }
        }
        Ok(total)
    }

    /// Third leafwise partials `f_{h_i h_j h_k}` (unchecked point).
    pub(crate) fn third_partial(&self, x: &[f64], i: usize, j: usize, k: usize) -> f64 {
        self.derivative_along(x, &[i, j, k])
    }

    /// Upper bound on `max f - min f` from the term coefficients.
    pub fn amplitude_bound(&self) -> f64 {
        2.0 * self.terms.iter().map(|t| t.coeff.abs()).sum::<f64>()
    }
}

/// How a leaf grid sits inside the chart: maps leaf coordinates `s` to the
/// chart point `(h, v)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafEmbedding {
    /// `(h, v) = (s, v0)`: a plaque of a product foliation.
    Product { transverse: Vec<f64> },
    /// `(h, v) = (s, v0 + slope·s)`: a closed leaf of a linear foliation of
    /// the 2-torus (`p = q = 1`).
    Linear { base: f64, slope: f64 },
}

impl LeafEmbedding {
    pub fn chart_point(&self, s: &[f64]) -> Vec<f64> {
        match self {
            LeafEmbedding::Product { transverse } => {
                s.iter().chain(transverse.iter()).copied().collect()
            }
            LeafEmbedding::Linear { base, slope } => vec![s[0], base + slope * s[0]],
        }
    }

    pub fn transverse_dim(&self) -> usize {
        match self {
            LeafEmbedding::Product { transverse } => transverse.len(),
            LeafEmbedding::Linear { .. } => 1,
        }
    }
}

/// A potential restricted to one leaf.
#[derive(Debug, Clone, Copy)]
pub struct LeafPotential<'a> {
    pub potential: &'a TrigPotential,
    pub embedding: &'a LeafEmbedding,
}

impl LeafPotential<'_> {
    pub fn value(&self, s: &[f64]) -> Result<f64> {
        self.potential.value(&self.embedding.chart_point(s))
    }
}
