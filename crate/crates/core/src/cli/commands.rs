//! The four report-producing commands. Each returns its report and whether
//! every mathematical claim it checks held.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{RunConfig, ToleranceTable};
use crate::checks::{adjointness_residual, complex_residual, random_cochain, ComplexResidual, Corrupted};
use crate::error::{Error, Result};
use crate::foliation::{
    instantiate_model, kronecker_tangential_complex, lambda_dimension, KroneckerComplex, LeafField, ModelKind,
};
use crate::hodge::{self, BlockReport, HodgeProjector, TransportAngles};
use crate::leaf_complex::CochainComplex;
use crate::morse::{self, AuditReport, InequalityCheck, LeafScan, TransversalityCertificate};
use crate::report::ser_f64;
use crate::spectral::{spectral_flow, FlowRow, SpectrumReport};
use crate::witten::{DeformationContext, DeformationOptions};

/// Outcome of a command: files to write and the claim verdict.
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub pass: bool,
    /// A per-row operational failure that did not abort the command.
    pub row_error: Option<Error>,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn spectral_field(config: &RunConfig) -> Result<LeafField> {
    let field = instantiate_model(&config.foliation())?;
    for leaf in &field.leaves {
        leaf.grid.require_periodic()?;
    }
    Ok(field)
}

fn options(t: &ToleranceTable) -> DeformationOptions {
    t.deformation.into()
}

/// Builds every deformation once so budget violations fail up front.
fn check_budget(config: &RunConfig, field: &LeafField, f: &crate::TrigPotential) -> Result<()> {
    for &eps in config.epsilons()? {
        for j in 0..field.leaves.len() {
            DeformationContext::with_options(&field.leaves[j].grid, field.potential_on(j, f), eps, options(&config.tolerances))?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct LeafSpectra {
    leaf: usize,
    weight: f64,
    reports: Vec<SpectrumReport>,
}

#[derive(Serialize)]
struct BettiRow {
    epsilon: f64,
    lambda_dimensions: Vec<f64>,
    euler_characteristic: Option<f64>,
    leaves: Vec<LeafSpectra>,
}

#[derive(Serialize)]
struct BettiReport<'a> {
    command: &'static str,
    seed: u64,
    model: &'a ModelKind,
    tolerances: &'a ToleranceTable,
    degrees: Vec<usize>,
    rows: Vec<BettiRow>,
    epsilon_invariant: bool,
    pass: bool,
}

#[derive(Serialize)]
struct KroneckerReport<'a> {
    command: &'static str,
    model: &'a ModelKind,
    tolerances: &'a ToleranceTable,
    complex: KroneckerComplex,
    pass: bool,
}

pub fn betti(config: &RunConfig) -> Result<Outcome> {
    if let ModelKind::Kronecker { alpha, resolution } = &config.model {
        let complex = kronecker_tangential_complex(*alpha, *resolution)?;
        let pass = complex.kernel_dim == complex.cokernel_dim;
        let report = KroneckerReport { command: "betti", model: &config.model, tolerances: &config.tolerances, complex, pass };
        return Ok(Outcome { files: vec![("betti.json".into(), to_json(&report)?)], pass, row_error: None });
    }
    let field = spectral_field(config)?;
    let f = config.potential()?;
    check_budget(config, &field, &f)?;
    let degrees = config.degrees()?;
    let policy = config.kernel_policy();
    let p = field.dim_p();
    let mut rows = Vec::new();
    for &epsilon in config.epsilons()? {
        let dims = degrees
            .iter()
            .map(|&k| lambda_dimension(&field, k, epsilon, &f, &policy, options(&config.tolerances)))
            .collect::<Result<Vec<_>>>()?;
        let lambda_dimensions: Vec<f64> = dims.iter().map(|d| d.value).collect();
        let euler_characteristic = (degrees.len() == p + 1).then(|| {
            lambda_dimensions.iter().enumerate().map(|(k, d)| if k % 2 == 0 { *d } else { -*d }).sum()
        });
        let leaves = (0..field.leaves.len())
            .map(|j| LeafSpectra {
                leaf: j,
                weight: field.leaves[j].weight,
                reports: dims.iter().map(|d| d.per_leaf[j].clone()).collect(),
            })
            .collect();
        rows.push(BettiRow { epsilon, lambda_dimensions, euler_characteristic, leaves });
    }
    let first_dims: Vec<Vec<usize>> = rows[0]
        .leaves
        .iter()
        .map(|l| l.reports.iter().map(|r| r.kernel_dim).collect())
        .collect();
    let epsilon_invariant = rows.iter().all(|r| {
        r.leaves.iter().zip(&first_dims).all(|(l, d)| l.reports.iter().map(|r| r.kernel_dim).eq(d.iter().copied()))
    });
    let report = BettiReport {
        command: "betti",
        seed: config.seed,
        model: &config.model,
        tolerances: &config.tolerances,
        degrees,
        rows,
        epsilon_invariant,
        pass: epsilon_invariant,
    };
    Ok(Outcome { files: vec![("betti.json".into(), to_json(&report)?)], pass: epsilon_invariant, row_error: None })
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    command: &'static str,
    seed: u64,
    model: &'a ModelKind,
    tolerances: &'a ToleranceTable,
    leaf: usize,
    rows: Vec<FlowRow>,
    /// per degree, in order
    kernel_dim_constant: Vec<bool>,
    pass: bool,
}

pub fn witten_sweep(config: &RunConfig) -> Result<Outcome> {
    let field = spectral_field(config)?;
    let f = config.potential()?;
    let epsilons = config.epsilons()?;
    let degrees = config.degrees()?;
    let policy = config.kernel_policy();
    let leaf = &field.leaves[0];
    let mut rows = Vec::new();
    for &k in &degrees {
        rows.extend(spectral_flow(&leaf.grid, field.potential_on(0, &f), epsilons, k, &policy, options(&config.tolerances)));
    }

    let mut csv_out = csv::Writer::from_writer(Vec::new());
    csv_out.write_record(["epsilon", "degree", "eigenvalue_index", "eigenvalue"])?;
    for row in &rows {
        if let Some(r) = &row.report {
            for (i, ev) in r.eigenvalues.iter().enumerate() {
                csv_out.write_record([row.epsilon.to_string(), row.degree.to_string(), i.to_string(), format!("{ev:e}")])?;
            }
        }
    }
    let csv_bytes = csv_out.into_inner().map_err(|e| Error::Io(e.into_error()))?;

    let row_error = rows.iter().find_map(|r| r.error.clone()).map(Error::Config);
    let kernel_dim_constant: Vec<bool> = degrees
        .iter()
        .map(|&k| {
            let dims: Vec<Option<usize>> = rows
                .iter()
                .filter(|r| r.degree == k)
                .map(|r| r.report.as_ref().filter(|s| !s.ambiguous).map(|s| s.kernel_dim))
                .collect();
            dims.iter().all(|d| d.is_some() && *d == dims[0])
        })
        .collect();
    let pass = kernel_dim_constant.iter().all(|&b| b);
    let summary = SweepSummary {
        command: "witten-sweep",
        seed: config.seed,
        model: &config.model,
        tolerances: &config.tolerances,
        leaf: 0,
        rows,
        kernel_dim_constant,
        pass,
    };
    Ok(Outcome {
        files: vec![("sweep.csv".into(), csv_bytes), ("sweep_summary.json".into(), to_json(&summary)?)],
        pass,
        row_error,
    })
}

#[derive(Serialize)]
struct CertifiedPoint<'a> {
    #[serde(flatten)]
    point: &'a morse::SingularPoint,
    transversality: TransversalityCertificate,
}

#[derive(Serialize)]
struct MorseLeaf<'a> {
    v: &'a [f64],
    counts: &'a [usize],
    non_morse: usize,
    points: Vec<CertifiedPoint<'a>>,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct MorseFile<'a> {
    command: &'static str,
    seed: u64,
    model: &'a ModelKind,
    tolerances: &'a ToleranceTable,
    leaves: Vec<MorseLeaf<'a>>,
    degenerate_leaf_fraction: f64,
    betti: Option<Vec<usize>>,
    inequalities: Option<Vec<InequalityCheck>>,
    all_transversal: bool,
    audit: AuditReport,
    pass: bool,
}

pub fn morse_scan(config: &RunConfig) -> Result<Outcome> {
    let f = config.potential()?;
    let samples = match &config.model {
        ModelKind::Product { .. } | ModelKind::ChartWindow { .. } => config.foliation().transversal_samples()?,
        _ => return Err(Error::InvalidModel("morse-scan needs a product or chart_window model".into())),
    };
    let tol = &config.tolerances.morse;
    let report = morse::find_tangential_singularities(&f, &samples, tol)?;
    let certificates = morse::transversality_check(&f, &report, tol)?;
    let betti = match &config.model {
        ModelKind::Product { leaf, .. } => Some(hodge::betti_numbers(&leaf.build()?, &config.kernel_policy())?),
        _ => None,
    };
    let all_morse = report.leaves.iter().all(LeafScan::is_morse);
    let inequalities = match (&betti, all_morse) {
        (Some(b), true) => Some(morse::morse_inequalities(&report, b)?),
        _ => None,
    };
    let all_transversal = report
        .leaves
        .iter()
        .zip(&certificates)
        .flat_map(|(l, c)| l.points.iter().zip(c))
        .filter(|(p, _)| p.classification.is_morse())
        .all(|(_, c)| c.sigma_min > 0.0 && c.transverse_part_nonzero == Some(true));
    let audit = morse::audit(&report);
    let good = matches!(audit.verdict, morse::Verdict::Good | morse::Verdict::GoodAlmostMorse);
    let pass = good && all_transversal && inequalities.as_ref().is_none_or(|v| v.iter().all(|c| c.pass));
    let leaves = report
        .leaves
        .iter()
        .zip(&certificates)
        .map(|(l, c)| MorseLeaf {
            v: &l.v,
            counts: &l.counts,
            non_morse: l.non_morse,
            points: l.points.iter().zip(c).map(|(point, &transversality)| CertifiedPoint { point, transversality }).collect(),
            warnings: &l.warnings,
        })
        .collect();
    let file = MorseFile {
        command: "morse-scan",
        seed: config.seed,
        model: &config.model,
        tolerances: &config.tolerances,
        leaves,
        degenerate_leaf_fraction: report.degenerate_leaf_fraction,
        betti,
        inequalities,
        all_transversal,
        audit,
        pass,
    };
    Ok(Outcome { files: vec![("morse.json".into(), to_json(&file)?)], pass, row_error: None })
}

#[derive(Debug, Clone, Copy, Serialize)]
struct SplitStats {
    #[serde(serialize_with = "ser_f64")]
    max_residual: f64,
    #[serde(serialize_with = "ser_f64")]
    max_orthogonality: f64,
}

#[derive(Serialize)]
struct HodgeInstance {
    leaf: usize,
    epsilon: f64,
    degree: usize,
    complex_plain: Option<ComplexResidual>,
    complex_deformed: Option<ComplexResidual>,
    adjointness_plain: Option<f64>,
    adjointness_deformed: Option<f64>,
    split_plain: Option<SplitStats>,
    split_deformed: Option<SplitStats>,
    transport: Option<TransportAngles>,
    blocks: Option<BlockReport>,
    failures: Vec<String>,
    pass: bool,
}

#[derive(Serialize)]
struct HodgeFile<'a> {
    command: &'static str,
    seed: u64,
    model: &'a ModelKind,
    tolerances: &'a ToleranceTable,
    corrupted: bool,
    instances: Vec<HodgeInstance>,
    pass: bool,
}

fn split_stats<C: CochainComplex + ?Sized>(
    complex: &C,
    k: usize,
    t: &ToleranceTable,
    rng: &mut ChaCha8Rng,
) -> Result<SplitStats> {
    let proj = HodgeProjector::new(complex, k, &t.kernel)?;
    let mut s = SplitStats { max_residual: 0.0, max_orthogonality: 0.0 };
    for _ in 0..t.random_cochains {
        let w = random_cochain(complex, k, rng);
        let split = proj.decompose(&w)?;
        s.max_residual = s.max_residual.max(split.residual);
        s.max_orthogonality = s.max_orthogonality.max(split.max_orthogonality);
    }
    Ok(s)
}

fn hodge_instance(
    config: &RunConfig,
    field: &LeafField,
    f: &crate::TrigPotential,
    (e_idx, epsilon): (usize, f64),
    leaf: usize,
    k: usize,
) -> Result<HodgeInstance> {
    let t = &config.tolerances;
    let grid = &field.leaves[leaf].grid;
    let p = grid.dim_p();
    let ctx = DeformationContext::with_options(grid, field.potential_on(leaf, f), epsilon, options(t))?;
    let corrupted = Corrupted { inner: grid, degree: 0, amount: 0.5 };
    let plain: &dyn CochainComplex = if config.test_hooks.corrupt_differential { &corrupted } else { grid };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(((e_idx * field.leaves.len() + leaf) * (p + 1) + k) as u64);
    let policy = config.kernel_policy();

    let mut failures = Vec::new();
    let mut fail = |cond: bool, msg: String| {
        if !cond {
            failures.push(msg);
        }
    };

    let (complex_plain, complex_deformed) = if k + 2 <= p {
        let a = complex_residual(plain, k)?;
        let b = complex_residual(&ctx, k)?;
        fail(a.norm <= t.complex * a.scale, format!("plain d d residual {:e}", a.relative()));
        fail(b.norm <= t.complex * b.scale, format!("deformed d d residual {:e}", b.relative()));
        (Some(a), Some(b))
    } else {
        (None, None)
    };
    let (adjointness_plain, adjointness_deformed) = if k < p {
        let a = adjointness_residual(plain, k, t.random_cochains, &mut rng)?;
        let b = adjointness_residual(&ctx, k, t.random_cochains, &mut rng)?;
        fail(a <= t.adjointness, format!("plain adjointness residual {a:e}"));
        fail(b <= t.adjointness, format!("deformed adjointness residual {b:e}"));
        (Some(a), Some(b))
    } else {
        (None, None)
    };

    let mut split = |c: &dyn CochainComplex, name: &str, failures: &mut Vec<String>| match split_stats(c, k, t, &mut rng) {
        Ok(s) => {
            if s.max_residual > t.hodge_residual {
                failures.push(format!("{name} reconstruction residual {:e}", s.max_residual));
            }
            if s.max_orthogonality > t.orthogonality {
                failures.push(format!("{name} orthogonality {:e}", s.max_orthogonality));
            }
            Some(s)
        }
        Err(e) => {
            failures.push(format!("{name} decomposition: {e}"));
            None
        }
    };
    let split_plain = split(plain, "plain", &mut failures);
    let split_deformed = split(&ctx, "deformed", &mut failures);

    let transport = if k < p {
        let a = hodge::verify_transport_identities(&ctx, k, &policy)?;
        if a.kernel_angle > t.principal_angle || a.image_angle > t.principal_angle {
            failures.push(format!("transport angles {:e}, {:e}", a.kernel_angle, a.image_angle));
        }
        Some(a)
    } else {
        None
    };
    let blocks = match hodge::verify_block_structure(&ctx, k, &policy) {
        Ok(b) => {
            if b.zero_block_norm > t.zero_block * b.conjugator_norm {
                failures.push(format!("zero block {:e}", b.zero_block_norm));
            }
            if b.u_min_singular.is_some_and(|s| s <= 0.0) || b.b_min_singular.is_some_and(|s| s <= 0.0) {
                failures.push("singular diagonal block".into());
            }
            Some(b)
        }
        Err(e) => {
            failures.push(format!("block structure: {e}"));
            None
        }
    };
    if config.test_hooks.corrupt_differential {
        // the undeformed side must agree with the corrupted complex too
        let h_plain = hodge::harmonic_space(plain, k, &policy).map(|h| h.dim());
        let h_def = hodge::harmonic_space(&ctx, k, &policy).map(|h| h.dim());
        match (h_plain, h_def) {
            (Ok(a), Ok(b)) if a == b => {}
            (a, b) => failures.push(format!("harmonic dimensions differ: {a:?} vs {b:?}")),
        }
    }

    Ok(HodgeInstance {
        leaf,
        epsilon,
        degree: k,
        complex_plain,
        complex_deformed,
        adjointness_plain,
        adjointness_deformed,
        split_plain,
        split_deformed,
        transport,
        blocks,
        pass: failures.is_empty(),
        failures,
    })
}

pub fn hodge_check(config: &RunConfig) -> Result<Outcome> {
    let field = spectral_field(config)?;
    let f = config.potential()?;
    check_budget(config, &field, &f)?;
    let degrees = config.degrees()?;
    let epsilons = config.epsilons()?;
    let mut jobs = Vec::new();
    for e in 0..epsilons.len() {
        for j in 0..field.leaves.len() {
            jobs.extend(degrees.iter().map(|&k| (e, j, k)));
        }
    }
    let instances = jobs
        .par_iter()
        .map(|&(e, j, k)| hodge_instance(config, &field, &f, (e, epsilons[e]), j, k))
        .collect::<Result<Vec<_>>>()?;
    let pass = instances.iter().all(|i| i.pass);
    let file = HodgeFile {
        command: "hodge-check",
        seed: config.seed,
        model: &config.model,
        tolerances: &config.tolerances,
        corrupted: config.test_hooks.corrupt_differential,
        instances,
        pass,
    };
    Ok(Outcome { files: vec![("hodge.json".into(), to_json(&file)?)], pass, row_error: None })
}

pub fn write_outcome(dir: &Path, outcome: &Outcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &outcome.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    Ok(())
}
