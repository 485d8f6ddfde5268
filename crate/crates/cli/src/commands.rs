use clap::{Args, ValueEnum};
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use toral_recurrence::cantor_mass::{
    build_tree, local_dimension_sample, mass_bounds_check, select_levels_within, separation_holds, DEFAULT_HORIZON,
};
use toral_recurrence::conjugacy::{
    commutation_check, is_minimal_beta, lipschitz_sandwich, random_small_rationals, rational_diagonalize,
    transported_dimension,
};
use toral_recurrence::periodic_lattice::{count_in_ball, count_in_ellipsoid, count_periodic, enumerate_periodic, PeriodicLattice};
use toral_recurrence::recurrence_geometry::{
    box_count_dimension, decompose_rn, lattice_min_distance, semi_axes_sweep, upper_bound_sum, BoxRegion, EllipsoidShape,
};
use toral_recurrence::serde_util::rational_string;
use toral_recurrence::spectrum_dim::{alpha_threshold, dim_theorem1, DimensionResult};
use toral_recurrence::{eigen_moduli, Error, IntegerMatrix, Result, Spectrum};

use crate::config::{parse_range, Common, DEFAULT_CAP};
use crate::output::{float, Report};

fn echo(args: &impl Serialize) -> Value {
    serde_json::to_value(args).expect("echo")
}

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn spectrum(common: &Common, a: &IntegerMatrix) -> Result<Spectrum> {
    eigen_moduli(a, common.tol()?)
}

fn range(s: &Option<String>, default: (u32, u32)) -> Result<(u32, u32)> {
    match s {
        Some(s) => parse_range(s).map_err(Error::InvalidArgument),
        None => Ok(default),
    }
}

fn radii(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|r| *r > 0.0 && r.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad radius {t:?}")))
        })
        .collect()
}

// ---- dim ----------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct DimArgs {}

impl DimArgs {
    pub fn echo(&self) -> Value {
        echo(self)
    }
}

/// General formula at or above the threshold; below it, the diagonal formula
/// when `A` diagonalises over the rationals, else the general formula as an
/// upper bound.
pub fn dim(common: &Common, _args: &DimArgs) -> Result<Report> {
    let a = common.matrix()?;
    let psi = common.psi().ok();
    let alpha = common.alpha()?;
    let spec = spectrum(common, &a)?;
    let general = dim_theorem1(&spec, &alpha)?;
    let (method, result): (&str, DimensionResult) = if spec.alpha_at_least_threshold(&alpha) {
        ("general", general)
    } else {
        match transported_dimension(&a, &alpha) {
            Ok(r) => ("diagonal", r),
            Err(Error::NonIntegerEigenvalues | Error::NotDiagonalizableOverQ) => ("general", general),
            Err(e) => return Err(e),
        }
    };
    let rows = result
        .per_j
        .iter()
        .enumerate()
        .map(|(j, v)| vec![(j + 1).to_string(), float(*v)])
        .collect();
    let mut body = serde_json::to_value(&result).expect("json");
    let obj = body.as_object_mut().expect("object");
    obj.insert("method".into(), json!(method));
    obj.insert("alpha".into(), json!(alpha));
    obj.insert("alpha_threshold_bounds".into(), json!(alpha_threshold(&spec)));
    obj.insert("moduli".into(), json!(spec.values()));
    obj.insert("psi_horizon".into(), json!(psi.and_then(|p| p.horizon())));
    Ok(Report { body, table: None }.with_table(cols(&["j", "per_j"]), rows))
}

// ---- periodic -----------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct PeriodicArgs {
    /// Period n.
    #[arg(long)]
    pub n: u32,
    /// List every point as exact fractions.
    #[arg(long)]
    pub list: bool,
}

impl PeriodicArgs {
    pub fn echo(&self) -> Value {
        echo(self)
    }
}

pub fn periodic(common: &Common, args: &PeriodicArgs) -> Result<Report> {
    let a = common.matrix()?;
    let count = count_periodic(&a, args.n)?;
    if let Some(cap) = common.cap {
        if count > BigInt::from(cap) {
            return Err(Error::CapExceeded {
                what: "periodic point set",
                count,
                cap: BigInt::from(cap),
            });
        }
    }
    if !args.list {
        return Ok(Report::json(json!({ "period": args.n, "count": count.to_string() }))
            .with_table(cols(&["period", "count"]), vec![vec![args.n.to_string(), count.to_string()]]));
    }
    let set = enumerate_periodic(&a, args.n, &common.cap_or(DEFAULT_CAP)?)?;
    let points: Vec<Vec<String>> = set
        .points()
        .iter()
        .map(|p| p.iter().map(rational_string).collect())
        .collect();
    let columns = (1..=a.dim()).map(|i| format!("x{i}")).collect();
    Ok(Report::json(json!({
        "period": args.n,
        "count": count.to_string(),
        "denominator": set.denom().to_string(),
        "points": points,
    }))
    .with_table(columns, points))
}

// ---- verify -------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// Exact versus model semi-axes of the ellipsoids.
    #[value(alias = "lemma2.4")]
    SemiAxes,
    /// Certified minimum distance between ellipsoids of one family.
    #[value(alias = "lemma2.6")]
    Separation,
    /// Periodic points in random balls.
    #[value(alias = "lemma2.7")]
    BallCount,
    /// Periodic points of period m inside the period-n ellipsoids.
    #[value(alias = "cor2.9")]
    EllipsoidCount,
    /// Level selection for the Cantor construction.
    #[value(alias = "lemma4.1")]
    Levels,
    /// Mass bounds of the Cantor measure.
    #[value(alias = "bounds4.3", alias = "bounds4.4")]
    Bounds,
    /// Convergence of the covering series.
    Series,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    pub check: Check,
    /// Degree n or a range `a:b` (also `a..b`).
    #[arg(long = "n", visible_alias = "nrange")]
    pub n: Option<String>,
    /// Second period for ellipsoid counts.
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long, default_value_t = 0.2)]
    pub radius: f64,
    #[arg(long, default_value_t = 100)]
    pub balls: usize,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Comma-separated radii for local mass quotients.
    #[arg(long, default_value = "0.01,0.001")]
    pub radii: String,
    /// Exponent s of the covering series.
    #[arg(long, default_value_t = 0.8)]
    pub s: f64,
}

impl VerifyArgs {
    pub fn echo(&self) -> Value {
        echo(self)
    }
}

/// Accepted bracket for two-sided count ratios.
const BRACKET: (f64, f64) = (1.0 / 50.0, 50.0);

fn in_bracket(lo: f64, hi: f64) -> bool {
    lo >= BRACKET.0 && hi <= BRACKET.1
}

pub fn verify(common: &Common, args: &VerifyArgs) -> Result<Report> {
    let a = common.matrix()?;
    let psi = common.psi()?;
    match args.check {
        Check::SemiAxes => {
            let (lo, hi) = range(&args.n, (1, 8))?;
            let sweep = semi_axes_sweep(&a, &psi, lo, hi)?;
            let rows = sweep
                .reports
                .iter()
                .flat_map(|r| {
                    (0..r.exact.len()).map(move |j| {
                        vec![r.degree.to_string(), (j + 1).to_string(), float(r.exact[j]), float(r.model[j]), float(r.ratios[j])]
                    })
                })
                .collect();
            Ok(Report::json(&sweep).with_table(cols(&["n", "j", "exact", "model", "ratio"]), rows))
        }
        Check::Separation => {
            let (lo, hi) = range(&args.n, (1, 8))?;
            let mut reports = Vec::new();
            for n in lo..=hi {
                let lattice = PeriodicLattice::new(&a, n)?;
                let shape = EllipsoidShape::new(&a, lattice.spectrum(), n, &psi)?;
                reports.push(lattice_min_distance(&psi, &lattice, &shape)?);
            }
            let pass = reports.iter().all(|r| r.holds);
            let rows = reports
                .iter()
                .map(|r| {
                    vec![
                        r.degree.to_string(),
                        r.distance.map_or(String::new(), float),
                        float(r.required),
                        r.holds.to_string(),
                    ]
                })
                .collect();
            Ok(Report::json(json!({ "pass": pass, "reports": reports }))
                .with_table(cols(&["n", "distance", "required", "holds"]), rows))
        }
        Check::BallCount => {
            let spec = spectrum(common, &a)?;
            let r = args.radius;
            let l1 = spec.min().bounds.lo;
            let n = match &args.n {
                Some(s) => range(&Some(s.clone()), (1, 1))?.0,
                None => (1..=64)
                    .find(|&n| (l1.powi(n as i32) - 1.0) * r > 1.0)
                    .ok_or_else(|| Error::HypothesisNotMet("no n <= 64 with (l_1^n - 1) r > 1".into()))?,
            };
            if (l1.powi(n as i32) - 1.0) * r <= 1.0 {
                return Err(Error::HypothesisNotMet(format!("(l_1^{n} - 1) r <= 1 for r = {r}")));
            }
            let lattice = PeriodicLattice::new(&a, n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
            let mut centres = Vec::with_capacity(args.balls);
            let mut counts = Vec::with_capacity(args.balls);
            for _ in 0..args.balls {
                let c: Vec<f64> = (0..a.dim()).map(|_| rng.random::<f64>()).collect();
                counts.push(count_in_ball(&lattice, &c, r)?);
                centres.push(c);
            }
            let vr: Vec<f64> = counts.iter().filter_map(|c| c.volume_ratio).collect();
            let lo = vr.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vr.iter().copied().fold(0.0, f64::max);
            let constant = counts.iter().map(|c| c.bound_ratio).fold(0.0, f64::max);
            let rows = centres
                .iter()
                .zip(&counts)
                .map(|(c, k)| {
                    vec![
                        c.iter().map(|v| float(*v)).collect::<Vec<_>>().join(" "),
                        k.count.to_string(),
                        k.volume_ratio.map_or(String::new(), float),
                        float(k.bound_ratio),
                    ]
                })
                .collect();
            let balls: Vec<Value> = centres
                .iter()
                .zip(&counts)
                .map(|(c, k)| json!({ "centre": c, "count": k }))
                .collect();
            Ok(Report::json(json!({
                "n": n,
                "radius": r,
                "periodic_points": lattice.len().to_string(),
                "ratio_min": lo,
                "ratio_max": hi,
                "fitted_product_constant": constant,
                "pass": in_bracket(lo, hi),
                "balls": balls,
            }))
            .with_table(cols(&["centre", "count", "volume_ratio", "bound_ratio"]), rows))
        }
        Check::EllipsoidCount => {
            let n = range(&args.n, (1, 1))?.0;
            let m = args.m.unwrap_or(6);
            let fam = decompose_rn(&a, n, &psi, &common.cap_or(DEFAULT_CAP)?)?;
            let lattice = PeriodicLattice::new(&a, m)?;
            let mut counts = Vec::with_capacity(fam.len());
            for ell in fam.members() {
                counts.push(count_in_ellipsoid(&lattice, &ell)?);
            }
            let lo = counts.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
            let hi = counts.iter().map(|c| c.ratio).fold(0.0, f64::max);
            let hypothesis = counts.iter().all(|c| c.hypothesis_met);
            let rows = fam
                .members()
                .zip(&counts)
                .map(|(e, c)| {
                    vec![
                        e.center().iter().map(rational_string).collect::<Vec<_>>().join(" "),
                        c.count.to_string(),
                        float(c.model),
                        float(c.ratio),
                    ]
                })
                .collect();
            Ok(Report::json(json!({
                "n": n,
                "m": m,
                "ellipsoids": fam.len(),
                "hypothesis_met": hypothesis,
                "ratio_min": lo,
                "ratio_max": hi,
                "fitted_constants": [lo, hi],
                "pass": hypothesis && in_bracket(lo, hi),
                "counts": counts,
            }))
            .with_table(cols(&["center", "count", "model", "ratio"]), rows))
        }
        Check::Levels => {
            let spec = spectrum(common, &a)?;
            let seq = select_levels_within(&spec, &psi, args.levels, args.threshold, psi.horizon().unwrap_or(DEFAULT_HORIZON))?;
            let recheck: Vec<bool> = seq
                .levels
                .windows(2)
                .map(|w| separation_holds(&spec, &psi, w[0], w[1]))
                .collect();
            let rows = seq
                .levels
                .iter()
                .enumerate()
                .map(|(i, l)| vec![l.to_string(), float(seq.ratios[i])])
                .collect();
            Ok(Report::json(json!({ "sequence": seq, "separation_rechecked": recheck }))
                .with_table(cols(&["degree", "ratio"]), rows))
        }
        Check::Bounds => {
            let spec = spectrum(common, &a)?;
            let seq = select_levels_within(&spec, &psi, args.levels, args.threshold, psi.horizon().unwrap_or(DEFAULT_HORIZON))?;
            let cap = common.cap_or(DEFAULT_CAP)?.to_u64().expect("cap fits u64");
            let tree = build_tree(&a, &psi, &seq, cap)?;
            let bounds = mass_bounds_check(&tree);
            let local = local_dimension_sample(&tree, args.samples, &radii(&args.radii)?, common.seed)?;
            let rows = bounds
                .levels
                .iter()
                .map(|l| {
                    vec![
                        l.level.to_string(),
                        l.degree.to_string(),
                        float(l.model),
                        float(l.min_ratio),
                        float(l.max_ratio),
                        l.hypothesis_met.to_string(),
                    ]
                })
                .collect();
            Ok(Report::json(json!({
                "levels": seq.levels,
                "c1": bounds.c1,
                "mass_bounds": bounds,
                "local_dimension": {
                    "min_quotient": local.min_quotient,
                    "boundary_cases": local.boundary_cases,
                    "samples": local.samples.len(),
                },
            }))
            .with_table(cols(&["level", "degree", "model", "min_ratio", "max_ratio", "hypothesis_met"]), rows))
        }
        Check::Series => {
            let spec = spectrum(common, &a)?;
            let (lo, hi) = range(&args.n, (5, 60))?;
            let sum = upper_bound_sum(&spec, &psi, args.s, lo, hi)?;
            let rows = sum
                .ln_terms
                .iter()
                .enumerate()
                .map(|(i, t)| vec![(lo + i as u32).to_string(), sum.best_k[i].to_string(), float(*t)])
                .collect();
            let formula = dim_theorem1(&spec, &psi.alpha())?.value;
            Ok(Report::json(json!({ "formula_value": formula, "series": sum }))
                .with_table(cols(&["n", "best_k", "ln_term"]), rows))
        }
    }
}

// ---- cantor -------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct CantorArgs {
    /// Number of construction levels.
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    /// Largest admissible ratio between consecutive levels.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

impl CantorArgs {
    pub fn echo(&self) -> Value {
        echo(self)
    }
}

pub fn cantor(common: &Common, args: &CantorArgs) -> Result<Report> {
    let a = common.matrix()?;
    let psi = common.psi()?;
    let spec = spectrum(common, &a)?;
    let seq = select_levels_within(&spec, &psi, args.levels, args.threshold, psi.horizon().unwrap_or(DEFAULT_HORIZON))?;
    let cap = common.cap_or(DEFAULT_CAP)?.to_u64().expect("cap fits u64");
    let tree = build_tree(&a, &psi, &seq, cap)?;
    let totals: Vec<String> = (0..tree.depth()).map(|j| rational_string(&tree.level_total(j))).collect();
    let conserved = tree.conservation_holds() && (0..tree.depth()).all(|j| tree.level_total(j).is_one());
    let bounds = mass_bounds_check(&tree);
    let mut rows = Vec::new();
    for (j, level) in tree.levels.iter().enumerate() {
        for (i, node) in level.nodes.iter().enumerate() {
            rows.push(vec![
                j.to_string(),
                level.degree.to_string(),
                i.to_string(),
                node.parent.map_or(String::new(), |p| p.to_string()),
                node.center.iter().map(rational_string).collect::<Vec<_>>().join(" "),
                rational_string(&node.mass),
            ]);
        }
    }
    Ok(Report::json(json!({
        "sequence": seq,
        "level_totals": totals,
        "mass_conserved": conserved,
        "c1": bounds.c1,
        "mass_bounds": bounds,
        "tree": tree,
    }))
    .with_table(cols(&["level", "degree", "index", "parent", "center", "mass"]), rows))
}

// ---- boxdim -------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct BoxdimArgs {
    /// Degrees of the region, `a:b`.
    #[arg(long = "nrange", visible_alias = "n")]
    pub nrange: String,
    /// Dyadic exponents k of the box sides 2^-k, `a:b`.
    #[arg(long, default_value = "4:14")]
    pub scales: String,
}

impl BoxdimArgs {
    pub fn echo(&self) -> Value {
        echo(self)
    }
}

pub fn boxdim(common: &Common, args: &BoxdimArgs) -> Result<Report> {
    let a = common.matrix()?;
    let psi = common.psi()?;
    let (n_lo, n_hi) = parse_range(&args.nrange).map_err(Error::InvalidArgument)?;
    let (k_lo, k_hi) = parse_range(&args.scales).map_err(Error::InvalidArgument)?;
    let region = BoxRegion::new(&a, &psi, n_lo, n_hi, &common.cap_or(DEFAULT_CAP)?)?;
    let exps: Vec<u32> = (k_lo..=k_hi).collect();
    let report = box_count_dimension(&region, &exps)?;
    let formula = dim_theorem1(&spectrum(common, &a)?, &psi.alpha())?.value;
    let rows = report
        .scales
        .iter()
        .map(|s| vec![s.exponent.to_string(), float(s.side), s.count.to_string()])
        .collect();
    Ok(Report::json(json!({
        "formula_value": formula,
        "slope": report.slope,
        "within_tolerance": (report.slope - formula).abs() <= 0.15,
        "matched_slope": report.matched_slope,
        "report": report,
    }))
    .with_table(cols(&["exponent", "scale", "count"]), rows))
}

// ---- conj ---------------------------------------------------------------

#[derive(Args, Debug, Serialize)]
pub struct ConjArgs {
    /// Random rational points for the commutation check.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Largest denominator of the sample points.
    #[arg(long, default_value_t = 1000)]
    pub max_den: u64,
    /// Comma-separated radii for the Lipschitz sandwich.
    #[arg(long, default_value = "0.01,0.1,0.4")]
    pub radii: String,
}

impl ConjArgs {
    pub fn echo(&self) -> Value {
        echo(self)
    }
}

pub fn conj(common: &Common, args: &ConjArgs) -> Result<Report> {
    let a = common.matrix()?;
    if args.max_den < 1 {
        return Err(Error::InvalidArgument("--max-den must be positive".into()));
    }
    let cd = rational_diagonalize(&a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let xs = random_small_rationals(&mut rng, a.dim(), args.samples, args.max_den);
    let commutation = commutation_check(&cd, &a, &xs);
    let sandwich = lipschitz_sandwich(&cd, &radii(&args.radii)?)?;
    let dimension = match &common.alpha {
        Some(_) => Some(transported_dimension(&a, &common.alpha()?)?),
        None => None,
    };
    let rows = sandwich
        .iter()
        .map(|s| {
            vec![
                float(s.r),
                float(s.inner_radius),
                s.inner_holds.to_string(),
                float(s.outer_radius),
                s.outer_holds.to_string(),
            ]
        })
        .collect();
    Ok(Report::json(json!({
        "conjugacy": cd,
        "identity_holds": cd.identity_holds(&a),
        "minimal_beta": is_minimal_beta(&cd),
        "commutation": commutation,
        "commutation_pass": commutation.passed(),
        "sandwich": sandwich,
        "dimension": dimension,
    }))
    .with_table(cols(&["r", "inner_radius", "inner_holds", "outer_radius", "outer_holds"]), rows))
}
