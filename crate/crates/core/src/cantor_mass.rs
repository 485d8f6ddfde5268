//! Nested ellipsoid trees carrying an exact mass distribution.
//!
//! Level 1 holds every degree-`n_1` ellipsoid. A level-`j+1` node is a
//! degree-`n_{j+1}` ellipsoid strictly inside its level-`j` parent, and each
//! parent splits its mass evenly among its children. Masses are exact
//! rationals, so conservation holds to equality.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_linalg::{ln_rational, rational_to_f64, singular_values, IntegerMatrix};
use crate::fgeom;
use crate::par::{self, Exec};
use crate::periodic_lattice::PeriodicLattice;
use crate::recurrence_geometry::covering::ln_pow_minus_one;
use crate::recurrence_geometry::{Ellipsoid, EllipsoidShape};
use crate::serde_util;
use crate::spectrum_dim::{alpha_threshold, RateFunction, Spectrum};
use crate::torus;

/// Largest degree `select_levels` will try.
pub const DEFAULT_HORIZON: u32 = 4096;
pub const DEFAULT_RATIO_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSequence {
    pub levels: Vec<u32>,
    /// `sum_{i<j} n_i / n_j`; zero for the first level.
    pub ratios: Vec<f64>,
    /// Whether each consecutive pair satisfies the separation condition.
    pub separated: Vec<bool>,
}

impl LevelSequence {
    /// Wraps an arbitrary increasing sequence, recording which conditions hold.
    pub fn new(spec: &Spectrum, psi: &RateFunction, levels: Vec<u32>) -> Result<Self> {
        if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("levels must be positive and increasing".into()));
        }
        for &n in &levels {
            psi.ensure_covers(n)?;
        }
        let mut sum = 0u64;
        let ratios = levels
            .iter()
            .map(|&n| {
                let r = sum as f64 / n as f64;
                sum += n as u64;
                r
            })
            .collect();
        let separated = levels.windows(2).map(|w| separation_holds(spec, psi, w[0], w[1])).collect();
        Ok(Self {
            levels,
            ratios,
            separated,
        })
    }
}

/// `psi(n) / (|l_d|^n - 1) > 1 / (|l_1|^m - 1)`, exactly when both extreme
/// moduli are rational and otherwise in log space with a relative margin
/// (undecided counts as false).
pub fn separation_holds(spec: &Spectrum, psi: &RateFunction, n: u32, m: u32) -> bool {
    let (l1, ld) = (spec.min(), spec.max());
    if let (Some(a), Some(b)) = (&l1.exact, &ld.exact) {
        let one = BigRational::one();
        return psi.rational(n) * (a.pow(m as i32) - &one) > b.pow(n as i32) - one;
    }
    let lhs = psi.value(n).ln() + ln_pow_minus_one(l1.bounds.lo.ln(), m);
    let rhs = ln_pow_minus_one(ld.bounds.hi.ln(), n);
    lhs > rhs + 1e-9 * rhs.abs().max(1.0)
}

pub fn select_levels(spec: &Spectrum, psi: &RateFunction, count: usize, ratio_threshold: f64) -> Result<LevelSequence> {
    select_levels_within(spec, psi, count, ratio_threshold, DEFAULT_HORIZON)
}

/// Greedy choice: `n_1` is the least `n` with `psi(n) < 1/3`, and each next
/// level is the least degree satisfying the separation condition whose
/// ratio is at most both the threshold and the previous ratio.
pub fn select_levels_within(
    spec: &Spectrum,
    psi: &RateFunction,
    count: usize,
    ratio_threshold: f64,
    horizon: u32,
) -> Result<LevelSequence> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    if !(ratio_threshold > 0.0) {
        return Err(Error::InvalidArgument("ratio threshold must be positive".into()));
    }
    if !spec.is_expanding() {
        return Err(Error::InvalidSpectrum("the construction needs all moduli > 1".into()));
    }
    if let RateFunction::Exponential(alpha) = psi {
        if count > 1 && alpha.interval().lo <= alpha_threshold(spec).hi {
            return Err(Error::HypothesisNotMet(
                "alpha must strictly exceed log(l_d / l_1); pass a psi table along a subsequence instead".into(),
            ));
        }
    }
    let horizon = psi.horizon().map_or(horizon, |h| h.min(horizon));
    let third = BigRational::new(1.into(), 3.into());
    let n1 = (1..=horizon)
        .find(|&n| psi.rational(n) < third)
        .ok_or(Error::Infeasible { horizon })?;
    let mut levels = vec![n1];
    let mut sum = n1 as u64;
    let mut prev_ratio = ratio_threshold;
    while levels.len() < count {
        let last = *levels.last().expect("nonempty");
        let m = (last + 1..=horizon)
            .find(|&m| {
                let r = sum as f64 / m as f64;
                r <= prev_ratio && separation_holds(spec, psi, last, m)
            })
            .ok_or(Error::Infeasible { horizon })?;
        prev_ratio = sum as f64 / m as f64;
        sum += m as u64;
        levels.push(m);
    }
    LevelSequence::new(spec, psi, levels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    /// Accepted by the triangle-inequality test with the Frobenius norm.
    Conservative,
    /// Needed the exact test with a certified spectral norm.
    Refined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassNode {
    #[serde(serialize_with = "serde_util::rationals")]
    pub center: Vec<BigRational>,
    pub parent: Option<usize>,
    #[serde(serialize_with = "serde_util::rational")]
    pub mass: BigRational,
    pub containment: Option<Containment>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeLevel {
    pub degree: u32,
    #[serde(serialize_with = "serde_util::rational")]
    pub psi: BigRational,
    pub candidates: u64,
    pub conservative_accepts: u64,
    pub refined_accepts: u64,
    pub nodes: Vec<MassNode>,
    #[serde(skip)]
    pub shape: Arc<EllipsoidShape>,
    #[serde(skip)]
    pub cardinality: BigInt,
}

impl TreeLevel {
    pub fn ellipsoid(&self, i: usize) -> Ellipsoid {
        Ellipsoid::new(self.nodes[i].center.clone(), Arc::clone(&self.shape))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MassTree {
    pub dim: usize,
    #[serde(skip)]
    pub spectrum: Spectrum,
    pub levels: Vec<TreeLevel>,
}

impl MassTree {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn leaves(&self) -> &TreeLevel {
        self.levels.last().expect("at least one level")
    }

    pub fn level_total(&self, j: usize) -> BigRational {
        self.levels[j].nodes.iter().map(|n| n.mass.clone()).sum()
    }

    /// Every parent's mass equals the sum of its children's, exactly.
    pub fn conservation_holds(&self) -> bool {
        if self.level_total(0) != BigRational::one() {
            return false;
        }
        self.levels.windows(2).all(|w| {
            let mut sums = vec![BigRational::zero(); w[0].nodes.len()];
            for child in &w[1].nodes {
                sums[child.parent.expect("non-root level")] += &child.mass;
            }
            sums.iter().zip(&w[0].nodes).all(|(s, p)| *s == p.mass)
        })
    }
}

pub fn build_tree(a: &IntegerMatrix, psi: &RateFunction, seq: &LevelSequence, node_cap: u64) -> Result<MassTree> {
    build_tree_with(Exec::default(), a, psi, seq, node_cap)
}

fn level_shape(a: &IntegerMatrix, lattice: &PeriodicLattice, psi: &RateFunction) -> Result<Arc<EllipsoidShape>> {
    let shape = EllipsoidShape::new(a, lattice.spectrum(), lattice.period(), psi)?;
    if shape.max_extent() >= 0.5 {
        return Err(Error::InvalidArgument(format!(
            "ellipsoids of degree {} are too large for the torus",
            lattice.period()
        )));
    }
    Ok(Arc::new(shape))
}

/// Containment constants for children of degree `m` inside parents of
/// degree `n`: `B = M_n M_m^{-1}` maps a child's unit-ball image back to
/// the parent's coordinates.
struct Containing {
    frobenius: f64,
    sigma2_hi: BigRational,
}

fn containing(parent: &EllipsoidShape, child: &EllipsoidShape) -> Result<Containing> {
    let mc = child.shift_matrix();
    let det = mc.det();
    let adj = mc
        .to_rational()
        .inverse()?
        .scaled_to_integer(&det)
        .expect("det times inverse is the adjugate");
    let c = parent.shift_matrix() * &adj;
    let det_f = crate::exact_linalg::big_to_f64(&det).abs();
    let frobenius = c
        .to_f64_rows()
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        / det_f
        * (1.0 + 1e-12);
    let top = *singular_values(&c, 1e-12)?.last().expect("dim >= 1");
    let sigma_hi = BigRational::from_float((top.hi * top.hi).next_up()).expect("finite");
    let det2 = BigRational::from_integer(&det * &det);
    Ok(Containing {
        frobenius,
        sigma2_hi: sigma_hi / det2,
    })
}

/// Whether the child at parent-relative displacement `v` lies strictly
/// inside the parent. Both tests are sufficient conditions.
fn contained(
    parent: &EllipsoidShape,
    child: &EllipsoidShape,
    k: &Containing,
    v: &[BigRational],
) -> Option<Containment> {
    let a = parent.form(v);
    let psi_p = parent.psi();
    if a >= psi_p * psi_p {
        return None;
    }
    if rational_to_f64(&a).sqrt() + k.frobenius * child.psi_f64() < parent.psi_f64() * (1.0 - 1e-9) {
        return Some(Containment::Conservative);
    }
    // sqrt(a) + y < psi_p with y^2 = sigma^2 psi_c^2, squared out exactly
    let p2 = psi_p * psi_p;
    let y2 = &k.sigma2_hi * child.psi() * child.psi();
    if y2 >= p2 {
        return None;
    }
    let rhs = &p2 + &y2 - &a;
    let four = BigRational::from_integer(4.into());
    (rhs.is_positive() && four * &p2 * &y2 < &rhs * &rhs).then_some(Containment::Refined)
}

pub fn build_tree_with(
    exec: Exec,
    a: &IntegerMatrix,
    psi: &RateFunction,
    seq: &LevelSequence,
    node_cap: u64,
) -> Result<MassTree> {
    let lattice = PeriodicLattice::new(a, seq.levels[0])?;
    if lattice.cardinality() > &BigInt::from(node_cap) {
        return Err(Error::cap("tree level 1", lattice.cardinality().clone(), node_cap));
    }
    let spectrum = lattice.spectrum().clone();
    let shape = level_shape(a, &lattice, psi)?;
    let q = BigInt::from(lattice.denom());
    let mass = BigRational::new(1.into(), lattice.cardinality().clone());
    let nodes: Vec<MassNode> = lattice
        .collect(exec)
        .into_iter()
        .map(|num| MassNode {
            center: num.iter().map(|&x| BigRational::new(x.into(), q.clone())).collect(),
            parent: None,
            mass: mass.clone(),
            containment: None,
        })
        .collect();
    let mut levels = vec![TreeLevel {
        degree: seq.levels[0],
        psi: shape.psi().clone(),
        candidates: nodes.len() as u64,
        conservative_accepts: nodes.len() as u64,
        refined_accepts: 0,
        nodes,
        shape,
        cardinality: lattice.cardinality().clone(),
    }];

    for (j, &m) in seq.levels.iter().enumerate().skip(1) {
        let parent = levels.last().expect("nonempty");
        let lattice = PeriodicLattice::new(a, m)?;
        let shape = level_shape(a, &lattice, psi)?;
        let k = containing(&parent.shape, &shape)?;
        let p_shape = &parent.shape;
        let psi2 = p_shape.psi_f64().powi(2);
        let per_parent = par::map_collect(exec, &parent.nodes, |node| -> Result<(u64, Vec<(Vec<BigRational>, Containment)>)> {
            let c_f64: Vec<f64> = node.center.iter().map(rational_to_f64).collect();
            let mut seen = 0u64;
            let mut kids = Vec::new();
            lattice.lifts_in_region(p_shape.gram_f64(), &c_f64, psi2, |x| {
                let v: Vec<BigRational> = x.iter().zip(&node.center).map(|(a, b)| a - b).collect();
                seen += 1;
                if let Some(how) = contained(p_shape, &shape, &k, &v) {
                    kids.push((torus::canonical(&x), how));
                }
            })?;
            kids.sort_by(|a, b| a.0.cmp(&b.0));
            Ok((seen, kids))
        });
        let mut nodes = Vec::new();
        let (mut candidates, mut conservative, mut refined) = (0u64, 0u64, 0u64);
        for (pi, res) in per_parent.into_iter().enumerate() {
            let (seen, kids) = res?;
            candidates += seen;
            if kids.is_empty() {
                return Err(Error::EmptyLevel { level: j + 1, parent: pi });
            }
            if nodes.len() + kids.len() > node_cap as usize {
                return Err(Error::cap("tree level", nodes.len() + kids.len(), node_cap));
            }
            let mass = &parent.nodes[pi].mass / BigRational::from_integer(kids.len().into());
            for (center, how) in kids {
                match how {
                    Containment::Conservative => conservative += 1,
                    Containment::Refined => refined += 1,
                }
                nodes.push(MassNode {
                    center,
                    parent: Some(pi),
                    mass: mass.clone(),
                    containment: Some(how),
                });
            }
        }
        levels.push(TreeLevel {
            degree: m,
            psi: shape.psi().clone(),
            candidates,
            conservative_accepts: conservative,
            refined_accepts: refined,
            nodes,
            shape,
            cardinality: lattice.cardinality().clone(),
        });
    }
    Ok(MassTree {
        dim: a.dim(),
        spectrum,
        levels,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelMassReport {
    /// 1-based.
    pub level: usize,
    pub degree: u32,
    /// `H_{n_j}^{-1} prod_{k<j} psi(n_k)^{-d}`
    pub model: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Whether the counting hypothesis for children of the previous level
    /// holds; levels where it fails are left out of the fit.
    pub hypothesis_met: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassBounds {
    /// Least `C_1 >= 1` with every included ratio in `[C_1^{1-j}, C_1^{j-1}]`.
    pub c1: f64,
    pub levels: Vec<LevelMassReport>,
    pub excluded_levels: Vec<usize>,
}

pub fn mass_bounds_check(tree: &MassTree) -> MassBounds {
    let d = tree.dim as i32;
    let spec = &tree.spectrum;
    let (l1, ld) = (spec.min().value, spec.max().value);
    let mut prod = BigRational::one();
    let mut c1 = 1.0f64;
    let mut levels = Vec::new();
    let mut excluded = Vec::new();
    for (j, level) in tree.levels.iter().enumerate() {
        let model = &prod / BigRational::from_integer(level.cardinality.clone());
        let ratios: Vec<f64> = level.nodes.iter().map(|n| rational_to_f64(&(&n.mass / &model))).collect();
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let hypothesis_met = j == 0 || {
            let prev = &tree.levels[j - 1];
            let l_nd = 2.0 * rational_to_f64(&prev.psi) / (ld.powi(prev.degree as i32) - 1.0);
            l_nd * (l1.powi(level.degree as i32) - 1.0) / (tree.dim as f64).sqrt() > 1.0
        };
        if !hypothesis_met {
            excluded.push(j + 1);
        } else if j > 0 {
            let worst = max_ratio.max(1.0 / min_ratio);
            c1 = c1.max(worst.powf(1.0 / j as f64));
        }
        levels.push(LevelMassReport {
            level: j + 1,
            degree: level.degree,
            model: rational_to_f64(&model),
            min_ratio,
            max_ratio,
            hypothesis_met,
        });
        prod /= level.psi.pow(d);
    }
    MassBounds {
        c1,
        levels,
        excluded_levels: excluded,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallCover {
    /// Balls of radius `r_3` needed by the per-axis product bound.
    pub product_bound: f64,
    /// Grid cells of side `2 r_3 / sqrt(d)` meeting both the ball and the
    /// ellipsoid (each lies in an `r_3`-ball); `d <= 2` only.
    pub grid_cover: Option<u64>,
}

/// Covers of `B(center, r1)` intersected with `ell` by balls of radius `r3`.
/// The ball is taken at its lift nearest the ellipsoid centre, which
/// requires `r1` plus the ellipsoid's extent to stay below `1/2`.
pub fn ball_cover_count(center: &[f64], r1: f64, ell: &Ellipsoid, r3: f64) -> Result<BallCover> {
    let d = ell.dim();
    if center.len() != d {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    if !(r3 > 0.0 && r3 <= r1) {
        return Err(Error::InvalidArgument(format!("need 0 < r3 <= r1, got r1 = {r1}, r3 = {r3}")));
    }
    let shape = ell.shape();
    if r1 + shape.max_extent() >= 0.5 {
        return Err(Error::InvalidArgument("ball plus ellipsoid must fit in half the torus".into()));
    }
    let product_bound = shape
        .semi_axes_model()
        .iter()
        .map(|&a| {
            if r1 <= a {
                (r1 / r3).ceil()
            } else if a > r3 {
                (a / r3).ceil()
            } else {
                1.0
            }
        })
        .product();
    let grid_cover = (d <= 2).then(|| {
        let c = ell.center_f64();
        let b: Vec<f64> = center.iter().zip(&c).map(|(x, y)| torus::centered_f64(x - y)).collect();
        let h = shape.bounding_half_widths();
        let side = 2.0 * r3 / (d as f64).sqrt();
        let range: Vec<(i64, i64)> = (0..d)
            .map(|i| {
                let lo = (-h[i]).max(b[i] - r1);
                let hi = h[i].min(b[i] + r1);
                ((lo / side).floor() as i64, (hi / side).floor() as i64)
            })
            .collect();
        let eye: fgeom::Mat = (0..d).map(|i| (0..d).map(|j| (i == j) as u8 as f64).collect()).collect();
        let psi2 = shape.psi_f64().powi(2) * (1.0 + 1e-12);
        let r12 = r1 * r1 * (1.0 + 1e-12);
        let mut count = 0u64;
        let mut idx: Vec<i64> = range.iter().map(|r| r.0).collect();
        if range.iter().any(|r| r.0 > r.1) {
            return 0;
        }
        loop {
            let lo: Vec<f64> = idx.iter().map(|&i| i as f64 * side).collect();
            let lo_b: Vec<f64> = lo.iter().zip(&b).map(|(x, y)| x - y).collect();
            if fgeom::box_form_min(shape.gram_f64(), &lo, side) < psi2 && fgeom::box_form_min(&eye, &lo_b, side) < r12 {
                count += 1;
            }
            let mut axis = 0;
            loop {
                if axis == d {
                    return count;
                }
                idx[axis] += 1;
                if idx[axis] <= range[axis].1 {
                    break;
                }
                idx[axis] = range[axis].0;
                axis += 1;
            }
        }
    });
    Ok(BallCover {
        product_bound,
        grid_cover,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalSample {
    pub x: Vec<f64>,
    /// Sampled at a leaf centre rather than uniformly inside a leaf.
    pub at_center: bool,
    pub r: f64,
    #[serde(serialize_with = "serde_util::rational")]
    pub mass: BigRational,
    /// `ln mu(B(x, r)) / ln r`, and 0 when the ball carries all the mass.
    pub quotient: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalDimensionReport {
    pub seed: u64,
    pub samples: Vec<LocalSample>,
    pub min_quotient: f64,
    /// Leaf-ball pairs whose distance was within rounding of `r`; these are
    /// counted as intersecting.
    pub boundary_cases: u64,
}

/// Exact mass of the leaves meeting `B(x, r)`, plus the number of
/// borderline leaves.
pub fn ball_mass(tree: &MassTree, x: &[f64], r: f64) -> (BigRational, u64) {
    let leaves = tree.leaves();
    let shape = &leaves.shape;
    let reach = shape.max_extent() * (1.0 + 1e-12);
    let offsets = torus::unit_offsets(tree.dim);
    let mut mass = BigRational::zero();
    let mut boundary = 0u64;
    for node in &leaves.nodes {
        let v: Vec<f64> = x
            .iter()
            .zip(&node.center)
            .map(|(a, c)| torus::centered_f64(a - rational_to_f64(c)))
            .collect();
        let mut best = f64::INFINITY;
        for k in &offsets {
            let w: Vec<f64> = v.iter().zip(k).map(|(a, &o)| a + o as f64).collect();
            let len = fgeom::norm(&w);
            if len - reach >= r * (1.0 + 1e-9) {
                continue;
            }
            let dist = if len + reach < r {
                0.0
            } else {
                fgeom::point_to_ellipsoid(&w, shape.gram_f64(), shape.psi_f64()).0
            };
            best = best.min(dist);
        }
        if best < r * (1.0 - 1e-9) {
            mass += &node.mass;
        } else if best < r * (1.0 + 1e-9) {
            mass += &node.mass;
            boundary += 1;
        }
    }
    (mass, boundary)
}

pub fn local_dimension_sample(tree: &MassTree, samples: usize, radii: &[f64], seed: u64) -> Result<LocalDimensionReport> {
    local_dimension_sample_with(Exec::default(), tree, samples, radii, seed)
}

pub fn local_dimension_sample_with(
    exec: Exec,
    tree: &MassTree,
    samples: usize,
    radii: &[f64],
    seed: u64,
) -> Result<LocalDimensionReport> {
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    let leaves = tree.leaves();
    let d = tree.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<(Vec<f64>, bool)> = (0..samples)
        .map(|i| {
            let leaf = &leaves.nodes[rng.random_range(0..leaves.nodes.len())];
            let c: Vec<f64> = leaf.center.iter().map(rational_to_f64).collect();
            if i % 2 == 0 {
                return (c, true);
            }
            let u = loop {
                let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                if fgeom::norm(&u) < 1.0 {
                    break u;
                }
            };
            let off = leaves.shape.displacement(&u);
            (c.iter().zip(off).map(|(a, b)| torus::frac_f64(a + b)).collect(), false)
        })
        .collect();
    let per = par::map_collect(exec, &centres, |(x, at_center)| {
        radii
            .iter()
            .map(|&r| {
                let (mass, boundary) = ball_mass(tree, x, r);
                let quotient = if mass.is_one() { 0.0 } else { ln_rational(&mass) / r.ln() };
                (
                    LocalSample {
                        x: x.clone(),
                        at_center: *at_center,
                        r,
                        mass,
                        quotient,
                    },
                    boundary,
                )
            })
            .collect::<Vec<_>>()
    });
    let mut out = Vec::new();
    let mut boundary_cases = 0;
    for (s, b) in per.into_iter().flatten() {
        out.push(s);
        boundary_cases += b;
    }
    let min_quotient = out.iter().map(|s| s.quotient).fold(f64::INFINITY, f64::min);
    Ok(LocalDimensionReport {
        seed,
        samples: out,
        min_quotient,
        boundary_cases,
    })
}
