//! Intensity-modulated radiation therapy planning over a fixed aperture
//! dictionary.
//!
//! Decision `y_{a,e}` is the intensity of aperture `e` of angle `a`, with
//! `sum y <= 1`. Voxel doses are `z = A y`, where column `(a, e)` of `A`
//! sums the beamlet doses of angle `a` over the aperture mask. Doses are
//! stored in Gy and divided by `dose_unit` inside the models.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelProblem;
use crate::geometry::FeasibleSet;
use crate::level::ConstrainedProblem;
use crate::nonconvex::NonconvexProblem;
use crate::oracle::{GroupMaxSum, HingeSum, Rows, SharedOracle, SigmoidSum, SquaredHingeSum};
use crate::vecops::{dot, positive_part_norm};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImrtAngle {
    /// `voxels x beamlets`, Gy per unit intensity.
    pub dose: Rows,
    /// Beamlet index sets, one per aperture.
    pub apertures: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionKind {
    /// At most a `quantile` fraction of the structure below `dose`.
    Underdose,
    /// At most a `quantile` fraction of the structure above `dose`.
    Overdose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub name: String,
    pub voxels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Criterion {
    pub kind: CriterionKind,
    pub structure: usize,
    /// Threshold `b_k` in Gy.
    pub dose: f64,
    /// `p_k`.
    pub quantile: f64,
    /// Objective weight `w_k` in the nonconvex model.
    pub weight: f64,
}

/// Quadratic under/over-dose penalty targets per voxel (Gy) and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelTargets {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower_weight: Vec<f64>,
    pub upper_weight: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImrtInstance {
    pub n_voxels: usize,
    pub angles: Vec<ImrtAngle>,
    pub structures: Vec<Structure>,
    pub criteria: Vec<Criterion>,
    pub targets: VoxelTargets,
    /// Gy per model dose unit.
    pub dose_unit: f64,
}

impl ImrtInstance {
    pub fn validate(&self) -> Result<()> {
        let nv = self.n_voxels;
        if nv == 0 || self.angles.is_empty() {
            return Err(Error::InvalidArgument("instance needs voxels and angles"));
        }
        Error::positive("dose_unit", self.dose_unit)?;
        for a in &self.angles {
            Error::check_dim(nv, a.dose.n_rows())?;
            if a.apertures.is_empty() || a.apertures.iter().any(|m| m.is_empty()) {
                return Err(Error::InvalidArgument("every angle needs nonempty apertures"));
            }
            if a.apertures.iter().flatten().any(|&b| b >= a.dose.dim()) {
                return Err(Error::InvalidArgument("aperture beamlet out of range"));
            }
            for v in 0..nv {
                if a.dose.row(v).iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                    return Err(Error::InvalidArgument("doses must be finite and nonnegative"));
                }
            }
        }
        for s in &self.structures {
            if s.voxels.is_empty() || s.voxels.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidArgument("structure voxels empty or out of range"));
            }
        }
        for c in &self.criteria {
            if c.structure >= self.structures.len() {
                return Err(Error::InvalidArgument("criterion structure out of range"));
            }
            if !(c.quantile > 0.0 && c.quantile < 1.0) {
                return Err(Error::InvalidConstant { name: "quantile", value: c.quantile });
            }
            if !c.dose.is_finite() || !(c.weight >= 0.0) {
                return Err(Error::InvalidArgument("criterion dose or weight invalid"));
            }
        }
        let t = &self.targets;
        for v in [&t.lower, &t.upper, &t.lower_weight, &t.upper_weight] {
            Error::check_dim(nv, v.len())?;
            crate::vecops::ensure_finite(v)?;
        }
        Ok(())
    }

    pub fn n_apertures(&self) -> usize {
        self.angles.iter().map(|a| a.apertures.len()).sum()
    }

    /// Aperture index groups, one per angle.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.angles
            .iter()
            .map(|a| {
                let g: Vec<usize> = (start..start + a.apertures.len()).collect();
                start += a.apertures.len();
                g
            })
            .collect()
    }

    /// `voxels x apertures` dose matrix in model units.
    pub fn aperture_doses(&self) -> Rows {
        let nj = self.n_apertures();
        let mut data = vec![0.0; self.n_voxels * nj];
        let mut j = 0;
        for a in &self.angles {
            for mask in &a.apertures {
                for v in 0..self.n_voxels {
                    let row = a.dose.row(v);
                    data[v * nj + j] = mask.iter().map(|&b| row[b]).sum::<f64>() / self.dose_unit;
                }
                j += 1;
            }
        }
        Rows::new(self.n_voxels, nj, data).expect("consistent sizes")
    }
}

/// Shape of a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImrtGenSpec {
    pub n_angles: usize,
    pub n_voxels: usize,
    pub n_beamlets: usize,
    pub apertures_per_angle: usize,
    pub n_structures: usize,
    /// `(b_k, p_k)` of the underdose criteria; criterion `k` applies to
    /// tumor `k mod n_structures`.
    pub underdose: Vec<(f64, f64)>,
    /// `(b_k, p_k)` of the overdose criteria, on the last tumor.
    pub overdose: Vec<(f64, f64)>,
    /// Mean tumor dose of the uniform plan, Gy.
    pub mean_tumor_dose: f64,
    /// Healthy-tissue penalty threshold, Gy.
    pub healthy_limit: f64,
}

impl Default for ImrtGenSpec {
    fn default() -> Self {
        Self {
            n_angles: 8,
            n_voxels: 512,
            n_beamlets: 16,
            apertures_per_angle: 4,
            n_structures: 2,
            underdose: vec![(40.0, 0.01), (50.0, 0.01)],
            overdose: vec![(100.0, 0.05)],
            mean_tumor_dose: 60.0,
            healthy_limit: 20.0,
        }
    }
}

/// Deterministic synthetic instance: voxels in a unit cube, beams rotating
/// about the vertical axis with a rectangular beamlet grid, Gaussian lateral
/// falloff with depth attenuation, spherical tumors and random rectangular
/// apertures.
pub fn gen_synthetic_imrt(spec: &ImrtGenSpec, seed: u64) -> Result<ImrtInstance> {
    if spec.n_angles == 0
        || spec.n_voxels == 0
        || spec.n_beamlets == 0
        || spec.apertures_per_angle == 0
        || spec.n_structures == 0
    {
        return Err(Error::InvalidArgument("all counts must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<[f64; 3]> = (0..spec.n_voxels)
        .map(|_| [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5])
        .collect();

    // beamlet grid rows x cols, as square as the count allows
    let mut rows = (spec.n_beamlets as f64).sqrt() as usize;
    while !spec.n_beamlets.is_multiple_of(rows) {
        rows -= 1;
    }
    let cols = spec.n_beamlets / rows;
    let half_width = 0.75;
    let (ws, wt) = (2.0 * half_width / cols as f64, 1.0 / rows as f64);

    let mut angles = Vec::with_capacity(spec.n_angles);
    for a in 0..spec.n_angles {
        let phi = PI * a as f64 / spec.n_angles as f64;
        let (c, s) = (phi.cos(), phi.sin());
        let mut dose = vec![0.0; spec.n_voxels * spec.n_beamlets];
        for (v, p) in pos.iter().enumerate() {
            let depth = p[0] * c + p[1] * s + half_width;
            let lateral = -p[0] * s + p[1] * c;
            let atten = (-0.8 * depth).exp();
            for l in 0..rows {
                let tc = -0.5 + (l as f64 + 0.5) * wt;
                for r in 0..cols {
                    let sc = -half_width + (r as f64 + 0.5) * ws;
                    let d2 = ((lateral - sc) / ws).powi(2) + ((p[2] - tc) / wt).powi(2);
                    let noise = 0.9 + 0.2 * rng.random::<f64>();
                    dose[v * spec.n_beamlets + l * cols + r] = atten * (-0.5 * d2).exp() * noise;
                }
            }
        }
        let apertures = (0..spec.apertures_per_angle)
            .map(|_| {
                let (l0, l1) = ordered(&mut rng, rows);
                let (r0, r1) = ordered(&mut rng, cols);
                let mut m = Vec::new();
                for l in l0..=l1 {
                    for r in r0..=r1 {
                        m.push(l * cols + r);
                    }
                }
                m
            })
            .collect();
        angles.push(ImrtAngle { dose: Rows::new(spec.n_voxels, spec.n_beamlets, dose)?, apertures });
    }

    let mut structures = Vec::with_capacity(spec.n_structures);
    let mut taken = vec![false; spec.n_voxels];
    for t in 0..spec.n_structures {
        let center = [
            0.5 * (rng.random::<f64>() - 0.5),
            0.5 * (rng.random::<f64>() - 0.5),
            0.5 * (rng.random::<f64>() - 0.5),
        ];
        let mut by_dist: Vec<(f64, usize)> = pos
            .iter()
            .enumerate()
            .filter(|(v, _)| !taken[*v])
            .map(|(v, p)| ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2) + (p[2] - center[2]).powi(2), v))
            .collect();
        by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
        let size = (spec.n_voxels / 16).max(1).min(by_dist.len());
        if size == 0 {
            return Err(Error::InvalidArgument("too few voxels for the requested structures"));
        }
        let mut voxels: Vec<usize> = by_dist[..size].iter().map(|p| p.1).collect();
        voxels.sort_unstable();
        for &v in &voxels {
            taken[v] = true;
        }
        structures.push(Structure { name: alloc::format!("tumor-{}", t + 1), voxels });
    }

    let mut criteria = Vec::new();
    for (k, &(b, p)) in spec.underdose.iter().enumerate() {
        criteria.push(Criterion {
            kind: CriterionKind::Underdose,
            structure: k % spec.n_structures,
            dose: b,
            quantile: p,
            weight: 1.0,
        });
    }
    for &(b, p) in &spec.overdose {
        criteria.push(Criterion {
            kind: CriterionKind::Overdose,
            structure: spec.n_structures - 1,
            dose: b,
            quantile: p,
            weight: 1.0,
        });
    }

    let mut targets = VoxelTargets {
        lower: vec![0.0; spec.n_voxels],
        upper: vec![spec.healthy_limit; spec.n_voxels],
        lower_weight: vec![0.0; spec.n_voxels],
        upper_weight: vec![1.0; spec.n_voxels],
    };
    for c in &criteria {
        for &v in &structures[c.structure].voxels {
            match c.kind {
                CriterionKind::Underdose => {
                    targets.lower[v] = targets.lower[v].max(c.dose);
                    targets.lower_weight[v] = 1.0;
                    if targets.upper[v] == spec.healthy_limit {
                        targets.upper[v] = f64::max(c.dose, spec.healthy_limit) * 2.0;
                    }
                }
                CriterionKind::Overdose => targets.upper[v] = c.dose,
            }
        }
    }

    let mut inst = ImrtInstance { n_voxels: spec.n_voxels, angles, structures, criteria, targets, dose_unit: 1.0 };
    // scale doses so the uniform plan gives the requested mean tumor dose
    let a = inst.aperture_doses();
    let nj = inst.n_apertures();
    let tumor: Vec<usize> = inst.structures.iter().flat_map(|s| s.voxels.iter().copied()).collect();
    let mean = tumor.iter().map(|&v| a.row(v).iter().sum::<f64>() / nj as f64).sum::<f64>() / tumor.len() as f64;
    let scale = spec.mean_tumor_dose / mean;
    for ang in &mut inst.angles {
        let (n, d) = (ang.dose.n_rows(), ang.dose.dim());
        let data: Vec<f64> = (0..n).flat_map(|v| ang.dose.row(v).iter().map(|x| x * scale).collect::<Vec<_>>()).collect();
        ang.dose = Rows::new(n, d, data)?;
    }
    inst.dose_unit = 100.0;
    inst.validate()?;
    Ok(inst)
}

fn ordered(rng: &mut ChaCha8Rng, n: usize) -> (usize, usize) {
    let a = rng.random_range(0..n);
    let b = rng.random_range(0..n);
    (a.min(b), a.max(b))
}

/// Built IMRT model with the bookkeeping needed to report on a plan.
#[derive(Clone)]
pub struct ImrtModel {
    pub problem: ModelProblem,
    pub n_apertures: usize,
    /// Number of trailing CVaR threshold variables (convex model only).
    pub n_tau: usize,
    pub phi: f64,
    pub groups: Vec<Vec<usize>>,
    doses: Rows,
    instance: Arc<ImrtInstance>,
}

/// Status of one clinical criterion under a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub structure: String,
    pub dose: f64,
    pub quantile: f64,
    /// Fraction of the structure on the wrong side of `dose`.
    pub violating_fraction: f64,
    pub satisfied: bool,
}

fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 && phi.is_finite() {
        Ok(())
    } else {
        Err(Error::BadPhi(phi))
    }
}

fn padded_row(a: &Rows, v: usize, sign: f64, dim: usize) -> impl Iterator<Item = f64> + '_ {
    a.row(v).iter().map(move |x| sign * x).chain(core::iter::repeat_n(0.0, dim - a.dim()))
}

/// Convex model: quadratic dose penalty, CVaR rows per criterion with
/// thresholds `tau_k` as extra variables, and the group-sparsity row
/// `sum_a max_e y_{a,e} <= phi`.
pub fn build_imrt_convex(instance: &ImrtInstance, phi: f64) -> Result<ImrtModel> {
    check_phi(phi)?;
    instance.validate()?;
    let a = instance.aperture_doses();
    let nj = a.dim();
    let nc = instance.criteria.len();
    let dim = nj + nc;
    let unit = instance.dose_unit;
    let tau_max = (0..a.n_rows()).flat_map(|v| a.row(v).iter().copied()).fold(0.0, f64::max);
    let set = FeasibleSet::product(vec![
        FeasibleSet::simplex_leq(nj, 1.0)?,
        FeasibleSet::boxed(vec![0.0; nc], vec![tau_max.max(1e-12); nc])?,
    ])?;

    let t = &instance.targets;
    let nv = instance.n_voxels as f64;
    let (mut rows, mut offsets, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    let mut n_rows = 0;
    for v in 0..instance.n_voxels {
        if t.lower_weight[v] > 0.0 {
            rows.extend(padded_row(&a, v, -1.0, dim));
            offsets.push(t.lower[v] / unit);
            weights.push(t.lower_weight[v] / nv);
            n_rows += 1;
        }
        if t.upper_weight[v] > 0.0 {
            rows.extend(padded_row(&a, v, 1.0, dim));
            offsets.push(-t.upper[v] / unit);
            weights.push(t.upper_weight[v] / nv);
            n_rows += 1;
        }
    }
    let objective = SquaredHingeSum::new(Rows::new(n_rows, dim, rows)?, offsets, weights, set.max_norm())?;

    let mut constraints: Vec<SharedOracle> = Vec::with_capacity(nc + 1);
    for (k, c) in instance.criteria.iter().enumerate() {
        let voxels = &instance.structures[c.structure].voxels;
        let tau = nj + k;
        let sign = match c.kind {
            CriterionKind::Underdose => -1.0,
            CriterionKind::Overdose => 1.0,
        };
        // under: -tau + CVaR_lower + b; over: tau + CVaR_upper - b
        let mut lin = vec![0.0; dim];
        lin[tau] = sign;
        let mut data = Vec::with_capacity(voxels.len() * dim);
        for &v in voxels {
            let start = data.len();
            data.extend(padded_row(&a, v, sign, dim));
            data[start + tau] = -sign;
        }
        let w = 1.0 / (c.quantile * voxels.len() as f64);
        let h = HingeSum::new(
            lin,
            -sign * c.dose / unit,
            Rows::new(voxels.len(), dim, data)?,
            vec![0.0; voxels.len()],
            vec![w; voxels.len()],
        )?;
        constraints.push(Arc::new(h));
    }
    let groups = instance.groups();
    constraints.push(Arc::new(GroupMaxSum::new(dim, vec![0.0; dim], -phi, groups.clone())?));
    let problem = ConstrainedProblem::new(Arc::new(objective), constraints, set)?;
    Ok(ImrtModel {
        problem: ModelProblem::Convex(problem),
        n_apertures: nj,
        n_tau: nc,
        phi,
        groups,
        doses: a,
        instance: Arc::new(instance.clone()),
    })
}

/// Nonconvex model: sigmoid-smoothed fraction of voxels violating each
/// criterion at its own threshold, under the group-sparsity row.
/// `weights` defaults to the criteria's own weights.
pub fn build_imrt_nonconvex(
    instance: &ImrtInstance,
    phi: f64,
    theta: f64,
    weights: Option<&[f64]>,
) -> Result<ImrtModel> {
    check_phi(phi)?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::BadTheta(theta));
    }
    instance.validate()?;
    let w: Vec<f64> = match weights {
        Some(w) => {
            Error::check_dim(instance.criteria.len(), w.len())?;
            w.to_vec()
        }
        None => instance.criteria.iter().map(|c| c.weight).collect(),
    };
    let a = instance.aperture_doses();
    let nj = a.dim();
    let unit = instance.dose_unit;
    let (mut rows, mut offsets, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    let mut n_rows = 0;
    for (c, wk) in instance.criteria.iter().zip(&w) {
        let voxels = &instance.structures[c.structure].voxels;
        // under: sigmoid((tau - z) / theta); over: sigmoid((z - tau) / theta)
        let sign = match c.kind {
            CriterionKind::Underdose => -1.0,
            CriterionKind::Overdose => 1.0,
        };
        for &v in voxels {
            rows.extend(padded_row(&a, v, sign, nj));
            offsets.push(-sign * c.dose / unit);
            ws.push(wk / voxels.len() as f64);
            n_rows += 1;
        }
    }
    let f = SigmoidSum::new(Rows::new(n_rows, nj, rows)?, offsets, ws, theta)?;
    let lc = f.lower_curvature();
    let groups = instance.groups();
    let h = GroupMaxSum::new(nj, vec![0.0; nj], -phi, groups.clone())?;
    let problem = NonconvexProblem::new(Arc::new(f), lc, vec![Arc::new(h)], FeasibleSet::simplex_leq(nj, 1.0)?)?;
    Ok(ImrtModel {
        problem: ModelProblem::Nonconvex(problem),
        n_apertures: nj,
        n_tau: 0,
        phi,
        groups,
        doses: a,
        instance: Arc::new(instance.clone()),
    })
}

impl ImrtModel {
    pub fn instance(&self) -> &ImrtInstance {
        &self.instance
    }

    /// Aperture-intensity block of a decision vector.
    pub fn intensities<'a>(&self, x: &'a [f64]) -> &'a [f64] {
        &x[..self.n_apertures]
    }

    /// Voxel doses in Gy.
    pub fn voxel_doses(&self, y: &[f64]) -> Vec<f64> {
        let y = &y[..self.n_apertures];
        (0..self.doses.n_rows())
            .map(|v| dot(self.doses.row(v), y) * self.instance.dose_unit)
            .collect()
    }

    /// `sum_a max_e y_{a,e}`.
    pub fn group_value(&self, y: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&e| y[e]).fold(f64::NEG_INFINITY, f64::max))
            .sum()
    }

    /// `[sum_a max_e y_{a,e} - phi]_+`.
    pub fn group_violation(&self, y: &[f64]) -> f64 {
        (self.group_value(y) - self.phi).max(0.0)
    }

    /// `|[h_c]_+|` over the CVaR rows; needs the full convex decision vector.
    pub fn clinical_violation(&self, x: &[f64]) -> f64 {
        match &self.problem {
            ModelProblem::Convex(p) => {
                let vals: Vec<f64> = p.constraints()[..self.n_tau].iter().map(|c| c.value(x)).collect();
                positive_part_norm(&vals)
            }
            ModelProblem::Nonconvex(_) => 0.0,
        }
    }

    /// Objective of the model at `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        match &self.problem {
            ModelProblem::Convex(p) => p.objective().value(x),
            ModelProblem::Nonconvex(p) => p.objective().value(x),
        }
    }

    pub fn criteria_report(&self, y: &[f64]) -> Vec<CriterionReport> {
        let z = self.voxel_doses(y);
        self.instance
            .criteria
            .iter()
            .map(|c| {
                let s = &self.instance.structures[c.structure];
                let bad = s
                    .voxels
                    .iter()
                    .filter(|&&v| match c.kind {
                        CriterionKind::Underdose => z[v] < c.dose,
                        CriterionKind::Overdose => z[v] > c.dose,
                    })
                    .count();
                let frac = bad as f64 / s.voxels.len() as f64;
                CriterionReport {
                    kind: c.kind,
                    structure: s.name.clone(),
                    dose: c.dose,
                    quantile: c.quantile,
                    violating_fraction: frac,
                    satisfied: frac <= c.quantile,
                }
            })
            .collect()
    }
}
