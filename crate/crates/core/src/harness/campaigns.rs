use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::report::{Aggregate, CampaignReport, Metadata, TrialReport};
use crate::channels::{random_channel, random_povm_with_ranks, random_rank_one_povm};
use crate::entropy::{renyi_cmi, sandwiched_cmi, VN_WINDOW};
use crate::error::{Error, Result};
use crate::linalg::SubsystemShape;
use crate::measures::rank_one_refinement_test;
use crate::reldiff::{
    delta_alpha, delta_tilde_alpha, discord_remainder, holevo_remainder, holevo_remainder_via_channel, joint_convexity_remainder,
    monotonicity_remainder, random_instance, random_unitary_instance, unitary_channel_exact_mono,
    Variant,
};
use crate::rng::stream_rng;
use crate::states::{random_density, random_full_rank, random_probs, DensityOperator, Ensemble};

pub const DEFAULT_GRID: [f64; 12] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.5, 2.0, 3.0, 5.0, 7.0, 10.0];

/// Margins below this count as violations.
pub const VIOLATION_THRESHOLD: f64 = -1e-8;

/// Threshold for campaigns over proven inequalities.
pub const CONTROL_THRESHOLD: f64 = -1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignOptions {
    pub trials: usize,
    pub seed: u64,
    pub parallel: bool,
    /// Samplers reject states whose minimum eigenvalue is below this.
    pub reject_eps: f64,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            seed: 0,
            parallel: true,
            reject_eps: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Channel on the first argument, the conjectured case.
    A,
    /// Channel on the second argument, the proven control.
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainderKind {
    Monotonicity,
    JointConvexity,
    Holevo,
    Discord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Campaign {
    /// `I_alpha(A;B|E) - I_alpha(A';B|E)` under random channels on one side.
    Conjecture1 { dims: [usize; 3], grid: Vec<f64>, side: Side },
    /// `Delta_beta - Delta_alpha` for `alpha < beta` from the grid, both variants,
    /// channel dimensions drawn from `2..=max_dim`; every pair sees the same instances.
    Conjecture2 { max_dim: usize, grid: Vec<f64> },
    /// The proven unitary pairs `alpha + beta = 2` and `1/alpha + 1/beta = 2`.
    UnitaryCases { max_dim: usize, grid: Vec<f64> },
    /// `I~_beta(A;B|C) - I~_alpha(A;B|C)` over consecutive grid orders.
    CmiAlphaMono { dims: [usize; 3], grid: Vec<f64> },
    Remainder { kind: RemainderKind, max_dim: usize },
    /// `objective(coarse) - objective(rank-one refinement)` for random mixed-rank POVMs.
    Refinement { max_dim: usize, alphas: Vec<f64> },
}

impl Campaign {
    pub fn name(&self) -> String {
        match self {
            Campaign::Conjecture1 { side: Side::A, .. } => "conjecture1".into(),
            Campaign::Conjecture1 { side: Side::B, .. } => "conjecture1_control".into(),
            Campaign::Conjecture2 { .. } => "conjecture2".into(),
            Campaign::UnitaryCases { .. } => "unitary_cases".into(),
            Campaign::CmiAlphaMono { .. } => "cmi_alpha_mono".into(),
            Campaign::Remainder { kind, .. } => format!("remainder_{}", kind_name(*kind)),
            Campaign::Refinement { .. } => "refinement".into(),
        }
    }

    /// Proven statements whose violations fail the run.
    pub fn gated(&self) -> bool {
        matches!(
            self,
            Campaign::Conjecture1 { side: Side::B, .. }
                | Campaign::UnitaryCases { .. }
                | Campaign::Refinement { .. }
                | Campaign::Remainder { .. }
        )
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Campaign::Conjecture1 { side: Side::B, .. } | Campaign::UnitaryCases { .. } | Campaign::Refinement { .. } => {
                CONTROL_THRESHOLD
            }
            _ => VIOLATION_THRESHOLD,
        }
    }

    fn validate(&self) -> Result<()> {
        let check_grid = |g: &[f64], max: f64| -> Result<()> {
            if g.is_empty() {
                return Err(Error::InvalidArgument("empty order grid".into()));
            }
            for &a in g {
                if !(a > 0.0) || a > max || (a - 1.0).abs() < VN_WINDOW {
                    return Err(Error::InvalidArgument(format!("order {a} outside (0,1) u (1,{max}]")));
                }
            }
            Ok(())
        };
        match self {
            Campaign::Conjecture1 { grid, dims, .. } => {
                check_grid(grid, 2.0)?;
                check_dims(dims)
            }
            Campaign::Conjecture2 { grid, max_dim } | Campaign::UnitaryCases { grid, max_dim } => {
                check_grid(grid, 10.0)?;
                check_max_dim(*max_dim)
            }
            Campaign::CmiAlphaMono { grid, dims } => {
                check_grid(grid, f64::INFINITY)?;
                check_dims(dims)
            }
            Campaign::Remainder { max_dim, .. } => check_max_dim(*max_dim),
            Campaign::Refinement { max_dim, alphas } => {
                check_max_dim(*max_dim)?;
                for &a in alphas {
                    if !(a > 0.0 && a <= 2.0) {
                        return Err(Error::InvalidArgument(format!("order {a} outside (0,2]")));
                    }
                }
                Ok(())
            }
        }
    }

    fn trial(&self, seed: u64, trial: usize, eps: f64) -> Result<Vec<TrialReport>> {
        let mut rng = stream_rng(seed, trial as u64);
        match self {
            Campaign::Conjecture1 { dims, grid, side } => conjecture1_trial(&mut rng, seed, trial, *dims, grid, *side),
            Campaign::Conjecture2 { max_dim, grid } => conjecture2_trial(&mut rng, seed, trial, *max_dim, grid, eps),
            Campaign::UnitaryCases { max_dim, grid } => unitary_trial(&mut rng, seed, trial, *max_dim, grid, eps),
            Campaign::CmiAlphaMono { dims, grid } => cmi_mono_trial(&mut rng, seed, trial, *dims, grid),
            Campaign::Remainder { kind, max_dim } => remainder_trial(&mut rng, seed, trial, *kind, *max_dim, eps),
            Campaign::Refinement { max_dim, alphas } => refinement_trial(&mut rng, seed, trial, *max_dim, alphas),
        }
    }

    /// Rows of a single trial, identical to the ones [`Campaign::run`] reports for it.
    pub fn replay(&self, opts: &CampaignOptions, trial: usize) -> Result<Vec<TrialReport>> {
        self.validate()?;
        self.trial(opts.seed, trial, opts.reject_eps)
    }

    pub fn run(&self, opts: &CampaignOptions) -> Result<CampaignReport> {
        self.validate()?;
        if opts.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        let start = Instant::now();
        let f = |t: usize| self.trial(opts.seed, t, opts.reject_eps);
        let per_trial: Vec<Result<Vec<TrialReport>>> = if opts.parallel {
            crate::optim::par_map(opts.trials, f)
        } else {
            (0..opts.trials).map(f).collect()
        };
        let mut rows = Vec::new();
        for r in per_trial {
            rows.extend(r?);
        }
        let aggregate = Aggregate::from_rows(opts.trials, &rows, self.threshold());
        let mut params = serde_json::to_value(self)?;
        if let serde_json::Value::Object(m) = &mut params {
            m.insert("trials".into(), opts.trials.into());
            m.insert("seed".into(), opts.seed.into());
            m.insert("reject_eps".into(), opts.reject_eps.into());
        }
        Ok(CampaignReport {
            campaign: self.name(),
            params,
            gated: self.gated(),
            aggregate,
            rows,
            metadata: Metadata {
                wall_time_s: start.elapsed().as_secs_f64(),
                threads: thread_count(opts.parallel),
                version: env!("CARGO_PKG_VERSION"),
            },
        })
    }
}

fn kind_name(k: RemainderKind) -> &'static str {
    match k {
        RemainderKind::Monotonicity => "monotonicity",
        RemainderKind::JointConvexity => "joint_convexity",
        RemainderKind::Holevo => "holevo",
        RemainderKind::Discord => "discord",
    }
}

fn thread_count(parallel: bool) -> usize {
    #[cfg(feature = "parallel")]
    if parallel {
        return rayon::current_num_threads();
    }
    let _ = parallel;
    1
}

fn check_dims(d: &[usize; 3]) -> Result<()> {
    if d.iter().any(|&x| x < 1) {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    Ok(())
}

fn check_max_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument("max_dim must be at least 2".into()));
    }
    Ok(())
}

/// State and channel output of one [`Campaign::Conjecture1`] trial.
#[derive(Clone, Debug)]
pub struct Conjecture1Instance {
    pub rho: DensityOperator,
    pub tau: DensityOperator,
    pub rank: usize,
    pub d_out: usize,
}

/// Regenerates the instance behind the rows of `trial`.
pub fn conjecture1_instance(seed: u64, trial: usize, dims: [usize; 3], side: Side) -> Result<Conjecture1Instance> {
    check_dims(&dims)?;
    conjecture1_sample(&mut stream_rng(seed, trial as u64), dims, side)
}

fn conjecture1_sample(rng: &mut ChaCha20Rng, dims: [usize; 3], side: Side) -> Result<Conjecture1Instance> {
    let shape = SubsystemShape::tripartite(dims[0], dims[1], dims[2], ["A", "B", "E"]);
    let rank = rng.random_range(1..=shape.total());
    let rho = random_density(&shape, rank, rng)?;
    let (target, d) = match side {
        Side::A => ("A", dims[0]),
        Side::B => ("B", dims[1]),
    };
    let d_out = rng.random_range(1..=d);
    let ch = random_channel(d, d_out, None, rng)?;
    let tau = ch.apply(&rho, target)?;
    Ok(Conjecture1Instance { rho, tau, rank, d_out })
}

fn conjecture1_trial(
    rng: &mut ChaCha20Rng,
    seed: u64,
    trial: usize,
    dims: [usize; 3],
    grid: &[f64],
    side: Side,
) -> Result<Vec<TrialReport>> {
    let inst = conjecture1_sample(rng, dims, side)?;
    let d = match side {
        Side::A => dims[0],
        Side::B => dims[1],
    };
    let mut rows = Vec::with_capacity(grid.len());
    for &a in grid {
        let before = renyi_cmi(&inst.rho, &["A"], &["B"], &["E"], a)?;
        let after = renyi_cmi(&inst.tau, &["A"], &["B"], &["E"], a)?;
        rows.push(
            TrialReport::new(trial, seed, "sibson", before - after)
                .dims(d, inst.d_out)
                .orders(Some(a), None)
                .value("before", before)
                .value("after", after)
                .value("rank", inst.rank as f64),
        );
    }
    Ok(rows)
}

/// `(alpha, beta)` with `alpha < beta` from the grid, in grid order.
fn ordered_pairs(grid: &[f64]) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..grid.len()).collect();
    idx.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
    let mut out = Vec::new();
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if grid[idx[i]] < grid[idx[j]] {
                out.push((idx[i], idx[j]));
            }
        }
    }
    out
}

fn conjecture2_trial(
    rng: &mut ChaCha20Rng,
    seed: u64,
    trial: usize,
    max_dim: usize,
    grid: &[f64],
    eps: f64,
) -> Result<Vec<TrialReport>> {
    let d_in = rng.random_range(2..=max_dim);
    let d_out = rng.random_range(2..=max_dim);
    let inst = random_instance(d_in, d_out, eps, rng)?;
    let petz: Vec<f64> = grid.iter().map(|&a| delta_alpha(&inst, a)).collect::<Result<_>>()?;
    let sand: Vec<f64> = grid.iter().map(|&a| delta_tilde_alpha(&inst, a)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (label, vals) in [("petz", &petz), ("sandwiched", &sand)] {
        for (i, j) in ordered_pairs(grid) {
            rows.push(
                TrialReport::new(trial, seed, label, vals[j] - vals[i])
                    .dims(d_in, d_out)
                    .orders(Some(grid[i]), Some(grid[j]))
                    .value("delta_alpha", vals[i])
                    .value("delta_beta", vals[j]),
            );
        }
    }
    Ok(rows)
}

fn unitary_trial(
    rng: &mut ChaCha20Rng,
    seed: u64,
    trial: usize,
    max_dim: usize,
    grid: &[f64],
    eps: f64,
) -> Result<Vec<TrialReport>> {
    let d = rng.random_range(2..=max_dim);
    let inst = random_unitary_instance(d, eps, rng)?;
    let mut rows = Vec::new();
    for &a in grid {
        let petz_beta = 2.0 - a;
        if a <= 1.0 && petz_beta > 0.0 {
            let m = unitary_channel_exact_mono(&inst, a, petz_beta, Variant::Petz)?;
            rows.push(TrialReport::new(trial, seed, "petz", m).dims(d, d).orders(Some(a), Some(petz_beta)));
        }
        // 1/alpha + 1/beta = 2 needs alpha > 1/2
        if a > 0.5 && a < 1.0 {
            let b = a / (2.0 * a - 1.0);
            let m = unitary_channel_exact_mono(&inst, a, b, Variant::Sandwiched)?;
            rows.push(TrialReport::new(trial, seed, "sandwiched", m).dims(d, d).orders(Some(a), Some(b)));
        }
    }
    Ok(rows)
}

fn cmi_mono_trial(
    rng: &mut ChaCha20Rng,
    seed: u64,
    trial: usize,
    dims: [usize; 3],
    grid: &[f64],
) -> Result<Vec<TrialReport>> {
    let shape = SubsystemShape::tripartite(dims[0], dims[1], dims[2], ["A", "B", "C"]);
    let rho = random_full_rank(&shape, rng);
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    let sand: Vec<f64> = g
        .iter()
        .map(|&a| sandwiched_cmi(&rho, &["A"], &["B"], &["C"], a))
        .collect::<Result<_>>()?;
    let sib: Vec<f64> = g
        .iter()
        .map(|&a| renyi_cmi(&rho, &["A"], &["B"], &["C"], a))
        .collect::<Result<_>>()?;
    let d = shape.total();
    let mut rows = Vec::new();
    for (label, vals) in [("sandwiched", &sand), ("sibson", &sib)] {
        for k in 1..g.len() {
            rows.push(
                TrialReport::new(trial, seed, label, vals[k] - vals[k - 1])
                    .dims(d, d)
                    .orders(Some(g[k - 1]), Some(g[k]))
                    .value("cmi_alpha", vals[k - 1])
                    .value("cmi_beta", vals[k]),
            );
        }
    }
    Ok(rows)
}

fn remainder_trial(
    rng: &mut ChaCha20Rng,
    seed: u64,
    trial: usize,
    kind: RemainderKind,
    max_dim: usize,
    eps: f64,
) -> Result<Vec<TrialReport>> {
    let row = match kind {
        RemainderKind::Monotonicity => {
            let d_in = rng.random_range(2..=max_dim);
            let d_out = rng.random_range(2..=max_dim);
            let inst = random_instance(d_in, d_out, eps, rng)?;
            TrialReport::new(trial, seed, "monotonicity", monotonicity_remainder(&inst)?).dims(d_in, d_out)
        }
        RemainderKind::JointConvexity => {
            let s = SubsystemShape::single(2, "B");
            let p = random_probs(2, rng);
            let rhos = Ensemble::new(p.clone(), vec![random_full_rank(&s, rng), random_full_rank(&s, rng)])?;
            let sigmas = Ensemble::new(p, vec![random_full_rank(&s, rng), random_full_rank(&s, rng)])?;
            let j = joint_convexity_remainder(&rhos, &sigmas)?;
            TrialReport::new(trial, seed, "joint_convexity", j.margin)
                .dims(4, 2)
                .value("flagged_margin", j.flagged_margin)
                .value("equivalence_gap", j.equivalence_gap())
        }
        RemainderKind::Holevo => {
            let s = SubsystemShape::single(2, "B");
            let p = random_probs(3, rng);
            let states = (0..3).map(|_| random_full_rank(&s, rng)).collect();
            let ens = Ensemble::new(p, states)?;
            let povm = random_rank_one_povm(2, 3, rng)?;
            let h = holevo_remainder(&ens, &povm)?;
            let via = holevo_remainder_via_channel(&ens, &povm)?;
            TrialReport::new(trial, seed, "holevo", h.margin)
                .dims(2, 3)
                .value("holevo_gap", h.holevo_gap)
                .value("dual_route_gap", (h.margin - via).abs())
        }
        RemainderKind::Discord => {
            let shape = SubsystemShape::bipartite(2, 2);
            let rank = rng.random_range(1..=4);
            let rho = random_density(&shape, rank, rng)?;
            let n = rng.random_range(2..=4);
            let povm = random_rank_one_povm(2, n, rng)?;
            let r = discord_remainder(&rho, &povm)?;
            TrialReport::new(trial, seed, "discord", r.margin)
                .dims(2, n)
                .value("cmi", r.cmi)
                .value("recovery", r.recovery)
        }
    };
    Ok(vec![row])
}

/// Random ranks summing to at least `d` with at least one effect of rank above one.
fn mixed_ranks(rng: &mut ChaCha20Rng, d: usize) -> Vec<usize> {
    let n = rng.random_range(2..=4);
    let mut ranks: Vec<usize> = (0..n).map(|_| rng.random_range(1..=d)).collect();
    if ranks.iter().all(|&r| r == 1) {
        ranks[0] = 2;
    }
    while ranks.iter().sum::<usize>() < d {
        let i = rng.random_range(0..n);
        ranks[i] = (ranks[i] + 1).min(d);
    }
    ranks
}

fn refinement_trial(
    rng: &mut ChaCha20Rng,
    seed: u64,
    trial: usize,
    max_dim: usize,
    alphas: &[f64],
) -> Result<Vec<TrialReport>> {
    let da = rng.random_range(2..=max_dim.min(3));
    let shape = SubsystemShape::bipartite(da, 2);
    let rho = random_full_rank(&shape, rng);
    let ranks = mixed_ranks(rng, da);
    let povm = random_povm_with_ranks(da, &ranks, rng)?;
    let mut rows = Vec::new();
    for &a in alphas {
        let m = rank_one_refinement_test(&rho, &povm, a)?;
        rows.push(
            TrialReport::new(trial, seed, "refinement", m)
                .dims(da, povm.len())
                .orders(Some(a), None)
                .value("total_rank", ranks.iter().sum::<usize>() as f64),
        );
    }
    Ok(rows)
}
