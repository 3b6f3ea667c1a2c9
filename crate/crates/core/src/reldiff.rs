//! Relative-entropy differences `D(rho||sigma) - D(N(rho)||N(sigma))`, their
//! Petz-Rényi and sandwiched generalizations, and remainder terms built from
//! the Petz recovery map.

use rand::Rng;
use serde::Serialize;

use crate::channels::{
    discord_eb_channel, holevo_eb_channel, petz_map, random_channel, Povm, QuantumChannel,
};
use crate::entropy::{vn_mutual_info, vn_relative_entropy, RenyiOrder};
use crate::error::{Error, Result};
use crate::linalg::{
    self, alpha_norm, matrix_exp, matrix_log, matrix_power, CMat, Eigh, SubsystemShape,
    DEFAULT_CUTOFF,
};
use crate::measures::discord_objective_dilated;
use crate::states::{fidelity_matrices, random_full_rank, DensityOperator, Ensemble};

/// `(rho, sigma, N)` with `rho`, `sigma` and `N(sigma)` positive definite.
#[derive(Clone, Debug)]
pub struct RelDiffInstance {
    rho: CMat,
    sigma: CMat,
    channel: QuantumChannel,
    n_rho: CMat,
    n_sigma: CMat,
}

fn min_relative_eigenvalue(m: &CMat) -> f64 {
    let e = Eigh::new_unchecked(m);
    e.values[0] / e.scale().max(f64::MIN_POSITIVE)
}

fn require_positive(m: &CMat, eps: f64) -> Result<()> {
    let e = Eigh::new_unchecked(m);
    let min = e.values[0];
    if min <= eps.max(DEFAULT_CUTOFF * e.scale()) {
        return Err(Error::NotStrictlyPositive { min_eigenvalue: min });
    }
    Ok(())
}

impl RelDiffInstance {
    pub fn new(rho: &DensityOperator, sigma: &DensityOperator, channel: QuantumChannel) -> Result<Self> {
        Self::with_threshold(rho, sigma, channel, 0.0)
    }

    /// Like [`RelDiffInstance::new`], also rejecting minimum eigenvalues below `eps`.
    pub fn with_threshold(
        rho: &DensityOperator,
        sigma: &DensityOperator,
        channel: QuantumChannel,
        eps: f64,
    ) -> Result<Self> {
        if rho.dim() != sigma.dim() || rho.dim() != channel.d_in() {
            return Err(Error::ShapeMismatch(format!(
                "rho {}, sigma {}, channel input {}",
                rho.dim(),
                sigma.dim(),
                channel.d_in()
            )));
        }
        let n_rho = linalg::hermitian_part(&channel.apply_matrix(rho.matrix()));
        let n_sigma = linalg::hermitian_part(&channel.apply_matrix(sigma.matrix()));
        require_positive(rho.matrix(), eps)?;
        require_positive(sigma.matrix(), eps)?;
        require_positive(&n_sigma, eps)?;
        Ok(Self {
            rho: rho.matrix().clone(),
            sigma: sigma.matrix().clone(),
            channel,
            n_rho,
            n_sigma,
        })
    }

    pub fn rho(&self) -> &CMat {
        &self.rho
    }

    pub fn sigma(&self) -> &CMat {
        &self.sigma
    }

    pub fn channel(&self) -> &QuantumChannel {
        &self.channel
    }

    pub fn n_rho(&self) -> &CMat {
        &self.n_rho
    }

    pub fn n_sigma(&self) -> &CMat {
        &self.n_sigma
    }

    pub fn d_in(&self) -> usize {
        self.channel.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.channel.d_out()
    }

    /// Smallest eigenvalue relative to the largest among `rho`, `sigma`, `N(sigma)`.
    pub fn positivity_margin(&self) -> f64 {
        [&self.rho, &self.sigma, &self.n_sigma]
            .into_iter()
            .map(min_relative_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    fn adjoint(&self, x: &CMat) -> CMat {
        linalg::hermitian_part(&self.channel.adjoint_apply(x))
    }
}

/// Full-rank `rho`, `sigma` on `d_in` and a Haar-random channel `d_in -> d_out`,
/// resampled until every minimum eigenvalue is at least `eps`.
pub fn random_instance<R: Rng + ?Sized>(d_in: usize, d_out: usize, eps: f64, rng: &mut R) -> Result<RelDiffInstance> {
    let shape = SubsystemShape::single(d_in, "S");
    for _ in 0..10_000 {
        let rho = random_full_rank(&shape, rng);
        let sigma = random_full_rank(&shape, rng);
        let ch = random_channel(d_in, d_out, None, rng)?;
        match RelDiffInstance::with_threshold(&rho, &sigma, ch, eps) {
            Ok(inst) => return Ok(inst),
            Err(Error::NotStrictlyPositive { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidArgument(format!("no instance with eigenvalues above {eps} after 10000 draws")))
}

/// Same as [`random_instance`] with a Haar-random unitary channel.
pub fn random_unitary_instance<R: Rng + ?Sized>(d: usize, eps: f64, rng: &mut R) -> Result<RelDiffInstance> {
    let shape = SubsystemShape::single(d, "S");
    for _ in 0..10_000 {
        let rho = random_full_rank(&shape, rng);
        let sigma = random_full_rank(&shape, rng);
        let ch = QuantumChannel::unitary(crate::states::random_unitary(d, rng))?;
        match RelDiffInstance::with_threshold(&rho, &sigma, ch, eps) {
            Ok(inst) => return Ok(inst),
            Err(Error::NotStrictlyPositive { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::InvalidArgument(format!("no instance with eigenvalues above {eps} after 10000 draws")))
}

/// `D(rho||sigma) - D(N(rho)||N(sigma))`.
pub fn delta_vn(inst: &RelDiffInstance) -> Result<f64> {
    Ok(vn_relative_entropy(&inst.rho, &inst.sigma)? - vn_relative_entropy(&inst.n_rho, &inst.n_sigma)?)
}

/// `exp{log sigma + N^dagger(log N(rho) - log N(sigma))}`.
pub fn trotter_target(inst: &RelDiffInstance) -> Result<CMat> {
    let a = matrix_log(&inst.n_rho)? - matrix_log(&inst.n_sigma)?;
    matrix_exp(&(matrix_log(&inst.sigma)? + inst.adjoint(&a)))
}

/// `D(rho || exp{log sigma + N^dagger(log N(rho) - log N(sigma))})`, a single relative entropy
/// equal to [`delta_vn`].
pub fn delta_vn_rewrite(inst: &RelDiffInstance) -> Result<f64> {
    vn_relative_entropy(&inst.rho, &trotter_target(inst)?)
}

/// `(1/(alpha-1)) log Tr{rho^alpha sigma^{(1-alpha)/2} N^dagger(N(sigma)^{(alpha-1)/2} N(rho)^{1-alpha} N(sigma)^{(alpha-1)/2}) sigma^{(1-alpha)/2}}`.
pub fn delta_alpha(inst: &RelDiffInstance, alpha: f64) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return delta_vn(inst);
    }
    let ns = matrix_power(&inst.n_sigma, (alpha - 1.0) / 2.0)?;
    let inner = &ns * matrix_power(&inst.n_rho, 1.0 - alpha)? * &ns;
    let s = matrix_power(&inst.sigma, (1.0 - alpha) / 2.0)?;
    let q = (matrix_power(&inst.rho, alpha)? * &s * inst.adjoint(&inner) * &s).trace().re;
    Ok(q.ln() / (alpha - 1.0))
}

/// `(alpha/(alpha-1)) log ||rho^{1/2} sigma^{(1-alpha)/2alpha} N^dagger(N(sigma)^{(alpha-1)/2alpha} N(rho)^{(1-alpha)/alpha} N(sigma)^{(alpha-1)/2alpha}) sigma^{(1-alpha)/2alpha} rho^{1/2}||_alpha`.
pub fn delta_tilde_alpha(inst: &RelDiffInstance, alpha: f64) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return delta_vn(inst);
    }
    let g = (1.0 - alpha) / (2.0 * alpha);
    let ns = matrix_power(&inst.n_sigma, -g)?;
    let inner = &ns * matrix_power(&inst.n_rho, 2.0 * g)? * &ns;
    let s = matrix_power(&inst.sigma, g)?;
    let r = matrix_power(&inst.rho, 0.5)?;
    let x = &r * &s * inst.adjoint(&inner) * &s * &r;
    Ok(alpha / (alpha - 1.0) * alpha_norm(&x, alpha)?.ln())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrotterRow {
    pub p: f64,
    /// Frobenius distance to the `p -> 0` limit.
    pub distance: f64,
}

/// `[sigma^{p/2} N^dagger(N(sigma)^{-p/2} N(rho)^p N(sigma)^{-p/2}) sigma^{p/2}]^{1/p}`.
pub fn trotter_product(inst: &RelDiffInstance, p: f64) -> Result<CMat> {
    let ns = matrix_power(&inst.n_sigma, -p / 2.0)?;
    let inner = &ns * matrix_power(&inst.n_rho, p)? * &ns;
    let s = matrix_power(&inst.sigma, p / 2.0)?;
    let m = linalg::hermitian_part(&(&s * inst.adjoint(&inner) * &s));
    matrix_power(&m, 1.0 / p)
}

/// Distance of [`trotter_product`] to [`trotter_target`] at each `p`.
pub fn lie_trotter_limit_check(inst: &RelDiffInstance, p_grid: &[f64]) -> Result<Vec<TrotterRow>> {
    let target = trotter_target(inst)?;
    p_grid
        .iter()
        .map(|&p| {
            if !(p > 0.0) {
                return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
            }
            let d = (trotter_product(inst, p)? - &target).norm();
            Ok(TrotterRow { p, distance: d })
        })
        .collect()
}

/// Second-order coefficient `V(rho, sigma, N)` of `log Tr Y(gamma)` around `gamma = 0`:
/// `Tr{rho (H - Delta)^2} + Tr{N(rho) A^2} - Tr{rho N^dagger(A)^2}` with
/// `A = log N(rho) - log N(sigma)` and `H = log rho - log sigma - N^dagger(A)`.
pub fn variance_v(inst: &RelDiffInstance) -> Result<f64> {
    let a = matrix_log(&inst.n_rho)? - matrix_log(&inst.n_sigma)?;
    let na = inst.adjoint(&a);
    let h = matrix_log(&inst.rho)? - matrix_log(&inst.sigma)? - &na;
    let delta = (&inst.rho * &h).trace().re;
    let centered = &h - linalg::identity(h.nrows()).scale(delta);
    let t1 = (&inst.rho * &centered * &centered).trace().re;
    let t2 = (&inst.n_rho * &a * &a).trace().re;
    let t3 = (&inst.rho * &na * &na).trace().re;
    Ok(t1 + t2 - t3)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SlopeCheck {
    /// `(Delta_{1+h} - Delta_{1-h}) / 2h`.
    pub slope: f64,
    /// Same difference quotient for the sandwiched variant.
    pub slope_tilde: f64,
    pub half_v: f64,
    /// `|slope - V/2| / (V/2)`; `None` when `V < 1e-6`.
    pub relative_error: Option<f64>,
}

pub const DEFAULT_SLOPE_STEP: f64 = 1e-4;

/// Small-`V` instances are not compared.
pub const MIN_VARIANCE: f64 = 1e-6;

/// Central difference of [`delta_alpha`] at `alpha = 1` against `V/2`.
pub fn alpha_slope_check(inst: &RelDiffInstance, h: f64) -> Result<SlopeCheck> {
    if !(h > crate::entropy::VN_WINDOW) {
        return Err(Error::InvalidArgument(format!("step {h} falls inside the von Neumann window")));
    }
    let slope = (delta_alpha(inst, 1.0 + h)? - delta_alpha(inst, 1.0 - h)?) / (2.0 * h);
    let slope_tilde = (delta_tilde_alpha(inst, 1.0 + h)? - delta_tilde_alpha(inst, 1.0 - h)?) / (2.0 * h);
    let v = variance_v(inst)?;
    let relative_error = (v >= MIN_VARIANCE).then(|| (slope - v / 2.0).abs() / (v / 2.0));
    Ok(SlopeCheck {
        slope,
        slope_tilde,
        half_v: v / 2.0,
        relative_error,
    })
}

/// `delta_vn + log F(rho, T(N(rho)))` with `T` the Petz recovery map of `(sigma, N)`.
pub fn monotonicity_remainder(inst: &RelDiffInstance) -> Result<f64> {
    let t = petz_map(&inst.sigma, &inst.channel)?;
    let recovered = t.apply_matrix(&inst.n_rho);
    Ok(delta_vn(inst)? + fidelity_matrices(&inst.rho, &recovered)?.ln())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct JointConvexity {
    pub margin: f64,
    /// [`monotonicity_remainder`] of the flagged pair under `Tr_X`.
    pub flagged_margin: f64,
}

impl JointConvexity {
    pub fn equivalence_gap(&self) -> f64 {
        (self.margin - self.flagged_margin).abs()
    }
}

/// `sum_x p_x D(rho_x||sigma_x) - D(rho_bar||sigma_bar)
///  + 2 log sum_x p_x sqrt F(rho_x, sigma_x^{1/2} sigma_bar^{-1/2} rho_bar sigma_bar^{-1/2} sigma_x^{1/2})`.
pub fn joint_convexity_remainder(rhos: &Ensemble, sigmas: &Ensemble) -> Result<JointConvexity> {
    if rhos.len() != sigmas.len() || rhos.probs().iter().zip(sigmas.probs()).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::InvalidArgument("ensembles must share their probabilities".into()));
    }
    let rho_bar = rhos.average().into_parts().0;
    let sigma_bar = sigmas.average().into_parts().0;
    let sb = matrix_power(&sigma_bar, -0.5)?;
    let core = &sb * &rho_bar * &sb;
    let mut avg = 0.0;
    let mut fid = 0.0;
    for ((p, r), s) in rhos.probs().iter().zip(rhos.states()).zip(sigmas.states()) {
        avg += p * vn_relative_entropy(r, s)?;
        let sx = matrix_power(s.matrix(), 0.5)?;
        let rec = linalg::hermitian_part(&(&sx * &core * &sx));
        fid += p * fidelity_matrices(r.matrix(), &rec)?.sqrt();
    }
    let margin = avg - vn_relative_entropy(&rho_bar, &sigma_bar)? + 2.0 * fid.ln();

    let rf = rhos.flagged("X")?;
    let sf = sigmas.flagged("X")?;
    let tr = QuantumChannel::partial_trace(rf.shape(), "X")?;
    let inst = RelDiffInstance::new(&rf, &sf, tr)?;
    Ok(JointConvexity {
        margin,
        flagged_margin: monotonicity_remainder(&inst)?,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HolevoRemainder {
    /// `I(X;B) - I(X;Y)`, nonnegative by the Holevo bound.
    pub holevo_gap: f64,
    /// `holevo_gap + 2 log sum_x p_x sqrt F(rho^x, sigma^x)`.
    pub margin: f64,
}

/// `sigma_B^x = sum_y (<phi_y|rho^x|phi_y> / <phi_y|rho_B|phi_y>) rho_B^{1/2} |phi_y><phi_y| rho_B^{1/2}`.
pub fn holevo_recovered(rho_x: &CMat, rho_b: &CMat, povm: &Povm) -> Result<CMat> {
    let half = matrix_power(rho_b, 0.5)?;
    let mut out = CMat::zeros(rho_b.nrows(), rho_b.ncols());
    for v in povm.vectors()? {
        let num = v.dotc(&(rho_x * &v)).re;
        let den = v.dotc(&(rho_b * &v)).re;
        if den <= DEFAULT_CUTOFF {
            continue;
        }
        let t = &half * &v;
        out += linalg::projector(&t).scale(num / den);
    }
    Ok(out)
}

/// Holevo remainder for an ensemble on `B` measured by a rank-one POVM.
pub fn holevo_remainder(ens: &Ensemble, povm: &Povm) -> Result<HolevoRemainder> {
    let flagged = ens.flagged("X")?;
    let b = ens.shape().labels().to_vec();
    let b: Vec<&str> = b.iter().map(String::as_str).collect();
    let i_xb = vn_mutual_info(&flagged, &["X"], &b)?;
    let n = ens.len();
    let ny = povm.len();
    let mut joint = vec![0.0; n * ny];
    for (x, (p, s)) in ens.probs().iter().zip(ens.states()).enumerate() {
        for (y, q) in povm.probabilities(s.matrix()).into_iter().enumerate() {
            joint[x * ny + y] = p * q.max(0.0);
        }
    }
    let omega = DensityOperator::from_raw(linalg::diag(&joint), SubsystemShape::new(&[n, ny], &["X", "Y"])?);
    let i_xy = vn_mutual_info(&omega, &["X"], &["Y"])?;
    let rho_b = ens.average().into_parts().0;
    let mut fid = 0.0;
    for (p, s) in ens.probs().iter().zip(ens.states()) {
        let rec = holevo_recovered(s.matrix(), &rho_b, povm)?;
        fid += p * fidelity_matrices(s.matrix(), &rec)?.sqrt();
    }
    let gap = i_xb - i_xy;
    Ok(HolevoRemainder {
        holevo_gap: gap,
        margin: gap + 2.0 * fid.ln(),
    })
}

/// The same remainder with `sigma_B^x` produced by [`holevo_eb_channel`].
pub fn holevo_remainder_via_channel(ens: &Ensemble, povm: &Povm) -> Result<f64> {
    let rho_b = ens.average().into_parts().0;
    let ch = holevo_eb_channel(&rho_b, povm)?;
    let mut fid = 0.0;
    for (p, s) in ens.probs().iter().zip(ens.states()) {
        fid += p * fidelity_matrices(s.matrix(), &ch.apply_matrix(s.matrix()))?.sqrt();
    }
    Ok(holevo_remainder(ens, povm)?.holevo_gap + 2.0 * fid.ln())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiscordRemainder {
    /// `I(E;B|X)` of the dilated state.
    pub cmi: f64,
    /// `-log F(rho_AB, (E_A (x) id)(rho_AB))`.
    pub recovery: f64,
    pub margin: f64,
}

/// `I(E;B|X) + log F(rho_AB, (E_A (x) id)(rho_AB))` for a rank-one POVM on the first subsystem.
pub fn discord_remainder(rho: &DensityOperator, povm: &Povm) -> Result<DiscordRemainder> {
    let a = rho.shape().labels()[0].clone();
    let cmi = discord_objective_dilated(rho, povm, 1.0)?;
    let eb = discord_eb_channel(rho, povm, &a)?;
    let out = eb.apply(rho, &a)?;
    let recovery = -fidelity_matrices(rho.matrix(), out.matrix())?.ln();
    Ok(DiscordRemainder {
        cmi,
        recovery,
        margin: cmi - recovery,
    })
}

/// Which generalization a proven unitary case refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Petz,
    Sandwiched,
}

/// `Delta_beta - Delta_alpha` for a unitary channel with `alpha + beta = 2`
/// (Petz variant) or `1/alpha + 1/beta = 2` (sandwiched variant), `alpha <= beta`.
pub fn unitary_channel_exact_mono(inst: &RelDiffInstance, alpha: f64, beta: f64, variant: Variant) -> Result<f64> {
    let ch = inst.channel();
    if ch.kraus().len() != 1 || ch.d_in() != ch.d_out() {
        return Err(Error::InvalidChannel("expected a unitary channel".into()));
    }
    if alpha > beta {
        return Err(Error::InvalidArgument(format!("need alpha <= beta, got {alpha} > {beta}")));
    }
    let ok = match variant {
        Variant::Petz => (alpha + beta - 2.0).abs() < 1e-12,
        Variant::Sandwiched => (1.0 / alpha + 1.0 / beta - 2.0).abs() < 1e-12,
    };
    if !ok {
        return Err(Error::InvalidArgument(format!("({alpha}, {beta}) is not a proven pair for {variant:?}")));
    }
    Ok(match variant {
        Variant::Petz => delta_alpha(inst, beta)? - delta_alpha(inst, alpha)?,
        Variant::Sandwiched => delta_tilde_alpha(inst, beta)? - delta_tilde_alpha(inst, alpha)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::random_rank_one_povm;
    use crate::entropy::{renyi_cmi_unoptimized, sandwiched_cmi};
    use crate::rng::stream_rng;
    use crate::states::{maximally_entangled, random_cq};

    fn qubit(seed: u64) -> RelDiffInstance {
        random_instance(2, 2, 1e-6, &mut stream_rng(seed, 0)).unwrap()
    }

    fn trivial(seed: u64) -> RelDiffInstance {
        let mut rng = stream_rng(seed, 0);
        let rho = random_full_rank(&SubsystemShape::single(3, "S"), &mut rng);
        RelDiffInstance::new(&rho, &rho, QuantumChannel::identity(3)).unwrap()
    }

    #[test]
    fn identity_instances_vanish() {
        let inst = trivial(1);
        assert!(delta_vn(&inst).unwrap().abs() < 1e-12);
        for a in [0.5, 2.0, 3.0] {
            assert!(delta_alpha(&inst, a).unwrap().abs() < 1e-10, "{a} {}", delta_alpha(&inst, a).unwrap());
            assert!(delta_tilde_alpha(&inst, a).unwrap().abs() < 1e-10);
        }
        assert!(variance_v(&inst).unwrap().abs() < 1e-10);
        assert!(monotonicity_remainder(&inst).unwrap().abs() < 1e-10);
    }

    #[test]
    fn rejects_singular_inputs() {
        let rho = DensityOperator::diagonal(&[1.0, 0.0], "S").unwrap();
        let sigma = DensityOperator::maximally_mixed(SubsystemShape::single(2, "S"));
        let err = RelDiffInstance::new(&rho, &sigma, QuantumChannel::identity(2)).unwrap_err();
        assert!(matches!(err, Error::NotStrictlyPositive { .. }));
    }

    #[test]
    fn vn_rewrite_matches() {
        let mut rng = stream_rng(2, 0);
        let inst = random_instance(3, 2, 1e-6, &mut rng).unwrap();
        let d = delta_vn(&inst).unwrap();
        assert!(d >= -1e-9);
        assert!((d - delta_vn_rewrite(&inst).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn commuting_instance_matches_scalar_formula() {
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.2, 0.6];
        let rho = DensityOperator::diagonal(&p, "S").unwrap();
        let sigma = DensityOperator::diagonal(&q, "S").unwrap();
        // N merges outcomes 1 and 2
        let mut k0 = CMat::zeros(2, 3);
        k0[(0, 0)] = linalg::c(1.0, 0.0);
        let mut k1 = CMat::zeros(2, 3);
        k1[(1, 1)] = linalg::c(1.0, 0.0);
        let mut k2 = CMat::zeros(2, 3);
        k2[(1, 2)] = linalg::c(1.0, 0.0);
        let ch = QuantumChannel::new(vec![k0, k1, k2]).unwrap();
        let inst = RelDiffInstance::new(&rho, &sigma, ch).unwrap();
        let np = [p[0], p[1] + p[2]];
        let nq = [q[0], q[1] + q[2]];
        let merged = |i: usize| if i == 0 { 0 } else { 1 };
        let alpha: f64 = 1.7;
        let s: f64 = (0..3)
            .map(|i| p[i].powf(alpha) * q[i].powf(1.0 - alpha) * nq[merged(i)].powf(alpha - 1.0) * np[merged(i)].powf(1.0 - alpha))
            .sum();
        let want = s.ln() / (alpha - 1.0);
        assert!((delta_alpha(&inst, alpha).unwrap() - want).abs() < 1e-12);
        // commuting: the Trotter product is exact
        for row in lie_trotter_limit_check(&inst, &[0.5, 0.1]).unwrap() {
            assert!(row.distance < 1e-10);
        }
        // classical variance of log(p/q) - log(Np/Nq)
        let h: Vec<f64> = (0..3).map(|i| (p[i] / q[i]).ln() - (np[merged(i)] / nq[merged(i)]).ln()).collect();
        let mean: f64 = (0..3).map(|i| p[i] * h[i]).sum();
        let var: f64 = (0..3).map(|i| p[i] * (h[i] - mean).powi(2)).sum();
        assert!((variance_v(&inst).unwrap() - var).abs() < 1e-12);
    }

    #[test]
    fn consistency_with_cmi() {
        let mut rng = stream_rng(3, 0);
        let shape = SubsystemShape::tripartite(2, 2, 2, ["A", "B", "C"]);
        let rho = random_full_rank(&shape, &mut rng);
        let rb = rho.marginal(&["B"]).unwrap();
        let rac = rho.marginal(&["A", "C"]).unwrap();
        let sigma = rb.tensor(&rac).unwrap().permute(&["A", "B", "C"]).unwrap();
        let tr = QuantumChannel::partial_trace(rho.shape(), "A").unwrap();
        let inst = RelDiffInstance::new(&rho, &sigma, tr).unwrap();
        for alpha in [0.5, 1.5, 3.0] {
            let a = delta_alpha(&inst, alpha).unwrap();
            let b = renyi_cmi_unoptimized(&rho, &["A"], &["B"], &["C"], alpha).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} {b}");
            let a = delta_tilde_alpha(&inst, alpha).unwrap();
            let b = sandwiched_cmi(&rho, &["A"], &["B"], &["C"], alpha).unwrap();
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn half_order_sandwiched_is_petz_fidelity() {
        let inst = qubit(4);
        let t = petz_map(inst.sigma(), inst.channel()).unwrap();
        let f = fidelity_matrices(inst.rho(), &t.apply_matrix(inst.n_rho())).unwrap();
        assert!((delta_tilde_alpha(&inst, 0.5).unwrap() + f.ln()).abs() < 1e-9);
    }

    #[test]
    fn trotter_converges_linearly() {
        let inst = qubit(5);
        let rows = lie_trotter_limit_check(&inst, &[1e-2, 1e-3, 1e-4]).unwrap();
        for w in rows.windows(2) {
            let ratio = w[0].distance / w[1].distance;
            assert!(ratio > 7.0 && ratio < 13.0, "{ratio}");
        }
    }

    #[test]
    fn slope_is_half_variance() {
        let inst = qubit(6);
        let s = alpha_slope_check(&inst, DEFAULT_SLOPE_STEP).unwrap();
        assert!(s.half_v >= 0.0);
        assert!(s.relative_error.unwrap() < 1e-2, "{s:?}");
    }

    #[test]
    fn joint_convexity_equals_flagged_monotonicity() {
        let mut rng = stream_rng(7, 0);
        let s = SubsystemShape::single(2, "B");
        let p = vec![0.4, 0.6];
        let rhos = Ensemble::new(p.clone(), vec![random_full_rank(&s, &mut rng), random_full_rank(&s, &mut rng)]).unwrap();
        let sigmas = Ensemble::new(p, vec![random_full_rank(&s, &mut rng), random_full_rank(&s, &mut rng)]).unwrap();
        let j = joint_convexity_remainder(&rhos, &sigmas).unwrap();
        assert!(j.equivalence_gap() < 1e-9, "{j:?}");
        assert!(j.margin >= -1e-8);
    }

    #[test]
    fn holevo_constructions_agree() {
        let mut rng = stream_rng(8, 0);
        let s = SubsystemShape::single(2, "B");
        let ens = Ensemble::new(
            vec![0.2, 0.3, 0.5],
            (0..3).map(|_| random_full_rank(&s, &mut rng)).collect(),
        )
        .unwrap();
        let povm = random_rank_one_povm(2, 3, &mut rng).unwrap();
        let h = holevo_remainder(&ens, &povm).unwrap();
        assert!(h.holevo_gap >= -1e-9);
        assert!((h.margin - holevo_remainder_via_channel(&ens, &povm).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn holevo_commuting_case_is_tight() {
        let ens = Ensemble::new(
            vec![0.5, 0.5],
            vec![
                DensityOperator::diagonal(&[0.9, 0.1], "B").unwrap(),
                DensityOperator::diagonal(&[0.3, 0.7], "B").unwrap(),
            ],
        )
        .unwrap();
        let h = holevo_remainder(&ens, &Povm::computational(2)).unwrap();
        assert!(h.holevo_gap.abs() < 1e-12);
        assert!(h.margin.abs() < 1e-8);
    }

    #[test]
    fn discord_remainder_cases() {
        let mut rng = stream_rng(9, 0);
        let cq = random_cq(2, 2, &mut rng);
        let r = discord_remainder(&cq, &Povm::computational(2)).unwrap();
        assert!(r.cmi.abs() < 1e-9 && r.recovery.abs() < 1e-9);
        let bell = maximally_entangled(2).density();
        let r = discord_remainder(&bell, &Povm::computational(2)).unwrap();
        assert!((r.cmi - 2f64.ln()).abs() < 1e-9);
        assert!(r.margin >= -1e-8);
    }

    #[test]
    fn unitary_cases_hold() {
        let mut rng = stream_rng(10, 0);
        let inst = random_unitary_instance(3, 1e-6, &mut rng).unwrap();
        assert!(unitary_channel_exact_mono(&inst, 0.5, 1.5, Variant::Petz).unwrap() >= -1e-9);
        assert!(unitary_channel_exact_mono(&inst, 2.0 / 3.0, 2.0, Variant::Sandwiched).unwrap() >= -1e-9);
        assert!(unitary_channel_exact_mono(&inst, 1.0, 1.0, Variant::Petz).unwrap().abs() < 1e-12);
        assert!(unitary_channel_exact_mono(&inst, 0.5, 1.2, Variant::Petz).is_err());
    }
}
