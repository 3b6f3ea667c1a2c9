//! Rényi and sandwiched Rényi relative entropies, Sibson closed forms for
//! conditional entropy, mutual information and conditional mutual information,
//! and their von Neumann limits. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, embed, matrix_power, partial_trace, CMat, Eigh, SubsystemShape, DEFAULT_CUTOFF, NOISE_CUTOFF,
};
use crate::optim::{self, gradient_descent};
use crate::states::DensityOperator;

/// Orders with `|alpha - 1|` below this use the von Neumann formulas.
pub const VN_WINDOW: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Below1,
    One,
    OneToTwo,
    AboveTwo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenyiOrder {
    alpha: f64,
    regime: Regime,
}

impl RenyiOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("Rényi order must be positive and finite, got {alpha}")));
        }
        let regime = if (alpha - 1.0).abs() < VN_WINDOW {
            Regime::One
        } else if alpha < 1.0 {
            Regime::Below1
        } else if alpha <= 2.0 {
            Regime::OneToTwo
        } else {
            Regime::AboveTwo
        };
        Ok(Self { alpha, regime })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn is_von_neumann(&self) -> bool {
        self.regime == Regime::One
    }

    /// Orders where data processing and CMI nonnegativity are known to hold.
    pub fn is_monotone_range(&self) -> bool {
        self.regime != Regime::AboveTwo
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    ClosedForm,
    Optimized,
    VonNeumannLimit,
}

/// A value in nats with the order and formula branch that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropicValue {
    pub value: f64,
    pub order: RenyiOrder,
    pub branch: Branch,
}

impl EntropicValue {
    pub fn new(value: f64, order: RenyiOrder) -> Self {
        let branch = if order.is_von_neumann() {
            Branch::VonNeumannLimit
        } else {
            Branch::ClosedForm
        };
        Self { value, order, branch }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Anything that exposes a square operator.
pub trait Operator {
    fn op(&self) -> &CMat;
}

impl Operator for CMat {
    fn op(&self) -> &CMat {
        self
    }
}

impl Operator for DensityOperator {
    fn op(&self) -> &CMat {
        self.matrix()
    }
}

fn psd_eigh(m: &CMat) -> Result<Eigh> {
    Eigh::psd(m, DEFAULT_CUTOFF)
}

/// `sum_i lambda_i^p` over the positive spectrum.
fn trace_power(m: &CMat, p: f64) -> Result<f64> {
    let e = psd_eigh(m)?;
    let cutoff = if p > 0.0 { NOISE_CUTOFF } else { DEFAULT_CUTOFF };
    Ok(e.positive_values(cutoff).into_iter().map(|v| v.powf(p)).sum())
}

fn xlogx_sum(m: &CMat) -> Result<f64> {
    let e = psd_eigh(m)?;
    Ok(e.positive_values(DEFAULT_CUTOFF).into_iter().map(|v| v * v.ln()).sum())
}

fn check_pair(rho: &CMat, sigma: &CMat) -> Result<()> {
    if rho.shape() != sigma.shape() {
        return Err(Error::ShapeMismatch(format!(
            "operators are {}x{} and {}x{}",
            rho.nrows(),
            rho.ncols(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    Ok(())
}

/// `Tr{rho (I - Pi_sigma)}` exceeds this when `supp(rho)` is not inside `supp(sigma)`.
const SUPPORT_TOL: f64 = 1e-10;

fn support_leak(rho: &CMat, es: &Eigh) -> f64 {
    let p = es.support_projector(DEFAULT_CUTOFF);
    let leak = (rho - &p * rho * &p).trace().re;
    leak.abs()
}

/// `H(rho) = -Tr rho log rho`.
pub fn vn_entropy(rho: &impl Operator) -> Result<f64> {
    Ok(-xlogx_sum(rho.op())?)
}

/// `(1/(1-alpha)) log Tr rho^alpha`; von Neumann near `alpha = 1`.
pub fn renyi_entropy(rho: &impl Operator, alpha: f64) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return vn_entropy(rho);
    }
    Ok(trace_power(rho.op(), alpha)?.ln() / (1.0 - alpha))
}

/// `D(rho||sigma) = Tr rho (log rho - log sigma)`, `+inf` off support.
pub fn vn_relative_entropy(rho: &impl Operator, sigma: &impl Operator) -> Result<f64> {
    let (r, s) = (rho.op(), sigma.op());
    check_pair(r, s)?;
    let es = psd_eigh(s)?;
    if support_leak(r, &es) > SUPPORT_TOL {
        return Ok(f64::INFINITY);
    }
    let log_s = es.map_support(DEFAULT_CUTOFF, f64::ln);
    let cross = (r * log_s).trace().re;
    Ok(xlogx_sum(r)? - cross)
}

/// Petz-Rényi relative entropy `(1/(alpha-1)) log Tr{rho^alpha sigma^{1-alpha}}`.
///
/// Returns `+inf` when `alpha > 1` and `supp(rho)` is not contained in `supp(sigma)`,
/// or when `alpha < 1` and `rho` is orthogonal to `sigma`.
pub fn renyi_relative_entropy(rho: &impl Operator, sigma: &impl Operator, alpha: f64) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return vn_relative_entropy(rho, sigma);
    }
    let (r, s) = (rho.op(), sigma.op());
    check_pair(r, s)?;
    let es = psd_eigh(s)?;
    if alpha > 1.0 && support_leak(r, &es) > SUPPORT_TOL {
        return Ok(f64::INFINITY);
    }
    let ra = matrix_power(r, alpha)?;
    let sb = es.map_support(DEFAULT_CUTOFF, |v| v.powf(1.0 - alpha));
    let q = (ra * sb).trace().re;
    if q <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(q.ln() / (alpha - 1.0))
}

/// Sandwiched Rényi relative entropy `(1/(alpha-1)) log Tr{(sigma^{(1-alpha)/2alpha} rho sigma^{(1-alpha)/2alpha})^alpha}`.
pub fn sandwiched_relative_entropy(
    rho: &impl Operator,
    sigma: &impl Operator,
    alpha: f64,
) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return vn_relative_entropy(rho, sigma);
    }
    let (r, s) = (rho.op(), sigma.op());
    check_pair(r, s)?;
    let es = psd_eigh(s)?;
    if alpha > 1.0 && support_leak(r, &es) > SUPPORT_TOL {
        return Ok(f64::INFINITY);
    }
    let g = (1.0 - alpha) / (2.0 * alpha);
    let sg = es.map_support(DEFAULT_CUTOFF, |v| v.powf(g));
    let q = linalg::factor_trace_power(&(sg * matrix_power(r, 0.5)?), alpha);
    if q <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(q.ln() / (alpha - 1.0))
}

/// State regrouped into three blocks `(A, B, E)`; other labels are traced out.
pub(crate) struct Blocks {
    pub m: CMat,
    pub shape: SubsystemShape,
}

pub(crate) fn blocks(rho: &DensityOperator, a: &[&str], b: &[&str], e: &[&str]) -> Result<Blocks> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::ShapeMismatch("the A and B groups must be nonempty".into()));
    }
    let all: Vec<&str> = a.iter().chain(b).chain(e).copied().collect();
    let reduced = rho.marginal(&all)?;
    let ordered = reduced.permute(&all)?;
    let s = rho.shape();
    let dim = |g: &[&str]| -> Result<usize> {
        g.iter().try_fold(1usize, |acc, l| Ok(acc * s.dim_of(l)?))
    };
    let shape = SubsystemShape::new(&[dim(a)?, dim(b)?, dim(e)?], &["A", "B", "E"])?;
    Ok(Blocks {
        m: ordered.into_parts().0,
        shape,
    })
}

impl Blocks {
    fn marginal(&self, keep: &[&str]) -> CMat {
        partial_trace(&self.m, &self.shape, keep).expect("block labels").0
    }

    fn lift(&self, op: &CMat, on: &[&str]) -> CMat {
        embed(op, &self.shape, on).expect("block labels")
    }
}

/// `H(A|B) = H(AB) - H(B)`.
pub fn vn_conditional_entropy(rho: &DensityOperator, a: &[&str], b: &[&str]) -> Result<f64> {
    let bl = blocks(rho, a, b, &[])?;
    Ok(vn_entropy(&bl.m)? - vn_entropy(&bl.marginal(&["B"]))?)
}

/// `I(A;B) = H(A) + H(B) - H(AB)`.
pub fn vn_mutual_info(rho: &DensityOperator, a: &[&str], b: &[&str]) -> Result<f64> {
    let bl = blocks(rho, a, b, &[])?;
    Ok(vn_entropy(&bl.marginal(&["A"]))? + vn_entropy(&bl.marginal(&["B"]))? - vn_entropy(&bl.m)?)
}

/// `I(A;B|E) = H(AE) + H(BE) - H(E) - H(ABE)`.
pub fn vn_cmi(rho: &DensityOperator, a: &[&str], b: &[&str], e: &[&str]) -> Result<f64> {
    let bl = blocks(rho, a, b, e)?;
    Ok(vn_entropy(&bl.marginal(&["A", "E"]))? + vn_entropy(&bl.marginal(&["B", "E"]))?
        - vn_entropy(&bl.marginal(&["E"]))?
        - vn_entropy(&bl.m)?)
}

/// Sibson form `H_alpha(A|B) = (alpha/(1-alpha)) log Tr{(Tr_A rho_AB^alpha)^{1/alpha}}`.
pub fn renyi_conditional_entropy(rho: &DensityOperator, a: &[&str], b: &[&str], alpha: f64) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return vn_conditional_entropy(rho, a, b);
    }
    let bl = blocks(rho, a, b, &[])?;
    let z = linalg::trace_out_leading_factor(&matrix_power(&bl.m, alpha / 2.0)?, bl.shape.dims()[0]);
    let q = linalg::factor_trace_power(&z, 1.0 / alpha);
    Ok(alpha / (1.0 - alpha) * q.ln())
}

/// Sibson form `I_alpha(A;B) = (alpha/(alpha-1)) log Tr{(Tr_A{rho_A^{1-alpha} rho_AB^alpha})^{1/alpha}}`.
pub fn renyi_mutual_info(rho: &DensityOperator, a: &[&str], b: &[&str], alpha: f64) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return vn_mutual_info(rho, a, b);
    }
    let bl = blocks(rho, a, b, &[])?;
    let pa = bl.lift(&matrix_power(&bl.marginal(&["A"]), (1.0 - alpha) / 2.0)?, &["A"]);
    let z = linalg::trace_out_leading_factor(&(pa * matrix_power(&bl.m, alpha / 2.0)?), bl.shape.dims()[0]);
    let q = linalg::factor_trace_power(&z, 1.0 / alpha);
    Ok(alpha / (alpha - 1.0) * q.ln())
}

/// `X` on BE with `X X^dagger = rho_E^{(alpha-1)/2} Tr_A{rho_AE^{(1-alpha)/2} rho_ABE^alpha rho_AE^{(1-alpha)/2}} rho_E^{(alpha-1)/2}`.
fn sibson_cmi_factor(bl: &Blocks, alpha: f64) -> Result<CMat> {
    let pae = bl.lift(&matrix_power(&bl.marginal(&["A", "E"]), (1.0 - alpha) / 2.0)?, &["A", "E"]);
    let z = linalg::trace_out_leading_factor(&(pae * matrix_power(&bl.m, alpha / 2.0)?), bl.shape.dims()[0]);
    let sbe = bl.shape.restrict(&["B", "E"])?;
    let pe = embed(&matrix_power(&bl.marginal(&["E"]), (alpha - 1.0) / 2.0)?, &sbe, &["E"])?;
    Ok(pe * z)
}

/// Rényi conditional mutual information `I_alpha(A;B|E)` in Sibson closed form.
///
/// `a`, `b`, `e` are groups of labels of `rho`; `e` may be empty, in which case
/// this is the Rényi mutual information. Labels outside the groups are traced out.
pub fn renyi_cmi(rho: &DensityOperator, a: &[&str], b: &[&str], e: &[&str], alpha: f64) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return vn_cmi(rho, a, b, e);
    }
    let bl = blocks(rho, a, b, e)?;
    let q = linalg::factor_trace_power(&sibson_cmi_factor(&bl, alpha)?, 1.0 / alpha);
    Ok(alpha / (alpha - 1.0) * q.ln())
}

/// `(1/(alpha-1)) log Tr{rho_ABE^alpha rho_AE^{(1-alpha)/2} rho_E^{(alpha-1)/2} rho_BE^{1-alpha} rho_E^{(alpha-1)/2} rho_AE^{(1-alpha)/2}}`,
/// the CMI with `sigma_BE = rho_BE` instead of the optimal choice (never below [`renyi_cmi`]).
pub fn renyi_cmi_unoptimized(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
    e: &[&str],
    alpha: f64,
) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return vn_cmi(rho, a, b, e);
    }
    let bl = blocks(rho, a, b, e)?;
    let q = unoptimized_trace(&bl, &bl.marginal(&["B", "E"]), alpha)?;
    Ok(q.ln() / (alpha - 1.0))
}

/// `Tr{rho^alpha tau(sigma_BE)}` for the operator `tau` of the optimized CMI.
fn unoptimized_trace(bl: &Blocks, sigma_be: &CMat, alpha: f64) -> Result<f64> {
    let tau = cmi_tau(bl, sigma_be, alpha)?;
    Ok((matrix_power(&bl.m, alpha)? * tau).trace().re)
}

/// `rho_AE^{(1-alpha)/2} rho_E^{(alpha-1)/2} sigma_BE^{1-alpha} rho_E^{(alpha-1)/2} rho_AE^{(1-alpha)/2}`.
fn cmi_tau(bl: &Blocks, sigma_be: &CMat, alpha: f64) -> Result<CMat> {
    let pae = bl.lift(&matrix_power(&bl.marginal(&["A", "E"]), (1.0 - alpha) / 2.0)?, &["A", "E"]);
    let pe = bl.lift(&matrix_power(&bl.marginal(&["E"]), (alpha - 1.0) / 2.0)?, &["E"]);
    let sb = bl.lift(&matrix_power(sigma_be, 1.0 - alpha)?, &["B", "E"]);
    let left = &pae * &pe;
    Ok(linalg::hermitian_part(&(&left * sb * left.adjoint())))
}

/// `Ĩ_alpha(A;B|C) = (1/(alpha-1)) log ||rho_ABC^{1/2} rho_AC^{(1-alpha)/2alpha} rho_C^{(alpha-1)/2alpha} rho_BC^{(1-alpha)/2alpha}||_{2alpha}^{2alpha}`.
pub fn sandwiched_cmi(rho: &DensityOperator, a: &[&str], b: &[&str], c: &[&str], alpha: f64) -> Result<f64> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return vn_cmi(rho, a, b, c);
    }
    let bl = blocks(rho, a, b, c)?;
    let g = (1.0 - alpha) / (2.0 * alpha);
    let half = matrix_power(&bl.m, 0.5)?;
    let pac = bl.lift(&matrix_power(&bl.marginal(&["A", "E"]), g)?, &["A", "E"]);
    let pc = bl.lift(&matrix_power(&bl.marginal(&["E"]), -g)?, &["E"]);
    let pbc = bl.lift(&matrix_power(&bl.marginal(&["B", "E"]), g)?, &["B", "E"]);
    let x = half * pac * pc * pbc;
    let q = linalg::schatten_sum(&x, 2.0 * alpha);
    Ok(q.ln() / (alpha - 1.0))
}

/// Budget for the numeric oracles that minimize over states.
#[derive(Clone, Copy, Debug)]
pub struct OracleBudget {
    pub max_evals: usize,
    pub tol: f64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self {
            max_evals: 40_000,
            tol: 1e-11,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OracleResult {
    pub value: f64,
    pub evaluations: usize,
}

/// Hermitian matrix from `d^2` real coordinates.
pub fn hermitian_from_params(p: &[f64], d: usize) -> CMat {
    let mut h = CMat::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        h[(i, i)] = linalg::c(p[k], 0.0);
        k += 1;
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let z = linalg::c(p[k], p[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

pub fn params_from_hermitian(h: &CMat) -> Vec<f64> {
    let d = h.nrows();
    let mut p = Vec::with_capacity(d * d);
    for i in 0..d {
        p.push(h[(i, i)].re);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            p.push(h[(i, j)].re);
            p.push(h[(i, j)].im);
        }
    }
    p
}

/// Full-rank state `exp(H)/Tr exp(H)`.
pub fn gibbs_state(p: &[f64], d: usize) -> CMat {
    let h = hermitian_from_params(p, d);
    let e = Eigh::new_unchecked(&h);
    let top = e.values.last().copied().unwrap_or(0.0);
    let m = e.map_all(|v| (v - top).exp());
    let t = linalg::trace(&m);
    m.unscale(t)
}

/// Minimizes `f(sigma)` over full-rank states on dimension `d`, starting at `start`.
fn minimize_over_states(
    d: usize,
    start: &CMat,
    budget: OracleBudget,
    f: &(dyn Fn(&CMat) -> f64 + Sync),
) -> Result<OracleResult> {
    let log_start = linalg::matrix_log(&(start + linalg::identity(d).scale(1e-12)))?;
    let x0 = params_from_hermitian(&log_start);
    let obj = |p: &[f64]| f(&gibbs_state(p, d));
    let gd = gradient_descent(&obj, &optim::no_retraction, &x0, budget.tol, budget.max_evals);
    let remaining = budget.max_evals.saturating_sub(gd.evaluations).max(200);
    let nm = optim::nelder_mead(&obj, &gd.x, 1e-3, budget.tol * 1e-2, remaining);
    Ok(OracleResult {
        value: gd.value.min(nm.value),
        evaluations: gd.evaluations + nm.evaluations,
    })
}

/// Numeric `inf_{sigma_BE} D_alpha(rho_ABE || (rho_AE^{(1-alpha)/2} rho_E^{(alpha-1)/2} sigma_BE^{1-alpha} rho_E^{(alpha-1)/2} rho_AE^{(1-alpha)/2})^{1/(1-alpha)})`.
///
/// Test oracle for [`renyi_cmi`]; the objective goes through
/// [`renyi_relative_entropy`] rather than the closed-form operator.
pub fn renyi_cmi_optimized_check(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
    e: &[&str],
    alpha: f64,
    budget: OracleBudget,
) -> Result<OracleResult> {
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return Err(Error::InvalidArgument("the optimized form needs alpha != 1".into()));
    }
    let bl = blocks(rho, a, b, e)?;
    let start = bl.marginal(&["B", "E"]);
    let d = start.nrows();
    let objective = |sigma: &CMat| -> f64 {
        let run = || -> Result<f64> {
            let tau = cmi_tau(&bl, sigma, alpha)?;
            let target = matrix_power(&tau, 1.0 / (1.0 - alpha))?;
            renyi_relative_entropy(&bl.m, &target, alpha)
        };
        run().unwrap_or(f64::INFINITY)
    };
    minimize_over_states(d, &start, budget, &objective)
}

/// Numeric `-inf_{sigma_B} D_alpha(rho_AB || I_A (x) sigma_B)`.
pub fn renyi_conditional_entropy_optimized(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
    alpha: f64,
    budget: OracleBudget,
) -> Result<OracleResult> {
    let bl = blocks(rho, a, b, &[])?;
    let start = bl.marginal(&["B"]);
    let objective = |sigma: &CMat| -> f64 {
        let target = bl.lift(sigma, &["B"]);
        renyi_relative_entropy(&bl.m, &target, alpha).unwrap_or(f64::INFINITY)
    };
    let r = minimize_over_states(start.nrows(), &start, budget, &objective)?;
    Ok(OracleResult {
        value: -r.value,
        evaluations: r.evaluations,
    })
}

/// Numeric `inf_{sigma_B} D_alpha(rho_AB || rho_A (x) sigma_B)`.
pub fn renyi_mutual_info_optimized(
    rho: &DensityOperator,
    a: &[&str],
    b: &[&str],
    alpha: f64,
    budget: OracleBudget,
) -> Result<OracleResult> {
    let bl = blocks(rho, a, b, &[])?;
    let start = bl.marginal(&["B"]);
    let ra = bl.lift(&bl.marginal(&["A"]), &["A"]);
    let objective = |sigma: &CMat| -> f64 {
        let target = &ra * bl.lift(sigma, &["B"]);
        renyi_relative_entropy(&bl.m, &target, alpha).unwrap_or(f64::INFINITY)
    };
    minimize_over_states(start.nrows(), &start, budget, &objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::random_channel;
    use crate::linalg::{c, diag, CVec};
    use crate::rng::stream_rng;
    use crate::states::{maximally_entangled, random_full_rank, random_pure, PureState};
    use approx::assert_abs_diff_eq;

    fn tri(d: [usize; 3]) -> SubsystemShape {
        SubsystemShape::tripartite(d[0], d[1], d[2], ["A", "B", "E"])
    }

    #[test]
    fn renyi_entropy_examples() {
        let mixed = diag(&[0.5, 0.5]);
        for a in [0.3, 1.0, 2.0, 5.0] {
            assert_abs_diff_eq!(renyi_entropy(&mixed, a).unwrap(), 2f64.ln(), epsilon = 1e-14);
        }
        let r = renyi_entropy(&diag(&[0.75, 0.25]), 2.0).unwrap();
        assert_abs_diff_eq!(r, -(0.625f64).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(r, 0.4700036292457356, epsilon = 1e-12);
        assert_abs_diff_eq!(renyi_entropy(&diag(&[1.0, 0.0]), 0.5).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn relative_entropy_examples() {
        let r = diag(&[0.5, 0.5]);
        let s = diag(&[0.75, 0.25]);
        let d2 = renyi_relative_entropy(&r, &s, 2.0).unwrap();
        assert_abs_diff_eq!(d2, (4.0f64 / 3.0).ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(d2, 0.28768207245178085, epsilon = 1e-12);
        assert_abs_diff_eq!(renyi_relative_entropy(&r, &r, 0.7).unwrap(), 0.0, epsilon = 1e-14);
        let zero = diag(&[1.0, 0.0]);
        let one = diag(&[0.0, 1.0]);
        assert_eq!(renyi_relative_entropy(&zero, &one, 0.5).unwrap(), f64::INFINITY);
        assert_eq!(renyi_relative_entropy(&r, &one, 2.0).unwrap(), f64::INFINITY);
        // alpha < 1 with partial overlap is finite
        assert!(renyi_relative_entropy(&r, &one, 0.5).unwrap().is_finite());
        assert_eq!(vn_relative_entropy(&r, &one).unwrap(), f64::INFINITY);
        assert_abs_diff_eq!(vn_relative_entropy(&s, &s).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sandwiched_examples() {
        let r = diag(&[0.6, 0.4]);
        let s = diag(&[0.2, 0.8]);
        for a in [0.4, 1.7, 3.0] {
            let x = sandwiched_relative_entropy(&r, &s, a).unwrap();
            let y = renyi_relative_entropy(&r, &s, a).unwrap();
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
        let mut rng = stream_rng(1, 0);
        let shape = SubsystemShape::single(2, "A");
        let rho = random_full_rank(&shape, &mut rng);
        let sigma = random_full_rank(&shape, &mut rng);
        assert_abs_diff_eq!(sandwiched_relative_entropy(&rho, &rho, 0.8).unwrap(), 0.0, epsilon = 1e-12);
        let si = matrix_power(sigma.matrix(), -0.5).unwrap();
        let m = rho.matrix() * &si * rho.matrix() * &si;
        let expected = m.trace().re.ln();
        assert_abs_diff_eq!(sandwiched_relative_entropy(&rho, &sigma, 2.0).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn vn_cmi_examples() {
        let mut rng = stream_rng(2, 0);
        let ab = random_full_rank(&SubsystemShape::bipartite(2, 2), &mut rng);
        let e = random_full_rank(&SubsystemShape::single(3, "E"), &mut rng);
        let abe = ab.tensor(&e).unwrap();
        let i = vn_mutual_info(&ab, &["A"], &["B"]).unwrap();
        assert_abs_diff_eq!(vn_cmi(&abe, &["A"], &["B"], &["E"]).unwrap(), i, epsilon = 1e-12);
        // GHZ: H(AE) = H(BE) = H(E) = H(ABE) + log 2 = log 2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = CVec::zeros(8);
        v[0] = c(s, 0.0);
        v[7] = c(s, 0.0);
        let ghz = PureState::new(v, tri([2, 2, 2])).unwrap().density();
        assert_abs_diff_eq!(vn_cmi(&ghz, &["A"], &["B"], &["E"]).unwrap(), 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn ghz_mixture_cmi_vanishes() {
        // classical GHZ mixture (|000><000| + |111><111|)/2 has I(A;B|E) = 0
        let mut m = CMat::zeros(8, 8);
        m[(0, 0)] = c(0.5, 0.0);
        m[(7, 7)] = c(0.5, 0.0);
        let rho = DensityOperator::new(m, tri([2, 2, 2])).unwrap();
        assert_abs_diff_eq!(vn_cmi(&rho, &["A"], &["B"], &["E"]).unwrap(), 0.0, epsilon = 1e-12);
        for a in [0.5, 2.0] {
            assert_abs_diff_eq!(renyi_cmi(&rho, &["A"], &["B"], &["E"], a).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_entropy_cases() {
        let mut rng = stream_rng(3, 0);
        let ra = random_full_rank(&SubsystemShape::single(2, "A"), &mut rng);
        let rb = random_full_rank(&SubsystemShape::single(3, "B"), &mut rng);
        let prod = ra.tensor(&rb).unwrap();
        for a in [0.5, 1.5] {
            let h = renyi_conditional_entropy(&prod, &["A"], &["B"], a).unwrap();
            assert_abs_diff_eq!(h, renyi_entropy(&ra, a).unwrap(), epsilon = 1e-12);
        }
        let cl = DensityOperator::diagonal(&[0.5, 0.5], "A")
            .unwrap()
            .tensor(&DensityOperator::diagonal(&[1.0, 0.0], "B").unwrap())
            .unwrap();
        assert_abs_diff_eq!(renyi_conditional_entropy(&cl, &["A"], &["B"], 2.0).unwrap(), 2f64.ln(), epsilon = 1e-12);
        let bell = maximally_entangled(2).density();
        for a in [0.5, 2.0] {
            let closed = renyi_conditional_entropy(&bell, &["A"], &["B"], a).unwrap();
            assert_abs_diff_eq!(closed, -(2f64.ln()), epsilon = 1e-10);
        }
    }

    #[test]
    fn conditional_entropy_matches_inner_minimization() {
        let mut rng = stream_rng(4, 0);
        let rho = random_full_rank(&SubsystemShape::bipartite(2, 2), &mut rng);
        for a in [0.6, 1.8] {
            let closed = renyi_conditional_entropy(&rho, &["A"], &["B"], a).unwrap();
            let num = renyi_conditional_entropy_optimized(&rho, &["A"], &["B"], a, OracleBudget::default()).unwrap();
            assert!((closed - num.value).abs() < 1e-6, "{closed} vs {}", num.value);
        }
    }

    #[test]
    fn mutual_info_cases() {
        let mut rng = stream_rng(5, 0);
        let ra = random_full_rank(&SubsystemShape::single(2, "A"), &mut rng);
        let rb = random_full_rank(&SubsystemShape::single(2, "B"), &mut rng);
        let prod = ra.tensor(&rb).unwrap();
        for a in [0.5, 1.5, 3.0] {
            assert_abs_diff_eq!(renyi_mutual_info(&prod, &["A"], &["B"], a).unwrap(), 0.0, epsilon = 1e-12);
        }
        let psi = random_pure(&SubsystemShape::bipartite(2, 3), &mut rng).density();
        let psi_a = psi.marginal(&["A"]).unwrap();
        for a in [0.5, 1.5] {
            let i = renyi_mutual_info(&psi, &["A"], &["B"], a).unwrap();
            let h = renyi_entropy(&psi_a, (2.0 - a) / a).unwrap();
            assert_abs_diff_eq!(i, 2.0 * h, epsilon = 1e-10);
        }
        let rho = random_full_rank(&SubsystemShape::bipartite(2, 2), &mut rng);
        for a in [0.7, 2.0] {
            let closed = renyi_mutual_info(&rho, &["A"], &["B"], a).unwrap();
            let num = renyi_mutual_info_optimized(&rho, &["A"], &["B"], a, OracleBudget::default()).unwrap();
            assert!(closed >= -1e-10);
            assert!((closed - num.value).abs() < 1e-6);
        }
    }

    #[test]
    fn cmi_with_trivial_e_is_mutual_info() {
        let mut rng = stream_rng(6, 0);
        let rho = random_full_rank(&SubsystemShape::bipartite(2, 3), &mut rng);
        for a in [0.4, 1.6] {
            let i = renyi_mutual_info(&rho, &["A"], &["B"], a).unwrap();
            assert_abs_diff_eq!(renyi_cmi(&rho, &["A"], &["B"], &[], a).unwrap(), i, epsilon = 1e-12);
        }
    }

    #[test]
    fn label_groups_and_order() {
        let mut rng = stream_rng(7, 0);
        let rho = random_full_rank(&tri([2, 2, 2]), &mut rng);
        let perm = rho.permute(&["E", "B", "A"]).unwrap();
        for a in [0.5, 2.0] {
            let x = renyi_cmi(&rho, &["A"], &["B"], &["E"], a).unwrap();
            let y = renyi_cmi(&perm, &["A"], &["B"], &["E"], a).unwrap();
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert!(renyi_cmi(&rho, &["A"], &["Z"], &["E"], 2.0).is_err());
    }

    #[test]
    fn optimized_cmi_matches_closed_form() {
        let mut rng = stream_rng(8, 0);
        let rho = random_full_rank(&tri([2, 2, 2]), &mut rng);
        for a in [0.5, 2.0] {
            let closed = renyi_cmi(&rho, &["A"], &["B"], &["E"], a).unwrap();
            let num = renyi_cmi_optimized_check(&rho, &["A"], &["B"], &["E"], a, OracleBudget::default()).unwrap();
            assert!((closed - num.value).abs() < 1e-5, "alpha {a}: {closed} vs {}", num.value);
            let un = renyi_cmi_unoptimized(&rho, &["A"], &["B"], &["E"], a).unwrap();
            assert!(un >= closed - 1e-12);
        }
    }

    #[test]
    fn sandwiched_cmi_cases() {
        let mut rng = stream_rng(9, 0);
        let ra = random_full_rank(&SubsystemShape::single(2, "A"), &mut rng);
        let rbc = random_full_rank(&SubsystemShape::new(&[2, 2], &["B", "E"]).unwrap(), &mut rng);
        let prod = ra.tensor(&rbc).unwrap();
        for a in [0.5, 2.0, 4.0] {
            assert_abs_diff_eq!(sandwiched_cmi(&prod, &["A"], &["B"], &["E"], a).unwrap(), 0.0, epsilon = 1e-10);
        }
        let rho = random_full_rank(&tri([2, 2, 2]), &mut rng);
        let vn = vn_cmi(&rho, &["A"], &["B"], &["E"]).unwrap();
        for a in [1.0 - 1e-4, 1.0 + 1e-4] {
            assert!((sandwiched_cmi(&rho, &["A"], &["B"], &["E"], a).unwrap() - vn).abs() < 1e-3);
        }
    }

    #[test]
    fn commuting_cmi_variants_agree() {
        // classical tripartite distribution: all Rényi CMI variants share one classical value
        let mut rng = stream_rng(10, 0);
        let p = crate::states::random_probs(8, &mut rng);
        let rho = DensityOperator::new(diag(&p), tri([2, 2, 2])).unwrap();
        for a in [0.5, 1.5] {
            let s = sandwiched_cmi(&rho, &["A"], &["B"], &["E"], a).unwrap();
            let u = renyi_cmi_unoptimized(&rho, &["A"], &["B"], &["E"], a).unwrap();
            assert_abs_diff_eq!(s, u, epsilon = 1e-12);
            // classical oracle
            let idx = |x: usize, y: usize, z: usize| p[x * 4 + y * 2 + z];
            let mut q = 0.0;
            for x in 0..2 {
                for y in 0..2 {
                    for z in 0..2 {
                        let pe: f64 = (0..4).map(|k| idx(k / 2, k % 2, z)).sum();
                        let pae: f64 = (0..2).map(|k| idx(x, k, z)).sum();
                        let pbe: f64 = (0..2).map(|k| idx(k, y, z)).sum();
                        q += idx(x, y, z).powf(a) * (pae * pbe / pe).powf(1.0 - a);
                    }
                }
            }
            assert_abs_diff_eq!(u, q.ln() / (a - 1.0), epsilon = 1e-12);
            assert!(renyi_cmi(&rho, &["A"], &["B"], &["E"], a).unwrap() <= u + 1e-12);
        }
    }

    #[test]
    fn data_processing_spot_check() {
        let mut rng = stream_rng(11, 0);
        let shape = SubsystemShape::single(3, "A");
        for _ in 0..20 {
            let rho = random_full_rank(&shape, &mut rng);
            let sigma = random_full_rank(&shape, &mut rng);
            let ch = random_channel(3, 2, None, &mut rng).unwrap();
            let (nr, ns) = (ch.apply_matrix(rho.matrix()), ch.apply_matrix(sigma.matrix()));
            for a in [0.3, 0.7, 1.5, 2.0] {
                let gap = renyi_relative_entropy(&rho, &sigma, a).unwrap() - renyi_relative_entropy(&nr, &ns, a).unwrap();
                assert!(gap >= -1e-9);
            }
        }
    }

    #[test]
    fn order_regimes() {
        assert_eq!(RenyiOrder::new(0.5).unwrap().regime(), Regime::Below1);
        assert_eq!(RenyiOrder::new(1.0 + 1e-7).unwrap().regime(), Regime::One);
        assert_eq!(RenyiOrder::new(2.0).unwrap().regime(), Regime::OneToTwo);
        assert_eq!(RenyiOrder::new(2.5).unwrap().regime(), Regime::AboveTwo);
        assert!(RenyiOrder::new(0.0).is_err());
        assert!(RenyiOrder::new(f64::NAN).is_err());
    }
}
