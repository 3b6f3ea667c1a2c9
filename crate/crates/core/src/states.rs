//! Density operators, pure states, ensembles and Haar-random samplers.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, partial_trace, projector, trace, CMat, CVec, Eigh, MatrixDoc, SubsystemShape,
    DEFAULT_CUTOFF,
};

pub const TRACE_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;

/// Unit-trace positive semi-definite operator on a labeled composite space.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct DensityOperator {
    matrix: CMat,
    shape: SubsystemShape,
}

impl DensityOperator {
    pub fn new(matrix: CMat, shape: SubsystemShape) -> Result<Self> {
        shape.check_matrix(&matrix)?;
        let e = Eigh::new(&matrix)?;
        e.check_psd(DEFAULT_CUTOFF)?;
        let tr = trace(&matrix);
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        Ok(Self {
            matrix: linalg::hermitian_part(&matrix),
            shape,
        })
    }

    /// Builds without validation; callers guarantee the invariants up to rounding.
    pub fn from_raw(matrix: CMat, shape: SubsystemShape) -> Self {
        debug_assert_eq!(matrix.nrows(), shape.total());
        Self {
            matrix: linalg::hermitian_part(&matrix),
            shape,
        }
    }

    /// Normalizes a PSD matrix to unit trace.
    pub fn from_unnormalized(matrix: CMat, shape: SubsystemShape) -> Result<Self> {
        let tr = trace(&matrix);
        if !(tr > 0.0) {
            return Err(Error::InvalidState("operator has zero trace".into()));
        }
        Self::new(matrix.unscale(tr), shape)
    }

    pub fn maximally_mixed(shape: SubsystemShape) -> Self {
        let d = shape.total();
        Self::from_raw(linalg::identity(d).unscale(d as f64), shape)
    }

    pub fn diagonal(probs: &[f64], label: &str) -> Result<Self> {
        Self::new(linalg::diag(probs), SubsystemShape::single(probs.len(), label))
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn into_parts(self) -> (CMat, SubsystemShape) {
        (self.matrix, self.shape)
    }

    pub fn eigh(&self) -> Eigh {
        Eigh::new_unchecked(&self.matrix)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigh().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigh().values.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self) -> usize {
        self.eigh().rank(DEFAULT_CUTOFF)
    }

    /// Reduced state on `keep`, in this state's label order.
    pub fn marginal<S: AsRef<str>>(&self, keep: &[S]) -> Result<DensityOperator> {
        let (m, s) = partial_trace(&self.matrix, &self.shape, keep)?;
        Ok(Self::from_raw(m, s))
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        let shape = self.shape.join(&other.shape)?;
        Ok(Self::from_raw(linalg::tensor(&self.matrix, &other.matrix), shape))
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<DensityOperator> {
        let (m, s) = linalg::permute(&self.matrix, &self.shape, order)?;
        Ok(Self::from_raw(m, s))
    }

    pub fn relabel<S: AsRef<str>>(&self, labels: &[S]) -> Result<DensityOperator> {
        let shape = SubsystemShape::new(self.shape.dims(), labels)?;
        Ok(Self::from_raw(self.matrix.clone(), shape))
    }

    /// Merges runs of subsystems: each `(name, members)` becomes one subsystem.
    pub fn regroup(&self, groups: &[(&str, &[&str])]) -> Result<DensityOperator> {
        let order: Vec<&str> = groups.iter().flat_map(|(_, m)| m.iter().copied()).collect();
        let p = self.permute(&order)?;
        let mut dims = Vec::with_capacity(groups.len());
        for (_, members) in groups {
            let mut d = 1;
            for l in members.iter() {
                d *= self.shape.dim_of(l)?;
            }
            dims.push(d);
        }
        let labels: Vec<&str> = groups.iter().map(|(n, _)| *n).collect();
        let shape = SubsystemShape::new(&dims, &labels)?;
        Ok(Self::from_raw(p.matrix, shape))
    }

    /// `U rho U^dagger` for a unitary on the labeled factors `targets`.
    pub fn conjugate<S: AsRef<str>>(&self, u: &CMat, targets: &[S]) -> Result<DensityOperator> {
        let full = linalg::embed(u, &self.shape, targets)?;
        Ok(Self::from_raw(&full * &self.matrix * full.adjoint(), self.shape.clone()))
    }

    pub fn to_doc(&self) -> MatrixDoc {
        MatrixDoc::from_parts(&self.matrix, &self.shape)
    }
}

impl TryFrom<MatrixDoc> for DensityOperator {
    type Error = Error;
    fn try_from(doc: MatrixDoc) -> Result<Self> {
        let (m, s) = doc.to_parts()?;
        Self::new(m, s)
    }
}

impl From<DensityOperator> for MatrixDoc {
    fn from(rho: DensityOperator) -> Self {
        rho.to_doc()
    }
}

/// Unit vector on a labeled composite space.
#[derive(Clone, Debug)]
pub struct PureState {
    amplitudes: CVec,
    shape: SubsystemShape,
}

impl PureState {
    pub fn new(amplitudes: CVec, shape: SubsystemShape) -> Result<Self> {
        if amplitudes.len() != shape.total() {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for dimension {}",
                amplitudes.len(),
                shape.total()
            )));
        }
        let n = amplitudes.norm();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm is {n}")));
        }
        Ok(Self { amplitudes, shape })
    }

    pub fn normalized(amplitudes: CVec, shape: SubsystemShape) -> Result<Self> {
        let n = amplitudes.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Self::new(amplitudes.unscale(n), shape)
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator::from_raw(projector(&self.amplitudes), self.shape.clone())
    }

    pub fn permute<S: AsRef<str>>(&self, order: &[S]) -> Result<PureState> {
        let (v, s) = linalg::permute_vector(&self.amplitudes, &self.shape, order)?;
        Ok(PureState {
            amplitudes: v,
            shape: s,
        })
    }
}

/// Schmidt form `psi = sum_k coeffs[k] |a_k>|b_k>`.
#[derive(Clone, Debug)]
pub struct Schmidt {
    pub coeffs: Vec<f64>,
    pub basis_a: Vec<CVec>,
    pub basis_b: Vec<CVec>,
}

impl Schmidt {
    pub fn reconstruct(&self) -> CVec {
        let da = self.basis_a.first().map_or(0, |v| v.len());
        let db = self.basis_b.first().map_or(0, |v| v.len());
        let mut out = CVec::zeros(da * db);
        for k in 0..self.coeffs.len() {
            out += linalg::kron_vec(&self.basis_a[k], &self.basis_b[k]).scale(self.coeffs[k]);
        }
        out
    }
}

pub fn schmidt(psi: &PureState) -> Result<Schmidt> {
    let shape = psi.shape();
    if shape.len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "Schmidt decomposition needs two subsystems, got {}",
            shape.len()
        )));
    }
    let (da, db) = (shape.dims()[0], shape.dims()[1]);
    let m = CMat::from_fn(da, db, |i, j| psi.amplitudes()[i * db + j]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let vt = svd.v_t.expect("right singular vectors");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let smax = order.first().map_or(0.0, |&k| s[k]);
    let mut out = Schmidt {
        coeffs: vec![],
        basis_a: vec![],
        basis_b: vec![],
    };
    for k in order {
        if s[k] * s[k] <= DEFAULT_CUTOFF * smax * smax {
            continue;
        }
        out.coeffs.push(s[k]);
        out.basis_a.push(u.column(k).into_owned());
        out.basis_b.push(vt.row(k).transpose());
    }
    Ok(out)
}

/// Purification `sum_i sqrt(lambda_i) |i> |i>_R` with `R` of dimension `rank(rho)`.
pub fn purify(rho: &DensityOperator) -> Result<PureState> {
    if rho.shape().contains("R") {
        return Err(Error::ShapeMismatch("state already has a subsystem labeled R".into()));
    }
    let e = rho.eigh();
    let t = DEFAULT_CUTOFF * e.scale();
    let support: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > t).collect();
    let r = support.len().max(1);
    let d = rho.dim();
    let mut v = CVec::zeros(d * r);
    for (k, &i) in support.iter().enumerate() {
        let w = e.values[i].sqrt();
        for row in 0..d {
            v[row * r + k] += e.vectors[(row, i)] * w;
        }
    }
    let shape = rho.shape().join(&SubsystemShape::single(r, "R"))?;
    PureState::normalized(v, shape)
}

/// `F(rho, sigma) = ||sqrt(rho) sqrt(sigma)||_1^2`.
pub fn fidelity(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    fidelity_matrices(rho.matrix(), sigma.matrix())
}

pub fn fidelity_matrices(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.shape() != sigma.shape() {
        return Err(Error::ShapeMismatch("fidelity of operators with different sizes".into()));
    }
    let a = linalg::matrix_power(rho, 0.5)?;
    let b = linalg::matrix_power(sigma, 0.5)?;
    let f = linalg::trace_norm(&(a * b));
    Ok(f * f)
}

/// `||rho - sigma||_1`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::ShapeMismatch("trace distance of operators with different sizes".into()));
    }
    let e = Eigh::new(&(rho.matrix() - sigma.matrix()))?;
    Ok(e.values.iter().map(|v| v.abs()).sum())
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re * s, im * s)
    })
}

/// Haar-random unitary via QR of a Ginibre matrix with the diagonal phases of `R` removed.
pub fn random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let qr = ginibre(d, d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { c(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random isometry `d_in -> d_out` (first columns of a Haar unitary).
pub fn random_isometry<R: Rng + ?Sized>(d_out: usize, d_in: usize, rng: &mut R) -> CMat {
    assert!(d_out >= d_in, "isometry needs d_out >= d_in");
    random_unitary(d_out, rng).columns(0, d_in).into_owned()
}

pub fn random_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CVec {
    let g = ginibre(d, 1, rng);
    let n = g.norm();
    g.column(0).unscale(n)
}

pub fn random_pure<R: Rng + ?Sized>(shape: &SubsystemShape, rng: &mut R) -> PureState {
    PureState {
        amplitudes: random_vector(shape.total(), rng),
        shape: shape.clone(),
    }
}

/// Reduced state of a Haar-random pure state on `dim * rank`.
pub fn random_density<R: Rng + ?Sized>(
    shape: &SubsystemShape,
    rank: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    let d = shape.total();
    if rank == 0 || rank > d {
        return Err(Error::InvalidArgument(format!("rank {rank} for dimension {d}")));
    }
    let v = random_vector(d * rank, rng);
    let m = CMat::from_fn(d, rank, |i, k| v[i * rank + k]);
    Ok(DensityOperator::from_raw(&m * m.adjoint(), shape.clone()))
}

pub fn random_full_rank<R: Rng + ?Sized>(shape: &SubsystemShape, rng: &mut R) -> DensityOperator {
    random_density(shape, shape.total(), rng).expect("full rank is valid")
}

/// Uniform point of the probability simplex.
pub fn random_probs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

pub fn maximally_entangled(d: usize) -> PureState {
    let mut v = CVec::zeros(d * d);
    let a = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        v[i * d + i] = c(a, 0.0);
    }
    PureState {
        amplitudes: v,
        shape: SubsystemShape::bipartite(d, d),
    }
}

/// Finite ensemble `{p(x), rho^x}` with a common shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "EnsembleDoc", into = "EnsembleDoc")]
pub struct Ensemble {
    probs: Vec<f64>,
    states: Vec<DensityOperator>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EnsembleDoc {
    probs: Vec<f64>,
    states: Vec<DensityOperator>,
}

impl TryFrom<EnsembleDoc> for Ensemble {
    type Error = Error;
    fn try_from(doc: EnsembleDoc) -> Result<Self> {
        Ensemble::new(doc.probs, doc.states)
    }
}

impl From<Ensemble> for EnsembleDoc {
    fn from(e: Ensemble) -> Self {
        EnsembleDoc {
            probs: e.probs,
            states: e.states,
        }
    }
}

impl Ensemble {
    pub fn new(probs: Vec<f64>, states: Vec<DensityOperator>) -> Result<Self> {
        if probs.len() != states.len() || probs.is_empty() {
            return Err(Error::InvalidState(format!(
                "{} probabilities for {} states",
                probs.len(),
                states.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidState("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        let shape = states[0].shape();
        if states.iter().any(|s| s.shape() != shape) {
            return Err(Error::ShapeMismatch("ensemble states differ in shape".into()));
        }
        Ok(Self { probs, states })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn shape(&self) -> &SubsystemShape {
        self.states[0].shape()
    }

    pub fn average(&self) -> DensityOperator {
        let d = self.states[0].dim();
        let mut m = CMat::zeros(d, d);
        for (p, s) in self.probs.iter().zip(&self.states) {
            m += s.matrix().scale(*p);
        }
        DensityOperator::from_raw(m, self.shape().clone())
    }

    /// Flagged state with the flag labeled `flag` as the first subsystem.
    pub fn flagged(&self, flag: &str) -> Result<DensityOperator> {
        cq_state_labeled(&self.probs, self.probs.len(), &self.states, flag)
    }
}

/// `sum_x p(x) |x><x|_X (x) rho^x`, flag first.
pub fn cq_state(
    probs: &[f64],
    flags_dim: usize,
    conditional: &[DensityOperator],
) -> Result<DensityOperator> {
    cq_state_labeled(probs, flags_dim, conditional, "X")
}

pub fn cq_state_labeled(
    probs: &[f64],
    flags_dim: usize,
    conditional: &[DensityOperator],
    flag: &str,
) -> Result<DensityOperator> {
    let ens = Ensemble::new(probs.to_vec(), conditional.to_vec())?;
    if flags_dim < probs.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} terms do not fit a flag of dimension {flags_dim}",
            probs.len()
        )));
    }
    let shape = SubsystemShape::single(flags_dim, flag).join(ens.shape())?;
    let d = ens.states[0].dim();
    let mut m = CMat::zeros(flags_dim * d, flags_dim * d);
    for (x, (p, s)) in ens.probs.iter().zip(&ens.states).enumerate() {
        m.view_mut((x * d, x * d), (d, d)).copy_from(&s.matrix().scale(*p));
    }
    DensityOperator::new(m, shape)
}

/// Random mixture of product pure states, returned with its decomposition.
pub fn random_separable<R: Rng + ?Sized>(
    da: usize,
    db: usize,
    n_terms: usize,
    rng: &mut R,
) -> (DensityOperator, Ensemble) {
    let shape = SubsystemShape::bipartite(da, db);
    let probs = random_probs(n_terms, rng);
    let states: Vec<DensityOperator> = (0..n_terms)
        .map(|_| {
            let a = random_vector(da, rng);
            let b = random_vector(db, rng);
            DensityOperator::from_raw(projector(&linalg::kron_vec(&a, &b)), shape.clone())
        })
        .collect();
    let ens = Ensemble { probs, states };
    (ens.average(), ens)
}

/// Random cq state `sum_x p(x)|x><x| (x) rho^x` with flag labeled `A`.
pub fn random_cq<R: Rng + ?Sized>(dx: usize, db: usize, rng: &mut R) -> DensityOperator {
    let probs = random_probs(dx, rng);
    let cond: Vec<DensityOperator> = (0..dx)
        .map(|_| random_full_rank(&SubsystemShape::single(db, "B"), rng))
        .collect();
    cq_state_labeled(&probs, dx, &cond, "A").expect("well-formed cq state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_abs_diff_eq;

    fn qubit(v: [f64; 2]) -> DensityOperator {
        let k = CVec::from_vec(vec![c(v[0], 0.0), c(v[1], 0.0)]);
        DensityOperator::from_raw(projector(&k), SubsystemShape::single(2, "A"))
    }

    #[test]
    fn schmidt_of_bell_and_product() {
        let s = schmidt(&maximally_entangled(2)).unwrap();
        assert_eq!(s.coeffs.len(), 2);
        for v in &s.coeffs {
            assert_abs_diff_eq!(*v, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        }
        let prod = PureState::new(linalg::ket(4, 1), SubsystemShape::bipartite(2, 2)).unwrap();
        let s = schmidt(&prod).unwrap();
        assert_eq!(s.coeffs.len(), 1);
        assert_abs_diff_eq!(s.coeffs[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn schmidt_matches_reduced_spectrum() {
        let mut rng = stream_rng(1, 0);
        let psi = random_pure(&SubsystemShape::bipartite(3, 3), &mut rng);
        let s = schmidt(&psi).unwrap();
        assert!((s.reconstruct() - psi.amplitudes()).norm() < 1e-10);
        let mut ev = psi.density().marginal(&["A"]).unwrap().eigenvalues();
        ev.reverse();
        for (k, c) in s.coeffs.iter().enumerate() {
            assert_abs_diff_eq!(c * c, ev[k], epsilon = 1e-10);
        }
        assert!(s.coeffs.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn purification_recovers_state() {
        let mut rng = stream_rng(2, 0);
        let rho = random_density(&SubsystemShape::single(4, "A"), 3, &mut rng).unwrap();
        let psi = purify(&rho).unwrap();
        assert_eq!(psi.shape().dim_of("R").unwrap(), 3);
        let back = psi.density().marginal(&["A"]).unwrap();
        assert!((back.matrix() - rho.matrix()).norm() < 1e-10);

        let pure = qubit([0.6, 0.8]);
        assert_eq!(purify(&pure).unwrap().shape().dim_of("R").unwrap(), 1);
        let mixed = DensityOperator::maximally_mixed(SubsystemShape::single(2, "A"));
        let psi = purify(&mixed).unwrap();
        let s = schmidt(&psi).unwrap();
        assert_abs_diff_eq!(s.coeffs[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
    }

    #[test]
    fn fidelity_examples() {
        let zero = qubit([1.0, 0.0]);
        let one = qubit([0.0, 1.0]);
        let plus = qubit([std::f64::consts::FRAC_1_SQRT_2; 2]);
        assert_abs_diff_eq!(fidelity(&zero, &zero).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&zero, &plus).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityOperator::diagonal(&[0.7, 0.3], "A").unwrap();
        let b = DensityOperator::diagonal(&[0.5, 0.5], "A").unwrap();
        assert_abs_diff_eq!(trace_distance(&a, &b).unwrap(), 0.4, epsilon = 1e-14);
        assert_abs_diff_eq!(trace_distance(&a, &a).unwrap(), 0.0, epsilon = 1e-14);
        let t = trace_distance(&qubit([1.0, 0.0]), &qubit([0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(t, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn samplers_are_deterministic() {
        let s = SubsystemShape::single(2, "A");
        let a = random_density(&s, 2, &mut stream_rng(9, 0)).unwrap();
        let b = random_density(&s, 2, &mut stream_rng(9, 0)).unwrap();
        assert_eq!(a.matrix(), b.matrix());
        let u = random_unitary(3, &mut stream_rng(9, 1));
        let v = random_unitary(3, &mut stream_rng(9, 1));
        assert_eq!(u, v);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = stream_rng(4, 0);
        for d in 1..6 {
            let u = random_unitary(d, &mut rng);
            assert!((u.adjoint() * &u - linalg::identity(d)).norm() < 1e-12);
        }
    }

    #[test]
    fn mean_random_qubit_is_maximally_mixed() {
        let mut rng = stream_rng(5, 0);
        let s = SubsystemShape::single(2, "A");
        let n = 10_000;
        let mut acc = CMat::zeros(2, 2);
        for _ in 0..n {
            acc += random_density(&s, 2, &mut rng).unwrap().matrix();
        }
        let mean = acc.unscale(n as f64);
        let target = linalg::identity(2).scale(0.5);
        for (x, y) in mean.iter().zip(target.iter()) {
            assert!((x - y).norm() < 0.02);
        }
    }

    #[test]
    fn rank_one_sample_is_pure() {
        let rho = random_density(&SubsystemShape::single(3, "A"), 1, &mut stream_rng(6, 0)).unwrap();
        let ev = rho.eigenvalues();
        assert_abs_diff_eq!(ev[2], 1.0, epsilon = 1e-12);
        assert_eq!(rho.rank(), 1);
    }

    #[test]
    fn maximally_entangled_marginal() {
        let rho = maximally_entangled(3).density().marginal(&["A"]).unwrap();
        assert!((rho.matrix() - linalg::identity(3).unscale(3.0)).norm() < 1e-14);
    }

    #[test]
    fn cq_state_single_term_is_product() {
        let b = random_full_rank(&SubsystemShape::single(2, "B"), &mut stream_rng(7, 0));
        let x = cq_state(&[1.0], 2, &[b.clone()]).unwrap();
        assert_eq!(x.shape().labels()[0], "X");
        let flag = DensityOperator::diagonal(&[1.0, 0.0], "X").unwrap();
        let prod = flag.tensor(&b).unwrap();
        assert!((x.matrix() - prod.matrix()).norm() < 1e-14);
    }

    #[test]
    fn separable_samples_are_ppt() {
        let mut rng = stream_rng(8, 0);
        for _ in 0..20 {
            let (rho, ens) = random_separable(2, 2, 4, &mut rng);
            let pt = linalg::partial_transpose(rho.matrix(), rho.shape(), "B").unwrap();
            let e = Eigh::new(&pt).unwrap();
            assert!(e.values[0] >= -1e-12);
            assert!((ens.average().matrix() - rho.matrix()).norm() < 1e-14);
        }
    }

    #[test]
    fn json_round_trip() {
        let rho = random_full_rank(&SubsystemShape::bipartite(2, 2), &mut stream_rng(10, 0));
        let text = serde_json::to_string(&rho).unwrap();
        let back: DensityOperator = serde_json::from_str(&text).unwrap();
        assert_eq!(back.matrix(), rho.matrix());
        let ens = Ensemble::new(vec![0.5, 0.5], vec![rho.clone(), rho]).unwrap();
        let text = serde_json::to_string(&ens).unwrap();
        assert!(text.starts_with("{\"probs\":[0.5,0.5],\"states\":[{\"dims\""));
        let bad = r#"{"dims":[2],"labels":["A"],"matrix":[[[1.0,0.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]}"#;
        assert!(serde_json::from_str::<DensityOperator>(bad).is_err());
    }
}
