//! Hermitian matrix calculus and tensor-product bookkeeping.
//!
//! Every matrix function goes through [`Eigh`], one Hermitian eigendecomposition
//! with a relative spectral cutoff. Functions of positive semi-definite operators
//! follow the generalized-inverse convention: `f` is applied to eigenvalues above
//! the cutoff and the rest of the spectrum is mapped to zero, so `A^0` is the
//! support projector and `A^{-1}` is the Moore-Penrose inverse.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Eigenvalues in `(-tau * lambda_max, tau * lambda_max]` are treated as zero.
pub const DEFAULT_CUTOFF: f64 = 1e-10;

/// Relative rounding floor; positive powers keep every eigenvalue above it.
pub const NOISE_CUTOFF: f64 = 1e-14;

/// Relative hermiticity tolerance used when accepting an operator.
pub const HERMITICITY_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Real diagonal matrix.
pub fn diag(values: &[f64]) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v, 0.0)),
    ))
}

pub fn ket(d: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[i] = c(1.0, 0.0);
    v
}

pub fn projector(v: &CVec) -> CMat {
    v * v.adjoint()
}

pub fn trace(m: &CMat) -> f64 {
    m.trace().re
}

/// Largest entrywise modulus of `A - A^dagger`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn max_entry(m: &CMat) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

pub fn check_hermitian(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let defect = hermiticity_defect(m);
    if defect > HERMITICITY_TOL * (1.0 + max_entry(m)) {
        return Err(Error::NonHermitianInput { defect });
    }
    Ok(())
}

/// Hermitian eigendecomposition `A = Q diag(lambda) Q^dagger`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigh {
    /// Decomposes a Hermitian matrix; the input is symmetrized after the defect check.
    pub fn new(m: &CMat) -> Result<Self> {
        check_hermitian(m)?;
        Ok(Self::new_unchecked(m))
    }

    pub(crate) fn new_unchecked(m: &CMat) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Eigh {
                values: vec![],
                vectors: CMat::zeros(0, 0),
            };
        }
        let eig = SymmetricEigen::new(hermitian_part(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Eigh { values, vectors }
    }

    /// Decomposes a positive semi-definite matrix, rejecting eigenvalues below `-cutoff * lambda_max`.
    pub fn psd(m: &CMat, cutoff: f64) -> Result<Self> {
        let e = Self::new(m)?;
        e.check_psd(cutoff)?;
        Ok(e)
    }

    pub(crate) fn check_psd(&self, cutoff: f64) -> Result<()> {
        let scale = self.scale();
        if let Some(&min) = self.values.first() {
            if min < -cutoff * scale {
                return Err(Error::NegativeEigenvalue {
                    value: min,
                    cutoff: -cutoff * scale,
                });
            }
        }
        Ok(())
    }

    /// Largest eigenvalue modulus.
    pub fn scale(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    fn threshold(&self, cutoff: f64) -> f64 {
        // an all-zero operator has empty support
        let scale = self.scale();
        if scale <= f64::MIN_POSITIVE {
            f64::INFINITY
        } else {
            cutoff * scale
        }
    }

    pub fn rank(&self, cutoff: f64) -> usize {
        let t = self.threshold(cutoff);
        self.values.iter().filter(|&&v| v > t).count()
    }

    /// `sum_i f(lambda_i) |i><i|` over eigenvalues above the cutoff.
    pub fn map_support(&self, cutoff: f64, f: impl Fn(f64) -> f64) -> CMat {
        let t = self.threshold(cutoff);
        self.rebuild(|v| if v > t { f(v) } else { 0.0 })
    }

    /// `sum_i f(lambda_i) |i><i|` over the whole spectrum.
    pub fn map_all(&self, f: impl Fn(f64) -> f64) -> CMat {
        self.rebuild(f)
    }

    fn rebuild(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            for i in 0..n {
                scaled[(i, j)] *= fv;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn support_projector(&self, cutoff: f64) -> CMat {
        self.map_support(cutoff, |_| 1.0)
    }

    pub fn reconstruct(&self) -> CMat {
        self.map_all(|v| v)
    }

    /// Eigenvalues above the cutoff, ascending.
    pub fn positive_values(&self, cutoff: f64) -> Vec<f64> {
        let t = self.threshold(cutoff);
        self.values.iter().copied().filter(|&v| v > t).collect()
    }
}

/// `A^p` on the support of a PSD operator; `p = 0` gives the support projector.
///
/// Negative powers are generalized inverses at [`DEFAULT_CUTOFF`]; positive powers
/// drop only eigenvalues below [`NOISE_CUTOFF`].
pub fn matrix_power(a: &CMat, p: f64) -> Result<CMat> {
    if p > 0.0 {
        let e = Eigh::psd(a, DEFAULT_CUTOFF)?;
        return Ok(e.map_support(NOISE_CUTOFF, |v| v.powf(p)));
    }
    matrix_power_with_cutoff(a, p, DEFAULT_CUTOFF)
}

pub fn matrix_power_with_cutoff(a: &CMat, p: f64, cutoff: f64) -> Result<CMat> {
    let e = Eigh::psd(a, cutoff)?;
    Ok(if p == 0.0 {
        e.support_projector(cutoff)
    } else {
        e.map_support(cutoff, |v| v.powf(p))
    })
}

/// Logarithm on the positive spectrum of a PSD operator.
pub fn matrix_log(a: &CMat) -> Result<CMat> {
    let e = Eigh::psd(a, DEFAULT_CUTOFF)?;
    Ok(e.map_support(DEFAULT_CUTOFF, f64::ln))
}

/// Exponential of a Hermitian operator (whole spectrum).
pub fn matrix_exp(a: &CMat) -> Result<CMat> {
    let e = Eigh::new(a)?;
    Ok(e.map_all(f64::exp))
}

pub fn support_projector(a: &CMat) -> Result<CMat> {
    matrix_power(a, 0.0)
}

/// `Tr f(A)` over the positive spectrum of a PSD operator.
pub fn trace_function(a: &CMat, f: impl Fn(f64) -> f64) -> Result<f64> {
    let e = Eigh::psd(a, DEFAULT_CUTOFF)?;
    Ok(e.positive_values(DEFAULT_CUTOFF).into_iter().map(f).sum())
}

pub fn singular_values(x: &CMat) -> Vec<f64> {
    if x.is_empty() {
        return vec![];
    }
    x.singular_values().iter().copied().collect()
}

/// `(Tr |X|^alpha)^{1/alpha}` with `|X| = (X^dagger X)^{1/2}`.
///
/// For `alpha < 1` this is only a quasi-norm.
pub fn alpha_norm(x: &CMat, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
    }
    let s: f64 = singular_values(x).into_iter().map(|v| v.powf(alpha)).sum();
    Ok(s.powf(1.0 / alpha))
}

/// `Tr |X|^alpha`, skipping the outer root.
pub fn schatten_sum(x: &CMat, alpha: f64) -> f64 {
    singular_values(x).into_iter().map(|v| v.powf(alpha)).sum()
}

/// `Tr (X X^dagger)^p` from the singular values of `X`, which resolves small
/// eigenvalues of `X X^dagger` far below the rounding floor of forming it.
/// Singular values below `DEFAULT_CUTOFF * sigma_max` count as zero.
pub fn factor_trace_power(x: &CMat, p: f64) -> f64 {
    let s = singular_values(x);
    let max = s.iter().fold(0.0f64, |m, v| m.max(*v));
    s.into_iter()
        .filter(|&v| v > DEFAULT_CUTOFF * max)
        .map(|v| v.powf(2.0 * p))
        .sum()
}

/// `[Y_0 | Y_1 | ...]` with `Y_a` the rows of `y` for the value `a` of the leading
/// factor of dimension `d_lead`, so that `Z Z^dagger = Tr_lead(Y Y^dagger)`.
pub fn trace_out_leading_factor(y: &CMat, d_lead: usize) -> CMat {
    let rest = y.nrows() / d_lead;
    let cols = y.ncols();
    CMat::from_fn(rest, d_lead * cols, |i, j| y[((j / cols) * rest + i, j % cols)])
}

pub fn trace_norm(x: &CMat) -> f64 {
    singular_values(x).into_iter().sum()
}

pub fn frobenius(x: &CMat) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn tensor(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    a.kronecker(b)
}

pub fn tensor_all<'a>(ops: impl IntoIterator<Item = &'a CMat>) -> CMat {
    ops.into_iter()
        .fold(CMat::identity(1, 1), |acc, m| acc.kronecker(m))
}

/// Validated Hermitian operator.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    entries: CMat,
    hermiticity_defect: f64,
}

impl HermitianOperator {
    pub fn new(entries: CMat) -> Result<Self> {
        check_hermitian(&entries)?;
        let hermiticity_defect = hermiticity_defect(&entries);
        Ok(Self {
            entries: hermitian_part(&entries),
            hermiticity_defect,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn into_matrix(self) -> CMat {
        self.entries
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.hermiticity_defect
    }

    pub fn eigh(&self) -> Eigh {
        Eigh::new_unchecked(&self.entries)
    }

    pub fn power(&self, p: f64) -> Result<HermitianOperator> {
        Self::new(matrix_power(&self.entries, p)?)
    }

    pub fn log(&self) -> Result<HermitianOperator> {
        Self::new(matrix_log(&self.entries)?)
    }

    pub fn exp(&self) -> Result<HermitianOperator> {
        Self::new(matrix_exp(&self.entries)?)
    }

    pub fn support_projector(&self) -> Result<HermitianOperator> {
        Self::new(support_projector(&self.entries)?)
    }

    pub fn tensor(&self, other: &HermitianOperator) -> HermitianOperator {
        HermitianOperator {
            entries: tensor(&self.entries, &other.entries),
            hermiticity_defect: 0.0,
        }
    }
}

/// Ordered subsystem dimensions and labels of a composite Hilbert space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsystemShape {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SubsystemShape {
    pub fn new<S: AsRef<str>>(dims: &[usize], labels: &[S]) -> Result<Self> {
        if dims.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} dims but {} labels",
                dims.len(),
                labels.len()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::ShapeMismatch("subsystem dimensions must be positive".into()));
        }
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::ShapeMismatch(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            labels,
        })
    }

    pub fn single(dim: usize, label: &str) -> Self {
        Self::new(&[dim], &[label]).expect("valid single-system shape")
    }

    pub fn bipartite(da: usize, db: usize) -> Self {
        Self::new(&[da, db], &["A", "B"]).expect("valid bipartite shape")
    }

    pub fn tripartite(da: usize, db: usize, dc: usize, labels: [&str; 3]) -> Self {
        Self::new(&[da, db, dc], &labels).expect("valid tripartite shape")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::ShapeMismatch(format!("label {label:?} not in {:?}", self.labels)))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    /// Concatenation `self ⊗ other`; labels must stay distinct.
    pub fn join(&self, other: &SubsystemShape) -> Result<SubsystemShape> {
        let dims: Vec<usize> = self.dims.iter().chain(&other.dims).copied().collect();
        let labels: Vec<&String> = self.labels.iter().chain(&other.labels).collect();
        SubsystemShape::new(&dims, &labels)
    }

    /// Sub-shape holding `labels` in this shape's order.
    pub fn restrict<S: AsRef<str>>(&self, labels: &[S]) -> Result<SubsystemShape> {
        let mut pos = self.positions(labels)?;
        pos.sort_unstable();
        Ok(self.pick(&pos))
    }

    /// Sub-shape holding `labels` in the given order.
    pub fn reorder<S: AsRef<str>>(&self, labels: &[S]) -> Result<SubsystemShape> {
        let pos = self.positions(labels)?;
        Ok(self.pick(&pos))
    }

    fn pick(&self, pos: &[usize]) -> SubsystemShape {
        SubsystemShape {
            dims: pos.iter().map(|&p| self.dims[p]).collect(),
            labels: pos.iter().map(|&p| self.labels[p].clone()).collect(),
        }
    }

    pub fn positions<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l.as_ref())?;
            if out.contains(&p) {
                return Err(Error::ShapeMismatch(format!("label {:?} repeated", l.as_ref())));
            }
            out.push(p);
        }
        Ok(out)
    }

    /// Replaces one label by a run of new subsystems, keeping the other positions.
    pub fn replace(&self, label: &str, new: &[(&str, usize)]) -> Result<SubsystemShape> {
        let p = self.position(label)?;
        let mut dims = Vec::new();
        let mut labels: Vec<String> = Vec::new();
        for i in 0..self.len() {
            if i == p {
                for (l, d) in new {
                    dims.push(*d);
                    labels.push(l.to_string());
                }
            } else {
                dims.push(self.dims[i]);
                labels.push(self.labels[i].clone());
            }
        }
        SubsystemShape::new(&dims, &labels)
    }

    pub fn rename(&self, from: &str, to: &str) -> Result<SubsystemShape> {
        let p = self.position(from)?;
        let mut labels = self.labels.clone();
        labels[p] = to.to_string();
        SubsystemShape::new(&self.dims, &labels)
    }

    pub(crate) fn check_matrix(&self, m: &CMat) -> Result<()> {
        let n = self.total();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "matrix is {}x{} but shape {:?} has dimension {n}",
                m.nrows(),
                m.ncols(),
                self.dims
            )));
        }
        Ok(())
    }
}

/// For every full index: its index inside the `group` subsystems (in `group` order)
/// and its index inside the remaining subsystems (in shape order).
fn split_indices(dims: &[usize], group: &[usize]) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let n: usize = dims.iter().product();
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !group.contains(i)).collect();
    let dg: usize = group.iter().map(|&i| dims[i]).product();
    let dr: usize = rest.iter().map(|&i| dims[i]).product();
    let mut g_idx = vec![0; n];
    let mut r_idx = vec![0; n];
    let mut digits = vec![0usize; dims.len()];
    for f in 0..n {
        let mut rem = f;
        for k in (0..dims.len()).rev() {
            digits[k] = rem % dims[k];
            rem /= dims[k];
        }
        g_idx[f] = group.iter().fold(0, |acc, &k| acc * dims[k] + digits[k]);
        r_idx[f] = rest.iter().fold(0, |acc, &k| acc * dims[k] + digits[k]);
    }
    (g_idx, r_idx, dg, dr)
}

/// Full indices bucketed by their complement index, each entry `(group index, full index)`.
fn buckets(dims: &[usize], group: &[usize]) -> (Vec<Vec<(usize, usize)>>, usize) {
    let (g_idx, r_idx, dg, dr) = split_indices(dims, group);
    let mut out = vec![Vec::with_capacity(dg); dr];
    for f in 0..g_idx.len() {
        out[r_idx[f]].push((g_idx[f], f));
    }
    (out, dg)
}

/// Partial trace over every label not in `keep`; remaining labels keep their order.
pub fn partial_trace<S: AsRef<str>>(
    a: &CMat,
    shape: &SubsystemShape,
    keep: &[S],
) -> Result<(CMat, SubsystemShape)> {
    shape.check_matrix(a)?;
    let mut pos = shape.positions(keep)?;
    pos.sort_unstable();
    let kept = shape.pick(&pos);
    let (bk, dg) = buckets(shape.dims(), &pos);
    let mut out = CMat::zeros(dg, dg);
    for bucket in &bk {
        for &(gi, fi) in bucket {
            for &(gj, fj) in bucket {
                out[(gi, gj)] += a[(fi, fj)];
            }
        }
    }
    Ok((out, kept))
}

/// Embeds `op` acting on `targets` (in the given order) into `shape`, padding with identity.
pub fn embed<S: AsRef<str>>(op: &CMat, shape: &SubsystemShape, targets: &[S]) -> Result<CMat> {
    let pos = shape.positions(targets)?;
    let dg: usize = pos.iter().map(|&p| shape.dims()[p]).product();
    if op.nrows() != dg || op.ncols() != dg {
        return Err(Error::ShapeMismatch(format!(
            "operator is {}x{} but targets have dimension {dg}",
            op.nrows(),
            op.ncols()
        )));
    }
    let n = shape.total();
    let (bk, _) = buckets(shape.dims(), &pos);
    let mut out = CMat::zeros(n, n);
    for bucket in &bk {
        for &(gi, fi) in bucket {
            for &(gj, fj) in bucket {
                out[(fi, fj)] = op[(gi, gj)];
            }
        }
    }
    Ok(out)
}

/// Index permutation taking `shape` order to `order`: `result[new] = old`.
fn permutation(shape: &SubsystemShape, order: &[usize]) -> Vec<usize> {
    let dims = shape.dims();
    let (g_idx, _, _, _) = split_indices(dims, order);
    let mut perm = vec![0; g_idx.len()];
    for (old, &new) in g_idx.iter().enumerate() {
        perm[new] = old;
    }
    perm
}

/// Reorders the tensor factors of `a` so that `order` lists all labels of `shape`.
pub fn permute<S: AsRef<str>>(
    a: &CMat,
    shape: &SubsystemShape,
    order: &[S],
) -> Result<(CMat, SubsystemShape)> {
    shape.check_matrix(a)?;
    if order.len() != shape.len() {
        return Err(Error::ShapeMismatch("permutation must list every label".into()));
    }
    let pos = shape.positions(order)?;
    let perm = permutation(shape, &pos);
    let n = perm.len();
    let out = CMat::from_fn(n, n, |i, j| a[(perm[i], perm[j])]);
    Ok((out, shape.pick(&pos)))
}

/// Same reordering applied to a state vector.
pub fn permute_vector<S: AsRef<str>>(
    v: &CVec,
    shape: &SubsystemShape,
    order: &[S],
) -> Result<(CVec, SubsystemShape)> {
    if v.len() != shape.total() || order.len() != shape.len() {
        return Err(Error::ShapeMismatch("vector does not match shape".into()));
    }
    let pos = shape.positions(order)?;
    let perm = permutation(shape, &pos);
    let out = CVec::from_fn(perm.len(), |i, _| v[perm[i]]);
    Ok((out, shape.pick(&pos)))
}

/// Partial transpose on one labeled factor.
pub fn partial_transpose(a: &CMat, shape: &SubsystemShape, label: &str) -> Result<CMat> {
    shape.check_matrix(a)?;
    let p = shape.position(label)?;
    let (g_idx, r_idx, dg, dr) = split_indices(shape.dims(), &[p]);
    let mut lookup = vec![0usize; dg * dr];
    for f in 0..g_idx.len() {
        lookup[g_idx[f] * dr + r_idx[f]] = f;
    }
    let n = a.nrows();
    Ok(CMat::from_fn(n, n, |i, j| {
        let (gi, ri, gj, rj) = (g_idx[i], r_idx[i], g_idx[j], r_idx[j]);
        a[(lookup[gj * dr + ri], lookup[gi * dr + rj])]
    }))
}

/// Row-major JSON form of a labeled matrix: `{"dims", "labels", "matrix": [[[re, im], ...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MatrixDoc {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl MatrixDoc {
    pub fn from_parts(m: &CMat, shape: &SubsystemShape) -> Self {
        MatrixDoc {
            dims: shape.dims().to_vec(),
            labels: shape.labels().to_vec(),
            matrix: matrix_to_rows(m),
        }
    }

    pub fn to_parts(&self) -> Result<(CMat, SubsystemShape)> {
        let shape = SubsystemShape::new(&self.dims, &self.labels)?;
        let m = rows_to_matrix(&self.matrix)?;
        shape.check_matrix(&m)?;
        Ok((m, shape))
    }
}

pub fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Format("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_psd(d: usize, rng: &mut ChaCha20Rng) -> CMat {
        let g = crate::states::ginibre(d, d, rng);
        &g * g.adjoint()
    }

    #[test]
    fn generalized_inverse_of_singular_diagonal() {
        let a = diag(&[4.0, 0.0]);
        let inv = matrix_power(&a, -1.0).unwrap();
        assert_abs_diff_eq!(inv[(0, 0)].re, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(inv[(1, 1)].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn square_root_of_diagonal() {
        let r = matrix_power(&diag(&[9.0, 1.0]), 0.5).unwrap();
        assert!((r - diag(&[3.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn cube_root_cubes_back() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = random_psd(4, &mut rng);
            let r = matrix_power(&a, 1.0 / 3.0).unwrap();
            let back = &r * &r * &r;
            assert!(frobenius(&(back - &a)) <= 1e-9 * frobenius(&a));
        }
    }

    #[test]
    fn zero_power_is_support_projector() {
        let p = matrix_power(&diag(&[0.3, 0.0, 2.0]), 0.0).unwrap();
        assert!((p - diag(&[1.0, 0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn log_of_identity_and_diagonal() {
        assert!(matrix_log(&identity(3)).unwrap().norm() < 1e-15);
        let l = matrix_log(&diag(&[std::f64::consts::E, 1.0])).unwrap();
        assert!((l - diag(&[1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a = random_psd(3, &mut rng) + identity(3).scale(0.05);
            let back = matrix_exp(&matrix_log(&a).unwrap()).unwrap();
            assert!(frobenius(&(back - &a)) <= 1e-9 * frobenius(&a));
        }
    }

    #[test]
    fn errors_on_bad_input() {
        let mut m = diag(&[1.0, 1.0]);
        m[(0, 1)] = c(0.5, 0.0);
        assert!(matches!(matrix_power(&m, 0.5), Err(Error::NonHermitianInput { .. })));
        assert!(matches!(
            matrix_power(&diag(&[1.0, -0.5]), 0.5),
            Err(Error::NegativeEigenvalue { .. })
        ));
        // tiny negative noise is clamped
        assert!(matrix_power(&diag(&[1.0, -1e-14]), 0.5).is_ok());
    }

    #[test]
    fn factor_forms_match_direct_forms() {
        let mut rng = crate::rng::stream_rng(4, 0);
        let y = crate::states::ginibre(6, 4, &mut rng);
        let k = &y * y.adjoint();
        let direct: f64 = Eigh::new(&hermitian_part(&k)).unwrap().positive_values(DEFAULT_CUTOFF).iter().map(|v| v.powf(0.7)).sum();
        assert_abs_diff_eq!(factor_trace_power(&y, 0.7), direct, epsilon = 1e-12);
        let shape = SubsystemShape::bipartite(2, 3);
        let (t, _) = partial_trace(&k, &shape, &["B"]).unwrap();
        let z = trace_out_leading_factor(&y, 2);
        assert!((&z * z.adjoint() - t).norm() < 1e-12);
    }

    #[test]
    fn alpha_norm_examples() {
        assert_abs_diff_eq!(alpha_norm(&identity(3), 2.0).unwrap(), 3f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(alpha_norm(&diag(&[3.0, 4.0]), 1.0).unwrap(), 7.0, epsilon = 1e-13);
    }

    #[test]
    fn alpha_norm_half_matches_singular_values() {
        // singular values of a 2x2 from the eigenvalues of X^dagger X
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let x = crate::states::ginibre(2, 2, &mut rng);
        let xtx = x.adjoint() * &x;
        let (p, q) = (xtx[(0, 0)].re, xtx[(1, 1)].re);
        let det = (xtx[(0, 0)] * xtx[(1, 1)] - xtx[(0, 1)] * xtx[(1, 0)]).re;
        let disc = ((p + q) * (p + q) / 4.0 - det).sqrt();
        let s1 = ((p + q) / 2.0 + disc).sqrt();
        let s2 = ((p + q) / 2.0 - disc).max(0.0).sqrt();
        let expected = (s1.sqrt() + s2.sqrt()).powi(2);
        assert_abs_diff_eq!(alpha_norm(&x, 0.5).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn tensor_of_diagonals() {
        let t = tensor(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0]));
        assert!((t - diag(&[0.0, 1.0, 0.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_of_bell_pair() {
        let s = 0.5f64.sqrt();
        let v = CVec::from_vec(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]);
        let (ra, sh) = partial_trace(&projector(&v), &SubsystemShape::bipartite(2, 2), &["A"]).unwrap();
        assert_eq!(sh.labels(), &["A".to_string()]);
        assert!((ra - identity(2).scale(0.5)).norm() < 1e-15);
    }

    #[test]
    fn partial_traces_compose() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let shape = SubsystemShape::tripartite(2, 3, 2, ["A", "B", "C"]);
        let rho = random_psd(12, &mut rng);
        let (bc, sbc) = partial_trace(&rho, &shape, &["B", "C"]).unwrap();
        let (c1, _) = partial_trace(&bc, &sbc, &["C"]).unwrap();
        let (c2, _) = partial_trace(&rho, &shape, &["C"]).unwrap();
        assert!((c1 - c2).norm() < 1e-12);
        assert_abs_diff_eq!(trace(&bc), trace(&rho), epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_ignores_keep_order() {
        let mut rng = ChaCha20Rng::seed_from_u64(19);
        let shape = SubsystemShape::tripartite(2, 3, 2, ["A", "B", "C"]);
        let rho = random_psd(12, &mut rng);
        let (x, sx) = partial_trace(&rho, &shape, &["C", "A"]).unwrap();
        let (y, _) = partial_trace(&rho, &shape, &["A", "C"]).unwrap();
        assert_eq!(sx.labels(), &["A".to_string(), "C".to_string()]);
        assert!((x - y).norm() < 1e-15);
    }

    #[test]
    fn embed_matches_kronecker() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let shape = SubsystemShape::tripartite(2, 3, 2, ["A", "B", "C"]);
        let op = random_psd(4, &mut rng);
        // op on (A, C); compare with the permuted kron
        let full = embed(&op, &shape, &["A", "C"]).unwrap();
        let ac_b = tensor(&op, &identity(3));
        let ac_shape = SubsystemShape::tripartite(2, 2, 3, ["A", "C", "B"]);
        let (back, _) = permute(&ac_b, &ac_shape, &["A", "B", "C"]).unwrap();
        assert!((full - back).norm() < 1e-14);
        let first = embed(&op, &SubsystemShape::new(&[4, 3], &["AC", "B"]).unwrap(), &["AC"]).unwrap();
        assert!((first - tensor(&op, &identity(3))).norm() < 1e-15);
    }

    #[test]
    fn permutation_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(29);
        let shape = SubsystemShape::tripartite(2, 3, 4, ["A", "B", "C"]);
        let rho = random_psd(24, &mut rng);
        let (p, sp) = permute(&rho, &shape, &["C", "A", "B"]).unwrap();
        let (back, sb) = permute(&p, &sp, &["A", "B", "C"]).unwrap();
        assert_eq!(sb, shape);
        assert!((back - rho).norm() < 1e-15);
    }

    #[test]
    fn shape_validation() {
        assert!(SubsystemShape::new(&[2, 2], &["A", "A"]).is_err());
        assert!(SubsystemShape::new(&[2], &["A", "B"]).is_err());
        let shape = SubsystemShape::bipartite(2, 2);
        assert!(partial_trace(&identity(3), &shape, &["A"]).is_err());
        assert!(partial_trace(&identity(4), &shape, &["Z"]).is_err());
    }

    #[test]
    fn matrix_doc_round_trip() {
        let shape = SubsystemShape::bipartite(1, 2);
        let mut m = diag(&[0.5, 0.5]);
        m[(0, 1)] = c(0.1, -0.2);
        m[(1, 0)] = c(0.1, 0.2);
        let doc = MatrixDoc::from_parts(&m, &shape);
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.starts_with("{\"dims\":[1,2],\"labels\":[\"A\",\"B\"],\"matrix\":[[[0.5,0.0]"));
        let back: MatrixDoc = serde_json::from_str(&text).unwrap();
        let (m2, s2) = back.to_parts().unwrap();
        assert_eq!(s2, shape);
        assert_eq!(m2, m);
    }
}
