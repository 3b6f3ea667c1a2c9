//! Completely positive maps in Kraus form, dilations, POVMs and recovery maps.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, embed, ket, matrix_power, permute, projector, rows_to_matrix, matrix_to_rows, CMat,
    CVec, Eigh, SubsystemShape, DEFAULT_CUTOFF,
};
use crate::states::{random_isometry, DensityOperator};

pub const TP_TOL: f64 = 1e-10;

/// Completely positive map `X -> sum_k K_k X K_k^dagger`, not necessarily trace preserving.
#[derive(Clone, Debug)]
pub struct KrausMap {
    ops: Vec<CMat>,
    d_in: usize,
    d_out: usize,
}

impl KrausMap {
    pub fn new(ops: Vec<CMat>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidChannel("empty Kraus family".into()))?;
        let (d_out, d_in) = first.shape();
        if ops.iter().any(|k| k.shape() != (d_out, d_in)) {
            return Err(Error::InvalidChannel("Kraus operators differ in shape".into()));
        }
        Ok(Self { ops, d_in, d_out })
    }

    pub fn ops(&self) -> &[CMat] {
        &self.ops
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.d_out, self.d_out);
        for k in &self.ops {
            out += k * x * k.adjoint();
        }
        out
    }

    /// `sum_k K_k^dagger K_k`; the identity exactly when the map is trace preserving.
    pub fn kraus_sum(&self) -> CMat {
        let mut s = CMat::zeros(self.d_in, self.d_in);
        for k in &self.ops {
            s += k.adjoint() * k;
        }
        s
    }

    pub fn adjoint(&self) -> KrausMap {
        KrausMap {
            ops: self.ops.iter().map(|k| k.adjoint()).collect(),
            d_in: self.d_out,
            d_out: self.d_in,
        }
    }

    /// Normalized Choi operator `(1/d_in) sum_ij |i><j| (x) N(|i><j|)` on input (x) output.
    pub fn choi(&self) -> CMat {
        let (di, dout) = (self.d_in, self.d_out);
        let mut out = CMat::zeros(di * dout, di * dout);
        for i in 0..di {
            for j in 0..di {
                let mut e = CMat::zeros(di, di);
                e[(i, j)] = c(1.0, 0.0);
                let blk = self.apply(&e).unscale(di as f64);
                out.view_mut((i * dout, j * dout), (dout, dout)).copy_from(&blk);
            }
        }
        out
    }
}

/// Trace-preserving [`KrausMap`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ChannelDoc", into = "ChannelDoc")]
pub struct QuantumChannel {
    map: KrausMap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ChannelDoc {
    d_in: usize,
    d_out: usize,
    kraus: Vec<Vec<Vec<[f64; 2]>>>,
}

impl TryFrom<ChannelDoc> for QuantumChannel {
    type Error = Error;
    fn try_from(doc: ChannelDoc) -> Result<Self> {
        let ops = doc
            .kraus
            .iter()
            .map(|k| rows_to_matrix(k))
            .collect::<Result<Vec<_>>>()?;
        let ch = QuantumChannel::new(ops)?;
        if ch.d_in() != doc.d_in || ch.d_out() != doc.d_out {
            return Err(Error::Format("channel dimensions disagree with Kraus operators".into()));
        }
        Ok(ch)
    }
}

impl From<QuantumChannel> for ChannelDoc {
    fn from(ch: QuantumChannel) -> Self {
        ChannelDoc {
            d_in: ch.d_in(),
            d_out: ch.d_out(),
            kraus: ch.kraus().iter().map(matrix_to_rows).collect(),
        }
    }
}

impl QuantumChannel {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let map = KrausMap::new(kraus)?;
        let defect = (map.kraus_sum() - linalg::identity(map.d_in)).norm();
        if defect > TP_TOL {
            return Err(Error::InvalidChannel(format!(
                "not trace preserving (defect {defect:.3e})"
            )));
        }
        Ok(Self { map })
    }

    pub(crate) fn from_map_unchecked(map: KrausMap) -> Self {
        Self { map }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_map_unchecked(KrausMap::new(vec![linalg::identity(d)]).expect("nonempty"))
    }

    pub fn unitary(u: CMat) -> Result<Self> {
        Self::new(vec![u])
    }

    /// `X -> Tr(X) I/d`.
    pub fn fully_depolarizing(d: usize) -> Self {
        let s = 1.0 / (d as f64).sqrt();
        let mut ops = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut k = CMat::zeros(d, d);
                k[(i, j)] = c(s, 0.0);
                ops.push(k);
            }
        }
        Self::from_map_unchecked(KrausMap::new(ops).expect("nonempty"))
    }

    /// Dephasing in the computational basis.
    pub fn dephasing(d: usize) -> Self {
        let ops = (0..d).map(|i| projector(&ket(d, i))).collect();
        Self::from_map_unchecked(KrausMap::new(ops).expect("nonempty"))
    }

    /// Partial trace over `label` as a channel from `shape` to the remaining subsystems.
    pub fn partial_trace(shape: &SubsystemShape, label: &str) -> Result<Self> {
        let p = shape.position(label)?;
        let dt = shape.dims()[p];
        let dims = shape.dims();
        let n = shape.total();
        let dr = n / dt;
        let mut ops = vec![CMat::zeros(dr, n); dt];
        for f in 0..n {
            let mut rem = f;
            let mut digits = vec![0usize; dims.len()];
            for k in (0..dims.len()).rev() {
                digits[k] = rem % dims[k];
                rem /= dims[k];
            }
            let r = (0..dims.len())
                .filter(|&k| k != p)
                .fold(0, |acc, k| acc * dims[k] + digits[k]);
            ops[digits[p]][(r, f)] = c(1.0, 0.0);
        }
        Ok(Self::from_map_unchecked(KrausMap::new(ops)?))
    }

    pub fn kraus(&self) -> &[CMat] {
        self.map.ops()
    }

    pub fn map(&self) -> &KrausMap {
        &self.map
    }

    pub fn d_in(&self) -> usize {
        self.map.d_in
    }

    pub fn d_out(&self) -> usize {
        self.map.d_out
    }

    pub fn apply_matrix(&self, x: &CMat) -> CMat {
        self.map.apply(x)
    }

    /// Unital adjoint `X -> sum_k K_k^dagger X K_k`.
    pub fn adjoint(&self) -> KrausMap {
        self.map.adjoint()
    }

    pub fn adjoint_apply(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.d_in(), self.d_in());
        for k in self.kraus() {
            out += k.adjoint() * x * k;
        }
        out
    }

    pub fn choi(&self) -> CMat {
        self.map.choi()
    }

    /// `id (x) N` on the factor `target`, keeping its label.
    pub fn apply(&self, rho: &DensityOperator, target: &str) -> Result<DensityOperator> {
        self.apply_relabeled(rho, target, target)
    }

    pub fn apply_relabeled(
        &self,
        rho: &DensityOperator,
        target: &str,
        out_label: &str,
    ) -> Result<DensityOperator> {
        let (m, s) = apply_local(
            rho.matrix(),
            rho.shape(),
            target,
            self.kraus(),
            &[(out_label, self.d_out())],
        )?;
        Ok(DensityOperator::from_raw(m, s))
    }

    /// Stinespring isometry `V = sum_k K_k (x) |k>_E`, output ordered (out, E).
    pub fn stinespring(&self) -> Isometry {
        let r = self.kraus().len();
        let (dout, din) = (self.d_out(), self.d_in());
        let mut v = CMat::zeros(dout * r, din);
        for (k, op) in self.kraus().iter().enumerate() {
            for b in 0..dout {
                for a in 0..din {
                    v[(b * r + k, a)] = op[(b, a)];
                }
            }
        }
        Isometry { matrix: v }
    }

    pub fn compose(&self, after: &QuantumChannel) -> Result<QuantumChannel> {
        if after.d_in() != self.d_out() {
            return Err(Error::ShapeMismatch("channel composition dimensions".into()));
        }
        let mut ops = Vec::new();
        for b in after.kraus() {
            for a in self.kraus() {
                ops.push(b * a);
            }
        }
        Ok(Self::from_map_unchecked(KrausMap::new(ops)?))
    }
}

/// Applies `K (x) I` on the factor `target`, replacing it by the subsystems `new`.
pub fn apply_local(
    m: &CMat,
    shape: &SubsystemShape,
    target: &str,
    kraus: &[CMat],
    new: &[(&str, usize)],
) -> Result<(CMat, SubsystemShape)> {
    let p = shape.position(target)?;
    let dt = shape.dims()[p];
    let d_new: usize = new.iter().map(|(_, d)| d).product();
    if kraus.iter().any(|k| k.shape() != (d_new, dt)) {
        return Err(Error::ShapeMismatch(format!(
            "local operator must be {d_new}x{dt} on {target:?}"
        )));
    }
    let mut front: Vec<&str> = vec![target];
    front.extend(shape.labels().iter().filter(|l| *l != target).map(String::as_str));
    let (mt, st) = permute(m, shape, &front)?;
    let rest = st.total() / dt;
    let id = linalg::identity(rest);
    let mut out = CMat::zeros(d_new * rest, d_new * rest);
    for k in kraus {
        let big = k.kronecker(&id);
        out += &big * &mt * big.adjoint();
    }
    let replaced = st.replace(target, new)?;
    let order = shape.replace(target, new)?;
    let (back, s) = permute(&out, &replaced, order.labels())?;
    Ok((back, s))
}

/// Linear map `V` with `V^dagger V = I`.
#[derive(Clone, Debug)]
pub struct Isometry {
    matrix: CMat,
}

impl Isometry {
    pub fn new(matrix: CMat) -> Result<Self> {
        let defect = (matrix.adjoint() * &matrix - linalg::identity(matrix.ncols())).norm();
        if defect > TP_TOL {
            return Err(Error::InvalidChannel(format!("not an isometry (defect {defect:.3e})")));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_raw(matrix: CMat) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn d_in(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.matrix.nrows()
    }

    /// Channel obtained by tracing the trailing factor of dimension `d_env`.
    pub fn trace_environment(&self, d_env: usize) -> Result<QuantumChannel> {
        let dout = self.d_out();
        if dout % d_env != 0 {
            return Err(Error::ShapeMismatch("environment does not divide output".into()));
        }
        let dk = dout / d_env;
        let ops = (0..d_env)
            .map(|e| CMat::from_fn(dk, self.d_in(), |b, a| self.matrix[(b * d_env + e, a)]))
            .collect();
        Ok(QuantumChannel::from_map_unchecked(KrausMap::new(ops)?))
    }

    /// `V rho V^dagger` on factor `target`, which becomes the subsystems `outputs`.
    pub fn apply(
        &self,
        rho: &DensityOperator,
        target: &str,
        outputs: &[(&str, usize)],
    ) -> Result<DensityOperator> {
        let (m, s) = apply_local(
            rho.matrix(),
            rho.shape(),
            target,
            std::slice::from_ref(&self.matrix),
            outputs,
        )?;
        Ok(DensityOperator::from_raw(m, s))
    }
}

/// Haar-random channel from an isometry `d_in -> d_out (x) d_env`.
pub fn random_channel<R: Rng + ?Sized>(
    d_in: usize,
    d_out: usize,
    d_env: Option<usize>,
    rng: &mut R,
) -> Result<QuantumChannel> {
    let mut d_env = d_env.unwrap_or(d_in);
    // the isometry needs d_out * d_env >= d_in
    while d_out * d_env < d_in {
        d_env += 1;
    }
    let v = Isometry::from_raw(random_isometry(d_out * d_env, d_in, rng));
    v.trace_environment(d_env)
}

/// Finite family of PSD effects summing to the identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "PovmDoc", into = "PovmDoc")]
pub struct Povm {
    effects: Vec<CMat>,
    rank_one: bool,
    vectors: Option<Vec<CVec>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct PovmDoc {
    d: usize,
    effects: Vec<Vec<Vec<[f64; 2]>>>,
}

impl TryFrom<PovmDoc> for Povm {
    type Error = Error;
    fn try_from(doc: PovmDoc) -> Result<Self> {
        let effects = doc
            .effects
            .iter()
            .map(|k| rows_to_matrix(k))
            .collect::<Result<Vec<_>>>()?;
        let p = Povm::new(effects)?;
        if p.dim() != doc.d {
            return Err(Error::Format("POVM dimension disagrees with effects".into()));
        }
        Ok(p)
    }
}

impl From<Povm> for PovmDoc {
    fn from(p: Povm) -> Self {
        PovmDoc {
            d: p.dim(),
            effects: p.effects.iter().map(matrix_to_rows).collect(),
        }
    }
}

/// Rank-one refinement of a POVM: effect `k` of the fine POVM belongs to coarse outcome `parent[k]`.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub povm: Povm,
    pub parent: Vec<usize>,
}

impl Povm {
    pub fn new(effects: Vec<CMat>) -> Result<Self> {
        let d = effects
            .first()
            .ok_or_else(|| Error::InvalidPovm("no effects".into()))?
            .nrows();
        let mut sum = CMat::zeros(d, d);
        let mut rank_one = true;
        for e in &effects {
            if e.shape() != (d, d) {
                return Err(Error::InvalidPovm("effects differ in dimension".into()));
            }
            let eig = Eigh::new(e).map_err(|err| Error::InvalidPovm(err.to_string()))?;
            let worst = eig.values.first().copied().unwrap_or(0.0);
            if worst < -DEFAULT_CUTOFF.max(1e-12) {
                return Err(Error::InvalidPovm(format!("effect eigenvalue {worst:.3e}")));
            }
            rank_one &= eig.rank(DEFAULT_CUTOFF) == 1;
            sum += e;
        }
        let defect = (sum - linalg::identity(d)).norm();
        if defect > TP_TOL {
            return Err(Error::InvalidPovm(format!("effects sum to identity up to {defect:.3e}")));
        }
        Ok(Self {
            effects,
            rank_one,
            vectors: None,
        })
    }

    /// Rank-one POVM `{|v_x><v_x|}` from unnormalized vectors.
    pub fn from_vectors(vectors: Vec<CVec>) -> Result<Self> {
        let effects: Vec<CMat> = vectors.iter().map(projector).collect();
        let mut p = Self::new(effects)?;
        if !p.rank_one {
            return Err(Error::InvalidPovm("zero vector in a rank-one POVM".into()));
        }
        p.vectors = Some(vectors);
        Ok(p)
    }

    /// Rank-one POVM from the rows of an isometry `W` (`n x d`): `v_x = W^dagger |x>`.
    pub fn from_isometry_rows(w: &CMat) -> Result<Self> {
        let vectors = (0..w.nrows()).map(|x| w.row(x).adjoint()).collect();
        Self::from_vectors(vectors)
    }

    pub(crate) fn from_isometry_rows_unchecked(w: &CMat) -> Self {
        let vectors: Vec<CVec> = (0..w.nrows()).map(|x| w.row(x).adjoint()).collect();
        Self {
            effects: vectors.iter().map(projector).collect(),
            rank_one: true,
            vectors: Some(vectors),
        }
    }

    pub fn computational(d: usize) -> Self {
        Self::from_vectors((0..d).map(|i| ket(d, i)).collect()).expect("basis POVM")
    }

    /// Projective measurement in the columns of a unitary.
    pub fn basis(u: &CMat) -> Result<Self> {
        Self::from_vectors((0..u.ncols()).map(|j| u.column(j).into_owned()).collect())
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[CMat] {
        &self.effects
    }

    pub fn is_rank_one(&self) -> bool {
        self.rank_one
    }

    /// Vectors `v_x` with effect `|v_x><v_x|`; computed on demand for rank-one effects.
    pub fn vectors(&self) -> Result<Vec<CVec>> {
        if let Some(v) = &self.vectors {
            return Ok(v.clone());
        }
        if !self.rank_one {
            return Err(Error::InvalidPovm("POVM is not rank one".into()));
        }
        Ok(self.effects.iter().map(top_vector).collect())
    }

    /// Feasibility residual `||sum_x Lambda_x - I||_F`.
    pub fn residual(&self) -> f64 {
        let d = self.dim();
        let mut s = CMat::zeros(d, d);
        for e in &self.effects {
            s += e;
        }
        (s - linalg::identity(d)).norm()
    }

    pub fn probabilities(&self, rho: &CMat) -> Vec<f64> {
        self.effects.iter().map(|e| (e * rho).trace().re).collect()
    }

    /// `sigma -> sum_x Tr(Lambda_x sigma) |x><x|`.
    pub fn measurement_channel(&self) -> QuantumChannel {
        let n = self.len();
        let mut ops = Vec::new();
        for (x, e) in self.effects.iter().enumerate() {
            for v in effect_factors(e) {
                ops.push(ket(n, x) * v.adjoint());
            }
        }
        QuantumChannel::from_map_unchecked(KrausMap::new(ops).expect("nonempty"))
    }

    /// Splits every effect into its eigenvector terms `mu_xy |phi_xy><phi_xy|`.
    pub fn refine(&self) -> Refinement {
        let mut vectors = Vec::new();
        let mut parent = Vec::new();
        for (x, e) in self.effects.iter().enumerate() {
            for v in effect_factors(e) {
                vectors.push(v);
                parent.push(x);
            }
        }
        let effects = vectors.iter().map(projector).collect();
        Refinement {
            povm: Povm {
                effects,
                rank_one: true,
                vectors: Some(vectors),
            },
            parent,
        }
    }

    /// Merges outcomes: new outcome `g` is the sum of effects listed in `groups[g]`.
    pub fn coarse_grain(&self, groups: &[Vec<usize>]) -> Result<Povm> {
        let d = self.dim();
        let mut seen = vec![false; self.len()];
        let mut effects = Vec::new();
        for g in groups {
            let mut e = CMat::zeros(d, d);
            for &x in g {
                if x >= self.len() || seen[x] {
                    return Err(Error::InvalidPovm("grouping is not a partition".into()));
                }
                seen[x] = true;
                e += &self.effects[x];
            }
            effects.push(e);
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidPovm("grouping is not a partition".into()));
        }
        Povm::new(effects)
    }
}

/// `sqrt(mu_i) |phi_i>` for the nonzero eigenpairs of a PSD effect.
fn effect_factors(e: &CMat) -> Vec<CVec> {
    let eig = Eigh::new_unchecked(e);
    let t = DEFAULT_CUTOFF * eig.scale();
    let mut out = Vec::new();
    for (i, &mu) in eig.values.iter().enumerate().rev() {
        if mu > t {
            out.push(eig.vectors.column(i).scale(mu.sqrt()));
        }
    }
    out
}

fn top_vector(e: &CMat) -> CVec {
    effect_factors(e).into_iter().next().unwrap_or_else(|| CVec::zeros(e.nrows()))
}

/// Haar-random rank-one POVM with `n >= d` outcomes from the rows of an isometry `d -> n`.
pub fn random_rank_one_povm<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<Povm> {
    if n < d {
        return Err(Error::InvalidPovm(format!("{n} rank-one outcomes cannot span dimension {d}")));
    }
    Ok(Povm::from_isometry_rows_unchecked(&random_isometry(n, d, rng)))
}

/// Random POVM whose effect `x` has rank at most `ranks[x]`: `Lambda_x = W^dagger P_x W`.
pub fn random_povm_with_ranks<R: Rng + ?Sized>(d: usize, ranks: &[usize], rng: &mut R) -> Result<Povm> {
    let total: usize = ranks.iter().sum();
    if total < d || ranks.iter().any(|&r| r == 0) {
        return Err(Error::InvalidPovm(format!("ranks {ranks:?} cannot cover dimension {d}")));
    }
    let w = random_isometry(total, d, rng);
    let mut effects = Vec::with_capacity(ranks.len());
    let mut row = 0;
    for &r in ranks {
        let blk = w.rows(row, r).into_owned();
        effects.push(blk.adjoint() * blk);
        row += r;
    }
    Povm::new(effects)
}

/// Measurement dilation together with the labeled output space.
#[derive(Clone, Debug)]
pub struct Dilation {
    pub isometry: Isometry,
    pub outputs: Vec<(String, usize)>,
}

impl Dilation {
    pub fn output_refs(&self) -> Vec<(&str, usize)> {
        self.outputs.iter().map(|(l, d)| (l.as_str(), *d)).collect()
    }

    pub fn apply(&self, rho: &DensityOperator, target: &str) -> Result<DensityOperator> {
        self.isometry.apply(rho, target, &self.output_refs())
    }
}

/// Isometric extension of the measurement map of `povm`.
///
/// Rank-one POVMs give `U = sum_x |x>_X |x>_E <phi_x|` with outputs `(X, E)`.
/// Otherwise the effects are refined into `mu_xy |phi_xy><phi_xy|` and
/// `U = sum_xy sqrt(mu_xy) |phi_xy>_E <phi_xy| (x) |x>_{XE} |y>_Y |x>_X`
/// with outputs `(E, XE, Y, X)`.
pub fn measurement_dilation(povm: &Povm) -> Result<Dilation> {
    let d = povm.dim();
    let n = povm.len();
    if povm.is_rank_one() {
        let vs = povm.vectors()?;
        let mut u = CMat::zeros(n * n, d);
        for (x, v) in vs.iter().enumerate() {
            u.row_mut(x * n + x).copy_from(&v.adjoint());
        }
        return Ok(Dilation {
            isometry: Isometry::new(u)?,
            outputs: vec![("X".into(), n), ("E".into(), n)],
        });
    }
    let factors: Vec<Vec<CVec>> = povm.effects().iter().map(effect_factors).collect();
    let ny = factors.iter().map(Vec::len).max().unwrap_or(1).max(1);
    let dim_out = d * n * ny * n;
    let mut u = CMat::zeros(dim_out, d);
    for (x, fx) in factors.iter().enumerate() {
        for (y, v) in fx.iter().enumerate() {
            // sqrt(mu) |phi><phi| = |phi> <v| with v = sqrt(mu) phi
            let mu = v.norm_squared();
            let phi = v.unscale(mu.sqrt());
            let op = &phi * v.adjoint();
            let tail = (x * ny + y) * n + x;
            for e in 0..d {
                for a in 0..d {
                    u[(e * n * ny * n + tail, a)] += op[(e, a)];
                }
            }
        }
    }
    Ok(Dilation {
        isometry: Isometry::new(u)?,
        outputs: vec![
            ("E".into(), d),
            ("XE".into(), n),
            ("Y".into(), ny),
            ("X".into(), n),
        ],
    })
}

/// Handling of singular `sigma` or `N(sigma)` in the Petz map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SupportPolicy {
    /// Generalized inverses on the supports; the kernel of `N(sigma)` is sent to a fixed state.
    #[default]
    Restrict,
    /// Reject singular inputs with [`Error::SingularSigma`].
    Strict,
}

/// Petz recovery map `T(w) = sigma^{1/2} N^dagger(N(sigma)^{-1/2} w N(sigma)^{-1/2}) sigma^{1/2}`.
pub fn petz_map(sigma: &CMat, channel: &QuantumChannel) -> Result<QuantumChannel> {
    petz_map_with(sigma, channel, SupportPolicy::Restrict)
}

pub fn petz_map_with(
    sigma: &CMat,
    channel: &QuantumChannel,
    policy: SupportPolicy,
) -> Result<QuantumChannel> {
    if sigma.nrows() != channel.d_in() {
        return Err(Error::ShapeMismatch("sigma does not match the channel input".into()));
    }
    let n_sigma = channel.apply_matrix(sigma);
    let es = Eigh::psd(sigma, DEFAULT_CUTOFF)?;
    let en = Eigh::psd(&n_sigma, DEFAULT_CUTOFF)?;
    let singular = es.rank(DEFAULT_CUTOFF) < sigma.nrows() || en.rank(DEFAULT_CUTOFF) < n_sigma.nrows();
    if singular && policy == SupportPolicy::Strict {
        return Err(Error::SingularSigma);
    }
    let s_half = es.map_support(DEFAULT_CUTOFF, f64::sqrt);
    let n_inv_half = en.map_support(DEFAULT_CUTOFF, |v| 1.0 / v.sqrt());
    let mut ops: Vec<CMat> = channel
        .kraus()
        .iter()
        .map(|k| &s_half * k.adjoint() * &n_inv_half)
        .collect();
    // complete on ker N(sigma): |0><e_j|
    let t = DEFAULT_CUTOFF * en.scale();
    for (j, &v) in en.values.iter().enumerate() {
        if v <= t {
            ops.push(ket(channel.d_in(), 0) * en.vectors.column(j).adjoint());
        }
    }
    Ok(QuantumChannel::from_map_unchecked(KrausMap::new(ops)?))
}

/// Direction of the conditional Petz recovery on a tripartite state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionalDirection {
    /// `rho_AC^{1/2} rho_C^{-1/2} (.) rho_C^{-1/2} rho_AC^{1/2}` applied to `rho_BC`.
    CToAC,
    /// `rho_BC^{1/2} rho_C^{-1/2} (.) rho_C^{-1/2} rho_BC^{1/2}` applied to `rho_AC`.
    CToBC,
}

/// Recovered state on `(A, B, C)` from the Petz map of the conditioning system `C`.
pub fn petz_conditional_extend(
    rho: &DensityOperator,
    labels: [&str; 3],
    direction: ConditionalDirection,
) -> Result<DensityOperator> {
    let [a, b, cl] = labels;
    let ordered = rho.permute(&labels)?;
    let shape = ordered.shape().clone();
    let (grow, keep) = match direction {
        ConditionalDirection::CToAC => (a, b),
        ConditionalDirection::CToBC => (b, a),
    };
    let r_grow_c = ordered.marginal(&[grow, cl])?;
    let r_keep_c = ordered.marginal(&[keep, cl])?;
    let r_c = ordered.marginal(&[cl])?;
    let gc_half = embed(&matrix_power(r_grow_c.matrix(), 0.5)?, &shape, r_grow_c.shape().labels())?;
    let c_inv_half = embed(&matrix_power(r_c.matrix(), -0.5)?, &shape, &[cl])?;
    let kc = embed(r_keep_c.matrix(), &shape, r_keep_c.shape().labels())?;
    let m = &gc_half * &c_inv_half;
    let out = &m * kc * m.adjoint();
    Ok(DensityOperator::from_raw(out, shape))
}

/// Measure-and-prepare map `sigma -> sum_x <phi_x|sigma|phi_x> |t_x><t_x|` with
/// `t_x = rho^{1/2} phi_x / <phi_x|rho|phi_x>^{1/2}`.
pub fn measure_prepare_channel(rho_ref: &CMat, povm: &Povm) -> Result<QuantumChannel> {
    if !povm.is_rank_one() {
        return Err(Error::InvalidPovm("entanglement-breaking construction needs a rank-one POVM".into()));
    }
    if povm.dim() != rho_ref.nrows() {
        return Err(Error::ShapeMismatch("POVM and reference state dimensions differ".into()));
    }
    let half = matrix_power(rho_ref, 0.5)?;
    let mut ops = Vec::with_capacity(povm.len());
    for v in povm.vectors()? {
        let q = (v.adjoint() * rho_ref * &v)[(0, 0)].re;
        let t = if q > DEFAULT_CUTOFF * linalg::max_entry(rho_ref) {
            (&half * &v).unscale(q.sqrt())
        } else {
            v.unscale(v.norm())
        };
        ops.push(&t * v.adjoint());
    }
    Ok(QuantumChannel::from_map_unchecked(KrausMap::new(ops)?))
}

/// Entanglement-breaking channel on `A` built from `rho_A` and a rank-one POVM.
pub fn discord_eb_channel(rho_ab: &DensityOperator, povm: &Povm, a: &str) -> Result<QuantumChannel> {
    let rho_a = rho_ab.marginal(&[a])?;
    measure_prepare_channel(rho_a.matrix(), povm)
}

/// Entanglement-breaking channel on `B` built from `rho_B` and a rank-one POVM.
pub fn holevo_eb_channel(rho_b: &CMat, povm: &Povm) -> Result<QuantumChannel> {
    measure_prepare_channel(rho_b, povm)
}
