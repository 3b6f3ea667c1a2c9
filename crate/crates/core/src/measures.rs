//! Optimization-defined correlation measures: Rényi squashed entanglement,
//! Rényi entanglement of formation and two Rényi discords.
//!
//! Every optimizer works on unconstrained complex matrices that are mapped onto
//! the Stiefel manifold by the polar retraction `M -> U V^dagger` (from the SVD
//! `M = U S V^dagger`). Reported values are minima over the explored set and
//! therefore upper bounds on the true infima.

use serde::Serialize;

use crate::channels::{measurement_dilation, Povm};
use crate::entropy::{renyi_cmi, RenyiOrder};
use crate::error::{Error, Result};
use crate::linalg::{
    self, matrix_power, partial_trace, trace_norm, CMat, CVec, Eigh, SubsystemShape, C64,
    DEFAULT_CUTOFF,
};
use crate::optim::{multistart, MultiStart, OptimizerConfig};
use crate::states::{ginibre, DensityOperator, Ensemble, PureState};

/// Known-good starting point handed to an optimizer in addition to its random restarts.
#[derive(Clone, Debug)]
pub enum WarmStart {
    /// Decomposition `rho = sum_x p_x rho_x`; seeds flag extensions and HJW ensembles.
    Decomposition(Ensemble),
    /// Extension `omega_ABE` of `rho_AB`, with `E` the last subsystem.
    Extension(DensityOperator),
    Povm(Povm),
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Argmin {
    Povm {
        povm: Povm,
    },
    Extension {
        state: DensityOperator,
        /// `(d_E, d_E'')` of the channel's Stinespring isometry `R -> E (x) E''`.
        env_dims: [usize; 2],
    },
    Ensemble {
        ensemble: Ensemble,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureResult {
    pub measure: String,
    pub alpha: f64,
    pub value: f64,
    pub argmin: Argmin,
    pub converged: bool,
    pub evaluations: usize,
    /// Feasibility residual of the argmin.
    pub residual: f64,
    pub seed: u64,
    /// The value is a minimum over a restricted family.
    pub upper_bound: bool,
    pub best_restart: usize,
    /// Best value per iteration of the winning restart.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl MeasureResult {
    fn from_run(measure: &str, alpha: f64, value: f64, argmin: Argmin, residual: f64, run: &MultiStart, cfg: &OptimizerConfig) -> Self {
        Self {
            measure: measure.into(),
            alpha,
            value,
            argmin,
            converged: run.best.converged,
            evaluations: run.evaluations,
            residual,
            seed: cfg.seed,
            upper_bound: true,
            best_restart: run.best_index,
            trace: run.best.trace.clone(),
        }
    }
}

/// Row-major complex matrix from interleaved `(re, im)` parameters.
pub fn complex_from_params(p: &[f64], rows: usize, cols: usize) -> CMat {
    assert_eq!(p.len(), 2 * rows * cols, "parameter count");
    CMat::from_fn(rows, cols, |i, j| {
        let k = 2 * (i * cols + j);
        C64::new(p[k], p[k + 1])
    })
}

pub fn params_from_complex(m: &CMat) -> Vec<f64> {
    let mut p = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            p.push(m[(i, j)].re);
            p.push(m[(i, j)].im);
        }
    }
    p
}

/// Polar factor `U V^dagger` of `m` (`rows >= cols`), the closest isometry in Frobenius norm.
pub fn polar(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left vectors");
    let vt = svd.v_t.expect("right vectors");
    u * vt
}

fn stiefel_point(p: &[f64], rows: usize, cols: usize) -> CMat {
    polar(&complex_from_params(p, rows, cols))
}

fn stiefel_retraction(rows: usize, cols: usize) -> impl Fn(&mut [f64]) + Sync {
    move |p: &mut [f64]| {
        let w = stiefel_point(p, rows, cols);
        p.copy_from_slice(&params_from_complex(&w));
    }
}

fn random_stiefel(rows: usize, cols: usize, rng: &mut rand_chacha::ChaCha20Rng) -> Vec<f64> {
    params_from_complex(&polar(&ginibre(rows, cols, rng)))
}

fn isometry_defect(w: &CMat) -> f64 {
    (w.adjoint() * w - linalg::identity(w.ncols())).norm()
}

fn bipartite_dims(rho: &DensityOperator) -> Result<(usize, usize)> {
    let d = rho.shape().dims();
    if d.len() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "expected a bipartite state, got {} subsystems",
            d.len()
        )));
    }
    Ok((d[0], d[1]))
}

fn check_alpha(alpha: f64) -> Result<RenyiOrder> {
    let o = RenyiOrder::new(alpha)?;
    if o.is_von_neumann() {
        return Err(Error::InvalidArgument("these measures are defined for alpha != 1".into()));
    }
    Ok(o)
}

/// Spectral data of `rho` on its support: `psi = [sqrt(l_i) e_i]` is the
/// purification matrix `d x r` and `vecs = [e_i]`.
struct Support {
    psi: CMat,
    vecs: CMat,
    lambdas: Vec<f64>,
}

impl Support {
    fn new(rho: &CMat) -> Result<Self> {
        let e = Eigh::psd(rho, DEFAULT_CUTOFF)?;
        let t = DEFAULT_CUTOFF * e.scale();
        let idx: Vec<usize> = (0..e.values.len()).filter(|&i| e.values[i] > t).collect();
        let d = rho.nrows();
        let r = idx.len().max(1);
        let mut psi = CMat::zeros(d, r);
        let mut vecs = CMat::zeros(d, r);
        let mut lambdas = Vec::with_capacity(r);
        for (k, &i) in idx.iter().enumerate() {
            vecs.set_column(k, &e.vectors.column(i));
            psi.set_column(k, &e.vectors.column(i).scale(e.values[i].sqrt()));
            lambdas.push(e.values[i]);
        }
        Ok(Self { psi, vecs, lambdas })
    }

    fn rank(&self) -> usize {
        self.lambdas.len()
    }

    /// Row `(<e_i|v>/sqrt(l_i))_i`, the steering coefficients of `v` in `supp(rho)`.
    fn steer(&self, v: &CVec) -> Vec<C64> {
        (0..self.rank())
            .map(|i| self.vecs.column(i).dotc(v) / self.lambdas[i].sqrt())
            .collect()
    }
}

/// `(sqrt(mu) u)` for the positive eigenpairs of `m`.
fn weighted_eigenvectors(m: &CMat) -> Vec<CVec> {
    let e = Eigh::new_unchecked(m);
    let t = DEFAULT_CUTOFF * e.scale().max(1e-300);
    (0..e.values.len())
        .filter(|&i| e.values[i] > t)
        .map(|i| e.vectors.column(i).scale(e.values[i].sqrt()))
        .collect()
}

// ---------------------------------------------------------------------------
// squashed entanglement

/// `omega_ABE = Tr_E'' [(I (x) V) psi psi^dagger (I (x) V)^dagger]` for `V: R -> E (x) E''`.
fn extension_matrix(psi: &CMat, v: &CMat, de: usize, de2: usize) -> CMat {
    let phi = psi * v.transpose();
    let dab = psi.nrows();
    let x = CMat::from_fn(dab * de, de2, |row, f| {
        let (ab, e) = (row / de, row % de);
        phi[(ab, e * de2 + f)]
    });
    &x * x.adjoint()
}

/// Isometry entries `(e, f, v)`: `V |i> = sum (<e_i|v>/sqrt(l_i)) |e>|f>`.
fn isometry_from_vectors(sup: &Support, terms: &[(usize, usize, CVec)], de: usize, de2: usize) -> Result<CMat> {
    let mut v = CMat::zeros(de * de2, sup.rank());
    for (e, f, vec) in terms {
        for (i, c) in sup.steer(vec).into_iter().enumerate() {
            v[(e * de2 + f, i)] += c;
        }
    }
    let defect = isometry_defect(&v);
    if defect > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "warm start is not a decomposition of the state (isometry defect {defect:.2e})"
        )));
    }
    Ok(polar(&v))
}

fn extension_terms(warm: &WarmStart, dab: usize) -> Result<Vec<(usize, usize, CVec)>> {
    match warm {
        WarmStart::Decomposition(ens) => {
            let mut terms = Vec::new();
            // E'' indices must differ across flags, or the flags acquire coherences
            for (x, (p, s)) in ens.probs().iter().zip(ens.states()).enumerate() {
                for v in weighted_eigenvectors(&s.matrix().scale(*p)) {
                    let f = terms.len();
                    terms.push((x, f, v));
                }
            }
            Ok(terms)
        }
        WarmStart::Extension(omega) => {
            let d = omega.dim();
            if d % dab != 0 || omega.shape().len() < 2 {
                return Err(Error::ShapeMismatch("extension does not contain the AB system".into()));
            }
            let de = d / dab;
            let mut terms = Vec::new();
            for (j, w) in weighted_eigenvectors(omega.matrix()).into_iter().enumerate() {
                for e in 0..de {
                    let v = CVec::from_fn(dab, |ab, _| w[ab * de + e]);
                    terms.push((e, j, v));
                }
            }
            Ok(terms)
        }
        WarmStart::Povm(_) => Err(Error::InvalidArgument(
            "squashed entanglement takes decomposition or extension warm starts".into(),
        )),
    }
}

/// Rényi squashed entanglement `(1/2) inf_omega I_alpha(A;B|E)_omega` over extensions
/// `omega_ABE = (id (x) Lambda_{R->E})(psi_ABR)` with `Lambda` of environment dimension
/// `ext_dim` (default `d_A d_B`).
pub fn squashed_entanglement(
    rho: &DensityOperator,
    alpha: f64,
    ext_dim: Option<usize>,
    cfg: &OptimizerConfig,
    warm: &[WarmStart],
) -> Result<MeasureResult> {
    check_alpha(alpha)?;
    let (da, db) = bipartite_dims(rho)?;
    let dab = da * db;
    let ext_dim = ext_dim.unwrap_or(dab);
    if ext_dim == 0 {
        return Err(Error::InvalidArgument("ext_dim must be at least 1".into()));
    }
    let sup = Support::new(rho.matrix())?;
    let r = sup.rank();

    let warm_terms = warm
        .iter()
        .map(|w| extension_terms(w, dab))
        .collect::<Result<Vec<_>>>()?;
    let need_e = warm_terms.iter().flatten().map(|t| t.0 + 1).max().unwrap_or(1);
    let need_f = warm_terms.iter().flatten().map(|t| t.1 + 1).max().unwrap_or(1);
    let de = ext_dim.max(need_e);
    let de2 = de.max(need_f).max(r.div_ceil(de));
    let rows = de * de2;

    let shape = SubsystemShape::new(&[da, db, de], &["A", "B", "E"])?;
    let extension = |p: &[f64]| extension_matrix(&sup.psi, &stiefel_point(p, rows, r), de, de2);
    let objective = |p: &[f64]| -> f64 {
        let w = DensityOperator::from_raw(extension(p), shape.clone());
        renyi_cmi(&w, &["A"], &["B"], &["E"], alpha).map_or(f64::INFINITY, |v| 0.5 * v)
    };
    let x0s = warm_terms
        .iter()
        .map(|t| isometry_from_vectors(&sup, t, de, de2).map(|v| params_from_complex(&v)))
        .collect::<Result<Vec<_>>>()?;
    let retract = stiefel_retraction(rows, r);
    let run = multistart(&objective, &retract, &x0s, |rng| random_stiefel(rows, r, rng), cfg)?;

    let labels: Vec<String> = rho.shape().labels().to_vec();
    let omega = extension(&run.best.x);
    let (marg, _) = partial_trace(&omega, &shape, &["A", "B"])?;
    let residual = trace_norm(&(marg - rho.matrix()));
    let out_shape = SubsystemShape::new(&[da, db, de], &[labels[0].as_str(), labels[1].as_str(), "E"])?;
    let argmin = Argmin::Extension {
        state: DensityOperator::from_raw(omega, out_shape),
        env_dims: [de, de2],
    };
    Ok(MeasureResult::from_run("squashed", alpha, run.best.value, argmin, residual, &run, cfg))
}

// ---------------------------------------------------------------------------
// entanglement of formation

/// `(p_x, H_alpha(A)_{psi_x})` for an unnormalized pure vector on `AB`.
fn pure_term(v: &CVec, da: usize, db: usize, alpha: f64) -> (f64, f64) {
    let m = CMat::from_fn(da, db, |a, b| v[a * db + b]);
    let s2: Vec<f64> = linalg::singular_values(&m).into_iter().map(|s| s * s).collect();
    let p: f64 = s2.iter().sum();
    if p <= 1e-300 {
        return (0.0, 0.0);
    }
    let q: f64 = s2.iter().map(|x| (x / p).powf(alpha)).sum();
    (p, q)
}

fn eof_value(vs: &[CVec], da: usize, db: usize, alpha: f64) -> f64 {
    let mut s = 0.0;
    for v in vs {
        let (p, q) = pure_term(v, da, db, alpha);
        if p > 0.0 {
            s += p * q.powf(1.0 / alpha);
        }
    }
    alpha / (1.0 - alpha) * s.ln()
}

/// `v_x = psi W^T |x>`, the (unnormalized) members of the steered ensemble.
fn steered_vectors(psi: &CMat, w: &CMat) -> Vec<CVec> {
    let m = psi * w.transpose();
    (0..m.ncols()).map(|x| m.column(x).into_owned()).collect()
}

/// Rényi entanglement of formation `min (alpha/(1-alpha)) log sum_x p_x (Tr (psi_A^x)^alpha)^{1/alpha}`
/// over `n_terms`-element pure decompositions (default `rank^2`).
pub fn eof_renyi(
    rho: &DensityOperator,
    alpha: f64,
    n_terms: Option<usize>,
    cfg: &OptimizerConfig,
    warm: &[WarmStart],
) -> Result<MeasureResult> {
    check_alpha(alpha)?;
    let (da, db) = bipartite_dims(rho)?;
    let sup = Support::new(rho.matrix())?;
    let r = sup.rank();
    if let Some(n) = n_terms {
        if n < r {
            return Err(Error::InvalidArgument(format!("n_terms {n} is below the rank {r}")));
        }
    }
    let mut warm_vecs = Vec::new();
    for w in warm {
        match w {
            WarmStart::Decomposition(ens) => {
                let mut vs = Vec::new();
                for (p, s) in ens.probs().iter().zip(ens.states()) {
                    vs.extend(weighted_eigenvectors(&s.matrix().scale(*p)));
                }
                warm_vecs.push(vs);
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "entanglement of formation takes decomposition warm starts".into(),
                ))
            }
        }
    }
    let n = n_terms
        .unwrap_or(r * r)
        .max(warm_vecs.iter().map(Vec::len).max().unwrap_or(0))
        .max(r);

    let mut x0s = Vec::new();
    for vs in &warm_vecs {
        let mut w = CMat::zeros(n, r);
        for (x, v) in vs.iter().enumerate() {
            for (i, c) in sup.steer(v).into_iter().enumerate() {
                w[(x, i)] = c;
            }
        }
        let defect = isometry_defect(&w);
        if defect > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "warm start is not a decomposition of the state (defect {defect:.2e})"
            )));
        }
        x0s.push(params_from_complex(&polar(&w)));
    }
    let objective = |p: &[f64]| eof_value(&steered_vectors(&sup.psi, &stiefel_point(p, n, r)), da, db, alpha);
    let retract = stiefel_retraction(n, r);
    let run = multistart(&objective, &retract, &x0s, |rng| random_stiefel(n, r, rng), cfg)?;

    let vs = steered_vectors(&sup.psi, &stiefel_point(&run.best.x, n, r));
    let mut avg = CMat::zeros(da * db, da * db);
    let mut probs = Vec::new();
    let mut states = Vec::new();
    for v in &vs {
        avg += linalg::projector(v);
        let p = v.norm_squared();
        if p > 1e-14 {
            probs.push(p);
            states.push(linalg::projector(&v.unscale(p.sqrt())));
        }
    }
    let residual = trace_norm(&(avg - rho.matrix()));
    let total: f64 = probs.iter().sum();
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    let states = states
        .into_iter()
        .map(|m| DensityOperator::from_raw(m, rho.shape().clone()))
        .collect();
    let argmin = Argmin::Ensemble {
        ensemble: Ensemble::new(probs, states)?,
    };
    Ok(MeasureResult::from_run("eof", alpha, run.best.value, argmin, residual, &run, cfg))
}

#[derive(Clone, Debug, Serialize)]
pub struct EofBound {
    /// `E^F_{(2-alpha)/alpha} - E^sq_alpha`.
    pub margin: f64,
    pub eof: MeasureResult,
    pub squashed: MeasureResult,
}

/// Compares `E^F_{(2-alpha)/alpha}` with `E^sq_alpha`; the squashed optimizer is
/// warm-started at the flag extension of the optimal decomposition.
pub fn eof_bound_check(rho: &DensityOperator, alpha: f64, cfg: &OptimizerConfig) -> Result<EofBound> {
    check_alpha(alpha)?;
    let beta = (2.0 - alpha) / alpha;
    let eof = eof_renyi(rho, beta, None, cfg, &[])?;
    let Argmin::Ensemble { ensemble } = &eof.argmin else {
        unreachable!("eof returns an ensemble");
    };
    let (da, db) = bipartite_dims(rho)?;
    let ext = (da * db).max(ensemble.len());
    let squashed = squashed_entanglement(rho, alpha, Some(ext), cfg, &[WarmStart::Decomposition(ensemble.clone())])?;
    Ok(EofBound {
        margin: eof.value - squashed.value,
        eof,
        squashed,
    })
}

// ---------------------------------------------------------------------------
// discord

fn canonical(rho: &DensityOperator) -> Result<DensityOperator> {
    bipartite_dims(rho)?;
    rho.relabel(&["A", "B"])
}

/// `(phi^dagger (x) I) K (phi (x) I)` on `B`.
fn compress(k: &CMat, phi: &CVec, da: usize, db: usize) -> CMat {
    CMat::from_fn(db, db, |b, b2| {
        let mut s = C64::new(0.0, 0.0);
        for a in 0..da {
            for a2 in 0..da {
                s += phi[a].conj() * k[(a * db + b, a2 * db + b2)] * phi[a2];
            }
        }
        s
    })
}

/// `(<phi| (x) I) F` for `F` on `A (x) B`.
fn compress_rows(f: &CMat, phi: &CVec, da: usize, db: usize) -> CMat {
    CMat::from_fn(db, f.ncols(), |b, j| {
        let mut s = C64::new(0.0, 0.0);
        for a in 0..da {
            s += phi[a].conj() * f[(a * db + b, j)];
        }
        s
    })
}

/// Precomputed pieces of the rank-one discord objective.
struct DiscordKernel {
    da: usize,
    db: usize,
    alpha: f64,
    rho: CMat,
    rho_a: CMat,
    /// `F = (rho_A^{(1-alpha)/2} (x) I) rho^{alpha/2}`, so that `K = F F^dagger`; unused at `alpha = 1`.
    f: CMat,
    vn: bool,
    /// `H(A) - H(AB)` at `alpha = 1`.
    vn_offset: f64,
}

impl DiscordKernel {
    fn new(rho: &DensityOperator, alpha: f64) -> Result<Self> {
        let (da, db) = bipartite_dims(rho)?;
        let shape = rho.shape();
        let labels = shape.labels();
        let (rho_a, _) = partial_trace(rho.matrix(), shape, &[labels[0].as_str()])?;
        let order = RenyiOrder::new(alpha)?;
        let (f, vn_offset) = if order.is_von_neumann() {
            let h = crate::entropy::vn_entropy(&rho_a)? - crate::entropy::vn_entropy(rho.matrix())?;
            (CMat::zeros(0, 0), h)
        } else {
            let pa = linalg::tensor(&matrix_power(&rho_a, (1.0 - alpha) / 2.0)?, &linalg::identity(db));
            (pa * matrix_power(rho.matrix(), alpha / 2.0)?, 0.0)
        };
        Ok(Self {
            da,
            db,
            alpha: order.alpha(),
            rho: rho.matrix().clone(),
            rho_a,
            f,
            vn: order.is_von_neumann(),
            vn_offset,
        })
    }

    fn value(&self, vectors: &[CVec]) -> Result<f64> {
        let alpha = self.alpha;
        if self.vn {
            let mut s = self.vn_offset;
            for phi in vectors {
                let q = phi.dotc(&(&self.rho_a * phi)).re;
                if q > 1e-14 {
                    let rb = compress(&self.rho, phi, self.da, self.db).unscale(q);
                    s += q * crate::entropy::vn_entropy(&linalg::hermitian_part(&rb))?;
                }
            }
            return Ok(s);
        }
        let mut s = 0.0;
        for phi in vectors {
            let q = phi.dotc(&(&self.rho_a * phi)).re;
            if q <= 1e-14 {
                continue;
            }
            let t = linalg::factor_trace_power(&compress_rows(&self.f, phi, self.da, self.db), 1.0 / alpha);
            s += q.powf((alpha - 1.0) / alpha) * t;
        }
        Ok(alpha / (alpha - 1.0) * s.ln())
    }
}

/// `I_alpha(E;B|X)` of the dilated state for a rank-one POVM on the first subsystem,
/// evaluated as `(alpha/(alpha-1)) log sum_x q_x^{(alpha-1)/alpha} Tr K_x^{1/alpha}`
/// with `K_x = (phi_x^dagger (x) I) K (phi_x (x) I)` and `q_x = <phi_x|rho_A|phi_x>`.
pub fn discord_objective(rho: &DensityOperator, povm: &Povm, alpha: f64) -> Result<f64> {
    let kernel = DiscordKernel::new(rho, alpha)?;
    if povm.dim() != kernel.da {
        return Err(Error::ShapeMismatch("POVM acts on a different dimension".into()));
    }
    kernel.value(&povm.vectors()?)
}

/// `I_alpha(E;B|X)_omega` with `omega = U rho U^dagger` built by [`measurement_dilation`];
/// accepts any POVM on the first subsystem.
pub fn discord_objective_dilated(rho: &DensityOperator, povm: &Povm, alpha: f64) -> Result<f64> {
    let rho = canonical(rho)?;
    let dil = measurement_dilation(povm)?;
    let omega = dil.apply(&rho, "A")?;
    if povm.is_rank_one() {
        renyi_cmi(&omega, &["E"], &["B"], &["X"], alpha)
    } else {
        renyi_cmi(&omega, &["E", "XE", "Y"], &["B"], &["X"], alpha)
    }
}

/// `(alpha/(alpha-1)) log sum_x p(x) <xi_x|psi_B^{1-alpha}|xi_x>^{1/alpha}` for a pure state
/// and rank-one POVM, with `sqrt(p(x)) xi_x = (<phi_x| (x) I) psi`.
pub fn discord_pure_objective(psi: &PureState, povm: &Povm, alpha: f64) -> Result<f64> {
    let dims = psi.shape().dims();
    if dims.len() != 2 {
        return Err(Error::ShapeMismatch("expected a bipartite pure state".into()));
    }
    let (da, db) = (dims[0], dims[1]);
    if povm.dim() != da {
        return Err(Error::ShapeMismatch("POVM acts on a different dimension".into()));
    }
    let order = RenyiOrder::new(alpha)?;
    if order.is_von_neumann() {
        return discord_objective(&psi.density(), povm, alpha);
    }
    let amp = psi.amplitudes();
    let m = CMat::from_fn(da, db, |a, b| amp[a * db + b]);
    let psi_b = linalg::hermitian_part(&(m.transpose() * m.map(|z| z.conj())));
    let pb = matrix_power(&psi_b, 1.0 - alpha)?;
    let mut s = 0.0;
    for phi in povm.vectors()? {
        // unnormalized xi_x
        let xi: CVec = m.transpose() * phi.map(|z| z.conj());
        let p = xi.norm_squared();
        if p <= 1e-14 {
            continue;
        }
        let e = xi.dotc(&(&pb * &xi)).re / p;
        s += p * e.powf(1.0 / alpha);
    }
    Ok(alpha / (alpha - 1.0) * s.ln())
}

fn basis_rows(u: &CMat, n: usize) -> CMat {
    // rows <u_j| padded with zeros, so that W^dagger |j> = u_j
    let d = u.nrows();
    CMat::from_fn(n, d, |x, i| if x < u.ncols() { u[(i, x)].conj() } else { C64::new(0.0, 0.0) })
}

fn povm_rows(povm: &Povm, n: usize) -> Result<CMat> {
    let vs = povm.vectors()?;
    if vs.len() > n {
        return Err(Error::InvalidArgument(format!(
            "warm POVM has {} outcomes, more than n_outcomes {n}",
            vs.len()
        )));
    }
    let d = povm.dim();
    Ok(CMat::from_fn(n, d, |x, i| if x < vs.len() { vs[x][i].conj() } else { C64::new(0.0, 0.0) }))
}

/// Warm rows: the computational basis, the eigenbasis of `rho_A`, then the caller's POVMs.
fn discord_warm_rows(rho_a: &CMat, n: usize, warm: &[WarmStart]) -> Result<Vec<Vec<f64>>> {
    let d = rho_a.nrows();
    let mut rows = vec![basis_rows(&linalg::identity(d), n), basis_rows(&Eigh::new_unchecked(rho_a).vectors, n)];
    for w in warm {
        match w {
            WarmStart::Povm(p) => rows.push(povm_rows(p, n)?),
            _ => return Err(Error::InvalidArgument("discord takes POVM warm starts".into())),
        }
    }
    Ok(rows.iter().map(params_from_complex).collect())
}

fn povm_from_rows(w: &CMat) -> Povm {
    Povm::from_isometry_rows_unchecked(w)
}

/// Rényi discord `min I_alpha(E;B|X)` over rank-one POVMs with `n_outcomes` elements
/// (default `d_A^2`) on the first subsystem.
pub fn discord_renyi(
    rho: &DensityOperator,
    alpha: f64,
    n_outcomes: Option<usize>,
    cfg: &OptimizerConfig,
    warm: &[WarmStart],
) -> Result<MeasureResult> {
    let order = check_alpha(alpha)?;
    if order.alpha() > 2.0 {
        return Err(Error::InvalidArgument("discord is defined here for alpha in (0,1) u (1,2]".into()));
    }
    let kernel = DiscordKernel::new(rho, alpha)?;
    let d = kernel.da;
    let n = n_outcomes.unwrap_or(d * d);
    if n < d {
        return Err(Error::InvalidArgument(format!("n_outcomes {n} is below d_A = {d}")));
    }
    let x0s = discord_warm_rows(&kernel.rho_a, n, warm)?;
    let objective = |p: &[f64]| {
        let w = stiefel_point(p, n, d);
        let vs: Vec<CVec> = (0..n).map(|x| w.row(x).adjoint()).collect();
        kernel.value(&vs).unwrap_or(f64::INFINITY)
    };
    let retract = stiefel_retraction(n, d);
    let run = multistart(&objective, &retract, &x0s, |rng| random_stiefel(n, d, rng), cfg)?;
    let povm = povm_from_rows(&stiefel_point(&run.best.x, n, d));
    let residual = povm.residual();
    Ok(MeasureResult::from_run("discord", alpha, run.best.value, Argmin::Povm { povm }, residual, &run, cfg))
}

/// `min_{sigma_A, sigma_B} D_alpha(rho_AB || sigma_A (x) sigma_B)` by alternating the
/// closed-form partial minimizers `sigma_B ∝ (Tr_A{(sigma_A^{(1-alpha)/2} (x) I) rho^alpha (...)})^{1/alpha}`.
pub fn product_divergence(rho: &CMat, da: usize, db: usize, alpha: f64) -> Result<f64> {
    let shape = SubsystemShape::new(&[da, db], &["A", "B"])?;
    let order = RenyiOrder::new(alpha)?;
    let (mut sa, _) = partial_trace(rho, &shape, &["A"])?;
    let (mut sb, _) = partial_trace(rho, &shape, &["B"])?;
    if order.is_von_neumann() {
        use crate::entropy::vn_entropy;
        return Ok(vn_entropy(&sa)? + vn_entropy(&sb)? - vn_entropy(rho)?);
    }
    let ra = matrix_power(rho, alpha)?;
    let idb = linalg::identity(db);
    let ida = linalg::identity(da);
    let q = |sa: &CMat, sb: &CMat| -> Result<f64> {
        let s = linalg::tensor(&matrix_power(sa, 1.0 - alpha)?, &matrix_power(sb, 1.0 - alpha)?);
        Ok((&ra * s).trace().re)
    };
    let update = |other: &CMat, on_a: bool| -> Result<CMat> {
        let half = matrix_power(other, (1.0 - alpha) / 2.0)?;
        let (lift, keep) = if on_a {
            (linalg::tensor(&ida, &half), "A")
        } else {
            (linalg::tensor(&half, &idb), "B")
        };
        let (t, _) = partial_trace(&(&lift * &ra * &lift), &shape, &[keep])?;
        let s = matrix_power(&linalg::hermitian_part(&t), 1.0 / alpha)?;
        let tr = linalg::trace(&s);
        Ok(s.unscale(tr))
    };
    let mut prev = q(&sa, &sb)?.ln() / (alpha - 1.0);
    for _ in 0..2000 {
        sb = update(&sa, false)?;
        sa = update(&sb, true)?;
        let cur = q(&sa, &sb)?.ln() / (alpha - 1.0);
        let done = (prev - cur).abs() < 1e-14;
        prev = cur;
        if done {
            break;
        }
    }
    Ok(prev)
}

/// `rho_XB = sum_x |x><x| (x) Tr_A{(Lambda_x (x) I) rho}` for POVM vectors on `A`.
fn measured_state(rho: &CMat, vectors: &[CVec], da: usize, db: usize) -> CMat {
    let n = vectors.len();
    let mut out = CMat::zeros(n * db, n * db);
    for (x, phi) in vectors.iter().enumerate() {
        let blk = compress(rho, phi, da, db);
        out.view_mut((x * db, x * db), (db, db)).copy_from(&blk);
    }
    out
}

/// Discord of the form `min D_alpha(rho_AB || sigma_A (x) sigma_B) - max_Lambda min D_alpha(rho_XB || sigma_X (x) sigma_B)`
/// with the outer maximum over rank-one POVMs of `n_outcomes` elements (default `d_A`).
///
/// Both inner minima use [`product_divergence`]; the outer maximum is a multi-start
/// search, so the returned value is an upper bound that depends on the budget.
pub fn discord_mbpds(
    rho: &DensityOperator,
    alpha: f64,
    n_outcomes: Option<usize>,
    cfg: &OptimizerConfig,
    warm: &[WarmStart],
) -> Result<MeasureResult> {
    RenyiOrder::new(alpha)?;
    let (da, db) = bipartite_dims(rho)?;
    let n = n_outcomes.unwrap_or(da);
    if n < da {
        return Err(Error::InvalidArgument(format!("n_outcomes {n} is below d_A = {da}")));
    }
    let first = product_divergence(rho.matrix(), da, db, alpha)?;
    let (rho_a, _) = partial_trace(rho.matrix(), rho.shape(), &[rho.shape().labels()[0].as_str()])?;
    let x0s = discord_warm_rows(&rho_a, n, warm)?;
    let objective = |p: &[f64]| {
        let w = stiefel_point(p, n, da);
        let vs: Vec<CVec> = (0..n).map(|x| w.row(x).adjoint()).collect();
        let xb = measured_state(rho.matrix(), &vs, da, db);
        product_divergence(&xb, n, db, alpha).map_or(f64::INFINITY, |v| -v)
    };
    let retract = stiefel_retraction(n, da);
    let run = multistart(&objective, &retract, &x0s, |rng| random_stiefel(n, da, rng), cfg)?;
    let povm = povm_from_rows(&stiefel_point(&run.best.x, n, da));
    let residual = povm.residual();
    let value = first + run.best.value;
    Ok(MeasureResult::from_run("discord_mbpds", alpha, value, Argmin::Povm { povm }, residual, &run, cfg))
}

/// `objective(coarse) - objective(rank-one refinement)`, both through the dilated CMI
/// of the coarse POVM and the rank-one objective of its refinement.
pub fn rank_one_refinement_test(rho: &DensityOperator, coarse: &Povm, alpha: f64) -> Result<f64> {
    let fine = coarse.refine();
    Ok(discord_objective_dilated(rho, coarse, alpha)? - discord_objective(rho, &fine.povm, alpha)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct CcInvariance {
    /// Squashed objectives for `(A X_A; B)`, `(A X_A; B X_B)` and `(A; B X_B)`.
    pub values: [f64; 3],
    /// `|v0 - v1|`, `|v1 - v2|`, `|v0 - v2|`.
    pub gaps: [f64; 3],
}

/// `sum_x P_x rho P_x (x) |x><x|_E`, with `P_x` projecting every flag in `flags` onto `x`.
fn flag_copy_extension(rho: &DensityOperator, flags: &[&str], n: usize) -> Result<DensityOperator> {
    let d = rho.dim();
    let mut m = CMat::zeros(d * n, d * n);
    for x in 0..n {
        let mut p = linalg::identity(d);
        for f in flags {
            let proj = linalg::projector(&linalg::ket(n, x));
            p = &p * linalg::embed(&proj, rho.shape(), &[*f])?;
        }
        let blk = &p * rho.matrix() * &p;
        m += linalg::tensor(&blk, &linalg::projector(&linalg::ket(n, x)));
    }
    let shape = rho.shape().join(&SubsystemShape::single(n, "E"))?;
    Ok(DensityOperator::from_raw(m, shape))
}

/// Squashed objectives across the three ways of sharing classical flags.
///
/// `rho` has subsystems labeled `A`, `XA`, `B`, `XB` where the flags `XA`, `XB`
/// carry the same classical value. Each optimizer is warm-started at the
/// extension whose environment copies the flag.
pub fn cc_invariance_test(
    rho: &DensityOperator,
    alpha: f64,
    ext_dim: Option<usize>,
    cfg: &OptimizerConfig,
) -> Result<CcInvariance> {
    let s = rho.shape();
    let n = s.dim_of("XA")?;
    if s.dim_of("XB")? != n {
        return Err(Error::ShapeMismatch("flags XA and XB differ in dimension".into()));
    }
    let cases: [(&[&str], &[&str]); 3] = [(&["A", "XA"], &["B"]), (&["A", "XA"], &["B", "XB"]), (&["A"], &["B", "XB"])];
    let mut values = [0.0; 3];
    for (k, (left, right)) in cases.iter().enumerate() {
        let keep: Vec<&str> = left.iter().chain(right.iter()).copied().collect();
        let reduced = rho.marginal(&keep)?;
        let flags: Vec<&str> = keep.iter().copied().filter(|l| l.starts_with('X')).collect();
        let warm = flag_copy_extension(&reduced, &flags, n)?;
        let warm = warm.regroup(&[("L", left), ("R", right), ("E", &["E"])])?;
        let bip = reduced.regroup(&[("L", left), ("R", right)])?;
        let r = squashed_entanglement(&bip, alpha, Some(ext_dim.unwrap_or(n).max(n)), cfg, &[WarmStart::Extension(warm)])?;
        values[k] = r.value;
    }
    let gaps = [
        (values[0] - values[1]).abs(),
        (values[1] - values[2]).abs(),
        (values[0] - values[2]).abs(),
    ];
    Ok(CcInvariance { values, gaps })
}

/// `sum_x p_x E(rho_x) - E(sum_x p_x rho_x)`, the mixture warm-started at
/// `sum_x p_x omega_x (x) |x><x|` built from the components' argmin extensions.
pub fn convexity_margin(ens: &Ensemble, alpha: f64, ext_dim: Option<usize>, cfg: &OptimizerConfig) -> Result<f64> {
    let mut parts = Vec::new();
    let mut avg = 0.0;
    for (p, s) in ens.probs().iter().zip(ens.states()) {
        let r = squashed_entanglement(s, alpha, ext_dim, cfg, &[])?;
        avg += p * r.value;
        let Argmin::Extension { state, .. } = r.argmin else {
            unreachable!("squashed returns an extension");
        };
        parts.push(state);
    }
    let de = parts.iter().map(|w| w.shape().dims()[2]).max().unwrap_or(1);
    let n = parts.len();
    let (da, db) = bipartite_dims(&ens.states()[0])?;
    let d = da * db * de * n;
    let mut m = CMat::zeros(d, d);
    for (x, (p, w)) in ens.probs().iter().zip(&parts).enumerate() {
        let dex = w.shape().dims()[2];
        // pad E_x to dimension de, then tensor the flag onto E
        let mut pad = CMat::zeros(de, dex);
        for i in 0..dex {
            pad[(i, i)] = C64::new(1.0, 0.0);
        }
        let emb = linalg::tensor(&linalg::identity(da * db), &pad);
        let wx = &emb * w.matrix() * emb.adjoint();
        m += linalg::tensor(&wx, &linalg::projector(&linalg::ket(n, x))).scale(*p);
    }
    let warm = DensityOperator::from_raw(m, SubsystemShape::new(&[da, db, de * n], &["A", "B", "E"])?);
    let mix = ens.average();
    let ext = ext_dim.unwrap_or(da * db).max(de * n);
    let r = squashed_entanglement(&mix, alpha, Some(ext), cfg, &[WarmStart::Extension(warm)])?;
    Ok(avg - r.value)
}

/// `E(sigma) + E(tau) - E(sigma (x) tau)` with the product warm-started at `omega_sigma (x) omega_tau`.
pub fn subadditivity_margin(
    sigma: &DensityOperator,
    tau: &DensityOperator,
    alpha: f64,
    ext_dim: Option<usize>,
    cfg: &OptimizerConfig,
) -> Result<f64> {
    let rs = squashed_entanglement(sigma, alpha, ext_dim, cfg, &[])?;
    let rt = squashed_entanglement(tau, alpha, ext_dim, cfg, &[])?;
    let (Argmin::Extension { state: ws, .. }, Argmin::Extension { state: wt, .. }) = (&rs.argmin, &rt.argmin) else {
        unreachable!("squashed returns an extension");
    };
    let ws = ws.relabel(&["A1", "B1", "E1"])?;
    let wt = wt.relabel(&["A2", "B2", "E2"])?;
    let warm = ws
        .tensor(&wt)?
        .regroup(&[("A", &["A1", "A2"]), ("B", &["B1", "B2"]), ("E", &["E1", "E2"])])?;
    let joint = sigma
        .relabel(&["A1", "B1"])?
        .tensor(&tau.relabel(&["A2", "B2"])?)?
        .regroup(&[("A", &["A1", "A2"]), ("B", &["B1", "B2"])])?;
    let de = warm.shape().dims()[2];
    let r = squashed_entanglement(&joint, alpha, Some(ext_dim.unwrap_or(de).max(de)), cfg, &[WarmStart::Extension(warm)])?;
    Ok(rs.value + rt.value - r.value)
}
