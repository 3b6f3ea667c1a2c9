//! Derivative-free minimizers and a deterministic multi-start driver.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NelderMead,
    /// Finite-difference gradient descent with Barzilai-Borwein steps, Armijo backtracking
    /// and a retraction applied after every accepted step.
    PolarRetractionDescent,
    /// (1+1) evolution strategy with the one-fifth success rule.
    RandomSearch,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nelder-mead" | "nelder_mead" | "nm" => Ok(Method::NelderMead),
            "polar" | "polar-retraction" | "polar_retraction_descent" | "gradient" => {
                Ok(Method::PolarRetractionDescent)
            }
            "random" | "random-search" | "random_search" => Ok(Method::RandomSearch),
            other => Err(Error::InvalidArgument(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Objective evaluations allowed per restart.
    pub max_iters: usize,
    pub tol: f64,
    pub method: Method,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iters: 20_000,
            tol: 1e-7,
            method: Method::NelderMead,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

pub type Objective<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);
pub type Retraction<'a> = &'a (dyn Fn(&mut [f64]) + Sync);

/// Counts evaluations and maps NaN to +inf so comparisons stay total.
struct Counted<'a> {
    f: Objective<'a>,
    evals: usize,
}

impl Counted<'_> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Adaptive Nelder-Mead on an axis-aligned initial simplex of size `step`.
pub fn nelder_mead(f: Objective, x0: &[f64], step: f64, tol: f64, max_evals: usize) -> Minimum {
    let n = x0.len();
    let mut fc = Counted { f, evals: 0 };
    if n == 0 {
        let v = fc.eval(x0);
        return Minimum {
            x: vec![],
            value: v,
            evaluations: 1,
            converged: true,
            trace: vec![v],
        };
    }
    let nf = n as f64;
    let (ca, cb, cg, cd) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals = vec![fc.eval(x0)];
    for i in 0..n {
        if fc.evals >= max_evals {
            // budget ran out while building the simplex
            return Minimum {
                x: x0.to_vec(),
                value: vals[0],
                evaluations: fc.evals,
                converged: false,
                trace: vec![vals[0]],
            };
        }
        let mut p = x0.to_vec();
        p[i] += step;
        vals.push(fc.eval(&p));
        simplex.push(p);
    }
    let mut trace = Vec::new();
    let mut converged = false;
    while fc.evals < max_evals {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        trace.push(vals[0]);
        let spread = vals[n] - vals[0];
        let diam = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.abs() <= tol * (1.0 + vals[0].abs()) && diam <= tol.sqrt() {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / nf;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(ca);
        let fr = fc.eval(&xr);
        if fr < vals[0] {
            let xe = along(cb);
            let fe = fc.eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fcv) = if fr < vals[n] {
            let x = along(cg);
            let v = fc.eval(&x);
            (x, v)
        } else {
            let x = along(-cg);
            let v = fc.eval(&x);
            (x, v)
        };
        if fcv < vals[n].min(fr) {
            simplex[n] = xc;
            vals[n] = fcv;
            continue;
        }
        for i in 1..=n {
            let p: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, x)| b + cd * (x - b))
                .collect();
            vals[i] = fc.eval(&p);
            simplex[i] = p;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    trace.push(vals[best]);
    Minimum {
        x: simplex[best].clone(),
        value: vals[best],
        evaluations: fc.evals,
        converged,
        trace,
    }
}

fn fd_gradient(fc: &mut Counted, x: &[f64], fx: f64, h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let xi = xp[i];
        xp[i] = xi + h;
        let fp = fc.eval(&xp);
        xp[i] = xi - h;
        let fm = fc.eval(&xp);
        xp[i] = xi;
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * h)
        } else if fp.is_finite() {
            (fp - fx) / h
        } else if fm.is_finite() {
            (fx - fm) / h
        } else {
            0.0
        };
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Central-difference gradient descent with BB step lengths and Armijo backtracking.
pub fn gradient_descent(
    f: Objective,
    retract: Retraction,
    x0: &[f64],
    tol: f64,
    max_evals: usize,
) -> Minimum {
    let mut fc = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    retract(&mut x);
    let mut fx = fc.eval(&x);
    let mut trace = vec![fx];
    let h = 1e-6;
    let mut g = fd_gradient(&mut fc, &x, fx, h);
    let mut step = 1e-2 / (1.0 + dot(&g, &g).sqrt());
    let mut converged = false;
    let mut stall = 0;
    while fc.evals + 2 * x.len() + 1 < max_evals {
        let gg = dot(&g, &g);
        if gg.sqrt() <= tol {
            converged = true;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            retract(&mut xn);
            let fnew = fc.eval(&xn);
            if fnew <= fx - 1e-4 * t * gg {
                accepted = Some((xn, fnew));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            converged = true;
            break;
        };
        let gn = fd_gradient(&mut fc, &xn, fnew, h);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { (dot(&s, &s) / sy).min(1e3) } else { t * 2.0 };
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        trace.push(fx);
        if improvement <= tol * (1.0 + fx.abs()) {
            stall += 1;
            if stall >= 3 {
                converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: fc.evals,
        converged,
        trace,
    }
}

/// (1+1)-ES with step adaptation; `scale` is the initial mutation size.
pub fn random_search(
    f: Objective,
    x0: &[f64],
    scale: f64,
    tol: f64,
    max_evals: usize,
    rng: &mut ChaCha20Rng,
) -> Minimum {
    let mut fc = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    let mut fx = fc.eval(&x);
    let mut trace = vec![fx];
    let mut sigma = scale;
    let mut converged = false;
    while fc.evals < max_evals {
        let y: Vec<f64> = x
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(rng);
                v + sigma * z
            })
            .collect();
        let fy = fc.eval(&y);
        if fy <= fx {
            x = y;
            fx = fy;
            sigma *= 1.5;
        } else {
            sigma *= 1.5f64.powf(-0.25);
        }
        trace.push(fx);
        if sigma < tol {
            converged = true;
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        evaluations: fc.evals,
        converged,
        trace,
    }
}

/// Runs the configured method from one starting point.
pub fn run_method(
    f: Objective,
    retract: Retraction,
    x0: &[f64],
    cfg: &OptimizerConfig,
    rng: &mut ChaCha20Rng,
) -> Minimum {
    match cfg.method {
        Method::NelderMead => nelder_mead(f, x0, 0.1, cfg.tol, cfg.max_iters),
        Method::PolarRetractionDescent => gradient_descent(f, retract, x0, cfg.tol, cfg.max_iters),
        Method::RandomSearch => random_search(f, x0, 0.1, cfg.tol, cfg.max_iters, rng),
    }
}

#[derive(Clone, Debug)]
pub struct MultiStart {
    pub best: Minimum,
    pub best_index: usize,
    pub evaluations: usize,
    pub values: Vec<f64>,
}

/// Minimizes from `warm` starts plus `cfg.restarts` random starts drawn by `init`.
///
/// Restart `k` uses stream `k` of the configured seed. The winner is the smallest
/// value, ties going to the lowest index, so the result is independent of scheduling.
pub fn multistart<G>(
    f: Objective,
    retract: Retraction,
    warm: &[Vec<f64>],
    init: G,
    cfg: &OptimizerConfig,
) -> Result<MultiStart>
where
    G: Fn(&mut ChaCha20Rng) -> Vec<f64> + Sync,
{
    cfg.validate()?;
    let total = warm.len() + cfg.restarts;
    let base = derive_seed(cfg.seed, 0x5EED);
    let run = |k: usize| -> Minimum {
        let mut rng = stream_rng(base, k as u64);
        let x0 = if k < warm.len() {
            warm[k].clone()
        } else {
            init(&mut rng)
        };
        run_method(f, retract, &x0, cfg, &mut rng)
    };
    let results: Vec<Minimum> = par_map(total, run);
    let evaluations = results.iter().map(|m| m.evaluations).sum();
    let values: Vec<f64> = results.iter().map(|m| m.value).collect();
    let best_index = (0..total)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .expect("at least one restart");
    let best = results.into_iter().nth(best_index).expect("index in range");
    Ok(MultiStart {
        best,
        best_index,
        evaluations,
        values,
    })
}

/// Maps `0..n` in parallel when the `parallel` feature is on, preserving order.
pub fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

pub fn gaussian_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn no_retraction(_: &mut [f64]) {}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    fn bowl(x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * (v - 0.5).powi(2)).sum()
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let m = nelder_mead(&rosenbrock, &[-1.2, 1.0], 0.1, 1e-12, 20_000);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn gradient_descent_on_quadratic() {
        let m = gradient_descent(&bowl, &no_retraction, &[3.0; 6], 1e-9, 20_000);
        assert!(m.value < 1e-10);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn retraction_is_applied() {
        let project = |x: &mut [f64]| {
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= n);
        };
        // minimum of a linear function on the unit circle
        let lin = |x: &[f64]| x[0] + 2.0 * x[1];
        let m = gradient_descent(&lin, &project, &[1.0, 0.0], 1e-10, 5_000);
        assert!((m.value + 5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn random_search_improves() {
        let mut rng = stream_rng(1, 0);
        let m = random_search(&bowl, &[2.0; 3], 0.5, 1e-9, 20_000, &mut rng);
        assert!(m.value < 1e-8);
    }

    #[test]
    fn multistart_is_deterministic_and_prefers_warm_start() {
        let cfg = OptimizerConfig::default().with_restarts(4).with_seed(3);
        let init = |rng: &mut ChaCha20Rng| gaussian_vec(2, rng);
        let a = multistart(&rosenbrock, &no_retraction, &[], init, &cfg).unwrap();
        let b = multistart(&rosenbrock, &no_retraction, &[], init, &cfg).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.best_index, b.best_index);
        let exact = multistart(&rosenbrock, &no_retraction, &[vec![1.0, 1.0]], init, &cfg).unwrap();
        assert_eq!(exact.best.value, 0.0);
        assert_eq!(exact.best_index, 0);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().with_restarts(0).validate().is_err());
        let mut c = OptimizerConfig::default();
        c.tol = 0.0;
        assert!(c.validate().is_err());
        assert_eq!("nelder-mead".parse::<Method>().unwrap(), Method::NelderMead);
    }
}
