mod args;
mod inputs;

use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use serde_json::json;

use renyi_core::channels::random_channel;
use renyi_core::entropy::{renyi_cmi, renyi_cmi_unoptimized, sandwiched_cmi, vn_cmi};
use renyi_core::harness::{
    run_property_suite, Campaign, CampaignOptions, CampaignReport, RemainderKind, Side, SuiteOptions, DEFAULT_GRID,
};
use renyi_core::linalg::SubsystemShape;
use renyi_core::measures::{discord_mbpds, discord_renyi, eof_renyi, squashed_entanglement};
use renyi_core::optim::{Method, OptimizerConfig};
use renyi_core::reldiff::{
    alpha_slope_check, delta_alpha, delta_tilde_alpha, delta_vn, delta_vn_rewrite, discord_remainder,
    holevo_remainder, holevo_remainder_via_channel, joint_convexity_remainder, monotonicity_remainder, variance_v,
    DEFAULT_SLOPE_STEP,
};
use renyi_core::rng::stream_rng;
use renyi_core::states::{random_density, random_full_rank, DensityOperator};

use args::*;
use inputs::*;

/// Orders allowed for the A/B-side monotonicity statement.
const C1_GRID: [f64; 8] = [0.1, 0.3, 0.5, 0.7, 0.9, 1.1, 1.5, 2.0];
const REFINEMENT_ALPHAS: [f64; 6] = [0.3, 0.5, 0.7, 1.0, 1.5, 2.0];
const DEFAULT_MAX_DIM: usize = 3;

/// A command either succeeds, reports a gated failure, or cannot run.
enum Outcome {
    Ok,
    GatedFailure,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Conjecture(a) => conjecture(a),
        Command::Measure(a) => measure(a),
        Command::Verify(a) => verify(a),
        Command::Eval(a) => eval(a),
        Command::Sample(a) => sample(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::GatedFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| format!("{}: {e}", p.display())),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != ErrorKind::BrokenPipe => Err(e.to_string()),
            _ => Ok(()),
        },
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    emit(&text, out)
}

fn meta_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.meta.json"))
}

fn core<T>(r: renyi_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn triple(dims: Option<&[usize]>) -> Result<[usize; 3], String> {
    match dims {
        None => Ok([2, 2, 2]),
        Some([d]) => Ok([*d; 3]),
        Some([a, b, e]) => Ok([*a, *b, *e]),
        Some(other) => Err(format!("expected one or three dimensions, got {other:?}")),
    }
}

fn max_dim(dims: Option<&[usize]>) -> Result<usize, String> {
    match dims {
        None => Ok(DEFAULT_MAX_DIM),
        Some([d]) => Ok(*d),
        Some(other) => Err(format!("expected a single maximum dimension, got {other:?}")),
    }
}

fn build_campaign(a: &ConjectureArgs) -> Result<Campaign, String> {
    let dims = a.dims.as_deref();
    let grid = |default: &[f64]| a.alpha_grid.clone().unwrap_or_else(|| default.to_vec());
    Ok(match a.campaign {
        CampaignKind::C1 => Campaign::Conjecture1 {
            dims: triple(dims)?,
            grid: grid(&C1_GRID),
            side: match a.side {
                SideArg::A => Side::A,
                SideArg::B => Side::B,
            },
        },
        CampaignKind::C2 => Campaign::Conjecture2 {
            max_dim: max_dim(dims)?,
            grid: grid(&DEFAULT_GRID),
        },
        CampaignKind::CmiMono => Campaign::CmiAlphaMono {
            dims: triple(dims)?,
            grid: grid(&DEFAULT_GRID),
        },
        CampaignKind::Unitary => Campaign::UnitaryCases {
            max_dim: max_dim(dims)?,
            grid: grid(&DEFAULT_GRID),
        },
        CampaignKind::Remainder => Campaign::Remainder {
            kind: match a.kind {
                RemainderArg::Monotonicity => RemainderKind::Monotonicity,
                RemainderArg::JointConvexity => RemainderKind::JointConvexity,
                RemainderArg::Holevo => RemainderKind::Holevo,
                RemainderArg::Discord => RemainderKind::Discord,
            },
            max_dim: max_dim(dims)?,
        },
        CampaignKind::Refinement => Campaign::Refinement {
            max_dim: max_dim(dims)?,
            alphas: grid(&REFINEMENT_ALPHAS),
        },
    })
}

fn summary(r: &CampaignReport) -> String {
    let a = &r.aggregate;
    format!(
        "{} {}: trials {} rows {} min margin {:.3e} violations {} near {} ({:.1}s)",
        r.campaign,
        if r.gated { "gated" } else { "evidence" },
        a.trials,
        a.rows,
        a.min_margin,
        a.violations,
        a.near_violations,
        r.metadata.wall_time_s
    )
}

fn conjecture(a: ConjectureArgs) -> Result<Outcome, String> {
    let campaign = build_campaign(&a)?;
    let opts = CampaignOptions {
        trials: a.run.trials,
        seed: a.run.seed,
        parallel: !a.run.serial,
        reject_eps: a.reject_eps,
    };
    let report = core(campaign.run(&opts))?;
    let body = core(report.body_json())?;
    emit(&body, a.run.out.as_deref())?;
    if let Some(out) = &a.run.out {
        emit_json(&report.metadata, Some(&meta_path(out)))?;
    }
    if let Some(csv) = &a.run.csv {
        fs::write(csv, report.to_csv()).map_err(|e| format!("{}: {e}", csv.display()))?;
    }
    eprintln!("{}", summary(&report));
    Ok(if report.passed() { Outcome::Ok } else { Outcome::GatedFailure })
}

fn measure(a: MeasureArgs) -> Result<Outcome, String> {
    let rho: DensityOperator = read_json(&a.input)?;
    let method = match a.method {
        MethodArg::NelderMead => Method::NelderMead,
        MethodArg::PolarDescent => Method::PolarRetractionDescent,
        MethodArg::RandomSearch => Method::RandomSearch,
    };
    let cfg = OptimizerConfig::default()
        .with_restarts(a.restarts)
        .with_budget(a.budget)
        .with_seed(a.seed)
        .with_method(method);
    let r = core(match a.measure {
        MeasureKind::Squashed => squashed_entanglement(&rho, a.alpha, a.ext_dim, &cfg, &[]),
        MeasureKind::Discord => discord_renyi(&rho, a.alpha, a.terms, &cfg, &[]),
        MeasureKind::DiscordMbpds => discord_mbpds(&rho, a.alpha, a.terms, &cfg, &[]),
        MeasureKind::Eof => eof_renyi(&rho, a.alpha, a.terms, &cfg, &[]),
    })?;
    eprintln!(
        "{} alpha {}: {:.10} ({} evaluations, residual {:.1e})",
        r.measure, r.alpha, r.value, r.evaluations, r.residual
    );
    emit_json(&r, a.out.as_deref())?;
    Ok(Outcome::Ok)
}

fn verify(a: VerifyArgs) -> Result<Outcome, String> {
    let VerifyTarget::Suite {
        seed,
        trials,
        tolerance,
        serial,
        out,
    } = a.target;
    let defaults = SuiteOptions::default();
    let opts = SuiteOptions {
        seed: seed.unwrap_or(defaults.seed),
        trials: trials.unwrap_or(defaults.trials),
        parallel: !serial,
        tolerance,
    };
    let report = run_property_suite(&opts);
    for c in &report.checks {
        eprintln!("{}", c.line());
    }
    emit(&core(report.to_json())?, out.as_deref())?;
    Ok(if report.passed() { Outcome::Ok } else { Outcome::GatedFailure })
}

fn cmi_labels(rho: &DensityOperator, labels: Option<Vec<String>>) -> Result<[String; 3], String> {
    let l = labels.unwrap_or_else(|| rho.shape().labels().iter().take(3).cloned().collect());
    match <[String; 3]>::try_from(l) {
        Ok(t) => Ok(t),
        Err(l) => Err(format!("expected three labels, got {l:?}")),
    }
}

fn eval(a: EvalArgs) -> Result<Outcome, String> {
    match a.quantity {
        EvalQuantity::Dalpha { input, alpha, out } => {
            let inst = read_json::<InstanceDoc>(&input)?.instance()?;
            let v = json!({
                "alpha": alpha,
                "delta_alpha": core(delta_alpha(&inst, alpha))?,
                "delta_tilde_alpha": core(delta_tilde_alpha(&inst, alpha))?,
                "delta_vn": core(delta_vn(&inst))?,
            });
            emit_json(&v, out.as_deref())?;
        }
        EvalQuantity::Cmi {
            input,
            alpha,
            labels,
            out,
        } => {
            let rho: DensityOperator = read_json(&input)?;
            let [x, y, z] = cmi_labels(&rho, labels)?;
            let (a, b, c) = ([x.as_str()], [y.as_str()], [z.as_str()]);
            let v = json!({
                "alpha": alpha,
                "labels": [&x, &y, &z],
                "sibson": core(renyi_cmi(&rho, &a, &b, &c, alpha))?,
                "unoptimized": core(renyi_cmi_unoptimized(&rho, &a, &b, &c, alpha))?,
                "sandwiched": core(sandwiched_cmi(&rho, &a, &b, &c, alpha))?,
                "von_neumann": core(vn_cmi(&rho, &a, &b, &c))?,
            });
            emit_json(&v, out.as_deref())?;
        }
        EvalQuantity::Delta { input, out } => {
            let inst = read_json::<InstanceDoc>(&input)?.instance()?;
            let v = json!({
                "delta_vn": core(delta_vn(&inst))?,
                "rewrite": core(delta_vn_rewrite(&inst))?,
                "variance": core(variance_v(&inst))?,
                "slope": core(alpha_slope_check(&inst, DEFAULT_SLOPE_STEP))?,
            });
            emit_json(&v, out.as_deref())?;
        }
        EvalQuantity::Remainder { kind, input, out } => {
            let v = match kind {
                RemainderArg::Monotonicity => {
                    let inst = read_json::<InstanceDoc>(&input)?.instance()?;
                    json!({ "margin": core(monotonicity_remainder(&inst))? })
                }
                RemainderArg::JointConvexity => {
                    let d: JointConvexityDoc = read_json(&input)?;
                    let r = core(joint_convexity_remainder(&d.rhos, &d.sigmas))?;
                    json!({
                        "margin": r.margin,
                        "flagged_margin": r.flagged_margin,
                        "equivalence_gap": r.equivalence_gap(),
                    })
                }
                RemainderArg::Holevo => {
                    let d: HolevoDoc = read_json(&input)?;
                    let r = core(holevo_remainder(&d.ensemble, &d.povm))?;
                    let dual = core(holevo_remainder_via_channel(&d.ensemble, &d.povm))?;
                    json!({
                        "margin": r.margin,
                        "holevo_gap": r.holevo_gap,
                        "dual_route_margin": dual,
                    })
                }
                RemainderArg::Discord => {
                    let d: DiscordDoc = read_json(&input)?;
                    serde_json::to_value(core(discord_remainder(&d.state, &d.povm))?).map_err(|e| e.to_string())?
                }
            };
            emit_json(&v, out.as_deref())?;
        }
    }
    Ok(Outcome::Ok)
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n)
        .map(|k| char::from(b'A' + (k % 26) as u8).to_string())
        .collect()
}

fn sample(a: SampleArgs) -> Result<Outcome, String> {
    match a.what {
        SampleTarget::State {
            dims,
            labels,
            rank,
            seed,
            out,
        } => {
            let labels = labels.unwrap_or_else(|| default_labels(dims.len()));
            let shape = core(SubsystemShape::new(&dims, &labels))?;
            let mut rng = stream_rng(seed, 0);
            let rho = core(random_density(&shape, rank.unwrap_or(shape.total()), &mut rng))?;
            emit_json(&rho, out.as_deref())?;
        }
        SampleTarget::Instance {
            d_in,
            d_out,
            seed,
            out,
        } => {
            if d_in == 0 || d_out == 0 {
                return Err("dimensions must be positive".into());
            }
            let mut rng = stream_rng(seed, 0);
            let shape = SubsystemShape::single(d_in, "S");
            let doc = InstanceDoc {
                rho: random_full_rank(&shape, &mut rng),
                sigma: random_full_rank(&shape, &mut rng),
                channel: core(random_channel(d_in, d_out, None, &mut rng))?,
            };
            emit_json(&doc, out.as_deref())?;
        }
    }
    Ok(Outcome::Ok)
}
