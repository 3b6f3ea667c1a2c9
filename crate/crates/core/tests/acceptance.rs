use std::time::Instant;

use renyi_core::channels::Povm;
use renyi_core::entropy::renyi_entropy;
use renyi_core::harness::suite::{
    check_classical_conditioning, check_consistency, check_duality, check_sibson_oracle, check_tensor_invariance,
    check_variance_slope, check_von_neumann_limits,
};
use renyi_core::harness::{Campaign, CampaignOptions, RemainderKind, DEFAULT_GRID};
use renyi_core::linalg::{self, SubsystemShape};
use renyi_core::measures::{discord_renyi, squashed_entanglement, WarmStart};
use renyi_core::optim::OptimizerConfig;
use renyi_core::rng::stream_rng;
use renyi_core::states::{maximally_entangled, random_cq, random_pure, random_separable, schmidt, DensityOperator, PureState};

const SEED: u64 = 20140917;

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(id: usize, name: &'static str, passed: bool, detail: String) -> Outcome {
    let o = Outcome { id, name, passed, detail };
    println!(
        "criterion {:>2} {:<28} {} {}",
        o.id,
        o.name,
        if o.passed { "PASS" } else { "FAIL" },
        o.detail
    );
    o
}

fn opts(trials: usize, seed: u64) -> CampaignOptions {
    CampaignOptions {
        trials,
        seed,
        parallel: true,
        ..Default::default()
    }
}

fn max_dim() -> usize {
    std::env::var("RENYI_LAB_DIMS").ok().and_then(|v| v.parse().ok()).unwrap_or(3)
}

fn conjecture2() -> Outcome {
    let start = Instant::now();
    let d = max_dim();
    let c = Campaign::Conjecture2 {
        max_dim: d,
        grid: DEFAULT_GRID.to_vec(),
    };
    let r = c.run(&opts(1000, SEED)).expect("campaign runs");
    let secs = start.elapsed().as_secs_f64();
    let by = &r.aggregate.min_margin_by_label;
    let ok = r.aggregate.violations == 0 && (d > 3 || secs <= 600.0);
    report(
        1,
        "conjecture2_replication",
        ok,
        format!(
            "dims<={d} rows {} violations {} near {} min petz {:.2e} min sandwiched {:.2e} {:.0}s",
            r.aggregate.rows,
            r.aggregate.violations,
            r.aggregate.near_violations,
            by["petz"],
            by["sandwiched"],
            secs
        ),
    )
}

fn duality() -> Outcome {
    let c = check_duality(SEED, 500, true, 1e-8);
    report(2, "duality", c.passed, format!("worst {:.2e}", c.worst))
}

fn sibson() -> Outcome {
    let c = check_sibson_oracle(SEED, 50, true, 1e-5);
    report(3, "sibson_consistency", c.passed, format!("worst {:.2e}", c.worst))
}

/// `ln` of the Schmidt rank at order zero.
fn pure_entropy(psi: &PureState, order: f64) -> f64 {
    let s = schmidt(psi).expect("bipartite");
    let p: Vec<f64> = s.coeffs.iter().map(|c| c * c).filter(|&v| v > 1e-14).collect();
    if order == 0.0 {
        return (p.len() as f64).ln();
    }
    renyi_entropy(&linalg::diag(&p), order).expect("valid spectrum")
}

fn product_extension(psi: &DensityOperator) -> WarmStart {
    let e = DensityOperator::diagonal(&[1.0], "E").expect("trivial flag");
    WarmStart::Extension(psi.tensor(&e).expect("tensor"))
}

fn closed_forms() -> Outcome {
    let cfg = OptimizerConfig::default().with_restarts(2).with_budget(2000).with_seed(SEED);
    let mut worst: f64 = 0.0;
    let mut rng = stream_rng(SEED, 4);
    for alpha in [0.5, 1.5, 2.0] {
        for shape in [SubsystemShape::bipartite(2, 2), SubsystemShape::bipartite(2, 3)] {
            let psi = random_pure(&shape, &mut rng);
            let rho = psi.density();
            let r = squashed_entanglement(&rho, alpha, Some(2), &cfg, &[product_extension(&rho)]).expect("squashed");
            worst = worst.max((r.value - pure_entropy(&psi, (2.0 - alpha) / alpha)).abs());
        }
        for d in [2, 3] {
            let phi = maximally_entangled(d).density();
            let ln_d = (d as f64).ln();
            let r = squashed_entanglement(&phi, alpha, Some(2), &cfg, &[product_extension(&phi)]).expect("squashed");
            worst = worst.max((r.value - ln_d).abs());
            let warm = [WarmStart::Povm(Povm::computational(d))];
            let r = discord_renyi(&phi, alpha, None, &cfg, &warm).expect("discord");
            worst = worst.max((r.value - ln_d).abs());
        }
    }
    report(4, "closed_form_oracles", worst <= 1e-6, format!("worst {worst:.2e}"))
}

fn vanishing() -> Outcome {
    let cfg = OptimizerConfig::default().with_restarts(1).with_budget(400).with_seed(SEED);
    let mut rng = stream_rng(SEED, 5);
    let mut sq: f64 = 0.0;
    let mut disc: f64 = 0.0;
    for k in 0..50 {
        let alpha = if k % 2 == 0 { 0.7 } else { 1.5 };
        let n = 2 + k % 3;
        let (rho, ens) = random_separable(2, 2, n, &mut rng);
        let r = squashed_entanglement(&rho, alpha, None, &cfg, &[WarmStart::Decomposition(ens)]).expect("squashed");
        sq = sq.max(r.value.abs());
        let cq = random_cq(2, 2, &mut rng);
        let r = discord_renyi(&cq, alpha, None, &cfg, &[]).expect("discord");
        disc = disc.max(r.value.abs());
    }
    report(
        5,
        "vanishing_cases",
        sq <= 1e-6 && disc <= 1e-6,
        format!("squashed {sq:.2e} discord {disc:.2e}"),
    )
}

fn lemmas() -> Outcome {
    let t = check_tensor_invariance(SEED, 100, true, 1e-9);
    let c = check_classical_conditioning(SEED, 100, true, 1e-9);
    report(
        6,
        "lemma_identities",
        t.passed && c.passed,
        format!("tensor {:.2e} classical {:.2e}", t.worst, c.worst),
    )
}

fn consistency() -> Outcome {
    let c = check_consistency(SEED, 100, true, 1e-9);
    report(7, "delta_cmi_consistency", c.passed, format!("worst {:.2e}", c.worst))
}

fn slope() -> Outcome {
    let c = check_variance_slope(SEED, 100, true, 1e-2);
    report(8, "variance_slope", c.passed, format!("worst relative {:.2e}", c.worst))
}

fn limits() -> Outcome {
    let c = check_von_neumann_limits(SEED, 100, true, 1e-3);
    report(9, "von_neumann_limits", c.passed, format!("worst {:.2e}", c.worst))
}

fn remainders() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [
        RemainderKind::Monotonicity,
        RemainderKind::JointConvexity,
        RemainderKind::Holevo,
        RemainderKind::Discord,
    ] {
        let r = Campaign::Remainder { kind, max_dim: 3 }.run(&opts(500, SEED)).expect("campaign runs");
        ok &= r.aggregate.min_margin >= -1e-8;
        parts.push(format!("{}:{:.2e}", r.campaign.trim_start_matches("remainder_"), r.aggregate.min_margin));
        if kind == RemainderKind::JointConvexity {
            let gap = r.aggregate.max_values["equivalence_gap"];
            ok &= gap <= 1e-9;
            parts.push(format!("equivalence:{gap:.2e}"));
        }
    }
    report(10, "remainder_campaigns", ok, parts.join(" "))
}

fn refinement() -> Outcome {
    let c = Campaign::Refinement {
        max_dim: 3,
        alphas: vec![0.3, 0.5, 0.7, 1.0, 1.5, 2.0],
    };
    let r = c.run(&opts(100, SEED)).expect("campaign runs");
    report(
        11,
        "rank_one_refinement",
        r.aggregate.min_margin >= -1e-9,
        format!("min margin {:.2e}", r.aggregate.min_margin),
    )
}

fn determinism() -> Outcome {
    let c = Campaign::Conjecture2 {
        max_dim: 3,
        grid: vec![0.3, 0.7, 1.5, 3.0, 10.0],
    };
    let a = c.run(&opts(50, SEED)).expect("campaign runs");
    let b = c.run(&opts(50, SEED)).expect("campaign runs");
    let mut serial = opts(50, SEED);
    serial.parallel = false;
    let s = c.run(&serial).expect("campaign runs");
    let same = a.body_json().unwrap() == b.body_json().unwrap();
    let par = a.rows == s.rows && a.body_json().unwrap() == s.body_json().unwrap();
    report(12, "determinism", same && par, format!("repeat {same} parallel=serial {par}"))
}

#[test]
fn acceptance() {
    let outcomes = [
        conjecture2(),
        duality(),
        sibson(),
        closed_forms(),
        vanishing(),
        lemmas(),
        consistency(),
        slope(),
        limits(),
        remainders(),
        refinement(),
        determinism(),
    ];
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| format!("{} {}: {}", o.id, o.name, o.detail))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:#?}");
}
