//! Acceptance suite. Runs every criterion at its pinned tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use gffresist::electric::{
    dissipated_power, effective_resistance, min_energy_flow_oracle, thomson_flow, ResistiveNetwork,
};
use gffresist::gff::{all_circuit_constraints, build_free_field, fundamental_constraints, FreeField};
use gffresist::graph::Multigraph;
use gffresist::verify::{
    appendix_check, check_concavity_segment, check_monotonicity, check_scaling, check_superadditivity,
    entropy_chain, melvin_chain, mix_seed, monte_carlo_variance_check, AppendixInstance, RandomInstance,
};
use gffresist::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

const SEED: u64 = 0x5eed_2024;
const INSTANCES: usize = 200;
/// Circuit enumeration is attempted only up to this many circuits.
const CIRCUIT_LIMIT: usize = 5_000;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn instances() -> Vec<RandomInstance> {
    (0..INSTANCES).map(|i| RandomInstance::generate(mix_seed(SEED, i as u64))).collect()
}

fn rel_diff(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

fn net(g: &Multigraph, r: &[f64]) -> ResistiveNetwork {
    ResistiveNetwork::new(g.clone(), r.to_vec()).expect("valid instance")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib<T>(r: gffresist::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn criterion_1(cases: &[RandomInstance]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, c) in cases.iter().enumerate() {
        let n = net(&c.topology, &c.r);
        let laplacian = lib(effective_resistance(&n, c.a, c.b))?;
        let thomson = lib(dissipated_power(&n, &lib(thomson_flow(&n, c.a, c.b))?))?;
        let oracle = lib(dissipated_power(&n, &lib(min_energy_flow_oracle(&n, c.a, c.b))?))?;
        let gff = lib(lib(build_free_field(&n, 0))?.potential_difference_variance(c.a, c.b))?;
        let routes = [laplacian, thomson, oracle, gff];
        for x in routes {
            for y in routes {
                worst = worst.max(rel_diff(x, y));
            }
        }
        ensure(worst <= 1e-9, || format!("instance {i}: routes {routes:?} disagree (rel {worst:e})"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{} instances, worst pairwise rel diff {worst:.2e}, {elapsed:.2?}", cases.len()))
}

fn criterion_2(cases: &[RandomInstance]) -> Outcome {
    let mut worst = f64::INFINITY;
    for (i, c) in cases.iter().enumerate() {
        let rep = lib(check_superadditivity(&c.topology, &c.r, &c.r_bar, c.a, c.b, 1e-8))?;
        let m = rep.inequalities[0].margin;
        worst = worst.min(m);
        ensure(m >= -1e-8 && rep.passed(), || format!("instance {i}: margin {m:e}"))?;
    }
    let pair = Multigraph::new(&["a", "b"], &[("a", "b"), ("a", "b")]).unwrap();
    let rep = lib(check_superadditivity(&pair, &[1.0, 1.0], &[1.0, 2.0], 0, 1, 1e-8))?;
    let m = rep.inequalities[0].margin;
    ensure((m - 1.0 / 30.0).abs() <= 1e-9, || format!("worked margin {m} != 1/30"))?;
    Ok(format!("min margin {worst:.3e}; worked margin {m:.12}"))
}

fn criterion_3(cases: &[RandomInstance]) -> Outcome {
    const H_HAT: &str = "h(Uhat_ab)";
    const H_GIVEN_HAT: &str = "h(sum eps Xhat | Ahat)";
    const H_GIVEN_SPLIT: &str = "h(sum eps Xhat | A, Abar)";
    const H_SUM: &str = "h(U_ab + Ubar_ab)";
    let check = |g: &Multigraph, r: &[f64], rb: &[f64], a, b| -> Result<gffresist::verify::VerificationReport, String> {
        let rep = lib(entropy_chain(g, r, rb, a, b, 1e-8))?;
        ensure(rep.passed(), || "chain failed".to_string())?;
        for (l, rr) in [(H_HAT, H_GIVEN_HAT), (H_GIVEN_SPLIT, H_SUM)] {
            let m = rep.find(l, rr).unwrap().margin;
            ensure(m.abs() <= 1e-9, || format!("equality {l} == {rr} off by {m:e}"))?;
        }
        let hat: Vec<f64> = r.iter().zip(rb).map(|(x, y)| x + y).collect();
        let r_hat = lib(effective_resistance(&net(g, &hat), a, b))?;
        let r_sum =
            lib(effective_resistance(&net(g, r), a, b))? + lib(effective_resistance(&net(g, rb), a, b))?;
        let m = rep.find(H_GIVEN_HAT, H_GIVEN_SPLIT).unwrap().margin;
        let expected = 0.5 * (r_hat / r_sum).ln();
        ensure((m - expected).abs() <= 1e-10, || format!("margin {m} vs 1/2 ln ratio {expected}"))?;
        Ok(rep)
    };
    for (i, c) in cases.iter().enumerate() {
        check(&c.topology, &c.r, &c.r_bar, c.a, c.b).map_err(|e| format!("instance {i}: {e}"))?;
    }
    let pair = Multigraph::new(&["a", "b"], &[("a", "b"), ("a", "b")]).unwrap();
    let rep = check(&pair, &[1.0, 1.0], &[1.0, 2.0], 0, 1)?;
    let (h_hat, h_sum) = (rep.number(H_HAT).unwrap(), rep.number(H_SUM).unwrap());
    ensure((h_hat - 1.510100).abs() <= 1e-5, || format!("h(Uhat) = {h_hat}"))?;
    ensure((h_sum - 1.496015).abs() <= 1e-5, || format!("h(U + Ubar) = {h_sum}"))?;
    Ok(format!("{} instances; worked chain {h_hat:.6} >= {h_sum:.6} nats", cases.len()))
}

fn criterion_4(cases: &[RandomInstance]) -> Outcome {
    const LABELS: [&str; 4] =
        ["Rhat_eff", "sum Ihat^2 R + sum Ihat^2 Rbar", "sum I^2 R + sum Ibar^2 Rbar", "R_eff + Rbar_eff"];
    let mut rng = ChaCha20Rng::seed_from_u64(SEED ^ 4);
    let mut worst_equal_case: f64 = 0.0;
    for (i, c) in cases.iter().enumerate() {
        let run = |rb: &[f64]| -> Result<f64, String> {
            let rep = lib(melvin_chain(&c.topology, &c.r, rb, c.a, c.b, 1e-8))?;
            for l in LABELS {
                ensure(rep.number(l).is_some(), || format!("missing {l}"))?;
            }
            for (l, r) in [(LABELS[0], LABELS[1]), (LABELS[2], LABELS[3])] {
                let m = rep.find(l, r).unwrap().margin;
                ensure(m.abs() <= 1e-9, || format!("{l} == {r} off by {m:e} (relative)"))?;
            }
            let m = rep.find(LABELS[1], LABELS[2]).unwrap().margin;
            ensure(m >= -1e-8 && rep.passed(), || format!("inequality margin {m:e}"))?;
            Ok(m)
        };
        run(&c.r_bar).map_err(|e| format!("instance {i}: {e}"))?;
        let scale: f64 = 10f64.powf(rng.random_range(-1.0..1.0));
        let proportional: Vec<f64> = c.r.iter().map(|x| scale * x).collect();
        let m = run(&proportional).map_err(|e| format!("instance {i} (Rbar = cR): {e}"))?;
        worst_equal_case = worst_equal_case.max(m.abs());
        ensure(m.abs() <= 1e-9, || format!("instance {i}: Rbar = {scale}R margin {m:e}"))?;
    }
    Ok(format!("{} instances; max |margin| with Rbar = cR: {worst_equal_case:.2e}", cases.len()))
}

fn criterion_5(cases: &[RandomInstance]) -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut pairs = 0usize;
    for (i, c) in cases.iter().enumerate() {
        let n = net(&c.topology, &c.r);
        let field = lib(build_free_field(&n, 0))?;
        let nv = c.topology.vertex_count();
        for a in 0..nv {
            for b in 0..nv {
                if a == b {
                    continue;
                }
                let var = lib(field.potential_difference_variance(a, b))?;
                let reff = lib(effective_resistance(&n, a, b))?;
                worst = worst.max(rel_diff(var, reff));
                pairs += 1;
                ensure(rel_diff(var, reff) <= 1e-9, || format!("instance {i} ({a},{b}): {var} vs {reff}"))?;
            }
        }
    }
    let zs: Vec<Result<f64, String>> = cases[..10]
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let rep = lib(monte_carlo_variance_check(&c.topology, &c.r, c.a, c.b, 1_000_000, 1000 + i as u64))?;
            let z = rep.number("z").unwrap();
            ensure(rep.passed(), || format!("mc instance {i}: z = {z}"))?;
            Ok(z)
        })
        .collect();
    let zs = zs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    let max_z = zs.iter().cloned().fold(0.0, f64::max);
    Ok(format!("{pairs} pairs, worst rel diff {worst:.2e}; 10 x 1e6 samples, max z {max_z:.3}, {elapsed:.2?}"))
}

fn svd_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let top = s.max();
    s.iter().filter(|&&x| x > 1e-9 * top.max(1.0)).count()
}

fn criterion_6(cases: &[RandomInstance]) -> Outcome {
    let mut checked = 0;
    let mut skipped = 0;
    let mut worst: f64 = 0.0;
    for (i, c) in cases.iter().enumerate() {
        let n = net(&c.topology, &c.r);
        let all = match all_circuit_constraints(&n, CIRCUIT_LIMIT) {
            Ok(set) => set,
            Err(Error::SizeLimitExceeded(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.to_string()),
        };
        let basis = lib(fundamental_constraints(&n))?;
        let cycle_rank = c.topology.edge_count() + 1 - c.topology.vertex_count();
        let (ra, rb) = (svd_rank(all.rows()), svd_rank(basis.rows()));
        ensure(ra == cycle_rank && rb == cycle_rank, || {
            format!("instance {i}: ranks {ra}, {rb}, expected {cycle_rank}")
        })?;
        let via_all = lib(FreeField::with_constraints(&n, 0, all))?;
        let via_basis = lib(build_free_field(&n, 0))?;
        let diff = (via_all.edge_field().covariance() - via_basis.edge_field().covariance()).amax();
        worst = worst.max(diff);
        ensure(diff <= 1e-9, || format!("instance {i}: covariance differs by {diff:e}"))?;
        checked += 1;
    }
    ensure(checked > 0, || "no instance was feasible".into())?;
    Ok(format!(
        "{checked} instances checked ({skipped} over {CIRCUIT_LIMIT} circuits skipped), worst diff {worst:.2e}"
    ))
}

fn criterion_7() -> Outcome {
    let mut degenerate = 0;
    for i in 0..INSTANCES as u64 {
        let inst = AppendixInstance::random(6, mix_seed(SEED ^ 7, i));
        let rep = lib(appendix_check(&inst, 1e-8, mix_seed(SEED ^ 77, i)))?;
        ensure(rep.passed(), || format!("instance {i} failed:\n{}", rep.render_text()))?;
        if rep.number("h(Vhat | W=0, Wbar=0)").is_none() {
            degenerate += 1;
        }
    }
    let inst = AppendixInstance {
        w_covariance: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        w_bar_covariance: DMatrix::identity(2, 2),
        v_from_w: DVector::from_column_slice(&[1.0, 0.0]),
        v_from_w_bar: DVector::from_column_slice(&[1.0, 0.0]),
        conditioning: DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    };
    let rep = lib(appendix_check(&inst, 1e-12, 1))?;
    let (hat, split) = (rep.number("Var(Vhat | What=0)").unwrap(), rep.number("Var(Vhat | W=0, Wbar=0)").unwrap());
    ensure(rep.passed(), || "worked instance failed".into())?;
    ensure((hat - 1.875).abs() <= 1e-12 && (split - 1.75).abs() <= 1e-12, || format!("{hat} >= {split}"))?;
    Ok(format!("{INSTANCES} random instances ({degenerate} with degenerate rhs); worked {hat} >= {split}"))
}

fn criterion_8(cases: &[RandomInstance]) -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(SEED ^ 8);
    let mut max_d2 = f64::NEG_INFINITY;
    for (i, c) in cases.iter().enumerate() {
        let (g, r) = (&c.topology, &c.r);
        let rep = lib(check_concavity_segment(g, r, &c.r_bar, 21, c.a, c.b, 1e-8))?;
        let d2 = rep.number("max d2").unwrap();
        max_d2 = max_d2.max(d2);
        ensure(d2 <= 1e-8 && rep.passed(), || format!("instance {i}: second difference {d2:e}"))?;
        let t = 10f64.powf(rng.random_range(-1.0..1.0));
        let rep = lib(check_scaling(g, r, t, c.a, c.b, 1e-8))?;
        ensure(rep.passed(), || format!("instance {i}: scaling by {t} failed"))?;
        let edge = rng.random_range(0..g.edge_count());
        let delta = 10f64.powf(rng.random_range(-1.0..1.0));
        let rep = lib(check_monotonicity(g, r, edge, delta, c.a, c.b, 1e-8))?;
        ensure(rep.passed(), || format!("instance {i}: monotonicity on edge {edge} failed"))?;
    }
    // The Wheatstone bridge is the smallest network that is not series-parallel
    // between its terminals.
    let bridge = Multigraph::from_indices(4, &[(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]).unwrap();
    let rep = lib(check_concavity_segment(
        &bridge,
        &[1.0, 2.0, 3.0, 4.0, 5.0],
        &[5.0, 1.0, 0.5, 1.0, 6.0],
        21,
        0,
        3,
        1e-8,
    ))?;
    let bridge_min = (1..20).map(|i| rep.number(&format!("d2[{i}]")).unwrap()).fold(f64::INFINITY, f64::min);
    ensure(rep.passed() && bridge_min < -1e-6, || format!("bridge min second difference {bridge_min:e}"))?;
    Ok(format!("max second difference {max_d2:.2e}; bridge min second difference {bridge_min:.3e}"))
}

fn criterion_9() -> Outcome {
    let mut compared = 0;
    for (file, args) in common::GOLDEN_CASES {
        if !file.ends_with(".txt") {
            continue;
        }
        let first = common::run_cli(args);
        let second = common::run_cli(args);
        ensure(first.status.code() == Some(0), || {
            format!("{file}: exit {:?}: {}", first.status.code(), String::from_utf8_lossy(&first.stderr))
        })?;
        ensure(first.stdout == second.stdout, || format!("{file}: output differs between runs"))?;
        let golden = std::fs::read(common::golden_dir().join(file)).map_err(|e| format!("{file}: {e}"))?;
        ensure(first.stdout == golden, || format!("{file}: output differs from golden file"))?;
        compared += 1;
    }
    Ok(format!("{compared} text reports byte-identical across runs and to golden files"))
}

fn main() {
    let cases = instances();
    let criteria: Vec<Criterion> = vec![
        ("triple-route agreement", Box::new(|| criterion_1(&cases))),
        ("superadditivity", Box::new(|| criterion_2(&cases))),
        ("entropy chain", Box::new(|| criterion_3(&cases))),
        ("power chain", Box::new(|| criterion_4(&cases))),
        ("free-field identity", Box::new(|| criterion_5(&cases))),
        ("circuit/basis equivalence", Box::new(|| criterion_6(&cases))),
        ("appendix lemma", Box::new(criterion_7)),
        ("concavity, scaling, monotonicity", Box::new(|| criterion_8(&cases))),
        ("CLI golden files", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("[criterion {}] PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[criterion {}] FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
