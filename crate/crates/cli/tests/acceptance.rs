//! Acceptance checks, one line each, run in sequence so the timings are
//! clean. Exits non-zero if any check misses its tolerance or time bound.

use std::collections::HashMap;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use haltonmask::config::{ModelParams, NumericChoice, PlanChoice, RadiusSetting, SchedulerChoice};
use haltonmask::schedule_file::{self, ScheduleHeader, ScheduleParams};
use haltonmask_core::gridmap::halton_token_order;
use haltonmask_core::infotheory::aggregate_mi;
use haltonmask_core::lds::{radical_inverse_exact, RadicalInverseIter};
use haltonmask_core::metrics::star_discrepancy;
use haltonmask_core::schedulers::{
    halton_schedule, random_schedule, raster_schedule, step_size_plan, CellMarginal,
};
use haltonmask_core::{
    halton_2d, radical_inverse, run_sampling, ConfidenceConfig, Coord, GridSpec, HaltonPoint2D,
    MarginalPredictor, MaskState, PlanShape, RadixBase, Schedule, SchedulerKind, StepSizePlan,
    ToyJointModel,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

struct Check {
    id: u32,
    name: &'static str,
    bound: Duration,
    run: fn() -> Outcome,
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn grid(h: usize, w: usize) -> GridSpec {
    GridSpec::new(h, w).unwrap()
}

fn h(dist: &[f64]) -> f64 {
    dist.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Reverses the base-`b` digits of `i` behind the radix point, reduced.
fn reversed_fraction(mut i: u64, b: u64) -> (u128, u128) {
    let (mut numer, mut denom) = (0u128, 1u128);
    while i > 0 {
        numer = numer * b as u128 + (i % b) as u128;
        denom *= b as u128;
        i /= b;
    }
    let g = gcd(numer, denom);
    (numer / g, denom / g)
}

fn radical_inverse_exactness() -> Outcome {
    for b in [2u32, 3] {
        let base = RadixBase::new(b).unwrap();
        for i in 1..=16u64 {
            let (n, d) = reversed_fraction(i, b as u64);
            let exact = radical_inverse_exact(i, base).unwrap();
            if (exact.numer(), exact.denom()) != (n, d) {
                return Err(format!(
                    "base {b}, i={i}: {}/{} vs {n}/{d}",
                    exact.numer(),
                    exact.denom()
                ));
            }
            let float = radical_inverse(i, base).unwrap();
            if (float - n as f64 / d as f64).abs() > 1e-15 {
                return Err(format!("base {b}, i={i}: float {float}"));
            }
        }
    }
    Ok("32 values exact, floats within 1e-15".into())
}

fn incremental_matches_direct() -> Outcome {
    for b in [2u32, 3] {
        let base = RadixBase::new(b).unwrap();
        let mut it = RadicalInverseIter::new(base);
        for i in 1..=10_000u64 {
            let inc = it.next_f64().ok_or("incremental generator ended early")?;
            let direct = radical_inverse(i, base).unwrap();
            if inc.to_bits() != direct.to_bits() {
                return Err(format!("base {b}, i={i}: {inc} vs {direct}"));
            }
        }
    }
    Ok("2 x 10^4 values bitwise equal".into())
}

fn halton_order_coverage() -> Outcome {
    for n in [16usize, 32, 64] {
        let g = grid(n, n);
        let runs: Vec<Vec<Coord>> = (0..3)
            .map(|_| halton_token_order(g).unwrap().into_coords())
            .collect();
        let mut sorted = runs[0].clone();
        sorted.sort();
        if sorted != g.cells().collect::<Vec<_>>() {
            return Err(format!("{g}: not a permutation"));
        }
        if runs[1] != runs[0] || runs[2] != runs[0] {
            return Err(format!("{g}: runs differ"));
        }
    }
    Ok("16x16, 32x32, 64x64 are permutations, identical over 3 runs".into())
}

/// Cheap stand-in predictor whose confidence varies by cell.
struct Patterned;

impl MarginalPredictor for Patterned {
    fn vocab(&self) -> usize {
        3
    }

    fn predict(&self, state: &MaskState) -> haltonmask_core::Result<Vec<CellMarginal>> {
        Ok(state
            .masked()
            .into_iter()
            .map(|c| {
                let a = 1.0 + ((c.row * 7 + c.col * 3 + state.masked_count()) % 5) as f64;
                let total = a + 2.0;
                CellMarginal {
                    coord: c,
                    probs: vec![a / total, 1.0 / total, 1.0 / total],
                }
            })
            .collect())
    }
}

fn partition_property() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for case in 0..100 {
        let g = grid(rng.random_range(1..=16), rng.random_range(1..=16));
        let n = g.cell_count();
        let steps = rng.random_range(1..=n);
        let shape = if rng.random_bool(0.5) {
            PlanShape::Cosine
        } else {
            PlanShape::Linear
        };
        let plan = step_size_plan(n, steps, shape).map_err(|e| e.to_string())?;
        let seed = rng.random();
        let schedule = match case % 3 {
            0 => halton_schedule(g, &plan).map_err(|e| e.to_string())?,
            1 => random_schedule(g, &plan, seed).map_err(|e| e.to_string())?,
            _ => {
                let kind = SchedulerKind::Confidence(ConfidenceConfig::default());
                run_sampling(&Patterned, &kind, g, &plan, seed, 1.0)
                    .and_then(|t| t.schedule())
                    .map_err(|e| e.to_string())?
            }
        };
        let sizes: Vec<usize> = schedule.steps().iter().map(Vec::len).collect();
        if sizes != plan.counts() {
            return Err(format!(
                "case {case} on {g}: sizes {sizes:?} vs plan {:?}",
                plan.counts()
            ));
        }
        let mut all: Vec<Coord> = schedule.steps().concat();
        all.sort();
        let before = all.len();
        all.dedup();
        if before != all.len() {
            return Err(format!("case {case} on {g}: a cell is revealed twice"));
        }
        if all != g.cells().collect::<Vec<_>>() {
            return Err(format!("case {case} on {g}: cells missing"));
        }
    }
    Ok("100 cases disjoint, complete and matching their plans".into())
}

fn low_discrepancy() -> Outcome {
    let mut details = Vec::new();
    for k in [16usize, 64, 256] {
        let halton = star_discrepancy(halton_2d(k).unwrap().points()).unwrap();
        let mut total = 0.0;
        for seed in 0..20u64 {
            let mut rng = StdRng::seed_from_u64(1000 + seed);
            let pts: Vec<HaltonPoint2D> = (0..k)
                .map(|_| HaltonPoint2D::new(rng.random(), rng.random()).unwrap())
                .collect();
            total += star_discrepancy(&pts).unwrap();
        }
        let mean = total / 20.0;
        details.push(format!("k={k}: {halton:.4} < {mean:.4}"));
        if halton >= mean {
            return Err(details.join(", "));
        }
    }
    Ok(details.join(", "))
}

/// Σ over steps and cells of E[H(cell | earlier steps)] minus H(X), by
/// grouping joint-table states on their revealed prefix.
fn entropy_identity_rhs(m: &ToyJointModel, s: &Schedule) -> f64 {
    let g = m.grid();
    let states: Vec<(f64, Vec<usize>)> = m
        .joint_table()
        .unwrap()
        .iter()
        .map(|(_, p, x)| (p, x))
        .collect();
    let h_joint = h(&states.iter().map(|s| s.0).collect::<Vec<_>>());
    let mut prefix: Vec<usize> = Vec::new();
    let mut total = 0.0;
    for step in s.steps() {
        for &c in step {
            let ci = g.index(c);
            let mut groups: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
            for (p, x) in &states {
                let key = prefix.iter().map(|&i| x[i]).collect();
                groups.entry(key).or_insert_with(|| vec![0.0; m.vocab()])[x[ci]] += p;
            }
            for dist in groups.values() {
                let mass: f64 = dist.iter().sum();
                total += mass * h(&dist.iter().map(|p| p / mass).collect::<Vec<_>>());
            }
        }
        prefix.extend(step.iter().map(|&c| g.index(c)));
    }
    total - h_joint
}

fn mi_identity() -> Outcome {
    let g = grid(2, 2);
    let mut worst: f64 = 0.0;
    for beta in [0.0, 1.0] {
        let m = ToyJointModel::with_defaults(g, 2, beta, 1.0).unwrap();
        for seed in 0..5u64 {
            let plan = step_size_plan(4, 1 + seed as usize % 4, PlanShape::Linear).unwrap();
            let s = random_schedule(g, &plan, 40 + seed).unwrap();
            let lhs = aggregate_mi(&m, &s).unwrap();
            worst = worst.max((lhs - entropy_identity_rhs(&m, &s)).abs());
        }
    }
    ensure(
        worst <= 1e-9,
        format!("max gap {worst:.2e} over 10 schedules"),
    )
}

fn extremes() -> Outcome {
    let g = grid(2, 2);
    let m = ToyJointModel::with_defaults(g, 2, 1.0, 1.0).unwrap();
    let singleton = halton_schedule(g, &StepSizePlan::singleton(4).unwrap()).unwrap();
    let one_step = Schedule::new(g, vec![g.cells().collect()]).unwrap();
    let single_mi = aggregate_mi(&m, &singleton).unwrap();
    let table = m.joint_table().unwrap();
    let states: Vec<(f64, Vec<usize>)> = table.iter().map(|(_, p, x)| (p, x)).collect();
    let marginal_sum: f64 = (0..4)
        .map(|i| {
            let mut d = vec![0.0; 2];
            for (p, x) in &states {
                d[x[i]] += p;
            }
            h(&d)
        })
        .sum();
    let tc = marginal_sum - h(&states.iter().map(|s| s.0).collect::<Vec<_>>());
    let gap = (aggregate_mi(&m, &one_step).unwrap() - tc).abs();
    ensure(
        single_mi <= 1e-12 && gap <= 1e-9,
        format!("singleton {single_mi:.2e}, single step vs total correlation {gap:.2e}"),
    )
}

fn spreading_lowers_mi() -> Outcome {
    let g = grid(3, 3);
    let m = ToyJointModel::with_defaults(g, 2, 1.0, 1.0).unwrap();
    let plan = step_size_plan(9, 3, PlanShape::Linear).unwrap();
    let halton = aggregate_mi(&m, &halton_schedule(g, &plan).unwrap()).unwrap();
    let blocks = aggregate_mi(&m, &raster_schedule(g, &plan).unwrap()).unwrap();
    ensure(
        halton < blocks,
        format!("halton {halton:.4} nats < row blocks {blocks:.4} nats"),
    )
}

fn spread_and_entropy_direction() -> Outcome {
    let g = grid(8, 8);
    let m = ToyJointModel::with_defaults(g, 2, 1.0, 1.0).unwrap();
    let plan = step_size_plan(64, 8, PlanShape::Linear).unwrap();
    let seed = 0;
    let halton =
        run_sampling(&m, &SchedulerKind::Halton, g, &plan, seed, 1.0).map_err(|e| e.to_string())?;
    let greedy = SchedulerKind::Confidence(ConfidenceConfig::greedy());
    let conf = run_sampling(&m, &greedy, g, &plan, seed, 1.0).map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    for (a, b) in halton.steps.iter().zip(&conf.steps).skip(1) {
        let (x, y) = (
            a.metrics.intra_step_min_nn_distance,
            b.metrics.intra_step_min_nn_distance,
        );
        if x <= y {
            problems.push(format!(
                "step {} min-NN halton {x:.3} <= confidence {y:.3}",
                a.metrics.step_index
            ));
        }
    }
    let last = |t: &haltonmask_core::SamplingTrace| t.steps.last().unwrap().metrics.entropy_sum;
    let (hl, cl) = (last(&halton), last(&conf));
    let entropy = format!("final-step entropy halton {hl:.3} vs confidence {cl:.3}");
    if hl >= cl {
        problems.push(entropy.clone());
    }
    if problems.is_empty() {
        Ok(format!("min-NN larger at steps 2-8, {entropy}"))
    } else {
        Err(format!("{}; {entropy}", problems.join("; ")))
    }
}

fn sampling_exactness() -> Outcome {
    const RUNS: u64 = 100_000;
    let g = grid(2, 2);
    let m = ToyJointModel::with_defaults(g, 2, 1.0, 1.0).unwrap();
    let table = m.joint_table().unwrap();
    let joint: Vec<f64> = table.iter().map(|(_, p, _)| p).collect();
    let marginals = m
        .conditional_marginals(&MaskState::fully_masked(g, 2))
        .unwrap();
    let product: Vec<f64> = table
        .iter()
        .map(|(_, _, x)| {
            x.iter()
                .zip(&marginals)
                .map(|(&v, mg)| mg.probs[v])
                .product()
        })
        .collect();
    let tv = |p: &[f64], q: &[f64]| 0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let empirical = |plan: &StepSizePlan| -> Result<Vec<f64>, String> {
        let mut counts = [0u64; 16];
        for seed in 0..RUNS {
            let t = run_sampling(&m, &SchedulerKind::Halton, g, plan, seed, 1.0)
                .map_err(|e| e.to_string())?;
            counts[t.final_grid.iter().fold(0, |acc, &v| acc * 2 + v)] += 1;
        }
        Ok(counts.iter().map(|&c| c as f64 / RUNS as f64).collect())
    };
    let one_at_a_time = tv(&empirical(&StepSizePlan::singleton(4).unwrap())?, &joint);
    let all_at_once = tv(
        &empirical(&StepSizePlan::from_counts(vec![4]).unwrap())?,
        &joint,
    );
    let exact_gap = tv(&product, &joint);
    ensure(
        one_at_a_time <= 0.02 && all_at_once >= exact_gap - 0.02,
        format!(
            "singleton TV {one_at_a_time:.4} <= 0.02; one-step TV {all_at_once:.4} vs product gap {exact_gap:.4}"
        ),
    )
}

fn cli_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let g = grid(5, 7);
    let plan = step_size_plan(35, 6, PlanShape::Cosine).unwrap();
    let schedule = random_schedule(g, &plan, 12).unwrap();
    let header = ScheduleHeader {
        version: 1,
        height: 5,
        width: 7,
        steps: 6,
        scheduler: SchedulerChoice::Random,
        seed: Some(12),
        params: ScheduleParams {
            plan: PlanChoice::Cosine,
            numeric_mode: NumericChoice::Rational,
            gumbel_scale: Some(4.5),
            softmax_temperature: Some(1.0),
            temperature: Some(0.7),
            model: Some(ModelParams {
                vocab: 3,
                beta: 0.25,
                lambda: 1.5,
                radius: RadiusSetting::Distance(2.0),
            }),
        },
    };
    let path = dir.path().join("schedule.json");
    schedule_file::write(&path, &header, &schedule).map_err(|e| e.to_string())?;
    let (h2, s2) = schedule_file::read(&path).map_err(|e| e.to_string())?;
    if h2 != header || s2 != schedule {
        return Err("schedule file did not read back identically".into());
    }

    let csv = |sub: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(sub);
        let status = Command::new(env!("CARGO_BIN_EXE_haltonmask"))
            .args([
                "compare", "--grid", "3x3", "--steps", "4", "--exact", "--seed", "21", "--out",
            ])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        std::fs::read(out.join("metrics.csv")).map_err(|e| e.to_string())
    };
    let (a, b) = (csv("a")?, csv("b")?);
    ensure(
        a == b,
        format!(
            "schedule file identical; metrics CSV {} bytes, byte-identical: {}",
            a.len(),
            a == b
        ),
    )
}

fn main() {
    let checks = [
        Check {
            id: 1,
            name: "radical inverse exactness",
            bound: Duration::from_secs(1),
            run: radical_inverse_exactness,
        },
        Check {
            id: 2,
            name: "incremental vs direct radical inverse",
            bound: Duration::from_secs(1),
            run: incremental_matches_direct,
        },
        Check {
            id: 3,
            name: "halton order coverage",
            bound: Duration::from_secs(5),
            run: halton_order_coverage,
        },
        Check {
            id: 4,
            name: "schedule partition property",
            bound: Duration::from_secs(10),
            run: partition_property,
        },
        Check {
            id: 5,
            name: "low discrepancy",
            bound: Duration::from_secs(30),
            run: low_discrepancy,
        },
        Check {
            id: 6,
            name: "aggregate MI entropy identity",
            bound: Duration::from_secs(10),
            run: mi_identity,
        },
        Check {
            id: 7,
            name: "singleton and single-step extremes",
            bound: Duration::from_secs(5),
            run: extremes,
        },
        Check {
            id: 8,
            name: "spread schedule lowers aggregate MI",
            bound: Duration::from_secs(60),
            run: spreading_lowers_mi,
        },
        Check {
            id: 9,
            name: "halton vs greedy confidence on 8x8",
            bound: Duration::from_secs(60),
            run: spread_and_entropy_direction,
        },
        Check {
            id: 10,
            name: "sampling statistical exactness",
            bound: Duration::from_secs(120),
            run: sampling_exactness,
        },
        Check {
            id: 11,
            name: "CLI round trip",
            bound: Duration::from_secs(5),
            run: cli_round_trip,
        },
    ];

    // Written straight to stderr so the lines show without --nocapture.
    let mut err = std::io::stderr();
    let mut failed = 0;
    for c in &checks {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let in_time = took <= c.bound;
        let pass = outcome.is_ok() && in_time;
        failed += usize::from(!pass);
        let detail = match &outcome {
            Ok(d) | Err(d) => d,
        };
        let timing = format!(
            "{:.2}s, bound {}s{}",
            took.as_secs_f64(),
            c.bound.as_secs(),
            if in_time { "" } else { ", too slow" }
        );
        let _ = writeln!(
            err,
            "acceptance {:>2} {} {:<38} [{timing}] {detail}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name
        );
    }
    let _ = writeln!(
        err,
        "acceptance: {} of {} passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
