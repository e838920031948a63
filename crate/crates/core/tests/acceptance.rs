//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use widthsearch::arch::{fixtures, param_count, ArchitectureSpec, ChannelSchedule, LayerSpec};
use widthsearch::cli::{search_run, widen_check, DatasetSource, Precision, RunConfig, WidenCheck};
use widthsearch::data::SyntheticParams;
use widthsearch::growth::{
    apply_increment, eval_growth, round_width, AccountingMode, Genotype, GrowthContext, GrowthFunctionId,
};
use widthsearch::search::{
    budget_distance, read_log, replay_schedules, run_search, Individual, SearchConfig, SearchContext,
    SyntheticFitness,
};
use widthsearch::tensor::SgdrSchedule;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn function_preservation() -> Outcome {
    let mut worst = Vec::new();
    for name in ["toy-3conv", "plain-cnn", "residual-toy"] {
        let spec = fixtures::by_name(name).unwrap();
        for (precision, tol) in [(Precision::F32, 1e-5), (Precision::F64, 1e-10)] {
            let cfg = WidenCheck {
                seed: 17,
                trials: 100,
                precision,
                ..WidenCheck::default()
            };
            let report = widen_check(&spec, &cfg).map_err(|e| e.to_string())?;
            let max = report.deviations.iter().map(|d| d.max_deviation).fold(0.0, f64::max);
            ensure(report.deviations.len() == 9, || format!("{name}: {} mutations checked", report.deviations.len()))?;
            ensure(max <= tol, || format!("{name} {precision:?}: deviation {max:e} > {tol:e}"))?;
            worst.push(format!("{name} {precision:?} {max:.1e}"));
        }
    }
    Ok(worst.join(", "))
}

fn random_context(rng: &mut ChaCha8Rng) -> GrowthContext {
    let n = rng.random_range(2..=64);
    let lambda = 1.0 - rng.random::<f64>();
    let mut k: Vec<usize> = (0..rng.random_range(0..4)).map(|_| rng.random_range(1..n)).collect();
    k.sort_unstable();
    k.dedup();
    GrowthContext::new(n, lambda, k).unwrap()
}

fn growth_algebra() -> Outcome {
    use GrowthFunctionId::*;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let ctx = random_context(&mut rng);
        let (n, l) = (ctx.n() as f64, ctx.lambda());
        let x = n * (1.0 - rng.random::<f64>());
        let f = |id, x| eval_growth(id, x, &ctx).unwrap();
        let mut residuals = vec![f(E, x) + f(B, x) - l, f(F, x) + f(A, x) - l, f(C, x) + f(D, x) - l];
        if x < n {
            residuals.push(f(B, x) - f(A, n - x));
        }
        for r in residuals {
            worst = worst.max(r.abs());
        }
        ensure(worst <= 1e-12, || format!("identity residual {worst:e} at N={n} lambda={l} x={x}"))?;
        let y = x + (n - x) * rng.random::<f64>();
        for id in GrowthFunctionId::ALL {
            let (a, b) = (f(id, x), f(id, y));
            ensure((0.0..=l).contains(&a) && (0.0..=l).contains(&b), || format!("{id} leaves [0, lambda]"))?;
            let ok = match id {
                A | C | E | G => a <= b,
                B | D | F | H => a >= b,
                Const => a == b,
            };
            ensure(ok, || format!("{id} not monotone between {x} and {y}: {a} vs {b}"))?;
        }
    }
    Ok(format!("1000 draws, worst identity residual {worst:.1e}"))
}

fn compounding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let mut checked = 0;
    for _ in 0..300 {
        let ctx = random_context(&mut rng);
        let base: Vec<f64> = (0..ctx.n()).map(|_| 2.0 * rng.random_range(2..40) as f64).collect();
        let history: Vec<GrowthFunctionId> = (0..rng.random_range(0..8))
            .map(|_| GrowthFunctionId::ALL[rng.random_range(0..9)])
            .collect();
        let build = |h: &[GrowthFunctionId]| {
            h.iter().fold(Genotype::new(base.clone(), AccountingMode::Compound), |g, &id| {
                apply_increment(&g, id, &ctx).unwrap()
            })
        };
        let g = build(&history);
        let mut shuffled = history.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let p = build(&shuffled);
        ensure(p.multipliers == g.multipliers, || format!("history {history:?} not permutation invariant"))?;
        ensure(p.realize_slots() == g.realize_slots(), || "realized schedules differ".into())?;
        let oracle: Vec<usize> = (0..ctx.n())
            .map(|i| {
                let prod: f64 = history
                    .iter()
                    .map(|&id| 1.0 + eval_growth(id, (i + 1) as f64, &ctx).unwrap())
                    .product();
                round_width(base[i] * prod)
            })
            .collect();
        ensure(oracle == g.realize_slots(), || format!("oracle {oracle:?} vs {:?}", g.realize_slots()))?;
        checked += 1;
    }
    Ok(format!("{checked} random histories"))
}

fn gradients() -> Outcome {
    let mut report = Vec::new();
    let plain = common::plain_spec();
    let residual = common::residual_spec();
    let cases = [
        (plain.clone(), ChannelSchedule(vec![4, 4, 4])),
        (residual.clone(), residual.expand_slots(&[4, 4, 4, 4, 4, 2]).unwrap()),
    ];
    for (spec, schedule) in cases {
        let (err, count) = common::worst_relative_error(&spec, schedule, 0);
        ensure(count <= 1000, || format!("{} has {count} parameters", spec.name))?;
        ensure(err <= common::GRAD_TOLERANCE, || format!("{}: relative error {err:e}", spec.name))?;
        report.push(format!("{} ({count} params) {err:.1e}", spec.name));
    }
    Ok(report.join(", "))
}

fn parameter_counts() -> Outcome {
    use fixtures::published as p;
    let [_, m2, _] = p::resnet18_modified();
    let cases = [
        ("modified ResNet-18", param_count(&fixtures::resnet18(), &m2), 9.94e6),
        ("basic-block ResNet-18", param_count(&fixtures::resnet18_basic(), &p::resnet18_original()), 11.18e6),
        ("modified VGG-16", param_count(&fixtures::vgg16(), &p::vgg16_modified()), 7.24e6),
    ];
    let mut report = Vec::new();
    for (name, got, want) in cases {
        let got = got.map_err(|e| e.to_string())? as f64;
        let rel = got / want - 1.0;
        ensure(rel.abs() <= 0.03, || format!("{name}: {got} vs {want} ({:+.2}%)", 100.0 * rel))?;
        report.push(format!("{name} {:.2}M ({:+.2}%)", got / 1e6, 100.0 * rel));
    }
    let toy = ArchitectureSpec {
        name: "single-conv".into(),
        input: [32, 32, 3],
        classes: 10,
        layers: vec![LayerSpec::Conv {
            kernel: 3,
            stride: 1,
            width: None,
            batch_norm: false,
            bias: false,
            relu: true,
        }],
    };
    let single = param_count(&toy, &ChannelSchedule(vec![16])).map_err(|e| e.to_string())?;
    ensure(single == 432, || format!("single conv has {single} params"))?;
    report.push("single conv 432".into());
    Ok(report.join(", "))
}

fn evolution_dynamics() -> Outcome {
    let spec = fixtures::resnet18();
    let initial = |ctx: &SearchContext| {
        Individual::initial(&spec, Genotype::uniform(spec.slot_count(), 32.0, ctx.config.mode), None).unwrap()
    };

    let cfg = SearchConfig {
        seed: 3,
        param_budget: u64::MAX,
        max_generations: 60,
        ..SearchConfig::default()
    };
    let ctx = SearchContext::new(spec.clone(), cfg).unwrap();
    let eval = SyntheticFitness::new(|ind: &Individual| ((ind.id * 2654435761) % 1000) as f64 / 1000.0);
    let out = run_search(&ctx, &initial(&ctx), &eval, |_| Ok(())).map_err(|e| e.to_string())?;
    let sizes: Vec<usize> = out.log.iter().map(|r| r.population_size).collect();
    let expected: Vec<usize> = (1..=20).chain(std::iter::repeat_n(20, sizes.len() - 20)).collect();
    ensure(sizes == expected, || format!("population sizes {sizes:?}"))?;
    let best: Vec<f64> = out.log[11..].iter().map(|r| r.best_fitness).collect();
    ensure(best.windows(2).all(|w| w[1] >= w[0]), || "best fitness decreased".into())?;

    let budget = fixtures::published::resnet18_original();
    let budget = param_count(&fixtures::resnet18(), &budget).unwrap();
    let run = |seed: u64| {
        let cfg = SearchConfig {
            seed,
            param_budget: budget,
            max_generations: 200,
            ..SearchConfig::default()
        };
        let ctx = SearchContext::new(spec.clone(), cfg).unwrap();
        let out = run_search(&ctx, &initial(&ctx), &budget_distance(budget), |_| Ok(())).unwrap();
        let gap = (out.best.params as f64 / budget as f64 - 1.0).abs();
        (out.budget_reached && gap <= 0.05, gap, out.steps)
    };
    let (ok, gap, steps) = run(0);
    ensure(ok, || format!("seed 0 ends {:.1}% from the budget after {steps} steps", 100.0 * gap))?;
    let sweep = (0..100).filter(|&s| run(s).0).count();
    Ok(format!(
        "sizes 12 -> 20 -> 20, budget {:.2}M reached within {:.1}% after {steps} mutations; {sweep}/100 seeds within 5%",
        budget as f64 / 1e6,
        100.0 * gap,
    ))
}

fn desk_config(dir: &std::path::Path) -> RunConfig {
    RunConfig {
        spec: "fixture:plain-cnn".into(),
        base_width: 8,
        dataset: DatasetSource::Synthetic(SyntheticParams::new(7, 2000, 4, [16, 16, 3]).with_difficulty(3.0, 0.4)),
        holdout: 400,
        output_dir: dir.to_path_buf(),
        verbosity: 0,
        budget_multiplier: 4.0,
        search: SearchConfig {
            seed: 1,
            child_epochs: 3,
            init_epochs: 3,
            max_generations: 200,
            ..SearchConfig::default()
        },
        ..RunConfig::default()
    }
}

fn desk_search() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut logs = Vec::new();
    let mut summaries = Vec::new();
    for run in ["first", "replay"] {
        let dir = root.path().join(run);
        let cfg = desk_config(&dir);
        let t = Instant::now();
        summaries.push((search_run(&cfg).map_err(|e| e.to_string())?, t.elapsed()));
        let f = std::fs::File::open(dir.join("log.csv")).map_err(|e| e.to_string())?;
        logs.push(read_log(f).map_err(|e| e.to_string())?);
    }
    let (summary, took) = &summaries[0];
    ensure(*took < Duration::from_secs(30 * 60), || format!("search took {took:?}"))?;
    ensure(summary.budget_reached, || "budget not reached".into())?;
    ensure(summary.best.fitness >= summary.seed_best_fitness, || {
        format!("best {} below seeded best {}", summary.best.fitness, summary.seed_best_fitness)
    })?;
    ensure(
        logs[0].len() == logs[1].len() && logs[0].iter().zip(&logs[1]).all(|(a, b)| a.same_event(b)),
        || "replayed log differs".into(),
    )?;

    let cfg = desk_config(root.path());
    let spec = cfg.spec().unwrap();
    let ctx = SearchContext::new(spec.clone(), cfg.search.clone()).unwrap();
    let g0 = Genotype::uniform(spec.slot_count(), 8.0, AccountingMode::Compound);
    let replayed = replay_schedules(&ctx, &g0, &logs[0]).map_err(|e| e.to_string())?;
    let schedules: HashMap<u64, ChannelSchedule> = replayed.into_iter().collect();
    ensure(schedules[&summary.best.id] == summary.best.schedule, || "best schedule does not replay".into())?;
    Ok(format!(
        "{} steps in {:.0}s, best fitness {:.4} vs seeded {:.4}, params {} of budget {}, replay identical ({:.0}s total)",
        summary.steps,
        took.as_secs_f64(),
        summary.best.fitness,
        summary.seed_best_fitness,
        summary.best.params,
        summary.param_budget,
        start.elapsed().as_secs_f64()
    ))
}

fn sgdr() -> Outcome {
    let s = SgdrSchedule::new(0.05, 1.0, 2.0);
    let b = s.restart_boundaries(31.0);
    ensure(b == vec![1.0, 3.0, 7.0, 15.0, 31.0], || format!("boundaries {b:?}"))?;
    let mut start = 0.0;
    for &end in &b {
        let half = start + (end - start) / 2.0;
        ensure((s.rate_at(start) - 0.05).abs() <= 1e-12, || format!("rate at restart {start}"))?;
        ensure((s.rate_at(half) - 0.025).abs() <= 1e-12, || format!("rate at half period {half}"))?;
        start = end;
    }
    Ok("restarts at 1, 3, 7, 15, 31".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("function preservation", function_preservation),
        ("growth-function algebra", growth_algebra),
        ("compounding", compounding),
        ("gradient correctness", gradients),
        ("parameter-count fixtures", parameter_counts),
        ("evolution dynamics", evolution_dynamics),
        ("end-to-end desk search", desk_search),
        ("SGDR schedule", sgdr),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || label.ends_with(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {label} ({name}, {secs:.1}s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {label} ({name}, {secs:.1}s): {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
