//! A small real search: networks are trained on synthetic images and
//! children inherit widened weights. Scaled down to finish in seconds.
//!
//! cargo run --release --example desk_search
//!
//! The full desk run is `widthsearch search --config configs/desk.json`.

use widthsearch::arch::fixtures;
use widthsearch::data::{channel_stats, normalize, stratified_split, synthetic_dataset, SyntheticParams};
use widthsearch::growth::Genotype;
use widthsearch::network::NetworkInstance;
use widthsearch::search::{individual_rng, run_search, Individual, SearchConfig, SearchContext, TrainingEvaluator};
use widthsearch::train::{evaluate_accuracy, train, TrainConfig};

fn main() -> widthsearch::Result<()> {
    let spec = fixtures::plain_cnn();
    let data = synthetic_dataset(&SyntheticParams::new(7, 1000, 4, [16, 16, 3]).with_difficulty(3.0, 0.4))?;
    let (tr, va) = stratified_split(&data, 200, 0)?;
    let stats = channel_stats(&tr);
    let (tr, va) = (normalize(&tr, &stats)?, normalize(&va, &stats)?);

    let cfg = SearchConfig {
        p1: 4,
        p2: 6,
        k: 2,
        child_epochs: 2,
        init_epochs: 3,
        max_generations: 12,
        ..SearchConfig::default()
    };
    let mut rng = individual_rng(cfg.seed, 0);
    let base = spec.uniform_schedule(8);
    let mut net = NetworkInstance::<f32>::materialize(&spec, &base, &mut rng)?;
    let train_cfg = TrainConfig::default();
    train(&mut net, &tr, &train_cfg.clone().with_epochs(cfg.init_epochs), None, &mut rng)?;
    println!("initial accuracy {:.3}, {} params", evaluate_accuracy(&net, &va, 256)?, net.param_count());

    let cfg = SearchConfig { param_budget: 3 * net.param_count(), ..cfg };
    let ctx = SearchContext::new(spec.clone(), cfg)?;
    let initial = Individual::initial(&spec, Genotype::uniform(spec.slot_count(), 8.0, ctx.config.mode), Some(net))?;
    let eval = TrainingEvaluator::new(tr, va, train_cfg.with_epochs(ctx.config.child_epochs));
    let out = run_search(&ctx, &initial, &eval, |r| {
        println!("{:>3} <- {:>3} {:<5} params {:>6} acc {:.3} best {:.3}", r.individual_id, r.parent_id, r.mutation_tag.tag(), r.params, r.fitness, r.best_fitness);
        Ok(())
    })?;
    println!("best {:?} at {:.3}", out.best.schedule.widths(), out.best.fitness().unwrap_or(0.0));
    Ok(())
}
