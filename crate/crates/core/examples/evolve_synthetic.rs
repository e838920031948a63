//! Runs the evolutionary loop with a synthetic fitness (closeness to a
//! parameter budget), so no training is involved. Shows population growth
//! and the best individual's size converging on the budget.

use widthsearch::arch::{fixtures, param_count};
use widthsearch::growth::Genotype;
use widthsearch::search::{budget_distance, run_search, Individual, SearchConfig, SearchContext};

fn main() -> widthsearch::Result<()> {
    let spec = fixtures::resnet18();
    let budget = param_count(&spec, &fixtures::published::resnet18_original())?;
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = SearchConfig {
        seed,
        param_budget: budget,
        max_generations: 200,
        ..SearchConfig::default()
    };
    let ctx = SearchContext::new(spec.clone(), cfg)?;
    let initial = Individual::initial(&spec, Genotype::uniform(spec.slot_count(), 32.0, ctx.config.mode), None)?;
    println!("initial {} params, budget {budget}", initial.params);
    let out = run_search(&ctx, &initial, &budget_distance(budget), |row| {
        println!(
            "{:>4} <- {:>4} {:<5} {:>9} pop {:>2}",
            row.individual_id,
            row.parent_id,
            row.mutation_tag.tag(),
            row.params,
            row.population_size
        );
        Ok(())
    })?;
    println!(
        "best {} with {} params ({:+.2}% of budget) after {} steps",
        out.best.id,
        out.best.params,
        100.0 * (out.best.params as f64 / budget as f64 - 1.0),
        out.steps
    );
    println!("schedule {:?}", out.best.schedule.widths());
    Ok(())
}
