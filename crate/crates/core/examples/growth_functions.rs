//! Prints the nine growth functions over a ResNet-18-sized network and shows
//! how compound and fixed-base accounting diverge under repeated mutations.

use widthsearch::arch::fixtures;
use widthsearch::growth::{apply_increment, eval_growth, AccountingMode, Genotype, GrowthContext, GrowthFunctionId};

fn main() -> widthsearch::Result<()> {
    let spec = fixtures::resnet18();
    let ctx = GrowthContext::for_spec(&spec, 0.2)?;
    println!("N = {}, lambda = {}, boundaries {:?}", ctx.n(), ctx.lambda(), ctx.boundaries());

    print!("{:>5}", "x");
    for id in GrowthFunctionId::ALL {
        print!("{:>8}", id.tag());
    }
    println!();
    for x in 1..=ctx.n() {
        print!("{x:>5}");
        for id in GrowthFunctionId::ALL {
            print!("{:>8.4}", eval_growth(id, x as f64, &ctx)?);
        }
        println!();
    }

    let history = [GrowthFunctionId::A, GrowthFunctionId::Const, GrowthFunctionId::G, GrowthFunctionId::A];
    for mode in [AccountingMode::Compound, AccountingMode::FixedBase] {
        let mut g = Genotype::uniform(ctx.n(), 32.0, mode);
        for id in history {
            g = apply_increment(&g, id, &ctx)?;
        }
        println!("{mode:?} after {history:?}:\n  {:?}", g.realize_slots());
    }
    Ok(())
}
