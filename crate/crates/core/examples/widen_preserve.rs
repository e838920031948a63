//! Widens a trained-looking network and measures how far the logits move,
//! first exactly (no noise) and then with symmetry-breaking noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use widthsearch::arch::{fixtures, param_count};
use widthsearch::network::NetworkInstance;
use widthsearch::tensor::Tensor4;
use widthsearch::widen::{max_deviation, widen_network, NoiseSpec};

fn main() -> widthsearch::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let spec = fixtures::residual_toy();
    let narrow = spec.uniform_schedule(8);
    let wide = spec.expand_slots(&[12, 10, 16, 14, 20])?;

    let mut net = NetworkInstance::<f32>::materialize(&spec, &narrow, &mut rng)?;
    net.randomize_normalization(&mut rng);
    let [h, w, c] = spec.input;
    let x = Tensor4::from_fn([8, h, w, c], |_| StandardNormal.sample(&mut rng));
    let before = net.logits(&x)?;

    for (label, noise) in [("exact", NoiseSpec::none()), ("noisy", NoiseSpec::default())] {
        let mut child = net.clone();
        let maps = widen_network(&mut child, &wide, &noise, &mut rng)?;
        println!(
            "{label}: {} groups widened, {} -> {} params, max logit deviation {:.2e}",
            maps.len(),
            param_count(&spec, &narrow)?,
            child.param_count(),
            max_deviation(&before, &child.logits(&x)?)
        );
    }
    Ok(())
}
