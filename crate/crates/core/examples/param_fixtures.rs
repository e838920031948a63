//! Parameter and MAC counts of the published schedules next to the figures
//! reported for them.

use widthsearch::arch::{fixtures, flop_count, param_count, ArchitectureSpec, ChannelSchedule};

fn main() -> widthsearch::Result<()> {
    use fixtures::published as p;
    let [m1, m2, m3] = p::resnet18_modified();
    let rows: Vec<(&str, ArchitectureSpec, ChannelSchedule, f64)> = vec![
        ("ResNet-18 original", fixtures::resnet18(), p::resnet18_original(), 11.54),
        ("ResNet-18 modified 1", fixtures::resnet18(), m1, 6.98),
        ("ResNet-18 modified 2", fixtures::resnet18(), m2, 9.94),
        ("ResNet-18 modified 3", fixtures::resnet18(), m3, 10.57),
        ("ResNet-18 basic original", fixtures::resnet18_basic(), p::resnet18_original(), 11.18),
        ("ResNet-34 original", fixtures::resnet34(), p::resnet34_original(), 22.22),
        ("ResNet-34 modified", fixtures::resnet34(), p::resnet34_modified(), 13.00),
        ("VGG-16 original", fixtures::vgg16(), p::vgg16_original(), 15.00),
        ("VGG-16 modified", fixtures::vgg16(), p::vgg16_modified(), 7.24),
    ];
    println!("{:<26} {:>10} {:>10} {:>8} {:>12}", "schedule", "params", "reported", "diff", "GMACs");
    for (name, spec, s, reported) in rows {
        let params = param_count(&spec, &s)? as f64 / 1e6;
        let macs = flop_count(&spec, &s)? as f64 / 1e9;
        println!(
            "{name:<26} {params:>9.3}M {reported:>9.2}M {:>+7.2}% {macs:>12.3}",
            100.0 * (params / reported - 1.0)
        );
    }
    Ok(())
}
