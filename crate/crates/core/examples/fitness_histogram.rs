//! A view of a run log: the share of individuals in each fitness
//! range, for successive windows of the run.
//!
//! cargo run --example fitness_histogram -- runs/desk/log.csv

use std::fs::File;

use widthsearch::search::{fitness_histogram, read_log};

fn main() -> widthsearch::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "runs/desk/log.csv".into());
    let Ok(file) = File::open(&path) else {
        eprintln!("no log at {path}; run `widthsearch search --config configs/desk.json` first");
        std::process::exit(2);
    };
    let log = read_log(file)?;
    let fits: Vec<f64> = log.iter().map(|r| r.fitness).collect();
    let (lo, hi) = fits.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &f| (a.min(f), b.max(f)));
    let bins = 5;
    let window = (fits.len() / 4).max(1);
    println!("fitness range {lo:.3} .. {hi:.3}, {} individuals", fits.len());
    for (i, chunk) in fits.chunks(window).enumerate() {
        let h = fitness_histogram(chunk, lo, hi, bins);
        let cells: Vec<String> = h.iter().map(|p| format!("{p:>5.1}%")).collect();
        println!("individuals {:>4}..{:<4} {}", i * window, i * window + chunk.len(), cells.join(" "));
    }
    Ok(())
}
