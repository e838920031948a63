//! Loads a CIFAR binary batch (or a synthetic stand-in), holds out a
//! stratified validation split and normalizes with training statistics.
//!
//! cargo run --example cifar_split -- path/to/data_batch_1.bin 2000

use widthsearch::data::{
    channel_stats, decode_binary_dataset, encode_binary_dataset, load_binary_dataset, normalize, stratified_split,
    synthetic_dataset, SyntheticParams,
};

fn main() -> widthsearch::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let data = match args.get(1) {
        Some(path) => load_binary_dataset(path, 10)?,
        None => {
            let synth = synthetic_dataset(&SyntheticParams::new(0, 500, 10, [32, 32, 3]))?;
            // quantized by the byte format, as a real file would be
            decode_binary_dataset(&encode_binary_dataset(&synth)?, 10)?
        }
    };
    let holdout = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(data.len() / 5);
    let (train, val) = stratified_split(&data, holdout, 0)?;
    println!("{} images -> {} train / {} validation", data.len(), train.len(), val.len());
    println!("validation per class {:?}", val.class_histogram());
    let stats = channel_stats(&train);
    println!("channel means {:.4?}\nchannel stds  {:.4?}", stats.means, stats.stds);
    let normed = normalize(&train, &stats)?;
    println!("normalized train means {:.2?}", channel_stats(&normed).means);
    Ok(())
}
