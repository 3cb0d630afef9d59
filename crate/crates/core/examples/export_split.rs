//! Writes the yeast-shaped synthetic dataset and its 70/30 split as CSV.
//!
//! Usage: `cargo run --example export_split -- <out-dir> [seed]`

use std::path::PathBuf;

use fmlfs::dataset::{split_train_test, write_csv};
use fmlfs::synthetic::{generate, SyntheticSpec};

fn main() -> fmlfs::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));
    let seed: u64 = args.next().map_or(Ok(42), |s| s.parse()).expect("seed must be an integer");
    std::fs::create_dir_all(&dir)?;
    let ds = generate(&SyntheticSpec::yeast_like(seed))?;
    let (train, test) = split_train_test(&ds, 0.3, seed)?;
    write_csv(&ds, &dir.join("full.csv"))?;
    write_csv(&train, &dir.join("train.csv"))?;
    write_csv(&test, &dir.join("test.csv"))?;
    println!("{} train / {} test rows in {}", train.num_instances(), test.num_instances(), dir.display());
    Ok(())
}
