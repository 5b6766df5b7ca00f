//! Point sources: inline, CSV, or a named generator.

use std::fs;

use kkmeans::risk::{blob_benchmark, Population};
use kkmeans::rng::{derived, mix};
use rand::Rng;

use crate::config::DataSource;
use crate::CliError;

const GENERATOR_STREAM: u64 = 0xDA7A;

pub fn load_points(src: &DataSource, master_seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    let points = if let Some(p) = &src.points {
        p.clone()
    } else if let Some(path) = &src.csv {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        parse_csv(&text).map_err(|msg| CliError::Config(format!("{}: {msg}", path.display())))?
    } else {
        let name = src.generator.as_deref().unwrap_or_default();
        let seed = src.seed.unwrap_or(master_seed);
        generate(name, src, seed)?
    };
    if points.is_empty() {
        return Err(CliError::Config("data source has no points".into()));
    }
    Ok(points)
}

/// Comma-separated floats, one point per line. A first line that does not
/// parse as numbers is treated as a header.
pub fn parse_csv(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match row {
            Ok(r) => out.push(r),
            Err(_) if lineno == 0 => continue,
            Err(e) => return Err(format!("line {}: {e}", lineno + 1)),
        }
    }
    Ok(out)
}

fn generate(name: &str, src: &DataSource, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
    let n = src
        .n
        .ok_or_else(|| CliError::Config(format!("generator {name} needs n")))?;
    let mut rng = derived(seed, mix(&[GENERATOR_STREAM]));
    match name {
        // two squares of side `spread`, ten spreads apart
        "two_blobs" => {
            let spread = src.spread.unwrap_or(0.1);
            Ok((0..n)
                .map(|i| {
                    let cx = if i < n / 2 { 0.0 } else { 10.0 * spread };
                    vec![
                        cx + spread * rng.random_range(-0.5..0.5),
                        spread * rng.random_range(-0.5..0.5),
                    ]
                })
                .collect())
        }
        // an i.i.d. sample from the risk benchmark's atoms
        "benchmark" => {
            let spec = blob_benchmark(
                src.blobs.unwrap_or(2),
                src.spread.unwrap_or(kkmeans::risk::BENCHMARK_BLOB_SPREAD),
                seed,
            );
            let pop = Population::new(spec)?;
            let idx = pop.sample(n, &mut rng);
            Ok(idx.into_iter().map(|a| pop.spec().atoms[a].clone()).collect())
        }
        other => Err(CliError::Config(format!(
            "unknown generator {other:?} (expected two_blobs or benchmark)"
        ))),
    }
}
