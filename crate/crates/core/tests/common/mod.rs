#![allow(dead_code)]

pub mod grad;

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hrseq::ingest::{PlayerSeason, WindowSample, CSV_HEADER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Runs the CLI binary with `HRSEQ_OUT` pointed at `out_root`.
pub fn hrseq(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hrseq"))
        .args(args)
        .env("HRSEQ_OUT", out_root)
        .env("RUST_LOG", "off")
        .output()
        .expect("spawn hrseq")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Deterministic league: every player plays `first..=last`; home runs follow a per-player power
/// rate times plate appearances plus noise.
pub fn synthetic_csv(players: usize, first: i32, last: i32, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CSV_HEADER.join(",");
    out.push('\n');
    for p in 0..players {
        let power: f64 = rng.gen_range(0.005..0.08);
        let height = rng.gen_range(68..79);
        let weight = rng.gen_range(170..250);
        let age0 = rng.gen_range(21..27);
        for (k, year) in (first..=last).enumerate() {
            let pa: u32 = rng.gen_range(250..700);
            let hr = ((power * pa as f64) + rng.gen_range(-2.0..2.0)).round().max(0.0) as u32;
            let hit = pa / 4 + rng.gen_range(0..20);
            let bb = pa / 11 + rng.gen_range(0..10);
            let _ = writeln!(
                out,
                "pl{p:03},{year},{},{height},{weight},{hr},{hit},{},{},{},{},{},{},{},{},{},{},{},{pa},{},{bb},{}",
                age0 + k as i32,
                pa / 5 + rng.gen_range(0..15),
                pa / 8 + hr,
                hit / 5,
                rng.gen_range(0..5),
                rng.gen_range(0..15),
                rng.gen_range(0..6),
                pa / 4,
                rng.gen_range(0..8),
                rng.gen_range(0..10),
                rng.gen_range(0..20),
                rng.gen_range(0..10),
                pa / 7 + 2 * hr,
                rng.gen_range(0..5),
            );
        }
    }
    out
}

/// Normalized-scale samples with integer targets in `[0, 74]` that depend linearly on the inputs.
pub fn linear_samples(n: usize, seed: u64) -> Vec<WindowSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..105).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let xs: Vec<[[f64; 21]; 5]> = (0..n)
        .map(|_| std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))))
        .collect();
    let raw: Vec<f64> = xs
        .iter()
        .map(|x| x.iter().flatten().zip(&w).map(|(a, b)| a * b).sum())
        .collect();
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    xs.into_iter()
        .zip(raw)
        .enumerate()
        .map(|(i, (x, r))| WindowSample {
            player_id: format!("s{i:03}"),
            target_year: 2000,
            x,
            y: ((r - lo) / (hi - lo) * 74.0).round() as u32,
        })
        .collect()
}

/// A full-time season in which only the year and `hr` vary.
pub fn season(player: &str, year: i32, hr: u32) -> PlayerSeason {
    PlayerSeason {
        player_id: player.to_string(),
        season: year,
        age: 25.0,
        height: 72.0,
        weight: 200.0,
        hr,
        hit: 100,
        strikeout: 80,
        runs: 60,
        doubles: 20,
        triples: 2,
        sb: 5,
        cs: 2,
        games: 120,
        sf: 4,
        ibb: 3,
        gidp: 8,
        hbp: 5,
        pa: 500,
        rbi: 60,
        bb: 40,
        sh: 1,
    }
}
