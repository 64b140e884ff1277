//! Writes a synthetic abundance table: 5 subjects × 30 samples × 60 species.
//!
//! Each subject's community dominance follows a noisy dominance map
//! `D(t+1) = D(t)·(1 + S(D(t)) + σ·ε)` under a different stability model,
//! and every sample's counts are shaped to hit the target `D_c`.
//!
//! Usage: `cargo run --example make_cohort -- OUT.csv [SEED]`

use std::error::Error;
use std::fs;

use domstab::models::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SPECIES: usize = 60;
const SAMPLES: usize = 30;
const D_LO: f64 = 4.0;
const D_HI: f64 = 45.0;

struct Subject {
    id: &'static str,
    params: ModelParams<f64>,
    d0: f64,
    noise: f64,
}

fn subjects() -> Vec<Subject> {
    vec![
        Subject { id: "501", params: ModelParams::Linear { a: 1.5, b: -0.05 }, d0: 12.0, noise: 0.12 },
        Subject { id: "502", params: ModelParams::Logistic { k: 2.2, a: 0.02, r: -0.25 }, d0: 8.0, noise: 0.10 },
        Subject {
            id: "503",
            params: ModelParams::LinearQuadratic { a: 1.2, b: -0.04, c: 0.0006, d: 24.0, e: 0.02 },
            d0: 20.0,
            noise: 0.10,
        },
        Subject {
            id: "504",
            params: ModelParams::QuadraticQuadratic { a: 0.9, b: -0.02, c: -0.0008, d: 22.0, e: 0.0015, f: 0.01 },
            d0: 15.0,
            noise: 0.10,
        },
        Subject { id: "505", params: ModelParams::Linear { a: 0.6, b: -0.03 }, d0: 30.0, noise: 0.15 },
    ]
}

/// Dominance trajectory kept inside `[D_LO, D_HI]` by reflection.
fn trajectory(s: &Subject, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let eps: Normal<f64> = Normal::new(0.0, 1.0).unwrap();
    let mut d = vec![s.d0];
    while d.len() < SAMPLES {
        let x = *d.last().unwrap();
        let mut next = x * (1.0 + s.params.value(x) + s.noise * eps.sample(rng));
        for _ in 0..4 {
            if next < D_LO {
                next = 2.0 * D_LO - next;
            } else if next > D_HI {
                next = 2.0 * D_HI - next;
            }
        }
        d.push(next.clamp(D_LO, D_HI));
    }
    d
}

/// Proportions `∝ ρ^rank · w` with `ρ` bisected so that `n·Σp² − n/total`
/// matches the target dominance.
fn shaped_proportions(target: f64, weights: &[f64], total: f64) -> Vec<f64> {
    let n = weights.len() as f64;
    let make = |rho: f64| {
        let raw: Vec<f64> = weights.iter().enumerate().map(|(i, w)| rho.powi(i as i32) * w).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let dc = |p: &[f64]| n * p.iter().map(|x| x * x).sum::<f64>() - n / total;
    let (mut lo, mut hi) = (0.01, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if dc(&make(mid)) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    make(0.5 * (lo + hi))
}

/// Integer counts with the exact total, by largest remainder.
fn apportion(p: &[f64], total: u64) -> Vec<u64> {
    let exact: Vec<f64> = p.iter().map(|x| x * total as f64).collect();
    let mut counts: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let mut rest = total - counts.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

/// `mmddyy` for day `k` of 2006, counting from January 1st.
fn date(mut k: usize) -> String {
    const DAYS: [usize; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
    let mut month = 0;
    while k >= DAYS[month] {
        k -= DAYS[month];
        month += 1;
    }
    format!("{:02}{:02}06", month + 1, k + 1)
}

fn main() -> Result<(), Box<dyn Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().ok_or("usage: make_cohort OUT.csv [SEED]")?;
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2006);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter: Normal<f64> = Normal::new(0.0, 0.35).unwrap();

    let mut header = vec!["otu".to_string()];
    let mut columns: Vec<Vec<u64>> = Vec::new();
    for s in subjects() {
        let d = trajectory(&s, &mut rng);
        let mut rank: Vec<usize> = (0..SPECIES).collect();
        for i in (1..SPECIES).rev() {
            rank.swap(i, rng.random_range(0..=i));
        }
        for (t, &target) in d.iter().enumerate() {
            let total: u64 = rng.random_range(4000..12000);
            let w: Vec<f64> = (0..SPECIES).map(|_| jitter.sample(&mut rng).exp()).collect();
            let p = shaped_proportions(target, &w, total as f64);
            let mut by_rank = apportion(&p, total);
            // Keep rare species on the roster most of the time; the rest
            // stay absent and exercise the sentinel path.
            for r in 1..SPECIES {
                if by_rank[r] == 0 && rng.random_bool(0.8) {
                    by_rank[r] = 1;
                    by_rank[0] -= 1;
                }
            }
            let mut col = vec![0; SPECIES];
            for (r, &sp) in rank.iter().enumerate() {
                col[sp] = by_rank[r];
            }
            header.push(format!("{}_{}", s.id, date(3 * t)));
            columns.push(col);
        }
    }

    let mut text = header.join(",");
    text.push('\n');
    for sp in 0..SPECIES {
        text.push_str(&format!("OTU_{:03}", sp + 1));
        for col in &columns {
            text.push_str(&format!(",{}", col[sp]));
        }
        text.push('\n');
    }
    fs::write(&out, text)?;
    Ok(())
}
