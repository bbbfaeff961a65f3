//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL
//! line; the process exits nonzero if any fails.
//!
//! Set `MORSEGRID_BLESS=1` to rewrite the exported-diagram golden files
//! instead of comparing against them.

// `!(a <= b)` is deliberate in `ensure!`: a NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use morsegrid::color::{self, ConversionMethod, Weights};
use morsegrid::export::{self, ExportOptions};
use morsegrid::image_io::{self, PnmMode};
use morsegrid::morse::{self, CriticalCell, MorseComplex, TieBreak};
use morsegrid::persistence::{self, Death, DEFAULT_ORACLE_LIMIT};
use morsegrid::predict::{self, PredictConfig};
use morsegrid::{analyze, build_complex, Cell, Execution, GrayImage, RgbImage};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    if elapsed < limit {
        Ok(detail)
    } else {
        Err(format!("{detail}; took {elapsed:.2?}, limit {limit:.0?}"))
    }
}

fn bouquet_worked_example() -> Outcome {
    // Labels from the worked example: one critical vertex, six critical
    // edges with zero boundary (a bouquet), and the square 30 whose
    // boundary is the edge 29.
    let start = Instant::now();
    let edge = |label: u8| CriticalCell::new(Cell::new(2 * u32::from(label) + 1, 0), 1, label);
    let cells = vec![
        CriticalCell::new(Cell::new(0, 0), 0, 0),
        edge(14),
        edge(29),
        CriticalCell::new(Cell::new(1, 1), 2, 30),
        edge(31),
        edge(32),
        edge(35),
        edge(36),
    ];
    let boundary = vec![
        vec![],
        vec![],
        vec![],
        vec![2],
        vec![],
        vec![],
        vec![],
        vec![],
    ];
    let m = MorseComplex::from_parts(cells, boundary).map_err(|e| e.to_string())?;
    let ranks = m.ranks();
    let betti = persistence::betti_numbers(&m);
    let d = persistence::compute_persistence(&m);
    let elapsed = start.elapsed();
    ensure!(ranks == [1, 6, 1], "ranks {ranks:?}");
    ensure!(betti == [1, 5, 0], "betti {betti:?}");
    let cancelled = d
        .pairs()
        .iter()
        .any(|p| p.dim == 1 && p.birth == 29 && p.death == Death::Finite(30));
    ensure!(
        cancelled,
        "edge 29 is not paired with square 30: {:?}",
        d.pairs()
    );
    within(
        elapsed,
        Duration::from_millis(1),
        format!("betti {betti:?} in {elapsed:.2?}"),
    )
}

#[derive(Default)]
struct SweepStats {
    images: usize,
    checks: usize,
}

/// Morse route against the oracle, plus the Morse invariants, for one
/// image under both tie-breaking orders.
fn check_image(img: &GrayImage, stats: &mut SweepStats) -> Result<(), String> {
    let k = build_complex(img);
    let oracle =
        persistence::oracle_persistence(&k, DEFAULT_ORACLE_LIMIT).map_err(|e| e.to_string())?;
    for tie in [TieBreak::RowMajor, TieBreak::ReverseRowMajor] {
        let g = morse::build_gradient_with(&k, tie, Execution::Sequential);
        g.verify(&k)
            .map_err(|e| format!("{tie:?} on {img:?}: {e}"))?;
        let crit = g.critical_counts();
        let euler = crit[0] as i64 - crit[1] as i64 + crit[2] as i64;
        if euler != 1 {
            return Err(format!("{tie:?}: critical counts {crit:?} on {img:?}"));
        }
        let m = morse::build_morse_complex_with(&g, &k, Execution::Sequential)
            .map_err(|e| format!("{tie:?} on {img:?}: {e}"))?;
        let betti = persistence::betti_numbers(&m);
        if betti != [1, 0, 0] || (0..3).any(|p| crit[p] < betti[p]) {
            return Err(format!(
                "{tie:?}: betti {betti:?} vs critical {crit:?} on {img:?}"
            ));
        }
        let d = persistence::compute_persistence(&m);
        if d.signature() != oracle.signature() {
            return Err(format!(
                "{tie:?}: diagram mismatch on {img:?}\n morse  {:?}\n oracle {:?}",
                d.signature(),
                oracle.signature()
            ));
        }
        stats.checks += 1;
    }
    stats.images += 1;
    Ok(())
}

fn random_image(rng: &mut ChaCha8Rng, max_side: usize, max_value: u8) -> GrayImage {
    let w = rng.random_range(1..=max_side);
    let h = rng.random_range(1..=max_side);
    let values = (0..w * h)
        .map(|_| rng.random_range(0..=max_value))
        .collect();
    GrayImage::new(w, h, values).unwrap()
}

fn oracle_and_invariants() -> Outcome {
    let start = Instant::now();
    let mut stats = SweepStats::default();
    for code in 0..3u32.pow(9) {
        let values = (0..9).map(|i| (code / 3u32.pow(i) % 3) as u8).collect();
        check_image(&GrayImage::new(3, 3, values).unwrap(), &mut stats)?;
    }
    let exhaustive = stats.images;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..1000 {
        check_image(&random_image(&mut rng, 12, 255), &mut stats)?;
    }
    // heavy ties stress the tie-breaking order
    for _ in 0..500 {
        check_image(&random_image(&mut rng, 12, 3), &mut stats)?;
    }
    let elapsed = start.elapsed();
    within(
        elapsed,
        Duration::from_secs(300),
        format!(
            "{} images ({exhaustive} exhaustive 3x3), {} Morse-vs-oracle comparisons in {elapsed:.2?}",
            stats.images, stats.checks
        ),
    )
}

fn stability() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x57ab);
    let mut worst = 0.0f64;
    let mut runs = 0;
    for _ in 0..200 {
        let img = random_image(&mut rng, 16, 255);
        let base = analyze(&img, false, Execution::Sequential).map_err(|e| e.to_string())?;
        for eps in 1..=5i16 {
            let values = img
                .values()
                .iter()
                .map(|&v| (i16::from(v) + rng.random_range(-eps..=eps)).clamp(0, 255) as u8)
                .collect();
            let noisy = GrayImage::new(img.width(), img.height(), values).unwrap();
            let d = analyze(&noisy, false, Execution::Sequential).map_err(|e| e.to_string())?;
            for dim in 0..=1 {
                let dist = persistence::bottleneck_distance(&base, &d, dim);
                ensure!(
                    dist <= f64::from(eps),
                    "dim {dim}: distance {dist} exceeds eps {eps} on {img:?}"
                );
                worst = worst.max(dist / f64::from(eps));
            }
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    within(
        elapsed,
        Duration::from_secs(120),
        format!("{runs} perturbations, max distance/eps {worst:.3} in {elapsed:.2?}"),
    )
}

fn conversion_identity() -> Outcome {
    let start = Instant::now();
    let third = Ratio::new(1, 3);
    let methods = [
        ConversionMethod::Average,
        ConversionMethod::Luminosity,
        ConversionMethod::Weighted(Weights::luminosity()),
        ConversionMethod::Weighted(Weights::new(third, third, third).unwrap()),
        ConversionMethod::Weighted(
            Weights::new(Ratio::new(1, 10), Ratio::new(1, 10), Ratio::new(4, 5)).unwrap(),
        ),
    ];
    let grays = RgbImage::from_fn(256, 1, |x, _| [x as u8; 3]).unwrap();
    for m in &methods {
        let g = color::to_gray(&grays, m).map_err(|e| e.to_string())?;
        for (v, &out) in g.values().iter().enumerate() {
            ensure!(out as usize == v, "{m}: ({v},{v},{v}) -> {out}");
        }
    }
    ensure!(color::luminosity([255, 0, 0]) == 54, "luminosity red");
    ensure!(color::average([0, 0, 255]) == 85, "average blue");
    let elapsed = start.elapsed();
    within(
        elapsed,
        Duration::from_secs(1),
        format!("{} methods x 256 grays in {elapsed:.2?}", methods.len()),
    )
}

/// Gray 128 background with square rings, each colored to vanish under
/// one of the three methods.
fn crafted_rings() -> RgbImage {
    const BG: [u8; 3] = [128, 128, 128];
    let rings: [([u8; 3], usize, usize); 5] = [
        ([255, 0, 0], 2, 2),    // seen by all three
        ([0, 178, 0], 12, 2),   // luminosity gives 128
        ([13, 170, 40], 22, 2), // luminosity 128 again
        ([129, 0, 255], 2, 12), // average gives 128
        ([0, 0, 160], 12, 12),  // blue-heavy weights give 128
    ];
    RgbImage::from_fn(32, 24, |x, y| {
        for (c, ox, oy) in rings {
            let (dx, dy) = (x.wrapping_sub(ox), y.wrapping_sub(oy));
            if dx < 7 && dy < 7 && (dx == 0 || dx == 6 || dy == 0 || dy == 6) {
                return c;
            }
        }
        BG
    })
    .unwrap()
}

fn conversion_sensitivity() -> Outcome {
    let start = Instant::now();
    let img = crafted_rings();
    let custom = Weights::new(Ratio::new(1, 10), Ratio::new(1, 10), Ratio::new(4, 5)).unwrap();
    let methods = [
        ConversionMethod::Average,
        ConversionMethod::Luminosity,
        ConversionMethod::Weighted(custom),
    ];
    let grays = color::compare_methods(&img, &methods).map_err(|e| e.to_string())?;
    let mut diagrams = Vec::new();
    for g in &grays {
        diagrams.push(analyze(g, false, Execution::default()).map_err(|e| e.to_string())?);
    }
    for i in 0..3 {
        for j in i + 1..3 {
            ensure!(
                diagrams[i].signature() != diagrams[j].signature(),
                "{} and {} give the same diagram",
                methods[i],
                methods[j]
            );
        }
    }
    let mut counts: Vec<(usize, String)> = methods
        .iter()
        .zip(&diagrams)
        .map(|(m, d)| (d.signature().len(), m.to_string()))
        .collect();
    counts.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut ordering = String::new();
    for (n, name) in &counts {
        let _ = write!(ordering, "{name}={n} ");
    }
    let elapsed = start.elapsed();
    within(
        elapsed,
        Duration::from_secs(10),
        format!("pairwise distinct; bars: {}in {elapsed:.2?}", ordering),
    )
}

fn linear_csv(date: u32, records: usize, skew: u32) -> Vec<u8> {
    // record i has lifespan (i % 7) + (1 + (i + skew) % 3) * date
    let mut out = String::new();
    for i in 0..records as u32 {
        let birth = (i * 11) % 40;
        let life = i % 7 + (1 + (i + skew) % 3) * date;
        let _ = writeln!(out, "{},{},{}", i + 1, birth, birth + life);
    }
    out.into_bytes()
}

fn prediction_exactness() -> Outcome {
    let start = Instant::now();
    let mut worst_rel = 0.0f64;
    let mut reports = 0;
    for (records, skew) in [(5usize, 0u32), (40, 1), (200, 2)] {
        let files: Vec<(u32, Vec<u8>)> =
            (1..=7).map(|d| (d, linear_csv(d, records, skew))).collect();
        let refs: Vec<(u32, &[u8])> = files.iter().map(|(d, b)| (*d, b.as_slice())).collect();
        let expected: Vec<f64> = (0..records as u32)
            .map(|i| f64::from(i % 7 + (1 + (i + skew) % 3) * 7))
            .collect();
        for seed in [0u64, 7, 12345] {
            let cfg = PredictConfig {
                seed,
                ..PredictConfig::default()
            };
            let rep = predict::run_prediction(&refs, Some(7), &cfg).map_err(|e| e.to_string())?;
            ensure!(rep.x_next == 7, "predicted at {}", rep.x_next);
            ensure!(
                rep.actual == expected,
                "held-out lifespans are not the date-7 truth"
            );
            for (p, e) in rep.predicted.values.iter().zip(&expected) {
                let rel = (p - e).abs() / e;
                ensure!(rel <= 1e-9, "prediction {p} vs {e}");
                worst_rel = worst_rel.max(rel);
            }
            let agg = rep.errors.aggregate.ok_or("aggregate undefined")?;
            // 1e-9 relative is 1e-7 percent
            ensure!(agg <= 1e-7, "aggregate percent error {agg}");
            let again = predict::run_prediction(&refs, Some(7), &cfg).map_err(|e| e.to_string())?;
            ensure!(
                rep.to_csv() == again.to_csv(),
                "reports differ between runs"
            );
            reports += 1;
        }
    }

    // Unequal snapshot sizes force subsampling; the draw must still repeat.
    let files: Vec<(u32, Vec<u8>)> = (1..=6)
        .map(|d| (d, linear_csv(d, 30 + 5 * d as usize, 0)))
        .collect();
    let refs: Vec<(u32, &[u8])> = files.iter().map(|(d, b)| (*d, b.as_slice())).collect();
    let cfg = PredictConfig {
        seed: 99,
        ..PredictConfig::default()
    };
    let a = predict::run_prediction(&refs, None, &cfg).map_err(|e| e.to_string())?;
    let b = predict::run_prediction(&refs, None, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        a.to_csv() == b.to_csv(),
        "subsampled reports differ between runs"
    );

    let elapsed = start.elapsed();
    within(
        elapsed,
        Duration::from_secs(30),
        format!("{reports} reports, worst relative error {worst_rel:.1e}, repeats byte-identical, in {elapsed:.2?}"),
    )
}

fn check_golden(name: &str, produced: &[u8], bless: bool) -> Result<(), String> {
    let path = golden(name);
    if bless {
        std::fs::write(&path, produced).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let want = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if want != produced {
        return Err(format!(
            "{name} differs from golden\n--- golden\n{}\n--- produced\n{}",
            String::from_utf8_lossy(&want),
            String::from_utf8_lossy(produced)
        ));
    }
    Ok(())
}

fn format_golden_files() -> Outcome {
    let bless = std::env::var_os("MORSEGRID_BLESS").is_some();
    let read = |name: &str| std::fs::read(golden(name)).map_err(|e| format!("{name}: {e}"));

    let mut images = Vec::new();
    for (name, mode) in [
        ("rings_ascii.pgm", PnmMode::Ascii),
        ("rings_binary.pgm", PnmMode::Binary),
    ] {
        let bytes = read(name)?;
        let img = image_io::read_pgm(&bytes).map_err(|e| format!("{name}: {e}"))?;
        ensure!(
            image_io::write_pgm(&img, mode) == bytes,
            "{name} does not round-trip"
        );
        images.push(img);
    }
    ensure!(images[0] == images[1], "ascii and binary graymaps disagree");
    let mut rgbs = Vec::new();
    for (name, mode) in [
        ("swatch_ascii.ppm", PnmMode::Ascii),
        ("swatch_binary.ppm", PnmMode::Binary),
    ] {
        let bytes = read(name)?;
        let img = image_io::read_ppm(&bytes).map_err(|e| format!("{name}: {e}"))?;
        ensure!(
            image_io::write_ppm(&img, mode) == bytes,
            "{name} does not round-trip"
        );
        rgbs.push(img);
    }
    ensure!(rgbs[0] == rgbs[1], "ascii and binary pixmaps disagree");

    let d = analyze(&images[0], false, Execution::default()).map_err(|e| e.to_string())?;
    // worked out by hand: the ring closes at 40 and fills at 180
    let expected = vec![
        (0, 10, Death::Essential),
        (0, 40, Death::Finite(200)),
        (0, 90, Death::Finite(200)),
        (1, 40, Death::Finite(180)),
    ];
    ensure!(
        d.signature() == expected,
        "rings diagram {:?}",
        d.signature()
    );

    let default = ExportOptions::default();
    let full = ExportOptions {
        keep_zero: true,
        include_essential: true,
    };
    check_golden("rings.txt", &export::write_txt(&d, default), bless)?;
    check_golden("rings.csv", &export::write_csv(&d, default), bless)?;
    check_golden("rings_full.csv", &export::write_csv(&d, full), bless)?;
    let reparsed = export::parse_txt(&String::from_utf8_lossy(&read("rings.txt")?))
        .map_err(|e| e.to_string())?;
    ensure!(
        reparsed.signature() == expected,
        "golden txt parses to {:?}",
        reparsed.signature()
    );
    Ok(if bless {
        "golden exports rewritten".into()
    } else {
        "2 graymaps, 2 pixmaps, 3 exports byte-identical".into()
    })
}

fn desk_scale_performance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    // smooth relief plus noise: many critical cells, realistic plateaus
    let img = GrayImage::from_fn(1000, 1000, |x, y| {
        let (fx, fy) = (x as f64 / 37.0, y as f64 / 53.0);
        let relief = 96.0 + 64.0 * fx.sin() * fy.cos();
        (relief + rng.random_range(0.0..64.0)) as u8
    })
    .unwrap();
    let start = Instant::now();
    let d = analyze(&img, false, Execution::default()).map_err(|e| e.to_string())?;
    let txt = export::write_txt(&d, ExportOptions::default());
    let csv = export::write_csv(&d, ExportOptions::default());
    let elapsed = start.elapsed();
    ensure!(
        d.dimension(0).filter(|p| p.is_essential()).count() == 1,
        "one essential class"
    );
    within(
        elapsed,
        Duration::from_secs(60),
        format!(
            "1000x1000: {} pairs, {} KiB txt, {} KiB csv in {elapsed:.2?}",
            d.len(),
            txt.len() / 1024,
            csv.len() / 1024
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("worked example betti numbers", bouquet_worked_example),
        ("oracle equivalence", oracle_and_invariants),
        ("morse invariants (in oracle sweep)", || {
            Ok("checked per image above".into())
        }),
        ("stability under perturbation", stability),
        ("conversion identity", conversion_identity),
        ("conversion sensitivity", conversion_sensitivity),
        ("prediction determinism and exactness", prediction_exactness),
        ("format golden files", format_golden_files),
        ("desk-scale performance", desk_scale_performance),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut sweep_ok = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| Err(format!("panicked: {:?}", e.downcast_ref::<String>())));
        // the invariants share the sweep with the oracle comparison
        let outcome = match (i, sweep_ok) {
            (2, false) => Err("oracle sweep failed".into()),
            _ => outcome,
        };
        if i == 1 {
            sweep_ok = outcome.is_ok();
        }
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
