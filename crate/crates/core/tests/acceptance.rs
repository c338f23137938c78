//! Acceptance checks, one line per criterion. Exits nonzero if any fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trsc::codec::index_map;
use trsc::cost::{storage_parts, sweep};
use trsc::pfc::compression_ratio;
use trsc::rtm::{ping_pong, Cell};
use trsc::workload::synth_workload;
use trsc::{
    compress, decompress, encode_sn, mul_reference, BinaryOperand, Category, CostLedger,
    DistributionSpec, MacConfig, MacEngine, RtmConfig, RtmDbc, Term, Workload,
};

type Check = Result<String, String>;

fn op(v: u32, n: u32) -> BinaryOperand {
    BinaryOperand::new(v, n).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= budget, || format!("took {t:.2?}, budget {budget:?}"))
}

fn index_partition() -> Check {
    let t = Instant::now();
    for n in 1..=16 {
        let m = index_map(n).map_err(|e| e.to_string())?;
        ensure(m.is_partition(), || format!("n={n} is not a partition"))?;
        let mut hits = vec![0u32; (1 << n) - 1];
        for j in m.classes.iter().flatten() {
            hits[*j] += 1;
        }
        ensure(hits.iter().all(|&h| h == 1), || format!("n={n} coverage mismatch"))?;
    }
    within_budget(t, Duration::from_secs(5))?;
    Ok("n = 1..=16".into())
}

fn encoding() -> Check {
    let t = Instant::now();
    for n in 1..=12 {
        for b in 0..1u32 << n {
            let sn = encode_sn(op(b, n)).bits;
            ensure(sn.count_ones() == b as u64, || format!("popcount n={n} b={b}"))?;
            ensure(!sn.get(sn.len() - 1), || format!("last bit n={n} b={b}"))?;
        }
    }
    within_budget(t, Duration::from_secs(10))?;
    Ok("n = 1..=12 exhaustive".into())
}

fn pfc_roundtrip() -> Check {
    let t = Instant::now();
    let mut cases = 0u64;
    for n in 2..=10 {
        for s in 1..n {
            for b in 0..1u32 << n {
                let code = compress(op(b, n), s).map_err(|e| e.to_string())?;
                ensure(decompress(&code).bits == encode_sn(op(b, n)).bits, || {
                    format!("roundtrip n={n} s={s} b={b}")
                })?;
                let split = (code.seed.count_ones() as u32) * (1 << (n - s)) + code.low_bits;
                ensure(split == b, || format!("decomposition n={n} s={s} b={b}"))?;
                cases += 1;
            }
        }
    }
    within_budget(t, Duration::from_secs(30))?;
    Ok(format!("{cases} cases"))
}

fn pipeline_equals_oracle() -> Check {
    let t = Instant::now();
    let reference: Vec<u64> = (0..65536u32)
        .map(|i| mul_reference(op(i >> 8, 8), op(i & 255, 8)).unwrap())
        .collect();
    let jobs: Vec<(u32, bool)> =
        [4, 8, 16, 32, 64].iter().flat_map(|&p| [(p, false), (p, true)]).collect();
    let results: Vec<Result<(), String>> = std::thread::scope(|sc| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(p, compressed)| {
                let reference = &reference;
                sc.spawn(move || -> Result<(), String> {
                    let mut e = MacEngine::new(MacConfig::new(8, p).unwrap()).unwrap();
                    for (i, want) in reference.iter().enumerate() {
                        let (a, b) = (op(i as u32 >> 8, 8), op(i as u32 & 255, 8));
                        let r = if compressed {
                            e.multiply_seed_compressed(a, b)
                        } else {
                            e.multiply(a, b)
                        }
                        .map_err(|e| e.to_string())?;
                        ensure(r.count == *want, || {
                            format!("P={p} compressed={compressed} a={} b={}", a.value(), b.value())
                        })?;
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    results.into_iter().collect::<Result<Vec<()>, String>>()?;
    within_budget(t, Duration::from_secs(60))?;
    Ok("65536 pairs x 5 parallelisms x 2 layouts".into())
}

fn worst_case_cycles() -> Check {
    let mut e = MacEngine::new(MacConfig::new(8, 64).unwrap()).unwrap();
    for a in 192..256 {
        for b in 192..256 {
            let c = e.multiply(op(a, 8), op(b, 8)).unwrap().ledger.cycles();
            ensure(c == 32, || format!("a={a} b={b}: {c} cycles"))?;
        }
    }
    Ok("all a, b > 191 take 32 cycles".into())
}

fn table_five() -> Check {
    let mut e = MacEngine::new(MacConfig::new(8, 64).unwrap()).unwrap();
    // (terms, cycles, published pJ, pinned pJ)
    let targets = [(1, 32, 44.3, 44.3004), (2, 32, 90.2, 86.8092), (5, 34, 167.1, 171.8268)];
    let mut got = Vec::new();
    for (k, cycles, published, pinned) in targets {
        let l = e.dot_product(&vec![Term::new(255, 255); k]).unwrap().ledger;
        ensure(l.cycles() == cycles, || format!("{k} terms: {} cycles", l.cycles()))?;
        let pj = l.energy_pj();
        ensure((pj - published).abs() <= 0.1 * published, || format!("{k} terms: {pj:.1} pJ"))?;
        ensure((pj - pinned).abs() < 1e-3, || format!("{k} terms: {pj:.4} pJ drifted"))?;
        got.push(format!("{cycles}c/{pj:.1}pJ"));
    }
    Ok(got.join(", "))
}

fn table_six() -> Check {
    let totals = [(4u32, 2usize), (8, 4), (16, 6), (32, 12)];
    for (p, fixed) in totals {
        for s in 4..=64usize {
            let c = storage_parts(p, s, true).map_err(|e| e.to_string())?;
            let u = storage_parts(p, s, false).map_err(|e| e.to_string())?;
            ensure(c == fixed + s.div_ceil(5), || format!("compressed P={p} S={s}: {c}"))?;
            ensure(u == (p as usize * s).div_ceil(5), || format!("plain P={p} S={s}: {u}"))?;
            ensure(c < u, || format!("P={p} S={s}: {c} >= {u}"))?;
        }
    }
    Ok("P = 4..32, S = 4..64".into())
}

fn segment_bound() -> Check {
    for p in [64u32, 32, 16, 8, 4] {
        let mut e = MacEngine::new(MacConfig::new(8, p).unwrap()).unwrap();
        let bound = 256 / p as u64;
        for b in 0..256 {
            let s = e.multiply(op(255, 8), op(b, 8)).unwrap().segments_emitted;
            ensure(s <= bound, || format!("P={p} b={b}: {s} > {bound}"))?;
            if b == 255 {
                ensure(s == bound, || format!("P={p} b=255: {s} != {bound}"))?;
            }
        }
    }
    Ok("bound met, tight at b = 255".into())
}

fn compression_ratios() -> Check {
    let mut min = f64::MAX;
    for n in 4..=16 {
        for s in 1..n {
            let r = compression_ratio(n, s).map_err(|e| e.to_string())?;
            min = min.min(r);
            ensure(r >= 2.0, || format!("n={n} s={s}: {r}"))?;
            if n < 16 {
                let next = compression_ratio(n + 1, s).map_err(|e| e.to_string())?;
                ensure(next > r, || format!("s={s}: n={n} {r} vs n={} {next}", n + 1))?;
            }
        }
    }
    Ok(format!("minimum {min:.2}"))
}

fn two_pair_dot() -> Check {
    let mut e = MacEngine::new(MacConfig::unit_op(5, 4).unwrap()).unwrap();
    let terms = [Term::new(21, 19), Term::new(13, 15)];
    let tr = e.dot_product(&terms).unwrap().ledger.cycles();
    let apc = e.baseline_apc_dot(&terms).unwrap().ledger.cycles();
    ensure(tr.abs_diff(18) <= 3, || format!("TR {tr} cycles"))?;
    ensure(apc.abs_diff(35) <= 3, || format!("APC {apc} cycles"))?;
    let speedup = apc as f64 / tr as f64;
    ensure(speedup >= 1.8, || format!("speedup {speedup:.2}"))?;
    Ok(format!("TR {tr}, APC {apc}, {speedup:.2}x"))
}

fn parallelism_sweep() -> Check {
    let terms = synth_workload(&DistributionSpec::network(8).unwrap(), 2000, 1).unwrap();
    let w = Workload::new("network", 8, terms);
    let r = sweep(&[8], &[4, 8, 16, 32, 64], &w, &MacConfig::default()).map_err(|e| e.to_string())?;
    let cycles: Vec<u64> = r.points.iter().map(|p| p.cycles).collect();
    ensure(cycles.windows(2).all(|w| w[1] < w[0]), || format!("not decreasing: {cycles:?}"))?;
    let ratio = cycles[0] as f64 / cycles[4] as f64;
    ensure((6.0..=12.0).contains(&ratio), || format!("4P/64P = {ratio:.2}"))?;
    Ok(format!("{cycles:?}, 4P/64P = {ratio:.2}"))
}

fn error_bound() -> Check {
    const FROZEN: u64 = 441;
    let mut worst = 0;
    for a in 0..256u32 {
        for b in 0..256u32 {
            let c = mul_reference(op(a, 8), op(b, 8)).unwrap();
            worst = worst.max((256 * c).abs_diff((a * b) as u64));
        }
    }
    ensure(worst == FROZEN, || format!("max error {worst}, frozen {FROZEN}"))?;
    Ok(format!("max |256 count - ab| = {worst}"))
}

fn device_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = RtmConfig::default();
    let spare = (cfg.domains_per_track - cfg.used_domains()) as i64;
    for seq in 0..10_000 {
        let tracks = rng.gen_range(1..=6);
        let mut d = RtmDbc::new(cfg.clone(), tracks).unwrap();
        let mut ledgers = Vec::new();
        for _ in 0..rng.gen_range(1..=12) {
            match rng.gen_range(0..4) {
                0 => {
                    let mut cells = Vec::new();
                    for t in 0..tracks {
                        for p in 0..d.parts() {
                            if d.fill(t, p) < 5 && rng.gen_bool(0.2) {
                                cells.push(Cell { track: t, part: p, bit: rng.gen() });
                            }
                        }
                    }
                    d.write_cells(&cells).unwrap();
                }
                1 => {
                    let target = rng.gen_range(0..=spare);
                    d.shift(target - d.offset()).unwrap();
                }
                2 => {
                    let parts: Vec<usize> =
                        (0..d.parts()).filter(|_| rng.gen_bool(0.5)).collect();
                    for wave in ping_pong(&parts) {
                        let mut ps: Vec<usize> = wave.iter().map(|&i| parts[i]).collect();
                        ps.sort_unstable();
                        ensure(ps.windows(2).all(|w| w[1] > w[0] + 1), || {
                            format!("sequence {seq}: adjacent parts in wave {ps:?}")
                        })?;
                    }
                    let counts = d.tr_parts(&parts).unwrap();
                    for (i, &p) in parts.iter().enumerate() {
                        for t in 0..tracks {
                            let ones = d.part_bits(t, p).iter().filter(|&&b| b).count() as u32;
                            ensure(counts[i][t] == ones, || {
                                format!("sequence {seq}: TR {} vs popcount {ones}", counts[i][t])
                            })?;
                        }
                    }
                }
                _ => {
                    let t = rng.gen_range(0..tracks);
                    let p = rng.gen_range(0..d.parts());
                    let ones = d.part_bits(t, p).iter().filter(|&&b| b).count() as u32;
                    ensure(d.transverse_read(t, p).unwrap() == ones, || {
                        format!("sequence {seq}: single TR mismatch")
                    })?;
                }
            }
            ensure(d.boundaries_clear(), || format!("sequence {seq}: boundary domain set"))?;
            ensure((0..=spare).contains(&d.offset()), || format!("sequence {seq}: offset"))?;
            ledgers.push(d.take_ledger());
        }
        while ledgers.len() < 3 {
            let mut l = CostLedger::new();
            l.charge(Category::Adder, 1, 1, 0.25);
            ledgers.push(l);
        }
        let (a, b, c) = (&ledgers[0], &ledgers[1], &ledgers[2]);
        let left = a.clone().merged(b).merged(c);
        let right = a.clone().merged(&b.clone().merged(c));
        for cat in Category::ALL {
            ensure(left[cat].ops == right[cat].ops && left[cat].cycles == right[cat].cycles, || {
                format!("sequence {seq}: merge not associative")
            })?;
            ensure((left[cat].energy_pj - right[cat].energy_pj).abs() < 1e-9, || {
                format!("sequence {seq}: merged energy differs")
            })?;
        }
    }
    Ok("10000 random sequences".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 13] = [
        ("index map partitions every width", index_partition),
        ("SN popcount and trailing zero", encoding),
        ("compression roundtrip and value split", pfc_roundtrip),
        ("pipeline counts equal oracle", pipeline_equals_oracle),
        ("worst-case multiply cycles", worst_case_cycles),
        ("single and accumulated multiply costs", table_five),
        ("storage footprints", table_six),
        ("emitted segment bound", segment_bound),
        ("compression ratio", compression_ratios),
        ("two-pair dot product against counter baseline", two_pair_dot),
        ("parallelism sweep", parallelism_sweep),
        ("SC error bound", error_bound),
        ("device invariants", device_properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {:2} PASS  {name}: {detail} ({secs:.2}s)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:2} FAIL  {name}: {why} ({secs:.2}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
