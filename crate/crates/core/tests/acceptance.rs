//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line with
//! the measured numbers, then asserts. Run with `--nocapture` to see them.

use scbit_core::arith::{nonscaled_add, tlb_multiply_bit, NonScaledAdder};
use scbit_core::baseline::sm_multiply_bit;
use scbit_core::convert::{sm_to_tlb_bit, tlb_to_sm_bit};
use scbit_core::engine::{Engine, EngineConfig};
use scbit_core::eval::{
    canceler_gap, run_accuracy_sweep, run_canceler_experiment, run_fault_sweep, write_canceler_csv, Design,
    ExperimentConfig, Metric, SweepRow,
};
use scbit_core::formats::{Ternary, TlbStream};
use scbit_core::rng::RandomSource;

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

const BOOLS: [bool; 2] = [false, true];

#[test]
fn criterion_1_truth_tables() {
    let mut ok = true;
    // Conversion table: (p, n) <-> (s, m) with the same ternary value.
    let tlb_rows = [((false, false), (false, false)), ((true, false), (false, true)), ((false, true), (true, true)), ((true, true), (true, false))];
    for ((p, n), sm) in tlb_rows {
        ok &= tlb_to_sm_bit(p, n) == sm;
    }
    let sm_rows = [((false, false), (false, false)), ((false, true), (true, false)), ((true, false), (false, false)), ((true, true), (false, true))];
    for ((s, m), tlb) in sm_rows {
        ok &= sm_to_tlb_bit(s, m) == tlb;
    }
    let tlb_val = |p: bool, n: bool| p as i32 - n as i32;
    let sm_val = |s: bool, m: bool| if s { -(m as i32) } else { m as i32 };
    for a in BOOLS {
        for b in BOOLS {
            for c in BOOLS {
                for d in BOOLS {
                    let (zp, zn) = tlb_multiply_bit(a, b, c, d);
                    ok &= tlb_val(zp, zn) == tlb_val(a, b) * tlb_val(c, d);
                    let (zs, zm) = sm_multiply_bit(a, b, c, d);
                    ok &= sm_val(zs, zm) == sm_val(a, b) * sm_val(c, d);
                }
            }
        }
    }
    report(1, ok, "(4+4 conversion rows, 16+16 multiplier rows)".into());
    assert!(ok);
}

/// Brute-force interpreter of the adder update rule with the carry
/// registers held as plain occupancy counts.
fn oracle_add(x: &[i32], y: &[i32], m: usize) -> Vec<i32> {
    let (mut pc, mut nc) = (0usize, 0usize);
    let mut z = Vec::with_capacity(x.len());
    for (&a, &b) in x.iter().zip(y) {
        let (pf, nf) = ((pc > 0) as i32, (nc > 0) as i32);
        let out = match a + b {
            0 => {
                pc = pc.saturating_sub(1);
                nc = nc.saturating_sub(1);
                pf - nf
            }
            1 => {
                nc = nc.saturating_sub(1);
                1 - nf
            }
            -1 => {
                pc = pc.saturating_sub(1);
                pf - 1
            }
            2 => {
                if nf == 1 {
                    nc -= 1;
                } else {
                    pc = (pc + 1).min(m);
                }
                1
            }
            -2 => {
                if pf == 1 {
                    pc -= 1;
                } else {
                    nc = (nc + 1).min(m);
                }
                -1
            }
            _ => unreachable!(),
        };
        z.push(out);
    }
    z
}

fn to_tlb(v: &[i32]) -> TlbStream {
    TlbStream::from_ternary(&v.iter().map(|&t| Ternary::from_value(t).unwrap()).collect::<Vec<_>>())
}

fn decode_index(mut idx: usize, len: usize) -> Vec<i32> {
    (0..len)
        .map(|_| {
            let t = (idx % 3) as i32 - 1;
            idx /= 3;
            t
        })
        .collect()
}

#[test]
fn criterion_2_adder_matches_oracle() {
    let (mut cases, mut mismatches) = (0u64, 0u64);
    let mut check = |x: &[i32], y: &[i32], m: usize| {
        let (z, _) = nonscaled_add(&to_tlb(x), &to_tlb(y), m).unwrap();
        let got: Vec<i32> = z.symbols().iter().map(|t| t.value()).collect();
        cases += 1;
        mismatches += (got != oracle_add(x, y, m)) as u64;
        cases
    };
    let mut exhaustive = 0;
    for len in 1..=4 {
        let n = 3usize.pow(len as u32);
        for i in 0..n {
            for j in 0..n {
                for m in 1..=3 {
                    exhaustive = check(&decode_index(i, len), &decode_index(j, len), m);
                }
            }
        }
    }
    let mut rng = RandomSource::new(2024);
    for _ in 0..200_000 {
        let len = 5 + rng.index(2);
        let x: Vec<i32> = (0..len).map(|_| rng.index(3) as i32 - 1).collect();
        let y: Vec<i32> = (0..len).map(|_| rng.index(3) as i32 - 1).collect();
        check(&x, &y, 1 + rng.index(3));
    }
    let pass = mismatches == 0;
    report(2, pass, format!("({exhaustive} exhaustive + {} random cases, {mismatches} mismatches)", cases - exhaustive));
    assert!(pass);
}

fn random_tlb(len: usize, rng: &mut RandomSource) -> TlbStream {
    TlbStream::from_ternary(&(0..len).map(|_| Ternary::ALL[rng.index(3)]).collect::<Vec<_>>())
}

#[test]
fn criterion_3_conservation() {
    const PAIRS: usize = 1000;
    const LEN: usize = 1000;
    const M: usize = 32;
    let mut rng = RandomSource::new(3);
    let mut violations = 0u64;

    // Two-input adder: inputs so far = outputs so far + stored + lost.
    for _ in 0..PAIRS {
        let (x, y) = (random_tlb(LEN, &mut rng), random_tlb(LEN, &mut rng));
        let mut adder = NonScaledAdder::new(M).unwrap();
        let (mut sum_in, mut sum_out) = (0i64, 0i64);
        for i in 0..LEN {
            sum_in += (x.symbol(i).value() + y.symbol(i).value()) as i64;
            sum_out += adder.step(x.symbol(i), y.symbol(i)).value() as i64;
            let d = adder.diagnostics();
            let stored = d.residual_pos as i64 - d.residual_neg as i64;
            let lost = d.lost_pos as i64 - d.lost_neg as i64;
            if sum_in != sum_out + stored + lost {
                violations += 1;
            }
        }
    }

    // Engine, K = 16, with and without the cancelers. With cancelers the net
    // law is unchanged, and per line the products equal the fronts that
    // reached the accumulator plus the cancelled ones.
    const K: usize = 16;
    for cc in [false, true] {
        for _ in 0..PAIRS / 10 {
            let mut engine = Engine::new(EngineConfig::new(K, M, LEN).with_cc(cc)).unwrap();
            let lanes: Vec<(TlbStream, TlbStream)> =
                (0..K).map(|_| (random_tlb(LEN, &mut rng), random_tlb(LEN, &mut rng))).collect();
            let (mut sum_in, mut sum_out) = (0i64, 0i64);
            let (mut gross_p, mut gross_n, mut read_p, mut read_n) = (0u64, 0u64, 0u64, 0u64);
            for l in 0..LEN {
                let xb: Vec<(bool, bool)> = lanes.iter().map(|(x, _)| x.bits(l)).collect();
                let yb: Vec<(bool, bool)> = lanes.iter().map(|(_, y)| y.bits(l)).collect();
                for (&(a, b), &(c, d)) in xb.iter().zip(&yb) {
                    let (p, n) = tlb_multiply_bit(a, b, c, d);
                    sum_in += p as i64 - n as i64;
                    gross_p += p as u64;
                    gross_n += n as u64;
                }
                let products: Vec<(bool, bool)> =
                    xb.iter().zip(&yb).map(|(&(a, b), &(c, d))| tlb_multiply_bit(a, b, c, d)).collect();
                engine.latch_products(&products).unwrap();
                engine.load_inputs().unwrap();
                for _ in 0..K {
                    let (ps, ns) = engine.shift_registers().fronts();
                    read_p += ps as u64;
                    read_n += ns as u64;
                    engine.high_clock_step().unwrap();
                }
                let (zp, zn) = engine.emit().unwrap();
                sum_out += zp as i64 - zn as i64;
                if sum_in != sum_out + engine.stored_carry() + engine.lost_carry() {
                    violations += 1;
                }
                let cancels = engine.diagnostics().cc_cancellations;
                if gross_p != read_p + cancels || gross_n != read_n + cancels {
                    violations += 1;
                }
                if !cc && cancels != 0 {
                    violations += 1;
                }
            }
        }
    }
    let pass = violations == 0;
    report(3, pass, format!("({PAIRS} adder pairs and 2x{} engine runs, L={LEN}, M={M}; {violations} violations)", PAIRS / 10));
    assert!(pass);
}

fn operating_point(design: Design) -> SweepRow {
    let cfg = ExperimentConfig {
        designs: vec![design],
        lanes_grid: vec![16],
        carry_len_grid: vec![6],
        counter_bits_grid: vec![4],
        len: 10_000,
        trials: 200,
        input_scale: 0.9,
        metric: Metric::Standard,
        ..ExperimentConfig::default()
    };
    let result = run_accuracy_sweep(&cfg).unwrap();
    assert_eq!(result.rows.len(), 1);
    result.rows[0].clone()
}

#[test]
fn criterion_4_novel_operating_point() {
    let row = operating_point(Design::Novel);
    let pass = row.rmse <= 0.03;
    report(4, pass, format!("(novel K=16 M=6 L=1e4, 200 trials: RMSE {:.4}, limit 0.03, overflow rate {:.4})", row.rmse, row.overflow_rate));
    assert!(pass);
}

#[test]
fn criterion_5_baseline_operating_point() {
    let row = operating_point(Design::Baseline);
    let pass = row.rmse <= 0.03;
    report(5, pass, format!("(baseline K=16 B=4 L=1e4, 200 trials: RMSE {:.4}, limit 0.03, saturation rate {:.4})", row.rmse, row.overflow_rate));
    assert!(pass);
}

#[test]
fn criterion_6_canceler_direction() {
    const TRIALS: usize = 100_000;
    let cfg = ExperimentConfig {
        canceler_lanes: vec![2, 4, 8, 16, 32, 64],
        canceler_trials: TRIALS,
        seed: 6,
        ..ExperimentConfig::default()
    };
    let rows = run_canceler_experiment(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for pair in rows.chunks(2) {
        let (opp, same) = (&pair[0], &pair[1]);
        let (gap, se) = canceler_gap(opp.lanes, true, TRIALS, cfg.seed);
        let in_range = [opp.p_pos, same.p_pos].iter().all(|&p| p > 0.0 && p < 0.3);
        let ok = opp.p_pos < same.p_pos && gap > 3.0 * se && in_range;
        pass &= ok;
        parts.push(format!("K={} opp={:.4} same={:.4} gap={:.5}±{:.5}{}", opp.lanes, opp.p_pos, same.p_pos, gap, se, if ok { "" } else { " (fails)" }));
    }
    report(6, pass, format!("({})", parts.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_7_fault_trend() {
    let cfg = ExperimentConfig {
        designs: vec![Design::Novel, Design::Baseline],
        lanes_grid: vec![16],
        carry_len: 6,
        counter_bits: 4,
        len: 10_000,
        trials: 200,
        p_flip_grid: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
        metric: Metric::Standard,
        ..ExperimentConfig::default()
    };
    let result = run_fault_sweep(&cfg).unwrap();
    let at = |design: Design, p: f64| {
        result
            .rows
            .iter()
            .find(|r| r.design == design && r.p_flip == p)
            .map(|r| r.rmse)
            .unwrap()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for &p in &cfg.p_flip_grid {
        let (novel, base) = (at(Design::Novel, p), at(Design::Baseline, p));
        if p >= 0.01 {
            pass &= novel < base;
        }
        parts.push(format!("p={p}: {novel:.4} vs {base:.4}"));
    }
    let (novel_end, base_end) = (at(Design::Novel, 0.05), at(Design::Baseline, 0.05));
    pass &= novel_end < 0.15 && base_end > 0.3;
    report(7, pass, format!("(novel vs baseline RMSE {}; need novel<0.15 and baseline>0.3 at p=0.05)", parts.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_8_reproducibility() {
    let cfg = ExperimentConfig {
        lanes_grid: vec![4, 8],
        carry_len_grid: vec![2, 6],
        counter_bits_grid: vec![3, 4],
        p_flip_grid: vec![0.0, 0.05],
        len: 500,
        trials: 20,
        canceler_lanes: vec![1, 5, 16],
        canceler_trials: 5000,
        seed: 8,
        ..ExperimentConfig::default()
    };
    let csvs = || {
        let mut canceler = Vec::new();
        write_canceler_csv(&run_canceler_experiment(&cfg).unwrap(), &mut canceler).unwrap();
        (
            run_accuracy_sweep(&cfg).unwrap().to_csv_string(),
            run_fault_sweep(&cfg).unwrap().to_csv_string(),
            canceler,
        )
    };
    let first = csvs();
    let second = csvs();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(csvs);
    let pass = first == second && first == single;
    report(8, pass, "(accuracy, fault and canceler CSVs; repeated and single-threaded runs byte-identical)".into());
    assert!(pass);
}
