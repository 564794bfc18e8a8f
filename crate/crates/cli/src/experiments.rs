use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use qpass_core::game::{run_suite as run_all, run_test as run_one, standard_suite, RateRecord, RateTable, TestSpec};
use qpass_core::mitigation::{self, CalibrationMethod, Negativity};
use qpass_core::qcirc::{format_bitstring, CountsMap, NoiseModel};
use qpass_core::trapauth::{derive_keys, Password, SALT_LEN};
use qpass_core::verify::{depth_report as depth_of, DepthReport, VerificationMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use crate::{ExperimentArgs, Failure, Method};

fn password(exp: &ExperimentArgs) -> Result<Password, Failure> {
    Password::from_text(&exp.password).map_err(|e| Failure::Usage(e.to_string()))
}

fn out_file(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_table(table: &RateTable, dir: &Path, stem: &str) -> anyhow::Result<()> {
    let mut json = out_file(dir, &format!("{stem}.json"))?;
    table.write_json(&mut json)?;
    json.write_all(b"\n")?;
    json.flush()?;
    let mut csv = out_file(dir, &format!("{stem}.csv"))?;
    table.write_csv(&mut csv)?;
    csv.flush()?;
    Ok(())
}

fn percent(rate: Option<f64>) -> String {
    rate.map(|r| format!("{:.2}%", 100.0 * r)).unwrap_or_else(|| "-".into())
}

fn print_row(r: &RateRecord) {
    println!(
        "test {}  tp {:>8}  fp {:>8}  ({} trials x {} shots, {}, {})",
        r.test,
        percent(r.tp),
        percent(r.fp),
        r.trials,
        r.shots,
        r.noise,
        r.mode
    );
}

fn check_counts(exp: &ExperimentArgs) -> Result<(), Failure> {
    if exp.shots == 0 || exp.trials == 0 {
        return Err(Failure::Usage("--shots and --trials must be positive".into()));
    }
    Ok(())
}

pub fn run_test(id: u8, target: Option<usize>, exp: &ExperimentArgs) -> Result<(), Failure> {
    check_counts(exp)?;
    if target.is_some() && !(3..=5).contains(&id) {
        return Err(Failure::Usage(format!(
            "--target applies to tests 3 to 5, not test {id}"
        )));
    }
    let mut spec = TestSpec::standard(id, exp.noise.clone(), exp.mode)
        .map_err(|e| Failure::Usage(e.to_string()))?
        .with_trials(exp.trials)
        .with_shots(exp.shots);
    if let Some(q) = target {
        spec = spec.with_target(q);
    }
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let record = run_one(&spec, &password(exp)?, exp.seed).context("running test")?;
    print_row(&record);
    if let Some(dir) = &exp.out {
        write_table(&RateTable { rows: vec![record] }, dir, &format!("test{id}"))?;
    }
    Ok(())
}

pub fn run_suite(exp: &ExperimentArgs) -> Result<(), Failure> {
    check_counts(exp)?;
    let specs = standard_suite(&exp.noise, exp.mode, exp.trials, exp.shots).context("building suite")?;
    let table = run_all(&specs, &password(exp)?, exp.seed).context("running suite")?;
    for row in &table.rows {
        print_row(row);
    }
    if let Some(dir) = &exp.out {
        write_table(&table, dir, "suite")?;
    }
    Ok(())
}

fn write_counts(counts: &CountsMap, dir: &Path, name: &str) -> anyhow::Result<PathBuf> {
    let mut w = out_file(dir, name)?;
    counts.write_csv(&mut w)?;
    w.flush()?;
    Ok(dir.join(name))
}

pub fn histogram(test: u8, mitigate: bool, exp: &ExperimentArgs) -> Result<(), Failure> {
    check_counts(exp)?;
    let spec = TestSpec::standard(test, exp.noise.clone(), exp.mode)
        .map_err(|e| Failure::Usage(e.to_string()))?
        .with_trials(1)
        .with_shots(exp.shots);
    let record = run_one(&spec, &password(exp)?, exp.seed).context("running test")?;
    let raw = record.raw_histogram.as_ref().context("no trial ran")?;
    let processed = record.processed_histogram.as_ref().context("no trial ran")?;

    let mut top: Vec<(u32, u64)> = processed.iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    println!(
        "test {test}, {} shots, {}, {}: most frequent processed outcomes",
        exp.shots, exp.noise.name, exp.mode
    );
    for (key, n) in top.iter().take(8) {
        println!(
            "  {}  {:>7}  {:6.2}%",
            format_bitstring(*key, processed.width()),
            n,
            100.0 * *n as f64 / exp.shots as f64
        );
    }

    let mitigated = if mitigate {
        let qubits = exp.mode.measured_qubits();
        let cal = mitigation::calibrate(&exp.noise, &qubits, exp.shots, CalibrationMethod::Tensored, exp.seed)
            .context("calibrating readout")?;
        Some(mitigation::mitigate(raw, &cal, Negativity::Clip).context("mitigating")?)
    } else {
        None
    };

    if let Some(dir) = &exp.out {
        let stem = format!("histogram_test{test}");
        write_counts(raw, dir, &format!("{stem}_raw.csv"))?;
        write_counts(processed, dir, &format!("{stem}_processed.csv"))?;
        if let Some(dist) = &mitigated {
            let mut w = out_file(dir, &format!("{stem}_mitigated.csv"))?;
            writeln!(w, "bitstring,probability")?;
            for (key, p) in dist.probs.iter().enumerate() {
                if *p > 0.0 {
                    writeln!(w, "{},{p:.8}", format_bitstring(key as u32, dist.width))?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn calibrate(
    noise: &NoiseModel,
    mode: VerificationMode,
    method: Method,
    shots: u64,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if shots == 0 {
        return Err(Failure::Usage("--shots must be positive".into()));
    }
    let method = match method {
        Method::Tensored => CalibrationMethod::Tensored,
        Method::Complete => CalibrationMethod::Complete,
    };
    let qubits = mode.measured_qubits();
    if method == CalibrationMethod::Complete && qubits.len() > mitigation::MAX_COMPLETE_QUBITS {
        return Err(Failure::Usage(format!(
            "complete calibration of {} qubits is not supported; use --method tensored or --mode phase-only",
            qubits.len()
        )));
    }
    let cal = mitigation::calibrate(noise, &qubits, shots, method, seed).context("calibrating")?;
    println!(
        "{} calibration of {} qubits under {}, {shots} shots per state, condition number {:.4}",
        match method {
            CalibrationMethod::Tensored => "tensored",
            CalibrationMethod::Complete => "complete",
        },
        qubits.len(),
        noise.name,
        cal.condition_number()
    );
    for (q, row) in qubits.iter().zip(&cal.per_qubit) {
        println!("  qubit {q:>2}  P(1|0) {:.4}  P(0|1) {:.4}", row[0][1], row[1][0]);
    }
    if let Some(dir) = out {
        let mut w = out_file(dir, "calibration.json")?;
        serde_json::to_writer_pretty(&mut w, &cal).context("writing calibration")?;
        w.write_all(b"\n").context("writing calibration")?;
        w.flush().context("writing calibration")?;
    }
    Ok(())
}

pub fn depth_report(keysets: u32, mode: VerificationMode, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    if keysets == 0 {
        return Err(Failure::Usage("--keysets must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let reports = (0..keysets)
        .map(|_| {
            let pw = Password::random(32, &mut rng)?;
            let mut salt = [0u8; SALT_LEN];
            rng.fill(&mut salt);
            depth_of(&derive_keys(&pw, &salt), mode)
        })
        .collect::<qpass_core::Result<Vec<DepthReport>>>()
        .context("building circuits")?;

    let stat = |f: &dyn Fn(&DepthReport) -> f64| {
        let v: Vec<f64> = reports.iter().map(f).collect();
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (min, v.iter().sum::<f64>() / v.len() as f64, max)
    };
    let rows: [(&str, (f64, f64, f64)); 6] = [
        ("delegated program", stat(&|r| r.delegated_program as f64)),
        ("delegated pipeline", stat(&|r| r.delegated_pipeline as f64)),
        ("naive program", stat(&|r| r.naive_program as f64)),
        ("naive pipeline", stat(&|r| r.naive_pipeline as f64)),
        (
            "naive pipeline (SWAP = 1)",
            stat(&|r| r.naive_pipeline_swap_unit as f64),
        ),
        ("ratio naive/delegated", stat(&|r| r.ratio())),
    ];
    println!("{keysets} key sets, {mode}, native depth (SWAP = 3 CNOT)");
    println!("  {:<28} {:>8} {:>8} {:>8}", "", "min", "mean", "max");
    for (name, (min, mean, max)) in &rows {
        println!("  {name:<28} {min:>8.2} {mean:>8.2} {max:>8.2}");
    }
    let all_shallower = reports.iter().all(|r| r.delegated_pipeline < r.naive_pipeline);
    println!("  delegated shallower in every key set: {all_shallower}");

    if let Some(dir) = out {
        let summary: serde_json::Map<String, serde_json::Value> = rows
            .iter()
            .map(|(name, (min, mean, max))| (name.to_string(), json!({ "min": min, "mean": mean, "max": max })))
            .collect();
        let doc = json!({
            "keysets": keysets,
            "mode": mode,
            "seed": seed,
            "summary": summary,
            "reports": reports,
        });
        let mut w = out_file(dir, "depth.json")?;
        serde_json::to_writer_pretty(&mut w, &doc).context("writing depth report")?;
        w.write_all(b"\n").context("writing depth report")?;
        w.flush().context("writing depth report")?;
    }
    Ok(())
}
