use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use mbs::algebra::{couple_chain, BlockSystem, Scheme};
use mbs::dynamics::{coherence_audit, protocol_run, AuditReport, Mode, MAX_DENSE_DIMENSION};
use mbs::lattice::{
    ac_couplings, dc_couplings, decompose_ac, dnsp_rates, finite_difference_gradient, group_shells, low_loss_check,
    silicon_shells, AcDecomposition, Envelope, LatticeModel,
};
use mbs::presets::{Preset, RatesDocument, SimulationDocument};
use mbs::theory::{g_series, identity_suite, multiplet_count, steady_distribution, unentangled_bound, ProbeOperator};
use mbs::HalfInt;

use crate::output::{num, Manifest, Outputs};
use crate::{Axis, CliError, ModeArg, Source};

/// Tolerance on forbidden matrix elements.
const SELECTION_TOL: f64 = 1e-12;
/// Relative tolerance on the transfer asymmetry.
const ASYMMETRY_TOL: f64 = 1e-9;
/// Largest `J` at which the transfer asymmetry is checked.
const ASYMMETRY_J_MAX: i32 = 5;
/// Finite-difference step for the gradient check, in envelope widths.
const GRADIENT_STEP: f64 = 1e-5;

enum Input {
    Preset(Preset),
    File(String),
}

fn read_source(source: &Source, manifest: &mut Manifest) -> Result<Input, CliError> {
    if let Some(name) = &source.preset {
        let preset: Preset = name.parse()?;
        manifest.config = json!({ "preset": preset.name() });
        return Ok(Input::Preset(preset));
    }
    let path = source.config.as_ref().expect("clap requires one source");
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    manifest.input(path, &bytes);
    let text = String::from_utf8(bytes).map_err(|_| CliError::Input(format!("{} is not UTF-8", path.display())))?;
    Ok(Input::File(text))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

pub fn verify(source: &Source, out: Option<&Path>, tol: f64, superpositions: usize, seed: u64) -> Result<(), CliError> {
    let start = Instant::now();
    let mut manifest = Manifest::new("verify");
    let system = match read_source(source, &mut manifest)? {
        Input::Preset(p) => p.simulation()?.system,
        Input::File(text) => match SimulationDocument::from_json(&text) {
            Ok(doc) => doc.system,
            Err(_) => serde_json::from_str::<BlockSystem>(&text).map_err(mbs::Error::from)?,
        },
    };
    let mut outputs = Outputs::new(out)?;

    let ab = couple_chain(&system, Scheme::AB)?;
    let cd = couple_chain(&system, Scheme::CD)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefficients: Vec<(f64, f64)> =
        (0..superpositions).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut probes = vec![ProbeOperator::partition(&system, Scheme::AB), ProbeOperator::partition(&system, Scheme::CD)];
    probes.extend(coefficients.iter().map(|&(a1, a2)| ProbeOperator::superposition(&system, a1, a2)));
    let report = identity_suite(&[&ab, &cd], &probes, HalfInt::from_int(ASYMMETRY_J_MAX))?;
    let multiplets = multiplet_count(&ab);

    let ratio_ok = report.ratio_samples() > 0 && report.ratio_max_deviation <= tol;
    let selection_ok = report.selection_max <= SELECTION_TOL;
    let asymmetry_ok = report.asymmetry_samples() > 0 && report.asymmetry_max_deviation <= ASYMMETRY_TOL;
    let pass = ratio_ok && selection_ok && asymmetry_ok;

    manifest.config["seed"] = json!(seed);
    manifest.config["superpositions"] = json!(superpositions);
    manifest.config["tol"] = json!(tol);
    outputs.write_json(
        "verify.json",
        &json!({
            "system": system,
            "dimension": ab.product_dimension(),
            "multiplets": multiplets,
            "superposition_coefficients": coefficients,
            "tolerances": { "ratio": tol, "selection": SELECTION_TOL, "asymmetry": ASYMMETRY_TOL },
            "identity": report,
            "pass": pass,
        }),
    )?;
    println!("product dimension       {}", ab.product_dimension());
    println!("singlet multiplets      {}", multiplets.singlets());
    println!(
        "ratio identity          {} ({} samples, max deviation {:.3e})",
        verdict(ratio_ok),
        report.ratio_samples(),
        report.ratio_max_deviation
    );
    println!("selection rules         {} (max forbidden element {:.3e})", verdict(selection_ok), report.selection_max);
    println!(
        "transfer asymmetry      {} ({} samples, max relative deviation {:.3e})",
        verdict(asymmetry_ok),
        report.asymmetry_samples(),
        report.asymmetry_max_deviation
    );
    manifest.runtime_seconds = start.elapsed().as_secs_f64();
    outputs.finish(manifest)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Tolerance("identity checks exceeded their tolerances".into()))
    }
}

pub fn steady(out: Option<&Path>, jmax: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let mut manifest = Manifest::new("steady");
    manifest.config = json!({ "jmax": jmax });
    let mut outputs = Outputs::new(out)?;
    let f = steady_distribution(HalfInt::from_int(jmax as i32), HalfInt::ZERO)?;
    let g = g_series(jmax);
    let floor = 1.0 / g.sum();
    let bound = g.casimir_sum() / g.sum();

    let mut csv = String::from("j,f_over_f0,g,partial_sum\n");
    let mut table = format!("{:>3} {:>20} {:>20} {:>20}\n", "J", "f(J)/f(0)", "g(J)", "sum g");
    for j in 0..=jmax {
        let fj = f.f[&HalfInt::from_int(j as i32)];
        writeln!(csv, "{j},{},{},{}", num(fj), num(g.g[j]), num(g.partial[j])).unwrap();
        writeln!(table, "{j:>3} {fj:>20.12e} {:>20.12e} {:>20.12}", g.g[j], g.partial[j]).unwrap();
    }
    print!("{table}");
    println!("singlet floor   {floor:.2}  ({floor:.12})");
    println!("variance bound  {bound:.2}  ({bound:.12})");
    outputs.write("steady.csv", &csv)?;
    outputs.write_json(
        "steady.json",
        &json!({
            "jmax": jmax,
            "f_over_f0": (0..=jmax).map(|j| f.f[&HalfInt::from_int(j as i32)]).collect::<Vec<_>>(),
            "g": g.g,
            "partial_sums": g.partial,
            "singlet_floor": floor,
            "variance_bound": bound,
            "singlet_floor_2dp": round2(floor),
            "variance_bound_2dp": round2(bound),
        }),
    )?;
    manifest.runtime_seconds = start.elapsed().as_secs_f64();
    outputs.finish(manifest)
}

#[derive(Serialize)]
struct AuditSummary {
    tolerance: f64,
    max_p_j_deviation: f64,
    max_coherence: f64,
    report: AuditReport,
}

pub fn simulate(source: &Source, out: Option<&Path>, mode: Option<ModeArg>, audit: bool, tol: f64) -> Result<(), CliError> {
    let start = Instant::now();
    let mut manifest = Manifest::new("simulate");
    let mut doc = match read_source(source, &mut manifest)? {
        Input::Preset(p) => p.simulation()?,
        Input::File(text) => SimulationDocument::from_json(&text)?,
    };
    if let Some(m) = mode {
        doc.protocol.mode = match m {
            ModeArg::Kinetic => Mode::Kinetic,
            ModeArg::SteadyShortcut => Mode::SteadyShortcut,
        };
    }
    manifest.config = json!({ "source": manifest.config, "document": doc, "audit": audit, "tol": tol });
    let mut outputs = Outputs::new(out)?;

    let run = protocol_run(&doc.system, &doc.protocol)?;
    for w in &run.warnings {
        eprintln!("mbs: warning: {w}");
    }
    let mut series = String::from("interval,time,twice_j,p_j\n");
    let mut multiplets = String::from("interval,time,twice_j,twice_ja,twice_jb,p\n");
    for c in &run.series.checkpoints {
        for (j, p) in &c.p_j {
            writeln!(series, "{},{},{},{}", c.interval, num(c.time), j.twice(), num(*p)).unwrap();
        }
        for m in &c.multiplets {
            let (a, b) = m.twice_pair;
            writeln!(multiplets, "{},{},{},{a},{b},{}", c.interval, num(c.time), m.twice_j, num(m.p)).unwrap();
        }
    }
    outputs.write("series.csv", &series)?;
    outputs.write("multiplets.csv", &multiplets)?;

    let audit_summary = if audit {
        let dim = doc.system.dimension().unwrap_or(usize::MAX);
        if dim > MAX_DENSE_DIMENSION {
            eprintln!("mbs: warning: audit skipped, product dimension {dim} exceeds {MAX_DENSE_DIMENSION}");
            None
        } else {
            let report = coherence_audit(&doc.system, &doc.protocol)?;
            Some(AuditSummary {
                tolerance: tol,
                max_p_j_deviation: report.max_deviation(),
                max_coherence: report.max_coherence(),
                report,
            })
        }
    } else {
        None
    };

    let last = run.series.last();
    let n = doc.system.len() as f64;
    let s_bar = doc.system.blocks().iter().map(|b| b.spin.value()).sum::<f64>() / n;
    let last_change = match run.series.checkpoints.len() {
        0 | 1 => 0.0,
        k => run.series.multiplet_change(k - 2, k - 1),
    };
    let summary = json!({
        "mode": doc.protocol.mode,
        "n_intervals": doc.protocol.n_intervals,
        "time": last.time,
        "p_singlet": last.singlet_population(),
        "casimir": last.casimir,
        "p_singlet_2dp": round2(last.singlet_population()),
        "casimir_2dp": round2(last.casimir),
        "unentangled_bound": unentangled_bound(last.casimir, s_bar)?,
        "last_interval_max_change": last_change,
        "warnings": run.warnings,
        "audit": audit_summary,
    });
    outputs.write_json("summary.json", &summary)?;
    println!("t = {} (1/lambda_o), {} intervals", last.time, doc.protocol.n_intervals);
    println!("P(J=0)   {:.12}", last.singlet_population());
    println!("<J^2>    {:.12}", last.casimir);
    if let Some(a) = &audit_summary {
        println!("audit    max P(J) deviation {:.3e}, max coherence {:.3e}", a.max_p_j_deviation, a.max_coherence);
    }
    manifest.runtime_seconds = start.elapsed().as_secs_f64();
    outputs.finish(manifest)?;
    match audit_summary {
        Some(a) if a.max_p_j_deviation > tol => Err(CliError::Tolerance(format!(
            "full and diagonal dynamics differ by {:.3e} > {tol:.3e}",
            a.max_p_j_deviation
        ))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct ShellReport {
    coupling: f64,
    sites: Vec<usize>,
    decomposition: Option<AcDecomposition>,
    bipartition: Option<AcDecomposition>,
    residual: Option<f64>,
    error: Option<String>,
}

fn silicon_table(out: Option<&Path>, mut manifest: Manifest, start: Instant) -> Result<(), CliError> {
    let mut outputs = Outputs::new(out)?;
    let shells = silicon_shells();
    let mut csv = String::from("shell,coupling_mhz,sites\n");
    for s in &shells {
        writeln!(csv, "{},{:.1},{}", s.label, s.coupling_mhz, s.sites).unwrap();
        println!("{}  {:>4.1} MHz  {:>3} sites", s.label, s.coupling_mhz, s.sites);
    }
    println!("total    {:>3} sites", shells.iter().map(|s| s.sites).sum::<usize>());
    outputs.write("silicon.csv", &csv)?;
    outputs.write_json("silicon.json", &shells)?;
    manifest.runtime_seconds = start.elapsed().as_secs_f64();
    outputs.finish(manifest)
}

pub fn lattice(source: &Source, out: Option<&Path>, direction: Axis, tol: f64) -> Result<(), CliError> {
    let start = Instant::now();
    let mut manifest = Manifest::new("lattice");
    let model = match read_source(source, &mut manifest)? {
        Input::Preset(Preset::Silicon) => return silicon_table(out, manifest, start),
        Input::Preset(p) => p.lattice()?,
        Input::File(text) => LatticeModel::from_json(&text)?,
    };
    let mu = match direction {
        Axis::X => [1.0, 0.0],
        Axis::Y => [0.0, 1.0],
    };
    manifest.config["direction"] = json!(mu);
    manifest.config["tol"] = json!(tol);
    let mut outputs = Outputs::new(out)?;

    let dc = dc_couplings(&model);
    let ac = ac_couplings(&model, mu)?;
    let gradient_error = model
        .sites
        .iter()
        .map(|s| {
            let a = model.envelope.gradient(s.position);
            let f = finite_difference_gradient(&model.envelope, s.position, GRADIENT_STEP * model.envelope.sigma);
            (0..2)
                .map(|k| if a[k] != 0.0 { ((a[k] - f[k]) / a[k]).abs() } else { f[k].abs() })
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);

    let mut csv = String::from("site,x,y,twice_spin,dc,ac\n");
    for (n, s) in model.sites.iter().enumerate() {
        let [x, y] = s.position;
        writeln!(csv, "{n},{},{},{},{},{}", num(x), num(y), s.spin.twice(), num(dc[n]), num(ac[n])).unwrap();
    }
    outputs.write("couplings.csv", &csv)?;

    let partition = group_shells(&dc, tol);
    let mut failures = Vec::new();
    let shells: Vec<ShellReport> = partition
        .shells
        .iter()
        .map(|shell| match decompose_ac(&shell.sites, &ac, mu, tol) {
            Ok(d) => ShellReport {
                coupling: shell.coupling,
                sites: shell.sites.clone(),
                residual: Some(d.residual(&ac)),
                bipartition: d.bipartition(),
                decomposition: Some(d),
                error: None,
            },
            Err(e) => {
                failures.push(e.to_string());
                ShellReport {
                    coupling: shell.coupling,
                    sites: shell.sites.clone(),
                    decomposition: None,
                    bipartition: None,
                    residual: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();
    for (k, s) in shells.iter().enumerate() {
        let terms = s.decomposition.as_ref().map(|d| d.terms.len());
        let detail = match (terms, &s.error) {
            (Some(t), _) => format!("{t} term(s), residual {:.3e}", s.residual.unwrap_or(0.0)),
            (None, Some(e)) => e.clone(),
            _ => String::new(),
        };
        println!("shell {k}: {} sites, dc {:.6e}, {detail}", s.sites.len(), s.coupling);
    }
    println!("gradient check: max relative error {gradient_error:.3e}");
    outputs.write_json(
        "lattice.json",
        &json!({
            "model": model,
            "direction": mu,
            "tolerance": tol,
            "shell_sizes": partition.sizes(),
            "shells": shells,
            "gradient_max_relative_error": gradient_error,
        }),
    )?;
    manifest.runtime_seconds = start.elapsed().as_secs_f64();
    outputs.finish(manifest)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(failures.join("; ")))
    }
}

pub fn rates(source: &Source, out: Option<&Path>, factor: Option<f64>) -> Result<(), CliError> {
    let start = Instant::now();
    let mut manifest = Manifest::new("rates");
    let mut doc = match read_source(source, &mut manifest)? {
        Input::Preset(p) => p.rates()?,
        Input::File(text) => RatesDocument::from_json(&text)?,
    };
    if let Some(f) = factor {
        doc.factor = f;
    }
    manifest.config["document"] = json!(doc);
    let mut outputs = Outputs::new(out)?;
    let rates = dnsp_rates(&doc.dnsp)?;
    let report = low_loss_check(&doc.budget()?, doc.factor)?;
    println!("lambda_h  {:.6e}", rates.lambda_h);
    println!("lambda_o  {:.6e}", rates.lambda_o);
    println!(
        "lambda_h/(4Ns^2) > lambda_o   {} ({:.6e} vs {:.6e}, margin {:.3})",
        verdict(report.lowering.pass),
        report.lowering.lhs,
        report.lowering.rhs,
        report.lowering.margin
    );
    println!(
        "lambda_o >= {} gamma_n       {} ({:.6e} vs {:.6e}, margin {:.3})",
        doc.factor,
        verdict(report.decoherence.pass),
        report.decoherence.lhs,
        report.decoherence.rhs,
        report.decoherence.margin
    );
    outputs.write_json("rates.json", &json!({ "rates": rates, "low_loss": report, "pass": report.pass() }))?;
    manifest.runtime_seconds = start.elapsed().as_secs_f64();
    outputs.finish(manifest)?;
    if report.pass() {
        Ok(())
    } else {
        Err(CliError::Tolerance("low-loss condition not met".into()))
    }
}
