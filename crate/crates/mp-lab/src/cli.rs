//! Command implementations behind the `mpfluct` binary.
//!
//! Exit-code contract: 0 = all enabled checks pass, 1 = a statistical check
//! failed, 2 = operational error (bad config, IO, numerical breakdown).

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use mp_core::{
    mp_density, phi_kernel, predict_entry_clt, predict_resolvent_field_cov, stieltjes_g,
    EntryField, MpParams, Prediction, TestFunction,
};

use crate::config::{load_config, ReportFormat, RunConfig};
use crate::ensemble::EnsembleSpec;
use crate::fluct_mc::{run_entry_fluctuations, run_resolvent_field, FluctuationBatch};
use crate::report::{
    config_hash, write_batch_header, write_entry_batch_csv, write_field_batch_csv, ReportSet,
    RunReport, REPORT_VERSION,
};
use crate::stats::{
    covariance_block_test, independence_test, ks_gaussian_test, sample_variance, variance_test,
};
use crate::{LabError, Result};

#[derive(Debug, Parser)]
#[command(
    name = "mpfluct",
    about = "Numerical laboratory for entrywise fluctuations of sample covariance matrices"
)]
pub struct Cli {
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trial-count override.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output directory override.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report format override.
    #[arg(long, value_parser = ["json", "csv", "both"])]
    pub format: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the closed-form predictions for a config (no randomness).
    Predict(RunArgs),
    /// Run the Monte-Carlo simulation and write the sample batches.
    Simulate(RunArgs),
    /// Simulate, test against predictions, and write a pass/fail report.
    Verify(RunArgs),
    /// Emit density and Stieltjes-transform tables.
    MpTable {
        /// Scale index sigma^2.
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Ratio index c.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Number of grid points per table.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Imaginary offset of the Stieltjes evaluation line.
        #[arg(long, default_value_t = 1.0)]
        im: f64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the built-in calibration checks of the statistics layer.
    SelfTest,
}

/// Entry point used by `main` and by the CLI tests; returns the process
/// exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(workers) = cli.workers {
        // Ignore the error if a pool already exists (tests, repeated calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Predict(args) => cmd_predict(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::MpTable {
            sigma2,
            c,
            grid,
            im,
            out,
        } => cmd_mp_table(sigma2, c, grid, im, &out),
        Command::SelfTest => cmd_self_test(),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn resolve(args: &RunArgs) -> Result<(RunConfig, u64)> {
    let mut cfg = load_config(&args.config)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(dir) = &args.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(fmt) = &args.format {
        cfg.output.formats = match fmt.as_str() {
            "json" => vec![ReportFormat::Json],
            "csv" => vec![ReportFormat::Csv],
            _ => vec![ReportFormat::Json, ReportFormat::Csv],
        };
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    let seed = match cfg.seed {
        Some(s) => s,
        None => {
            let s: u64 = rand::random();
            s
        }
    };
    // Echo the resolved seed so reruns from the report are exact.
    cfg.seed = Some(seed);
    cfg.validate()?;
    Ok((cfg, seed))
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

struct PairPrediction {
    label: String,
    diagonal: bool,
    prediction: Prediction,
    /// Total variance after negative-control overrides.
    total: f64,
    re_variance: f64,
    im_variance: f64,
}

fn pair_predictions(cfg: &RunConfig, p: &MpParams, kappa4: f64) -> Result<Vec<PairPrediction>> {
    let field = cfg.ensemble.field;
    let mut out = Vec::new();
    for (i, j) in cfg.zero_based_pairs() {
        let diagonal = i == j;
        let prediction = predict_entry_clt(&cfg.function, p, field, kappa4, diagonal)?;
        let total = cfg.overrides.variance.unwrap_or(prediction.variance);
        let (re_variance, im_variance) = if field == EntryField::Complex && !diagonal {
            (0.5 * total, 0.5 * total)
        } else {
            (total, 0.0)
        };
        out.push(PairPrediction {
            label: format!("e{}_{}", i + 1, j + 1),
            diagonal,
            prediction,
            total,
            re_variance,
            im_variance,
        });
    }
    Ok(out)
}

fn cmd_predict(args: &RunArgs) -> Result<bool> {
    let (cfg, _seed) = resolve(args)?;
    let spec = cfg.ensemble.with_seed(0);
    let p = spec.mp_params()?;
    let kappa4 = cfg.overrides.kappa4.unwrap_or(spec.kappa4());

    println!(
        "law: sigma2 = {}, c_N = {}, edges [{:.6}, {:.6}], atom {:.6}",
        p.sigma2(),
        p.c(),
        p.edge_lower(),
        p.edge_upper(),
        p.atom_weight()
    );
    println!("entry kappa4 ({:?} convention): {kappa4}", cfg.ensemble.field);

    let preds = pair_predictions(&cfg, &p, kappa4)?;
    if let Some(first) = preds.first() {
        println!(
            "omega2(f) = {:.12}, rho(f) = {:.12}",
            first.prediction.omega2, first.prediction.rho
        );
    }
    for pp in &preds {
        println!(
            "{}: variance {:.12} (omega2 term {:.12}, kappa4 term {:.12}; re {:.12}, im {:.12})",
            pp.label,
            pp.total,
            pp.prediction.omega2_term,
            pp.prediction.kappa4_term,
            pp.re_variance,
            pp.im_variance
        );
    }

    let points = cfg.points();
    if !points.is_empty() {
        for (a, &za) in points.iter().enumerate() {
            for (b, &zb) in points.iter().enumerate().skip(a) {
                let phi = phi_kernel(za / p.c(), zb / p.c(), &p)?;
                println!("phi(z{}/c, z{}/c) = {} + {}i", a + 1, b + 1, phi.re, phi.im);
                for i in 0..cfg.targets.corner {
                    for j in i..cfg.targets.corner {
                        let block = predict_resolvent_field_cov(
                            za,
                            zb,
                            &p,
                            cfg.ensemble.field,
                            kappa4,
                            i == j,
                        )?;
                        println!(
                            "cov r{}_{}@p{}~p{}: [[{:.9}, {:.9}], [{:.9}, {:.9}]]",
                            i + 1,
                            j + 1,
                            a + 1,
                            b + 1,
                            block.get(0, 0),
                            block.get(0, 1),
                            block.get(1, 0),
                            block.get(1, 1)
                        );
                    }
                }
            }
        }
    }

    if cfg.output.formats.contains(&ReportFormat::Json) {
        ensure_out_dir(&cfg.output.dir)?;
        let path = cfg.output.dir.join("predictions.json");
        let json = serde_json::json!({
            "version": REPORT_VERSION,
            "config": &cfg,
            "config_hash": config_hash(&cfg),
            "predictions": preds.iter().map(|pp| serde_json::json!({
                "id": pp.label,
                "diagonal": pp.diagonal,
                "variance": pp.total,
                "omega2": pp.prediction.omega2,
                "rho": pp.prediction.rho,
                "omega2_term": pp.prediction.omega2_term,
                "kappa4_term": pp.prediction.kappa4_term,
                "re_variance": pp.re_variance,
                "im_variance": pp.im_variance,
            })).collect::<Vec<_>>(),
        });
        std::fs::write(&path, format!("{:#}\n", json))?;
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn simulate_batches(
    cfg: &RunConfig,
    spec: &EnsembleSpec,
) -> Result<(Option<FluctuationBatch>, Option<crate::fluct_mc::ResolventFieldBatch>)> {
    let entry_batch = if cfg.targets.pairs.is_empty() {
        None
    } else {
        Some(run_entry_fluctuations(
            spec,
            &cfg.function,
            &cfg.zero_based_pairs(),
            cfg.trials,
            cfg.centering,
        )?)
    };
    let field_batch = if cfg.targets.points.is_empty() {
        None
    } else {
        Some(run_resolvent_field(
            spec,
            &cfg.points(),
            cfg.targets.corner,
            cfg.trials,
        )?)
    };
    Ok((entry_batch, field_batch))
}

fn write_batches(
    cfg: &RunConfig,
    seed: u64,
    entry: &Option<FluctuationBatch>,
    field: &Option<crate::fluct_mc::ResolventFieldBatch>,
) -> Result<()> {
    if !cfg.output.formats.contains(&ReportFormat::Csv) {
        return Ok(());
    }
    ensure_out_dir(&cfg.output.dir)?;
    if let Some(batch) = entry {
        let csv = cfg.output.dir.join("entry_batch.csv");
        write_entry_batch_csv(batch, &csv)?;
        let labels = (0..batch.pairs.len()).map(|k| batch.pair_label(k)).collect();
        write_batch_header(
            cfg,
            seed,
            "entry_fluctuations",
            batch.trials,
            batch.failed_trials,
            labels,
            &cfg.output.dir.join("entry_batch.json"),
        )?;
        println!("wrote {}", csv.display());
    }
    if let Some(batch) = field {
        let csv = cfg.output.dir.join("resolvent_batch.csv");
        write_field_batch_csv(batch, &csv)?;
        let labels = (0..batch.targets.len())
            .map(|k| batch.target_label(k))
            .collect();
        write_batch_header(
            cfg,
            seed,
            "resolvent_field",
            batch.trials,
            batch.failed_trials,
            labels,
            &cfg.output.dir.join("resolvent_batch.json"),
        )?;
        println!("wrote {}", csv.display());
    }
    Ok(())
}

fn cmd_simulate(args: &RunArgs) -> Result<bool> {
    let (cfg, seed) = resolve(args)?;
    let spec = cfg.ensemble.with_seed(seed);
    let (entry, field) = simulate_batches(&cfg, &spec)?;
    if let Some(batch) = &entry {
        println!(
            "entry batch: {} trials ({} failed), {} targets",
            batch.trials,
            batch.failed_trials,
            batch.pairs.len()
        );
        for k in 0..batch.pairs.len() {
            let re = batch.coordinate(k, false);
            println!(
                "  {}: sample variance (re) = {:.6}",
                batch.pair_label(k),
                sample_variance(&re)
            );
        }
    }
    if let Some(batch) = &field {
        println!(
            "resolvent batch: {} trials ({} failed), {} targets",
            batch.trials,
            batch.failed_trials,
            batch.targets.len()
        );
    }
    write_batches(&cfg, seed, &entry, &field)?;
    Ok(true)
}

fn cmd_verify(args: &RunArgs) -> Result<bool> {
    let started = Instant::now();
    let (cfg, seed) = resolve(args)?;
    let spec = cfg.ensemble.with_seed(seed);
    let p = spec.mp_params()?;
    let kappa4 = cfg.overrides.kappa4.unwrap_or(spec.kappa4());
    let field_kind = cfg.ensemble.field;

    let (entry, field) = simulate_batches(&cfg, &spec)?;
    let mut reports = ReportSet::default();

    if let Some(batch) = &entry {
        let preds = pair_predictions(&cfg, &p, kappa4)?;
        for (k, pp) in preds.iter().enumerate() {
            let complex_offdiag = field_kind == EntryField::Complex && !pp.diagonal;
            let re = batch.coordinate(k, false);
            if cfg.tests.variance.enabled {
                let band = cfg.tests.variance.rel_band;
                if complex_offdiag {
                    let im = batch.coordinate(k, true);
                    reports.variance.push(variance_test(
                        &format!("{}.re", pp.label),
                        &re,
                        pp.re_variance,
                        band,
                    )?);
                    reports.variance.push(variance_test(
                        &format!("{}.im", pp.label),
                        &im,
                        pp.im_variance,
                        band,
                    )?);
                } else {
                    reports
                        .variance
                        .push(variance_test(&pp.label, &re, pp.total, band)?);
                }
            }
            if cfg.tests.gaussian_fit.enabled && batch.trials >= 500 {
                if complex_offdiag {
                    if pp.re_variance > 1e-9 {
                        let im = batch.coordinate(k, true);
                        reports.gaussian_fit.push(ks_gaussian_test(
                            &format!("{}.re", pp.label),
                            &re,
                            pp.re_variance,
                        )?);
                        reports.gaussian_fit.push(ks_gaussian_test(
                            &format!("{}.im", pp.label),
                            &im,
                            pp.im_variance,
                        )?);
                    }
                } else if pp.total > 1e-9 {
                    reports
                        .gaussian_fit
                        .push(ks_gaussian_test(&pp.label, &re, pp.total)?);
                }
            }
            if cfg.tests.independence.enabled && complex_offdiag {
                let im = batch.coordinate(k, true);
                reports.independence.push(independence_test(
                    &format!("{}.re", pp.label),
                    &format!("{}.im", pp.label),
                    &re,
                    &im,
                    cfg.tests.independence.threshold,
                ));
            }
        }
        if cfg.tests.independence.enabled {
            for k in 0..batch.pairs.len() {
                for l in (k + 1)..batch.pairs.len() {
                    let a = batch.coordinate(k, false);
                    let b = batch.coordinate(l, false);
                    reports.independence.push(independence_test(
                        &batch.pair_label(k),
                        &batch.pair_label(l),
                        &a,
                        &b,
                        cfg.tests.independence.threshold,
                    ));
                }
            }
        }
    }

    if let Some(batch) = &field {
        if cfg.tests.covariance_blocks.enabled {
            let points = cfg.points();
            for i in 0..batch.corner {
                for j in i..batch.corner {
                    for a in 0..points.len() {
                        for b in a..points.len() {
                            let predicted = predict_resolvent_field_cov(
                                points[a],
                                points[b],
                                &p,
                                field_kind,
                                kappa4,
                                i == j,
                            )?;
                            let u = batch.samples_for(a, i, j).expect("target exists");
                            let v = batch.samples_for(b, i, j).expect("target exists");
                            reports.covariance_blocks.push(covariance_block_test(
                                &format!("r{}_{}@p{}~p{}", i + 1, j + 1, a + 1, b + 1),
                                u,
                                v,
                                predicted,
                                cfg.tests.covariance_blocks.rel_band,
                            )?);
                        }
                    }
                }
            }
        }
    }

    let pass = reports.all_pass()
        && (!cfg.tests.gaussian_fit.enabled || reports.fit_pass(cfg.tests.gaussian_fit.min_p));

    let report = RunReport {
        version: REPORT_VERSION,
        config_hash: config_hash(&cfg),
        seed,
        wall_ms: started.elapsed().as_millis(),
        pass,
        reports,
        config: cfg.clone(),
    };

    for r in &report.reports.variance {
        println!(
            "variance {}: estimate {:.6}, predicted {:.6} -> {}",
            r.id,
            r.estimate,
            r.predicted,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    for r in &report.reports.gaussian_fit {
        println!(
            "gaussian fit {}: D = {:.5}, p = {:.4} -> {}",
            r.id,
            r.ks_statistic,
            r.p_value,
            if r.p_value > cfg.tests.gaussian_fit.min_p {
                "pass"
            } else {
                "FAIL"
            }
        );
    }
    for r in &report.reports.independence {
        println!(
            "independence {}: corr = {} -> {}",
            r.id,
            r.correlation.map_or("n/a".to_string(), |c| format!("{c:.4}")),
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    for r in &report.reports.covariance_blocks {
        println!(
            "cov block {}: worst deviation {:.3} of tolerance -> {}",
            r.id,
            r.worst_deviation,
            if r.pass { "pass" } else { "FAIL" }
        );
    }
    println!("overall: {}", if pass { "pass" } else { "FAIL" });

    ensure_out_dir(&cfg.output.dir)?;
    if cfg.output.formats.contains(&ReportFormat::Json) {
        report.write_json(&cfg.output.dir.join("report.json"))?;
    }
    if cfg.output.formats.contains(&ReportFormat::Csv) {
        report.write_csv(&cfg.output.dir.join("report.csv"))?;
    }
    write_batches(&cfg, seed, &entry, &field)?;
    Ok(pass)
}

fn cmd_mp_table(sigma2: f64, c: f64, grid: usize, im: f64, out: &Path) -> Result<bool> {
    if grid < 2 {
        return Err(LabError::InvalidRequest("grid needs at least 2 points".into()));
    }
    let p = MpParams::new(sigma2, c)?;
    ensure_out_dir(out)?;

    let density_path = out.join("density.csv");
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&density_path)?;
        writeln!(f, "kind,x,value")?;
        if p.atom_weight() > 0.0 {
            writeln!(f, "atom,0,{}", p.atom_weight())?;
        }
        let lo = p.edge_lower();
        let hi = p.edge_upper();
        for k in 0..grid {
            let x = lo + (hi - lo) * k as f64 / (grid - 1) as f64;
            writeln!(f, "density,{x},{}", mp_density(x, &p))?;
        }
    }

    let stieltjes_path = out.join("stieltjes.csv");
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&stieltjes_path)?;
        writeln!(f, "re_z,im_z,re_g,im_g")?;
        let lo = p.edge_lower() - 2.0;
        let hi = p.edge_upper() + 2.0;
        for k in 0..grid {
            let x = lo + (hi - lo) * k as f64 / (grid - 1) as f64;
            let z = Complex64::new(x, im);
            let g = stieltjes_g(z, &p)?;
            writeln!(f, "{x},{im},{},{}", g.re, g.im)?;
        }
    }

    println!("wrote {}", density_path.display());
    println!("wrote {}", stieltjes_path.display());
    Ok(true)
}

fn cmd_self_test() -> Result<bool> {
    use crate::ensemble::substream_rng;
    use rand_distr::{Distribution, StandardNormal};

    let mut ok = true;
    let mut check = |name: &str, pass: bool| {
        println!("{}: {}", name, if pass { "pass" } else { "FAIL" });
        ok &= pass;
    };

    let draws = |stream: u64, n: usize| -> Vec<f64> {
        let mut rng = substream_rng(0x5e1f, stream);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            })
            .collect()
    };

    // KS null calibration: 100 x 5000 standard normal draws against the
    // correct variance.
    let mut hits = 0;
    for rep in 0..100 {
        let xs = draws(rep, 5000);
        if ks_gaussian_test("null", &xs, 1.0)?.p_value > 0.01 {
            hits += 1;
        }
    }
    check(&format!("ks null calibration ({hits}/100 > p=0.01)"), hits >= 98);

    // KS power: the same draws against a quadrupled variance.
    let power = ks_gaussian_test("power", &draws(1000, 5000), 4.0)?;
    check("ks power vs wrong variance", power.p_value < 0.01);

    // Point mass against a symmetric law: D = 1/2 exactly.
    let pm = ks_gaussian_test("pm", &vec![0.0; 600], 1.0)?;
    check("ks point-mass statistic", (pm.ks_statistic - 0.5).abs() < 1e-12);

    // Variance CI coverage on synthetic batches.
    let mut cover = 0;
    for rep in 0..100 {
        let xs = draws(2000 + rep, 2000);
        let r = variance_test("ci", &xs, 1.0, 0.0)?;
        if r.ci95.0 <= 1.0 && 1.0 <= r.ci95.1 {
            cover += 1;
        }
    }
    check(&format!("variance ci coverage ({cover}/100)"), cover >= 90);

    // Independence null calibration.
    let mut indep = 0;
    for rep in 0..100 {
        let a = draws(4000 + 2 * rep, 4000);
        let b = draws(4001 + 2 * rep, 4000);
        if independence_test("a", "b", &a, &b, 0.1).pass {
            indep += 1;
        }
    }
    check(&format!("independence null ({indep}/100)"), indep >= 99);

    // Law normalization, atom included.
    let mut norm_ok = true;
    for &c in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        let p = MpParams::new(1.0, c)?;
        let total = mp_core::mp_expect(&TestFunction::constant(1.0), &p)?;
        norm_ok &= (total - 1.0).abs() < 1e-10;
    }
    check("law normalization across ratios", norm_ok);

    Ok(ok)
}
