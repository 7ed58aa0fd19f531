use clap::{Args, Parser, Subcommand};
use mmsk_core::affinity::{
    construct_affinity, load_fixture_affinity, validate_affinity, AffinityMatrix, AffinityParams,
};
use mmsk_core::channel::ReceptionConfig;
use mmsk_core::design::{design, ConcentrationProfile, DesignParams, MetricConfig, MixtureBook};
use mmsk_core::harness::pca::{centroids, two_type_samples};
use mmsk_core::harness::trace::read_schedule;
use mmsk_core::harness::{
    emit_results, pca_project, run_trace, sweep_epsilon, Experiment, ExperimentConfig, Results,
};
use mmsk_core::recovery::{
    detect_peak_mixture, solve_op2, solve_op2_adaptive, RecoveryConfig, RecoveryStatus,
    EMPTY_DETECTION_FLOOR,
};
use mmsk_core::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mmsk",
    version,
    about = "Molecule-mixture shift keying simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or export the example) affinity matrix as CSV plus a JSON sidecar.
    ConstructAffinity(ConstructArgs),
    /// Allocate molecules to transmitters and build their alphabets.
    Design(DesignArgs),
    /// Error probability over the configured epsilon grid.
    Sweep(SweepArgs),
    /// Multi-sample trace for a release schedule.
    Trace(TraceArgs),
    /// Two-type PCA diagnostic.
    Pca(SweepArgs),
    /// Recover mixtures from an observation series.
    Recover(RecoverArgs),
}

#[derive(Args)]
struct ConstructArgs {
    /// Export the example matrix instead of constructing one.
    #[arg(long, conflicts_with_all = ["r", "q", "r_act"])]
    fixture: bool,
    #[arg(long = "R", required_unless_present = "fixture")]
    r: Option<usize>,
    #[arg(long = "Q", required_unless_present = "fixture")]
    q: Option<usize>,
    #[arg(long = "R-act", required_unless_present = "fixture")]
    r_act: Option<usize>,
    #[arg(long, default_value_t = 0.3)]
    a_inh: f64,
    #[arg(long, default_value_t = 0.5)]
    mu_thr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    retry_cap: Option<u64>,
    /// Output CSV; the sidecar is written next to it with a `.json` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DesignArgs {
    /// Affinity CSV; the example matrix when absent.
    #[arg(long)]
    affinity: Option<PathBuf>,
    #[arg(long = "K", default_value_t = 4)]
    k: usize,
    #[arg(long = "Q-tx", default_value_t = 4)]
    q_tx: usize,
    #[arg(long = "M-mix", default_value_t = 3)]
    m_mix: usize,
    /// Distinguishability threshold in dB.
    #[arg(long, default_value_t = 20.0)]
    d_thr: f64,
    /// Signal level of the metric tables.
    #[arg(long, default_value_t = 100.0)]
    x_bar_mix: f64,
    #[arg(long, default_value_t = 10_000)]
    mc: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Concentration profile for mixture tables: split-total or per-constituent.
    #[arg(long, default_value = "per-constituent")]
    profile: String,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    /// Output directory for design.json and book.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV with header `mixture_id,release_time_s` (0-based mixture ids).
    #[arg(long)]
    schedule: PathBuf,
    /// Rounded expected arrivals and mean receptor noise.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct RecoverArgs {
    /// CSV rows `j,y_1,...,y_R`; a non-numeric first row is taken as header.
    #[arg(long)]
    observation: PathBuf,
    /// Book JSON as written by `design`.
    #[arg(long)]
    book: PathBuf,
    #[arg(long)]
    epsilon: f64,
    /// Defaults to epsilon.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    adaptive: bool,
    /// Affinity CSV; the example matrix when absent.
    #[arg(long)]
    affinity: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    lambda_r: f64,
    #[arg(long, default_value_t = 5.0)]
    x_thr: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::ConstructAffinity(a) => construct(a),
        Command::Design(a) => run_design(a),
        Command::Sweep(a) => sweep(a),
        Command::Trace(a) => trace(a),
        Command::Pca(a) => pca(a),
        Command::Recover(a) => recover(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn load_affinity(path: Option<&Path>) -> Result<AffinityMatrix> {
    path.map_or_else(|| Ok(load_fixture_affinity()), AffinityMatrix::read_csv)
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_json(&std::fs::read_to_string(path)?)
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn construct(a: ConstructArgs) -> Result<()> {
    let (matrix, params) = if a.fixture {
        (load_fixture_affinity(), AffinityParams::fixture())
    } else {
        let mut p = AffinityParams::new(
            a.r.unwrap_or_default(),
            a.q.unwrap_or_default(),
            a.r_act.unwrap_or_default(),
            a.a_inh,
            a.mu_thr,
            a.seed,
        );
        if let Some(cap) = a.retry_cap {
            p.retry_cap = cap;
        }
        (construct_affinity(&p)?, p)
    };
    let violations = validate_affinity(&matrix, &params)?;
    matrix.write_csv(&a.out)?;
    let sidecar = a.out.with_extension("json");
    let body = serde_json::json!({
        "params": params,
        "fixture": a.fixture,
        "violations": violations,
    });
    std::fs::write(&sidecar, serde_json::to_string_pretty(&body)?)?;
    report(&[a.out, sidecar]);
    Ok(())
}

fn run_design(a: DesignArgs) -> Result<()> {
    let profile: ConcentrationProfile =
        serde_json::from_value(serde_json::Value::String(a.profile.clone()))
            .map_err(|_| Error::Parse(format!("unknown profile {:?}", a.profile)))?;
    let matrix = load_affinity(a.affinity.as_deref())?;
    let params = DesignParams {
        k: a.k,
        q_tx: a.q_tx,
        m_mix: a.m_mix,
        d_thr: a.d_thr,
        metric: MetricConfig::new(a.x_bar_mix, a.mc, a.seed, ConcentrationProfile::SplitTotal),
        mixture_profile: profile,
    };
    let outcome = design(&matrix, &params, &ReceptionConfig::default())?;
    let book = outcome.book(vec![a.gamma; matrix.molecules()], 50.0)?;
    std::fs::create_dir_all(&a.out)?;
    let design_path = a.out.join("design.json");
    let book_path = a.out.join("book.json");
    std::fs::write(&design_path, outcome.to_json(&book)?)?;
    std::fs::write(&book_path, book.to_json()?)?;
    report(&[design_path, book_path]);
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let exp = Experiment::new(config)?;
    let rows = sweep_epsilon(&exp)?;
    let written = emit_results(
        &a.out,
        &exp.config,
        &exp.affinity,
        &Results {
            sweep: Some(&rows),
            ..Results::default()
        },
    )?;
    report(&written);
    Ok(())
}

fn trace(a: TraceArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let exp = Experiment::new(config)?;
    let schedule = read_schedule(&a.schedule, exp.config.n_rls)?;
    let bundle = run_trace(&exp, &schedule, a.deterministic)?;
    let written = emit_results(
        &a.out,
        &exp.config,
        &exp.affinity,
        &Results {
            trace: Some(&bundle),
            ..Results::default()
        },
    )?;
    report(&written);
    for e in &bundle.events {
        println!(
            "event mixture={} sample={} time_s={}",
            e.mixture, e.sample, e.time_s
        );
    }
    Ok(())
}

fn pca(a: SweepArgs) -> Result<()> {
    let config = load_config(&a.config)?;
    let matrix = config.load_affinity()?;
    let (samples, labels) = two_type_samples(&matrix, &config.reception, &config.pca, config.seed)?;
    let proj = pca_project(&samples, 2, config.pca.standardize)?;
    let cents = centroids(&proj, &labels, config.pca.cases.len());
    std::fs::create_dir_all(&a.out)?;
    let mut csv = String::from("case,x_a,x_b,pc1,pc2\n");
    for (c, &l) in proj.coords.iter().zip(&labels) {
        let [xa, xb] = config.pca.cases[l];
        writeln!(csv, "{l},{xa},{xb},{},{}", c[0], c[1]).expect("string write");
    }
    let path = a.out.join("pca.csv");
    std::fs::write(&path, csv)?;
    let summary = serde_json::json!({ "explained": proj.explained, "centroids": cents });
    let summary_path = a.out.join("pca.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    report(&[path, summary_path]);
    println!(
        "explained {:.4} {:.4}",
        proj.explained[0], proj.explained[1]
    );
    Ok(())
}

fn read_observations(path: &Path, r: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> =
            rec.iter().skip(1).map(str::parse::<f64>).collect();
        match parsed {
            Ok(y) if y.len() == r => rows.push((rec.get(0).unwrap_or_default().to_string(), y)),
            Ok(y) => {
                return Err(Error::Dimension(format!(
                    "observation row {} has {} receptor values, expected {r}",
                    i + 1,
                    y.len()
                )))
            }
            Err(_) if i == 0 => {}
            Err(e) => return Err(Error::Parse(format!("observation row {}: {e}", i + 1))),
        }
    }
    Ok(rows)
}

fn fmt_row(out: &mut String, fields: impl IntoIterator<Item = String>) {
    out.push_str(&fields.into_iter().collect::<Vec<_>>().join(","));
    out.push('\n');
}

fn recover(a: RecoverArgs) -> Result<()> {
    let matrix = load_affinity(a.affinity.as_deref())?;
    let book = MixtureBook::from_json(&std::fs::read_to_string(&a.book)?)?;
    let cfg = ReceptionConfig {
        lambda_r: a.lambda_r,
        x_thr: a.x_thr,
        ..ReceptionConfig::default()
    };
    cfg.check()?;
    let rcfg = RecoveryConfig {
        epsilon: a.epsilon,
        delta: a.delta.unwrap_or(a.epsilon),
        ..RecoveryConfig::default()
    };
    rcfg.check()?;
    let rows = read_observations(&a.observation, matrix.receptors())?;
    let (q, m) = (book.num_molecules(), book.num_mixtures());
    let mut out = String::new();
    fmt_row(
        &mut out,
        ["j", "status", "tx", "s_hat"]
            .map(String::from)
            .into_iter()
            .chain((1..=q).map(|i| format!("x_hat_{i}")))
            .chain((0..m).map(|i| format!("w_hat_{i}"))),
    );
    for (j, y) in rows {
        let (est, tx) = if a.adaptive {
            let ad = solve_op2_adaptive(&y, &matrix, &book, &cfg, &rcfg)?;
            (ad.refined, ad.tx)
        } else {
            let est = solve_op2(&y, &matrix, book.reception(), &cfg, &rcfg)?;
            let tx = detect_peak_mixture(&est.w_hat).map(|s| book.owner(s));
            (est, tx)
        };
        let s_hat = (est.status == RecoveryStatus::Optimal)
            .then(|| detect_peak_mixture(&est.w_hat))
            .flatten()
            .filter(|&s| est.w_hat[s] >= EMPTY_DETECTION_FLOOR);
        let status = serde_json::to_value(est.status)?
            .as_str()
            .unwrap_or_default()
            .to_string();
        fmt_row(
            &mut out,
            [
                j,
                status,
                tx.map_or(String::new(), |k| k.to_string()),
                s_hat.map_or(String::new(), |s| s.to_string()),
            ]
            .into_iter()
            .chain(est.x_hat.iter().map(|v| v.to_string()))
            .chain(est.w_hat.iter().map(|v| v.to_string())),
        );
    }
    match a.out {
        Some(p) => {
            std::fs::write(&p, out)?;
            report(&[p]);
        }
        None => print!("{out}"),
    }
    Ok(())
}
