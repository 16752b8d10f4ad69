//! Command-line front end: runs one point, a sweep, or a minimum-Eb/N0
//! search and writes CSV results with a JSON sidecar.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use odma_ura::harness::{
    run_sweep, search_min_ebn0, write_csv, write_trace, ExperimentPlan, PointReport, PowerGrid,
    SearchResult, SearchStrategy, SequentialRule, SicChoice, SweepSpec,
};
use odma_ura::{Error, Result, SicMode, SystemConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Small,
    Scaled,
    MassiveMimo,
    MultiAntenna,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sic {
    Initial,
    Reest,
    Both,
}

#[derive(Debug, Parser)]
#[command(
    version,
    about = "ODMA unsourced random access link simulator",
    allow_negative_numbers = true
)]
struct Args {
    /// JSON system configuration; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in configuration used when no file is given.
    #[arg(long, value_enum, default_value = "scaled")]
    preset: Preset,
    #[arg(long)]
    ka: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    pp: Option<f64>,
    #[arg(long)]
    pd: Option<f64>,
    #[arg(long)]
    n0: Option<f64>,
    /// Sets Pp and Pd from a total Eb/N0 in dB (see --rho).
    #[arg(long)]
    ebn0: Option<f64>,
    /// Pilot share of the per-user energy used with --ebn0.
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// SIC variant; defaults to the configuration's.
    #[arg(long, value_enum)]
    sic: Option<Sic>,
    /// Sweep axes, e.g. "ka=16,32;m=8,50;ebn0=0:0.5:8;rho=0.3,0.5". An
    /// ebn0 axis turns the run into a minimum-Eb/N0 search.
    #[arg(long)]
    sweep: Option<String>,
    /// Binary search along Eb/N0 instead of evaluating every grid point.
    #[arg(long)]
    bisect: bool,
    /// Stop a point early once a 95% bound decides Pe against epsilon;
    /// --trials becomes the cap.
    #[arg(long)]
    early_stop: bool,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-iteration trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Also write the codebooks of the base configuration to this file.
    #[arg(long)]
    dump_codebooks: Option<PathBuf>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    plan: &'a ExperimentPlan,
    sweep: Option<&'a str>,
    search: Option<&'a [SearchResult]>,
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn base_config(args: &Args) -> Result<SystemConfig> {
    let ka = args.ka.unwrap_or(16);
    let m = args.m.unwrap_or(8);
    let mut cfg = match &args.config {
        Some(path) => SystemConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => match args.preset {
            Preset::Small => SystemConfig::small(ka, m),
            Preset::Scaled => SystemConfig::scaled(ka, m),
            Preset::MassiveMimo => SystemConfig::massive_mimo(ka),
            Preset::MultiAntenna => SystemConfig::multi_antenna(ka),
        },
    };
    if let Some(v) = args.ka {
        cfg.ka = v;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.n0 {
        cfg.n0 = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(e) = args.ebn0 {
        cfg = cfg.with_energy_split(e, args.rho);
    }
    if let Some(v) = args.pp {
        cfg.pp = v;
    }
    if let Some(v) = args.pd {
        cfg.pd = v;
    }
    if let Some(Sic::Initial) = args.sic {
        cfg.sic_mode = SicMode::InitialEstimates;
    }
    if let Some(Sic::Reest) = args.sic {
        cfg.sic_mode = SicMode::DataAidedReestimation;
    }
    cfg.check()?;
    Ok(cfg)
}

fn plan(args: &Args, base: SystemConfig, sweep: &SweepSpec) -> ExperimentPlan {
    let grid = match &sweep.ebn0_db {
        Some(e) => PowerGrid::Split {
            ebn0_db: e.clone(),
            pilot_fraction: sweep
                .pilot_fraction
                .clone()
                .unwrap_or_else(|| vec![args.rho]),
        },
        None => PowerGrid::Points(vec![(base.pp, base.pd)]),
    };
    let sic = match (args.sic, base.sic_mode) {
        (Some(Sic::Both), _) => SicChoice::Both,
        (_, SicMode::InitialEstimates) => SicChoice::Initial,
        (_, SicMode::DataAidedReestimation) => SicChoice::Reest,
    };
    ExperimentPlan {
        ka: sweep.ka.clone().unwrap_or_else(|| vec![base.ka]),
        m: sweep.m.clone().unwrap_or_else(|| vec![base.m]),
        grid,
        trials: args.trials,
        sequential: args.early_stop.then(|| SequentialRule {
            min_trials: args.trials.min(100),
            max_trials: args.trials,
            batch: (args.trials / 10).max(1),
        }),
        sic,
        strategy: if args.bisect {
            SearchStrategy::Bisection
        } else {
            SearchStrategy::Exhaustive
        },
        threads: args.threads,
        base,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn run(args: Args) -> Result<()> {
    let base = base_config(&args)?;
    let sweep: SweepSpec = args.sweep.as_deref().unwrap_or("").parse()?;
    if sweep.pilot_fraction.is_some() && sweep.ebn0_db.is_none() {
        return Err(Error::InvalidArgument(
            "a rho axis needs an ebn0 axis".into(),
        ));
    }
    let plan = plan(&args, base, &sweep);
    plan.check()?;

    if let Some(path) = &args.dump_codebooks {
        let books = odma_ura::codebooks::CodebookSet::build(&plan.base)?;
        let mut w = create(path)?;
        books.dump(&mut w)?;
        w.flush()?;
    }

    let mut trace = args.trace.as_deref().map(create).transpose()?;
    let mut trace_error: Option<Error> = None;
    let mut all_rows = Vec::new();
    let mut sink = |report: &PointReport| {
        let r = &report.row;
        eprintln!(
            "ka={} m={} Eb/N0={:.2} dB pp={:.4} pd={:.4} trials={} Pe={:.4}",
            r.ka, r.m, r.ebn0_db, r.pp, r.pd, r.trials, r.pe
        );
        if report.skipped > 0 {
            eprintln!("  {} trials skipped after errors", report.skipped);
        }
        all_rows.push(r.clone());
        if let (Some(w), None) = (trace.as_mut(), &trace_error) {
            if let Err(e) = write_trace(report, w) {
                trace_error = Some(e);
            }
        }
    };

    let search = if sweep.ebn0_db.is_some() {
        let results = search_min_ebn0(&plan, &mut sink)?;
        for s in &results {
            match &s.best {
                Some(b) => println!(
                    "ka={} m={} sic={} required Eb/N0 {:.2} dB at pp={:.4} pd={:.4} (Pe {:.4})",
                    s.ka,
                    s.m,
                    s.sic_mode.label(),
                    b.ebn0_db,
                    b.pp,
                    b.pd,
                    b.pe
                ),
                None => println!(
                    "ka={} m={} sic={} infeasible on this grid",
                    s.ka,
                    s.m,
                    s.sic_mode.label()
                ),
            }
        }
        Some(results)
    } else {
        run_sweep(&plan, &mut sink)?;
        None
    };
    if let Some(e) = trace_error {
        return Err(e);
    }
    if let Some(mut w) = trace {
        w.flush()?;
    }

    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            write_csv(&all_rows, &mut w)?;
            w.flush()?;
            let mut side_path = path.clone().into_os_string();
            side_path.push(".json");
            let side = Sidecar {
                plan: &plan,
                sweep: args.sweep.as_deref(),
                search: search.as_deref(),
            };
            let mut w = create(Path::new(&side_path))?;
            serde_json::to_writer_pretty(&mut w, &side)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        None => write_csv(&all_rows, io::stdout().lock())?,
    }
    Ok(())
}
