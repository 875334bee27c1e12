//! `careflow` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use careflow_core::census::ArrivalFamily;
use careflow_core::service_need::CaregiverType;
use careflow_core::sim::SimulationOutput;
use careflow_core::staffing::{write_report_csv, CensusMode, EvalOptions, EvaluationReport};
use clap::{Parser, Subcommand, ValueEnum};
use uuid::Uuid;

use crate::config::{load_config, load_cost};
use crate::error::{Error, Result};
use crate::service;
use crate::store::{RunRecord, RunStore};

#[derive(Debug, Parser)]
#[command(name = "careflow", version, about = "Nursing-home census, care-demand and staffing-cost simulator")]
pub struct Cli {
    /// Run store directory [default: $CAREFLOW_DATA_DIR, else ./careflow-data]
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    NegativeBinomial,
    Poisson,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the competing-risks length-of-stay model to a resident CSV
    FitLos {
        csv: PathBuf,
        /// Model JSON output [default: <csv stem>.los.json]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Disposition labels in id order
        #[arg(long, value_delimiter = ',', default_values_t = service::default_disposition_labels())]
        dispositions: Vec<String>,
    },
    /// Fit a daily arrival-count distribution and report goodness of fit
    FitArrivals {
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "negative-binomial")]
        family: FamilyArg,
        /// Model JSON output [default: <csv stem>.arrivals.json]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation config and store its artifacts
    Simulate {
        config: PathBuf,
        /// Override master_seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override replications
        #[arg(long)]
        replications: Option<u32>,
    },
    /// Cost out staffing strategies such as CNA:1/20@state on a stored run
    Evaluate {
        run: String,
        #[arg(required = true)]
        strategies: Vec<String>,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Search the cost-minimizing ratio over a k range
    Sweep {
        run: String,
        #[arg(long = "type", default_value = "CNA")]
        caregiver_type: String,
        /// Inclusive range of k in 1/k
        #[arg(long, default_value = "1..60")]
        k: String,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Rerun a config under another census scenario and compare
    Whatif {
        config: PathBuf,
        /// Preset (baseline, S1, S2, S3) or saved scenario name
        #[arg(long)]
        scenario: String,
    },
    /// Compare a run's simulated stays with observed residents
    Validate {
        run: String,
        observed: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = service::default_disposition_labels())]
        dispositions: Vec<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Serve the HTTP API
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Cost rates JSON used by report and sweep endpoints
        #[arg(long)]
        cost: Option<PathBuf>,
        /// Simultaneous simulations [default: available parallelism]
        #[arg(long)]
        max_concurrent_runs: Option<usize>,
    },
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Cost rates JSON [default: built-in placeholder wages]
    #[arg(long)]
    pub cost: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Staff every day for this census instead of the simulated one
    #[arg(long)]
    pub fixed_census: Option<u32>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

impl EvalArgs {
    fn options(&self) -> Result<EvalOptions> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", "must be in (0, 1)"));
        }
        let census_mode = self.fixed_census.map_or(CensusMode::Daily, |census| CensusMode::Fixed { census });
        Ok(EvalOptions { alpha: self.alpha, census_mode })
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    2
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn open_store(dir: Option<&Path>) -> Result<RunStore> {
    match dir {
        Some(d) => RunStore::open(d),
        None => RunStore::from_env(),
    }
}

/// Accepts a full run id or a unique prefix of one.
pub fn resolve_run(store: &RunStore, s: &str) -> Result<Uuid> {
    if let Ok(id) = Uuid::parse_str(s) {
        return Ok(id);
    }
    let hits: Vec<Uuid> = store.list()?.into_iter().map(|r| r.run_id).filter(|id| id.to_string().starts_with(s)).collect();
    match hits.as_slice() {
        [id] => Ok(*id),
        [] => Err(Error::NotFound(s.to_string())),
        _ => Err(Error::Usage(format!("run prefix `{s}` is ambiguous"))),
    }
}

fn default_out(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from(format!("{stem}.{suffix}.json"))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    json.push('\n');
    std::fs::write(path, json).map_err(Error::io(format!("writing {}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::io(format!("creating {}", dir.display())))
}

fn p(out: &mut dyn Write, s: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(s).and_then(|()| out.write_all(b"\n")).map_err(Error::io("writing output"))
}

macro_rules! say {
    ($out:expr, $($t:tt)*) => { p($out, format_args!($($t)*))? };
}

fn post_warmup_means(out: &SimulationOutput) -> (f64, [f64; 3]) {
    let (mut census, mut demand, mut n) = (0.0, [0.0; 3], 0.0);
    for days in out.post_warmup() {
        for d in days {
            census += f64::from(d.census);
            for (a, b) in demand.iter_mut().zip(d.demand) {
                *a += b;
            }
            n += 1.0;
        }
    }
    (census / n, demand.map(|x| x / n))
}

fn print_run(out: &mut dyn Write, store: &RunStore, record: &RunRecord) -> Result<()> {
    say!(out, "run {} {}", record.run_id, serde_json::to_string(&record.status).unwrap_or_default().trim_matches('"'));
    say!(out, "config hash {}", record.config_hash);
    for name in ["config.json", "daily.csv", "residents.csv", "manifest.json"] {
        say!(out, "wrote {}", store.artifact_path(record.run_id, name).display());
    }
    Ok(())
}

fn print_report(out: &mut dyn Write, report: &EvaluationReport) -> Result<()> {
    say!(out, "{:<22} {:>14} {:>28} {:>14} {:>14} {:>10} {:>10}", "strategy", "total cost", "CI", "planned", "understaff $", "over min", "under min");
    for r in &report.rows {
        let ci = match (r.total_cost_ci_lo, r.total_cost_ci_hi) {
            (Some(lo), Some(hi)) => format!("[{lo:.1}, {hi:.1}]"),
            _ => "n/a".into(),
        };
        say!(
            out,
            "{:<22} {:>14.1} {:>28} {:>14.1} {:>14.1} {:>10.1} {:>10.1}",
            r.strategy.name(),
            r.total_cost_mean,
            ci,
            r.planned_cost_mean,
            r.understaffing_cost_mean,
            r.avg_daily_overstaffing_min,
            r.avg_daily_understaffing_min
        );
    }
    Ok(())
}

fn short(id: Uuid) -> String {
    id.simple().to_string()[..8].to_string()
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let data_dir = cli.data_dir.as_deref();
    match cli.command {
        Command::FitLos { csv, out: path, dispositions } => {
            let fit = service::fit_los_file(&csv, &dispositions)?;
            say!(out, "residents {} ({} censored) from {}", fit.residents, fit.censored, csv.display());
            say!(out, "{:<14} {:>10} {:>12} {:>12}", "disposition", "discharged", "eta", "sigma");
            for (c, prm) in fit.counts.iter().zip(&fit.model.params) {
                say!(out, "{:<14} {:>10} {:>12.6} {:>12.6}", c.label, c.discharged, prm.eta, prm.sigma);
            }
            if let Some(d) = fit.model.diagnostics {
                say!(
                    out,
                    "log-likelihood {:.6} after {} iterations ({})",
                    d.log_likelihood,
                    d.iterations,
                    if d.converged { "converged" } else { "not converged" }
                );
            }
            let path = path.unwrap_or_else(|| default_out(&csv, "los"));
            write_json(&path, &fit.model)?;
            say!(out, "wrote {}", path.display());
        }
        Command::FitArrivals { csv, family, out: path } => {
            let file = std::fs::File::open(&csv).map_err(|e| Error::Data(format!("{}: {e}", csv.display())))?;
            let counts = service::read_arrival_counts(file)?;
            let family = match family {
                FamilyArg::NegativeBinomial => ArrivalFamily::NegativeBinomial,
                FamilyArg::Poisson => ArrivalFamily::Poisson,
            };
            let fit = service::fit_arrival_counts(&counts, family)?;
            say!(out, "days {}  mean {:.4}  variance {:.4}", fit.days, fit.sample_mean, fit.sample_variance);
            say!(out, "model {}", serde_json::to_string(&fit.model).unwrap_or_default());
            match &fit.gof {
                Some(g) => say!(out, "chi-square {:.4} on {} dof, p = {:.4} ({} bins)", g.statistic, g.dof, g.p_value, g.bins.len()),
                None => say!(out, "chi-square test skipped: too few bins after pooling"),
            }
            let path = path.unwrap_or_else(|| default_out(&csv, "arrivals"));
            write_json(&path, &fit.model)?;
            say!(out, "wrote {}", path.display());
        }
        Command::Simulate { config, seed, replications } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            crate::config::check(&cfg)?;
            let store = open_store(data_dir)?;
            let record = service::simulate(&store, cfg)?;
            print_run(out, &store, &record)?;
            let (census, demand) = post_warmup_means(&store.load_output(record.run_id)?);
            say!(out, "post-warmup mean census {census:.2}; demand min/day CNA {:.1} LPN {:.1} RN {:.1}", demand[0], demand[1], demand[2]);
        }
        Command::Evaluate { run, strategies, eval } => {
            let store = open_store(data_dir)?;
            let id = resolve_run(&store, &run)?;
            let strategies = service::parse_strategies(&strategies)?;
            let cost = load_cost(eval.cost.as_deref())?;
            let report = service::report(&store, id, &strategies, &cost, &eval.options()?)?;
            print_report(out, &report)?;
            ensure_dir(&eval.out_dir)?;
            let json = eval.out_dir.join(format!("report-{}.json", short(id)));
            write_json(&json, &report)?;
            let csv_path = eval.out_dir.join(format!("report-{}.csv", short(id)));
            let file = std::fs::File::create(&csv_path).map_err(Error::io(format!("creating {}", csv_path.display())))?;
            write_report_csv(&report, file)?;
            say!(out, "wrote {}", json.display());
            say!(out, "wrote {}", csv_path.display());
        }
        Command::Sweep { run, caregiver_type, k, eval } => {
            let store = open_store(data_dir)?;
            let id = resolve_run(&store, &run)?;
            let kind: CaregiverType = caregiver_type.parse().map_err(|_| Error::Usage(format!("unknown caregiver type `{caregiver_type}`; use CNA, LPN or RN")))?;
            let range = service::parse_k_range(&k)?;
            let cost = load_cost(eval.cost.as_deref())?;
            let result = service::sweep(&store, id, kind, range, &cost, &eval.options()?)?;
            say!(out, "{:>4} {:>14} {:>10} {:>10}", "k", "total cost", "over min", "under min");
            for pt in &result.curve {
                let mark = if pt.k == result.suggested.k { " <" } else { "" };
                say!(out, "{:>4} {:>14.1} {:>10.1} {:>10.1}{mark}", pt.k, pt.total_cost_mean, pt.avg_daily_overstaffing_min, pt.avg_daily_understaffing_min);
            }
            say!(out, "suggested {} total cost {:.1}", result.suggested.name(), result.row.total_cost_mean);
            ensure_dir(&eval.out_dir)?;
            let json = eval.out_dir.join(format!("sweep-{}.json", short(id)));
            write_json(&json, &result)?;
            say!(out, "wrote {}", json.display());
        }
        Command::Whatif { config, scenario } => {
            let cfg = load_config(&config)?;
            let store = open_store(data_dir)?;
            let mut variant = cfg.clone();
            variant.scenario = store.scenario(&scenario)?;
            let base = service::simulate(&store, cfg)?;
            let alt = service::simulate(&store, variant)?;
            let (bc, bd) = post_warmup_means(&store.load_output(base.run_id)?);
            let (ac, ad) = post_warmup_means(&store.load_output(alt.run_id)?);
            let pct = |a: f64, b: f64| if b == 0.0 { 0.0 } else { 100.0 * (a / b - 1.0) };
            say!(out, "{:<16} {:>12} {:>12} {:>9}", "post-warmup mean", base.config.scenario.name, alt.config.scenario.name, "change");
            say!(out, "{:<16} {:>12.2} {:>12.2} {:>+8.1}%", "census", bc, ac, pct(ac, bc));
            for k in CaregiverType::ALL {
                let (b, a) = (bd[k.index()], ad[k.index()]);
                say!(out, "{:<16} {:>12.1} {:>12.1} {:>+8.1}%", format!("{k} min/day"), b, a, pct(a, b));
            }
            print_run(out, &store, &base)?;
            print_run(out, &store, &alt)?;
        }
        Command::Validate { run, observed, dispositions, out_dir } => {
            let store = open_store(data_dir)?;
            let id = resolve_run(&store, &run)?;
            let (report, overlay) = service::validate_run(&store, id, &observed, &dispositions)?;
            say!(out, "observed residents {}, simulated residents {}", report.observed_residents, report.simulated_residents);
            say!(out, "LOS K-S D = {:.4}, p = {:.4} (n1 {}, n2 {})", report.los_ks.statistic, report.los_ks.p_value, report.los_ks.n1, report.los_ks.n2);
            say!(out, "Kaplan-Meier max gap {:.4}", report.km_max_gap);
            ensure_dir(&out_dir)?;
            let json = out_dir.join(format!("validation-{}.json", short(id)));
            write_json(&json, &report)?;
            let km = out_dir.join(format!("km-{}.csv", short(id)));
            let file = std::fs::File::create(&km).map_err(Error::io(format!("creating {}", km.display())))?;
            overlay.write_csv(file)?;
            say!(out, "wrote {}", json.display());
            say!(out, "wrote {}", km.display());
        }
        Command::Serve { port, host, cost, max_concurrent_runs } => {
            let store = open_store(data_dir)?;
            let cost = load_cost(cost.as_deref())?;
            let permits = match max_concurrent_runs {
                Some(0) => return Err(Error::config("max_concurrent_runs", "must be at least 1")),
                Some(n) => n,
                None => std::thread::available_parallelism().map_or(1, |n| n.get()),
            };
            let state = crate::api::AppState::new(store, cost, permits);
            let addr = format!("{host}:{port}");
            say!(out, "serving on http://{addr} (data in {})", state.store().root().display());
            out.flush().map_err(Error::io("writing output"))?;
            let rt = tokio::runtime::Runtime::new().map_err(Error::io("starting runtime"))?;
            rt.block_on(crate::api::serve(&addr, state)).map_err(Error::io(format!("serving on {addr}")))?;
        }
    }
    Ok(())
}
