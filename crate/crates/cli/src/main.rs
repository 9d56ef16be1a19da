mod commands;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cantilever_core::config::Config;
use cantilever_core::fit::{FixedParams, LorentzOptions, Weighting};
use cantilever_core::io::{from_json, read_gain_csv, read_spectrum_csv, read_text, to_json};
use cantilever_core::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::*;
use manifest::{Artifacts, RunContext};

/// Thermomechanical noise analysis of SQUID-read cantilevers and CSL
/// exclusion curves.
#[derive(Parser)]
#[command(name = "cantilever", version)]
struct Cli {
    /// Base directory for outputs when --out is not given.
    #[arg(long, global = true, env = "CANTILEVER_WORK_DIR", default_value = ".")]
    work_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Output directory [default: <work-dir>/<command>]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Model,
    Observed,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate spectra and ringdown sweeps at every configured temperature.
    SimulateCampaign {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the raw ringdown waveforms (large).
        #[arg(long)]
        waveforms: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Fit the resonant template with f0, f1 and Q_a held fixed.
    FitSpectrum {
        #[arg(long)]
        spectrum: PathBuf,
        /// Supplies defaults for f0, f1, the noise gain and the fit options.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        f0_hz: Option<f64>,
        #[arg(long)]
        f1_hz: Option<f64>,
        /// Apparent quality factor during the noise measurement.
        #[arg(long, conflicts_with = "q_report")]
        qa: Option<f64>,
        /// Q report from estimate-q; Q_a is extrapolated to --noise-gain.
        #[arg(long)]
        q_report: Option<PathBuf>,
        #[arg(long)]
        noise_gain: Option<f64>,
        #[arg(long)]
        band_lo_hz: Option<f64>,
        #[arg(long)]
        band_hi_hz: Option<f64>,
        /// Bins closest to f0 left out of the fit.
        #[arg(long)]
        exclude_bins: Option<usize>,
        #[arg(long, value_enum)]
        weighting: Option<WeightingArg>,
        /// Overrides the temperature recorded in the spectrum header.
        #[arg(long)]
        temperature_k: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Extrapolate 1/Q_a measured at several loop gains to infinite gain.
    EstimateQ {
        /// CSV with columns inv_gain,inv_qa,sigma_inv_qa.
        #[arg(long)]
        gains: PathBuf,
        #[arg(long)]
        temperature_k: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Fit B against T/Q and scan a common 1/Q offset.
    RegressNoise {
        /// Fit reports from fit-spectrum, one per temperature.
        #[arg(long, num_args = 1.., required = true)]
        fits: Vec<PathBuf>,
        /// Q reports from estimate-q, in the same order as --fits.
        #[arg(long, num_args = 1.., required = true)]
        q_reports: Vec<PathBuf>,
        /// Supplies the analysis options.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Coupling, residual force noise and the auxiliary estimators.
    Budget {
        #[arg(long)]
        regression: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "synthetic")]
        label: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Exclusion curve lambda_max(r_C) for a residual force noise.
    CslExclude {
        /// Geometry and r_C grid.
        #[arg(long)]
        config: PathBuf,
        /// Budget report from the budget command.
        #[arg(long, required_unless_present = "s_f0", conflicts_with = "s_f0")]
        budget: Option<PathBuf>,
        /// Residual force noise, N^2/Hz.
        #[arg(long)]
        s_f0: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Every stage in sequence from one config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        waveforms: bool,
        #[command(flatten)]
        out: OutArg,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SimulateCampaign { .. } => "simulate-campaign",
            Command::FitSpectrum { .. } => "fit-spectrum",
            Command::EstimateQ { .. } => "estimate-q",
            Command::RegressNoise { .. } => "regress-noise",
            Command::Budget { .. } => "budget",
            Command::CslExclude { .. } => "csl-exclude",
            Command::Pipeline { .. } => "pipeline",
        }
    }
}

fn out_dir(work: &Path, out: &OutArg, name: &str) -> PathBuf {
    match &out.out {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => work.join(p),
        None => work.join(name),
    }
}

fn load_config(ctx: &mut RunContext, path: &Path) -> Result<Config> {
    let text = read_text(path)?;
    let cfg = Config::from_json(&text)?;
    ctx.config = Some((path.to_path_buf(), text));
    Ok(cfg)
}

fn read_input(ctx: &mut RunContext, path: &Path) -> Result<String> {
    let text = read_text(path)?;
    ctx.input(path, &text);
    Ok(text)
}

fn header_value(text: &str, key: &str) -> Option<f64> {
    text.lines()
        .filter_map(|l| l.strip_prefix('#'))
        .filter_map(|l| l.trim_start().split_once('='))
        .find(|(k, _)| k.trim() == key)
        .and_then(|(_, v)| v.trim().parse().ok())
}

fn lorentz_options(base: LorentzOptions, lo: Option<f64>, hi: Option<f64>, excl: Option<usize>, w: Option<WeightingArg>) -> LorentzOptions {
    let mut o = base;
    o.band = (lo.unwrap_or(o.band.0), hi.unwrap_or(o.band.1));
    if let Some(n) = excl {
        o.exclude_peak_bins = n;
    }
    match w {
        Some(WeightingArg::Model) => o.weighting = Weighting::Model,
        Some(WeightingArg::Observed) => o.weighting = Weighting::Observed,
        None => {}
    }
    o
}

fn run_pipeline(cfg: &Config, seed: u64, waveforms: bool) -> Result<Artifacts> {
    let (points, mut out) = simulate(cfg, seed, waveforms)?;
    let (res, squid) = cfg.to_domain()?;
    let noise_gain = cfg.campaign.noise_gain;
    let mut qs = Vec::new();
    let mut fits = Vec::new();
    for p in &points {
        let q = estimate_q(&p.gains, &p.gains_csv, Some(p.temperature_k))?;
        let fixed = FixedParams { f0: res.f0, f1: squid.f1, qa: qa_at_gain(&q.fit, noise_gain)? };
        let fit = fit_spectrum(&p.spectrum, &p.spectrum_csv, &fixed, &cfg.analysis.lorentz, None)?;
        out.add(format!("q/{}.json", p.label), to_json(&q)?);
        out.add(format!("fits/{}.json", p.label), to_json(&fit)?);
        qs.push(q);
        fits.push(fit);
    }
    let spectra: Vec<_> = points.iter().zip(&fits).map(|(p, f)| (p.label.clone(), &p.spectrum, f)).collect();
    out.add("tidy/spectrum_fit.csv", spectrum_fit_table(&spectra));
    out.add("tidy/inv_qa_vs_inv_gain.csv", q_gain_table(&qs));
    let reg = regress_noise(&fits, &qs, &cfg.analysis)?;
    let reg_text = to_json(&reg)?;
    out.add("tidy/noise_vs_t_over_q.csv", noise_table(&reg.regression, cfg.analysis.offset.dt_rel));
    out.add("tidy/offset_scan.csv", offset_table(&reg.regression));
    let bud = budget(&reg, &reg_text, cfg, "synthetic")?;
    out.add("regression.json", reg_text);
    out.add("budget.json", to_json(&bud)?);
    out.add("budget.csv", budget_csv(&bud));
    let s_f0 = s_f0_from_budget(&bud)?;
    if s_f0 > 0.0 {
        out.extend(curve_artifacts(&csl_exclude(s_f0, cfg)?)?);
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let name = cli.command.name();
    let mut ctx = RunContext::new(name);
    let (out, artifacts) = match cli.command {
        Command::SimulateCampaign { config, seed, waveforms, out } => {
            let cfg = load_config(&mut ctx, &config)?;
            let seed = seed.unwrap_or(cfg.campaign.seed);
            ctx.seed = Some(seed);
            let (_, a) = simulate(&cfg, seed, waveforms)?;
            (out, a)
        }
        Command::FitSpectrum {
            spectrum,
            config,
            f0_hz,
            f1_hz,
            qa,
            q_report,
            noise_gain,
            band_lo_hz,
            band_hi_hz,
            exclude_bins,
            weighting,
            temperature_k,
            out,
        } => {
            let cfg = config.map(|p| load_config(&mut ctx, &p)).transpose()?;
            let text = read_input(&mut ctx, &spectrum)?;
            let spec = read_spectrum_csv(&text)?;
            let f0 = f0_hz.or(cfg.as_ref().map(|c| c.resonator.f0_hz));
            let f1 = f1_hz.or(cfg.as_ref().map(|c| c.squid.f1_hz));
            let (Some(f0), Some(f1)) = (f0, f1) else {
                return Err(Error::Invalid("f0 and f1 are needed: pass --f0-hz/--f1-hz or --config".into()));
            };
            let qa = match (qa, q_report) {
                (Some(qa), _) => qa,
                (None, Some(path)) => {
                    let q: QReport = from_json(&read_input(&mut ctx, &path)?)?;
                    let g = noise_gain
                        .or(spec.meta_f64("noise_gain"))
                        .or(cfg.as_ref().map(|c| c.campaign.noise_gain))
                        .ok_or_else(|| Error::Invalid("--noise-gain is needed with --q-report".into()))?;
                    qa_at_gain(&q.fit, g)?
                }
                (None, None) => return Err(Error::Invalid("pass --qa or --q-report".into())),
            };
            let base = cfg.as_ref().map(|c| c.analysis.lorentz.clone()).unwrap_or_default();
            let opts = lorentz_options(base, band_lo_hz, band_hi_hz, exclude_bins, weighting);
            let rep = fit_spectrum(&spec, &text, &FixedParams { f0, f1, qa }, &opts, temperature_k)?;
            let mut a = Artifacts::default();
            a.add("spectrum_fit.csv", spectrum_fit_table(&[("spectrum".into(), &spec, &rep)]));
            a.add("fit.json", to_json(&rep)?);
            (out, a)
        }
        Command::EstimateQ { gains, temperature_k, out } => {
            let text = read_input(&mut ctx, &gains)?;
            let pts = read_gain_csv(&text)?;
            let rep = estimate_q(&pts, &text, temperature_k.or(header_value(&text, "temperature_k")))?;
            let mut a = Artifacts::default();
            a.add("inv_qa_vs_inv_gain.csv", q_gain_table(std::slice::from_ref(&rep)));
            a.add("q.json", to_json(&rep)?);
            (out, a)
        }
        Command::RegressNoise { fits, q_reports, config, out } => {
            let cfg = config.map(|p| load_config(&mut ctx, &p)).transpose()?;
            let opts = cfg.map(|c| c.analysis).unwrap_or_default();
            let fits = fits.iter().map(|p| from_json(&read_input(&mut ctx, p)?)).collect::<Result<Vec<FitReport>>>()?;
            let qs = q_reports.iter().map(|p| from_json(&read_input(&mut ctx, p)?)).collect::<Result<Vec<QReport>>>()?;
            let reg = regress_noise(&fits, &qs, &opts)?;
            let mut a = Artifacts::default();
            a.add("noise_vs_t_over_q.csv", noise_table(&reg.regression, opts.offset.dt_rel));
            a.add("offset_scan.csv", offset_table(&reg.regression));
            a.add("regression.json", to_json(&reg)?);
            (out, a)
        }
        Command::Budget { regression, config, label, out } => {
            let cfg = load_config(&mut ctx, &config)?;
            let text = read_input(&mut ctx, &regression)?;
            let reg: RegressionReport = from_json(&text)?;
            let rep = budget(&reg, &text, &cfg, &label)?;
            let mut a = Artifacts::default();
            a.add("budget.json", to_json(&rep)?);
            a.add("budget.csv", budget_csv(&rep));
            (out, a)
        }
        Command::CslExclude { config, budget, s_f0, out } => {
            let cfg = load_config(&mut ctx, &config)?;
            let s_f0 = match (s_f0, budget) {
                (Some(s), _) => s,
                (None, Some(p)) => s_f0_from_budget(&from_json(&read_input(&mut ctx, &p)?)?)?,
                (None, None) => return Err(Error::Invalid("pass --s-f0 or --budget".into())),
            };
            let curve = csl_exclude(s_f0, &cfg)?;
            if curve.failures() > 0 {
                return Err(Error::Quadrature { rel_error: curve.points.iter().map(|p| p.rel_error).fold(0.0, f64::max) });
            }
            (out, curve_artifacts(&curve)?)
        }
        Command::Pipeline { config, seed, waveforms, out } => {
            let cfg = load_config(&mut ctx, &config)?;
            let seed = seed.unwrap_or(cfg.campaign.seed);
            ctx.seed = Some(seed);
            (out, run_pipeline(&cfg, seed, waveforms)?)
        }
    };
    ctx.finish(&out_dir(&cli.work_dir, &out, name), artifacts)?;
    Ok(())
}

fn error_json(kind: &str, code: u8, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "exit_code": code, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", 2, e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if e.is_numerical() { 3 } else { 2 };
            eprintln!("{}", error_json(e.kind(), code, &e.to_string()));
            ExitCode::from(code)
        }
    }
}
