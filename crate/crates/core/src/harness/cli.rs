use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use jscc_nn::{load_checkpoint, save_checkpoint, ParameterStore};

use super::config::ExperimentConfig;
use super::records::write_records_file;
use super::sweep::{check_params, grid, run_baseline, run_sweep, SweepPlan};
use crate::error::{Error, Result};
use crate::jscc::{evaluate_model, gradcheck_suite, train, EvalOptions, RayleighChannel};

/// Tolerance on the maximum relative gradient error.
pub const GRADCHECK_TOL: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "deepjscc-mimo", version, about = "MIMO image transmission experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write its checkpoint and loss history.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `train.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate a checkpoint at one SNR and print PSNR statistics.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "sigma-e2", default_value_t = 0.0)]
        sigma_e2: f64,
        /// Active antennas (defaults to the model's).
        #[arg(long)]
        m: Option<usize>,
        /// Channel draws per image (defaults to the config's).
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Evaluate the configured checkpoint over the experiment grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write separation-bound rows for the experiment grid.
    Baseline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Finite-difference check of every model gradient path.
    Gradcheck {
        #[arg(long, default_value = "tiny")]
        profile: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Runs the CLI and returns the process exit status: 0 on success, 2 for
/// usage and configuration errors, 1 for failures during computation.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut out = std::io::stdout().lock();
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => 2,
                _ => 1,
            }
        }
    }
}

fn load_params(path: &Path) -> Result<ParameterStore> {
    if !path.is_file() {
        return Err(Error::Config(format!("checkpoint {} not found", path.display())));
    }
    Ok(load_checkpoint(path)?)
}

fn dispatch(cmd: Command, out: &mut impl Write) -> Result<i32> {
    match cmd {
        Command::Train { config, seed } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mc = cfg.model_config()?;
            let tc = cfg.train_config(seed);
            let data = cfg.load_datasets()?;
            let start = Instant::now();
            let (params, hist) = train(&mc, &tc, &data.train, &data.val, &RayleighChannel)?;
            if hist.power.violations > 0 {
                return Err(Error::Numeric(format!(
                    "{} of {} blocks violated the power constraint",
                    hist.power.violations, hist.power.checks
                )));
            }
            let ckpt = cfg.checkpoint_path();
            if let Some(dir) = ckpt.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            save_checkpoint(&params, &ckpt)?;
            let history = match &cfg.train.history {
                Some(p) => cfg.resolve(p),
                None => ckpt.with_extension("history.csv"),
            };
            hist.write_csv(&history)?;
            writeln!(
                out,
                "trained {} steps in {:.1}s; best validation PSNR {}; checkpoint {}; history {}",
                hist.rows.len(),
                start.elapsed().as_secs_f64(),
                hist.best_val_psnr
                    .map(|p| format!("{p:.3} dB at step {}", hist.best_step.unwrap_or(0)))
                    .unwrap_or_else(|| "n/a".into()),
                ckpt.display(),
                history.display()
            )?;
            Ok(0)
        }
        Command::Eval {
            ckpt,
            config,
            snr,
            seed,
            sigma_e2,
            m,
            draws,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mc = cfg.model_config()?;
            if snr.is_nan() || snr == f64::NEG_INFINITY {
                return Err(Error::Config(format!("bad SNR {snr}")));
            }
            if !(sigma_e2 >= 0.0) || !sigma_e2.is_finite() {
                return Err(Error::Config(format!("sigma_e2 {sigma_e2} must be finite and >= 0")));
            }
            mc.check_estimation_error(sigma_e2)?;
            let m_eval = m.unwrap_or(mc.m_max);
            if m_eval < mc.m_min() || m_eval > mc.m_max {
                return Err(Error::Config(format!("antenna count {m_eval} not supported by the model")));
            }
            let draws = draws.unwrap_or(cfg.experiment.n_channel_draws);
            if draws == 0 {
                return Err(Error::Config("--draws must be positive".into()));
            }
            let params = load_params(&ckpt)?;
            check_params(&params, &mc)?;
            let images = cfg.load_datasets()?.eval;
            let opts = EvalOptions {
                snr_db: snr,
                sigma_e2,
                m: Some(m_eval),
                n_channel_draws: draws,
                seed,
                peak: cfg.experiment.psnr_peak,
            };
            let st = evaluate_model(&params, &mc, &images, &opts, &RayleighChannel)?;
            writeln!(
                out,
                "mode={} snr_db={snr} m={m_eval} sigma_e2={sigma_e2} seed={seed} psnr_mean={:.6} psnr_std={:.6} n_images={} n_channel_draws={}",
                mc.mode, st.psnr_mean, st.psnr_std, st.n_images, st.n_channel_draws
            )?;
            Ok(0)
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mc = cfg.model_config()?;
            let params = load_params(&cfg.checkpoint_path())?;
            check_params(&params, &mc)?;
            let e = &cfg.experiment;
            let plan = SweepPlan {
                cells: grid(&e.snr_db, &e.sigma_e2, &cfg.m_eval(), &e.seeds),
                n_channel_draws: e.n_channel_draws,
                peak: e.psnr_peak,
                model_id: cfg.model_id(),
            };
            let images = cfg.load_datasets()?.eval;
            let rows = run_sweep(&params, &mc, &images, &plan, &RayleighChannel)?;
            let path = cfg.output_path();
            write_records_file(&path, &rows)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display())?;
            Ok(0)
        }
        Command::Baseline { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let mc = cfg.model_config()?;
            let e = &cfg.experiment;
            let images = cfg.load_datasets()?.eval;
            let codec = cfg.codec();
            let mut rows = Vec::new();
            for m in cfg.m_eval() {
                rows.extend(run_baseline(
                    &images,
                    &e.snr_db,
                    mc.rate(),
                    m,
                    &e.seeds,
                    e.n_channel_draws,
                    codec.as_ref(),
                )?);
            }
            let path = cfg.resolve(&cfg.baseline.output);
            write_records_file(&path, &rows)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display())?;
            Ok(0)
        }
        Command::Gradcheck { profile, seed } => {
            crate::jscc::ModelConfig::profile(&profile, crate::frontend::CsiMode::Csir)?;
            let start = Instant::now();
            let cases = gradcheck_suite(&profile, seed)?;
            let mut ok = true;
            for c in &cases {
                let pass = c.report.passed(GRADCHECK_TOL);
                ok &= pass;
                writeln!(
                    out,
                    "{} {:<20} max_rel_error={:.3e} coords={}",
                    if pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.report.max_rel_error,
                    c.report.coords_checked
                )?;
            }
            writeln!(
                out,
                "gradcheck {} (tolerance {GRADCHECK_TOL:e}, {:.2}s)",
                if ok { "passed" } else { "failed" },
                start.elapsed().as_secs_f64()
            )?;
            Ok(if ok { 0 } else { 1 })
        }
    }
}
