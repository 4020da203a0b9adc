//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{
    default_smooth_window, extract_envelope, fit_canonical_t2, fit_envelope_t2_with_floor, grid_noise_length,
    grid_search, FitResult,
};
use crate::error::{Error, Result};
use crate::io::{
    read_curves, write_curves, write_json, write_psd, write_series, write_surface, write_trace, NoiseScale,
    Provenance, ResultBundle, RunConfig, Table,
};
use crate::lindblad::simulate_lindblad_ramsey;
use crate::model::Transition;
use crate::noise::{
    compute_c_alpha, fit_psd_slope, generate_colored_noise, periodogram, scale_amplitude, scaling_for_amplitude,
    NoiseSpec, NoiseTrace,
};
use crate::schedule::{simulate_ramsey_set, CurveSet, RamseyOptions};

#[derive(Debug, Parser)]
#[command(name = "ramsey-beats", version, about = "Multi-curve Ramsey simulation and charge-noise inference")]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `noise.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Phenom,
    Lindblad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1,
    Fig3,
    Fig5,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a charge-noise trace and its periodogram.
    NoiseGen,
    /// Simulate the curve set of one level.
    Simulate {
        #[arg(long, value_enum, default_value_t = Model::Phenom)]
        model: Model,
        /// 01, 12 or 23; the last scheduled level by default.
        #[arg(long)]
        level: Option<Transition>,
    },
    /// Canonical and envelope-corrected T2* of a curves file.
    FitT2 { curves: PathBuf },
    /// Grid search of the noise exponent and scale against a curves file.
    FitPsd { curves: PathBuf },
    /// Data behind the curve-overlay, noise-sweep and model-comparison
    /// figures.
    ExportFigs {
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Figure::Fig1, Figure::Fig3, Figure::Fig5])]
        figs: Vec<Figure>,
        /// Level of the noise-sweep and model-comparison data.
        #[arg(long)]
        level: Option<Transition>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::NoiseGen => "noise-gen",
            Command::Simulate { .. } => "simulate",
            Command::FitT2 { .. } => "fit-t2",
            Command::FitPsd { .. } => "fit-psd",
            Command::ExportFigs { .. } => "export-figs",
        }
    }
}

/// Remediation advice printed under an error.
pub fn hint(err: &Error) -> Option<&'static str> {
    match err {
        Error::TraceTooShort { .. } => Some("raise `noise.n_samples` or omit it to size the trace from the schedule"),
        Error::StepTooLarge { .. } => Some("set a smaller `lindblad.dt_override`"),
        Error::GridMismatch(_) => Some("the schedule block must match the curves file (n_curves, n_tr, tr_max)"),
        _ => None,
    }
}

struct Session {
    config: RunConfig,
    out: PathBuf,
    bundle: ResultBundle,
}

/// Unit-variance trace plus the scale turning it into `n_g`.
struct ScaledNoise {
    trace: NoiseTrace,
    a: f64,
}

impl Session {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.noise.seed = seed;
        }
        std::fs::create_dir_all(&cli.out)?;
        let provenance = Provenance::new(&config.sha256(), config.noise.seed, cli.command.name());
        Ok(Self {
            config,
            out: cli.out.clone(),
            bundle: ResultBundle { provenance, ..ResultBundle::default() },
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.bundle.files.push(name.to_string());
        self.out.join(name)
    }

    fn prov(&self) -> &Provenance {
        &self.bundle.provenance
    }

    fn value(&mut self, key: &str, v: f64) {
        self.bundle.values.insert(key.to_string(), v);
    }

    fn default_level(&self) -> Transition {
        self.config.schedule.levels.last().copied().unwrap_or(Transition::T23)
    }

    fn noise_len(&self) -> usize {
        let schedule = self.config.schedule_for(self.default_level());
        self.config
            .noise
            .n_samples
            .unwrap_or_else(|| grid_noise_length(&schedule, self.config.noise.sample_rate))
    }

    /// Trace for `alpha` at the configured seed, scaled to `scale`.
    fn noise(&mut self, alpha: f64, scale: NoiseScale, tag: &str) -> Result<ScaledNoise> {
        let n = self.noise_len();
        let fs = self.config.noise.sample_rate;
        let trace = generate_colored_noise(&NoiseSpec::new(alpha, n, fs, self.config.noise.seed))?;
        let c = compute_c_alpha(alpha, n, fs, self.config.noise.c_alpha_seeds)?;
        let a = match scale {
            NoiseScale::Scale(a) => a,
            NoiseScale::Amplitude(amp) => scaling_for_amplitude(amp, c),
        };
        self.value(&format!("{tag}alpha"), alpha);
        self.value(&format!("{tag}c_alpha"), c);
        self.value(&format!("{tag}a"), a);
        self.value(&format!("{tag}A"), scale_amplitude(a, c));
        Ok(ScaledNoise { trace, a })
    }

    fn configured_noise(&mut self) -> Result<ScaledNoise> {
        let (alpha, scale) = (self.config.noise.alpha, self.config.noise.scale());
        self.noise(alpha, scale, "")
    }

    fn smooth_window(&self, set: &CurveSet) -> usize {
        self.config.fit.smooth_window.unwrap_or_else(|| default_smooth_window(set))
    }

    /// Curves, overlay, average and envelope files of one set.
    fn emit_set(&mut self, prefix: &str, set: &CurveSet) -> Result<()> {
        let prov = self.prov().clone().with("level", set.level).with("omega_r_hz", set.omega_r);
        let path = self.path(&format!("{prefix}curves.csv"));
        write_curves(&path, self.prov(), set)?;

        let names: Vec<String> = (0..set.n_curves()).map(|i| format!("curve_{i}")).collect();
        let series: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(set.curves.iter().map(Vec::as_slice)).collect();
        let path = self.path(&format!("{prefix}overlay.csv"));
        write_series(&path, &prov, &set.t_r, &series)?;

        let avg = set.average();
        let path = self.path(&format!("{prefix}average.csv"));
        write_series(&path, &prov, &set.t_r, &[("average", &avg)])?;

        if set.n_curves() >= 2 {
            let window = self.smooth_window(set);
            let env = extract_envelope(set, window)?;
            let prov = prov.with("smooth_window", window);
            let path = self.path(&format!("{prefix}envelope.csv"));
            write_series(&path, &prov, &env.t_r, &[("upper", &env.upper), ("lower", &env.lower)])?;
        }
        Ok(())
    }

    fn fits(&self, set: &CurveSet) -> Result<(FitResult, FitResult)> {
        let canonical = fit_canonical_t2(&set.t_r, &set.average(), Some(set.omega_r))?;
        let env = extract_envelope(set, self.smooth_window(set))?;
        let corrected = fit_envelope_t2_with_floor(&env, self.config.fit.noise_floor)?;
        Ok((canonical, corrected))
    }

    fn simulate_phenom(&self, noise: &ScaledNoise, level: Transition) -> Result<CurveSet> {
        let schedule = self.config.schedule_for(level);
        let params = self.config.level_params(level);
        simulate_ramsey_set(&schedule, &noise.trace, noise.a, &params, level, &RamseyOptions::default())
    }

    fn simulate_lindblad(&mut self, noise: &ScaledNoise, level: Transition, shots: Option<usize>) -> Result<CurveSet> {
        let mut schedule = self.config.schedule_for(level);
        if let Some(s) = shots {
            schedule.shots_per_point = s;
        }
        let omega_r = self.config.level_params(level).omega_r;
        let run = simulate_lindblad_ramsey(
            &schedule,
            &noise.trace,
            noise.a,
            &self.config.lindblad.params,
            level,
            omega_r,
            &self.config.lindblad.options(),
        )?;
        self.value("lindblad_dt_s", run.dt);
        self.value("lindblad_max_trace_error", run.invariants.max_trace_error);
        self.value("lindblad_max_hermiticity_error", run.invariants.max_hermiticity_error);
        self.value("lindblad_min_eigenvalue", run.invariants.min_eigenvalue);
        Ok(run.curves)
    }

    fn finish(mut self, command: &str) -> Result<ResultBundle> {
        let path = self.path(&format!("{command}.json"));
        write_json(&path, &self.bundle)?;
        Ok(self.bundle)
    }
}

fn us(t: f64) -> String {
    format!("{:.3} µs", t * 1e6)
}

fn report_fit(label: &str, fit: &FitResult) {
    let bound = if fit.at_upper_bound { " (at fit bound)" } else { "" };
    println!("{label}: T2* = {}{bound}, residual rms {:.4}", us(fit.t2), fit.residual_rms);
}

fn noise_gen(mut s: Session) -> Result<ResultBundle> {
    let noise = s.configured_noise()?;
    let scaled = noise.trace.scaled(noise.a);
    let psd = periodogram(&scaled)?;
    let nyquist = scaled.sample_rate() / 2.0;
    let band = (nyquist / 40.0, nyquist / 4.0);
    if let Ok(slope) = fit_psd_slope(&psd, band.0, band.1) {
        s.value("psd_slope", slope);
    }
    let prov = s.prov().clone();
    let path = s.path("noise.csv");
    write_trace(&path, &prov, &scaled)?;
    let path = s.path("psd.csv");
    write_psd(&path, &prov, &psd)?;
    let v = &s.bundle.values;
    println!(
        "alpha {} | a {:.4e} | A {:.4e} e²/Hz | {} samples",
        v["alpha"],
        v["a"],
        v["A"],
        scaled.len()
    );
    s.finish("noise-gen")
}

fn simulate(mut s: Session, model: Model, level: Option<Transition>) -> Result<ResultBundle> {
    let level = level.unwrap_or_else(|| s.default_level());
    let noise = s.configured_noise()?;
    let set = match model {
        Model::Phenom => s.simulate_phenom(&noise, level)?,
        Model::Lindblad => s.simulate_lindblad(&noise, level, None)?,
    };
    s.emit_set("", &set)?;
    println!("{} curves × {} points, level {level}", set.n_curves(), set.n_points());
    s.finish("simulate")
}

fn fit_t2(mut s: Session, curves: &Path) -> Result<ResultBundle> {
    let set = read_curves(&Table::read(curves)?)?;
    let (canonical, corrected) = s.fits(&set)?;
    report_fit("canonical", &canonical);
    report_fit("corrected", &corrected);
    s.bundle.fits.insert("canonical".into(), canonical);
    s.bundle.fits.insert("corrected".into(), corrected);
    s.finish("fit-t2")
}

fn fit_psd(mut s: Session, curves: &Path) -> Result<ResultBundle> {
    let set = read_curves(&Table::read(curves)?)?;
    let level = set.level;
    let schedule = s.config.schedule_for(level);
    let mut params = s.config.level_params(level);
    params.omega_r = set.omega_r;
    let result = grid_search(&set, &schedule, &params, &s.config.grid_config())?;
    let b = result.best;
    println!(
        "best alpha {} | a {:.4e} | A {:.4e} e²/Hz | log10 error {:.4}",
        b.alpha, b.a, b.amplitude, b.log_error
    );
    let u = result.uncertainty;
    println!(
        "within {} decades: alpha ±{} | log10 a ±{:.3} | A in [{:.3e}, {:.3e}]",
        u.level, u.alpha_half_width, u.log10_a_half_width, u.amplitude_min, u.amplitude_max
    );
    if !result.invalid_cells.is_empty() {
        eprintln!("warning: {} invalid grid cells", result.invalid_cells.len());
    }
    let prov = s.prov().clone().with("level", level);
    let path = s.path("surface.csv");
    write_surface(&path, &prov, &result.cells())?;
    s.bundle.grid_search = Some(result);
    s.finish("fit-psd")
}

const SWEEP_ALPHAS: [f64; 4] = [0.0, 1.0, 2.0, 3.0];
const SWEEP_AMPLITUDES: [f64; 3] = [1e-6, 1e-5, 1e-4];

fn export_figs(mut s: Session, figs: &[Figure], level: Option<Transition>) -> Result<ResultBundle> {
    let level = level.unwrap_or_else(|| s.default_level());
    if figs.contains(&Figure::Fig1) {
        let noise = s.configured_noise()?;
        for l in s.config.schedule.levels.clone() {
            let set = s.simulate_phenom(&noise, l)?;
            let prefix = format!("fig1_{l}_");
            s.emit_set(&prefix, &set)?;
            match s.fits(&set) {
                Ok((canonical, corrected)) => {
                    report_fit(&format!("level {l} canonical"), &canonical);
                    report_fit(&format!("level {l} corrected"), &corrected);
                    s.bundle.fits.insert(format!("{prefix}canonical"), canonical);
                    s.bundle.fits.insert(format!("{prefix}corrected"), corrected);
                }
                Err(e) => eprintln!("level {l}: no T2* fit ({e})"),
            }
        }
    }
    if figs.contains(&Figure::Fig3) {
        for alpha in SWEEP_ALPHAS {
            for amp in SWEEP_AMPLITUDES {
                let tag = format!("fig3_alpha{alpha}_A{amp:e}_");
                let noise = s.noise(alpha, NoiseScale::Amplitude(amp), &tag)?;
                let set = s.simulate_phenom(&noise, level)?;
                s.emit_set(&tag, &set)?;
            }
        }
    }
    if figs.contains(&Figure::Fig5) {
        let noise = s.configured_noise()?;
        let shots = s.config.lindblad.comparison_shots;
        let mut schedule = s.config.schedule_for(level);
        schedule.shots_per_point = shots;
        let params = s.config.level_params(level);
        let phenom = simulate_ramsey_set(&schedule, &noise.trace, noise.a, &params, level, &RamseyOptions::default())?;
        let lindblad = s.simulate_lindblad(&noise, level, Some(shots))?;
        let (pa, la) = (phenom.average(), lindblad.average());
        let rms = (pa.iter().zip(&la).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / pa.len() as f64).sqrt();
        s.value("fig5_average_rms_difference", rms);
        s.emit_set("fig5_phenom_", &phenom)?;
        s.emit_set("fig5_lindblad_", &lindblad)?;
        println!("model comparison at {shots} shots/point: average rms difference {rms:.4}");
    }
    s.finish("export-figs")
}

/// Execute one parsed invocation.
pub fn run(cli: &Cli) -> Result<ResultBundle> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads", "must be >= 1"));
        }
        // a pool already installed by an earlier call in this process is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let session = Session::new(cli)?;
    match &cli.command {
        Command::NoiseGen => noise_gen(session),
        Command::Simulate { model, level } => simulate(session, *model, *level),
        Command::FitT2 { curves } => fit_t2(session, curves),
        Command::FitPsd { curves } => fit_psd(session, curves),
        Command::ExportFigs { figs, level } => export_figs(session, figs, *level),
    }
}
