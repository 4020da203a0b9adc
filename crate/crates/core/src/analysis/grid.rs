use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metric::{log10_or_min, MetricReference, MetricSummary};
use crate::error::{Error, Result};
use crate::model::LevelParams;
use crate::noise::{compute_c_alpha, generate_colored_noise, scale_amplitude, NoiseSpec, NoiseTrace};
use crate::schedule::{simulate_ramsey_set, CurveSet, MeasurementSchedule, RamseyOptions};

/// How noise realisations are seeded across grid cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedMode {
    /// Every cell draws its own realisation from a seed derived from the base
    /// seed and the cell's `(α, a)` values.
    #[default]
    PerCell,
    /// All cells with the same `α` share one realisation per base seed and
    /// differ only in scale.
    Shared,
}

/// How the realisations of one cell are combined when several seeds are
/// given.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedAveraging {
    /// Mean of the per-seed error sums.
    Error,
    /// Error of the per-seed summaries' mean: spectra, envelopes and
    /// averages are averaged across seeds before comparison.
    #[default]
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSearchConfig {
    pub alpha_grid: Vec<f64>,
    /// Dimensionless noise scale `a`.
    pub a_grid: Vec<f64>,
    /// One noise realisation per seed and cell; error sums are averaged.
    pub seeds: Vec<u64>,
    pub seed_mode: SeedMode,
    pub seed_averaging: SeedAveraging,
    /// Decades above the minimum that bound the uncertainty region.
    pub uncertainty_level: f64,
    /// Noise sample rate, Hz.
    pub sample_rate: f64,
    /// Realisations averaged when computing `c_α`.
    pub c_alpha_seeds: usize,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            alpha_grid: (0..=30).map(|i| f64::from(i) * 0.1).collect(),
            a_grid: log_space(1e-3, 1e2, 51),
            seeds: vec![1],
            seed_mode: SeedMode::PerCell,
            seed_averaging: SeedAveraging::Summary,
            uncertainty_level: 0.05,
            sample_rate: 1e3,
            c_alpha_seeds: 20,
        }
    }
}

impl GridSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::invalid("fit.alpha_grid", "must not be empty"));
        }
        if self.a_grid.is_empty() {
            return Err(Error::invalid("fit.a_grid", "must not be empty"));
        }
        if let Some(a) = self.a_grid.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid("fit.a_grid", format!("values must be finite and >= 0, got {a}")));
        }
        if self.alpha_grid.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("fit.alpha_grid", "values must be finite"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("fit.seeds", "must not be empty"));
        }
        if !(self.uncertainty_level >= 0.0) {
            return Err(Error::invalid("fit.uncertainty_level", "must be >= 0"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::invalid("fit.sample_rate", "must be > 0"));
        }
        if self.c_alpha_seeds == 0 {
            return Err(Error::invalid("fit.c_alpha_seeds", "must be >= 1"));
        }
        Ok(())
    }
}

/// `n` values spaced evenly in `log10` between `lo` and `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (l, h) = (lo.log10(), hi.log10());
            (0..n)
                .map(|i| 10f64.powf(l + (h - l) * i as f64 / (n - 1) as f64))
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub alpha: f64,
    pub a: f64,
    /// `A = c_α·a²`, e²/Hz.
    pub amplitude: f64,
    pub log_error: f64,
}

/// Extent of the cells within `level` decades of the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    pub level: f64,
    /// Largest `|α − α*|` in the region.
    pub alpha_half_width: f64,
    /// Largest `|log10 a − log10 a*|` in the region.
    pub log10_a_half_width: f64,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvalidCell {
    pub alpha: f64,
    pub a: f64,
    pub reason: String,
}

/// One row of the flattened error surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub alpha: f64,
    pub a: f64,
    pub amplitude: Option<f64>,
    pub log_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub alpha_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    /// `c_α` for each `α`, `None` where it could not be computed.
    pub c_alpha: Vec<Option<f64>>,
    /// `surface[i][j]` is the log error at `(alpha_grid[i], a_grid[j])`.
    pub surface: Vec<Vec<Option<f64>>>,
    pub best: BestCell,
    pub uncertainty: Uncertainty,
    pub invalid_cells: Vec<InvalidCell>,
    /// Length of every simulated noise trace.
    pub n_samples: usize,
}

impl GridSearchResult {
    /// Surface in `α`-major order.
    pub fn cells(&self) -> Vec<SurfaceCell> {
        let mut out = Vec::with_capacity(self.alpha_grid.len() * self.a_grid.len());
        for (i, &alpha) in self.alpha_grid.iter().enumerate() {
            for (j, &a) in self.a_grid.iter().enumerate() {
                out.push(SurfaceCell {
                    alpha,
                    a,
                    amplitude: self.c_alpha[i].map(|c| scale_amplitude(a, c)),
                    log_error: self.surface[i][j],
                });
            }
        }
        out
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one cell, a function of the base seed and the cell's values only.
pub fn cell_seed(base: u64, alpha: f64, a: f64) -> u64 {
    base ^ mix(mix(alpha.to_bits()) ^ a.to_bits())
}

/// Length of the noise traces used for `schedule`: the next power of two
/// covering the whole acquisition.
pub fn grid_noise_length(schedule: &MeasurementSchedule, sample_rate: f64) -> usize {
    schedule.required_samples_all(sample_rate).next_power_of_two()
}

fn cell_summary(
    reference: &MetricReference,
    schedule: &MeasurementSchedule,
    params: &LevelParams,
    level: crate::model::Transition,
    trace: &NoiseTrace,
    a: f64,
) -> Result<MetricSummary> {
    let sim = simulate_ramsey_set(schedule, trace, a, params, level, &RamseyOptions::default())?;
    reference.summarize(&sim)
}

fn combined_log_error(reference: &MetricReference, summaries: &[MetricSummary], mode: SeedAveraging) -> f64 {
    let sum = match mode {
        SeedAveraging::Error => {
            summaries.iter().map(|s| reference.terms_of(s).sum()).sum::<f64>() / summaries.len() as f64
        }
        SeedAveraging::Summary => reference.terms_of(&MetricSummary::mean(summaries)).sum(),
    };
    log10_or_min(sum)
}

/// Score every `(α, a)` cell by simulating the schedule under that noise and
/// comparing with `experimental`.
///
/// Cells whose noise or simulation fails are recorded in `invalid_cells`.
/// The best cell is the surface minimum; ties go to the smallest `(α, a)`.
pub fn grid_search(
    experimental: &CurveSet,
    schedule: &MeasurementSchedule,
    params: &LevelParams,
    config: &GridSearchConfig,
) -> Result<GridSearchResult> {
    config.validate()?;
    schedule.validate()?;
    params.validate("level")?;
    let level = experimental.level;
    schedule.level_index(level)?;
    let reference = MetricReference::new(experimental)?;
    let fs = config.sample_rate;
    let n = grid_noise_length(schedule, fs);

    let rows: Vec<(Option<f64>, Vec<std::result::Result<f64, String>>)> = config
        .alpha_grid
        .par_iter()
        .map(|&alpha| {
            let c_alpha = compute_c_alpha(alpha, n, fs, config.c_alpha_seeds);
            let shared: Option<Vec<Result<NoiseTrace>>> = match config.seed_mode {
                SeedMode::Shared => Some(
                    config
                        .seeds
                        .par_iter()
                        .map(|&s| generate_colored_noise(&NoiseSpec::new(alpha, n, fs, s)))
                        .collect(),
                ),
                SeedMode::PerCell => None,
            };
            let cells = config
                .a_grid
                .par_iter()
                .map(|&a| {
                    if let Err(e) = &c_alpha {
                        return Err(e.to_string());
                    }
                    let summaries = config
                        .seeds
                        .iter()
                        .enumerate()
                        .map(|(k, &s)| match &shared {
                            Some(traces) => match &traces[k] {
                                Ok(trace) => cell_summary(&reference, schedule, params, level, trace, a),
                                Err(e) => Err(Error::invalid("noise", e.to_string())),
                            },
                            None => {
                                let spec = NoiseSpec::new(alpha, n, fs, cell_seed(s, alpha, a));
                                let trace = generate_colored_noise(&spec)?;
                                cell_summary(&reference, schedule, params, level, &trace, a)
                            }
                        })
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| e.to_string())?;
                    Ok(combined_log_error(&reference, &summaries, config.seed_averaging))
                })
                .collect();
            (c_alpha.ok(), cells)
        })
        .collect();

    let mut c_alpha = Vec::with_capacity(rows.len());
    let mut surface = Vec::with_capacity(rows.len());
    let mut invalid_cells = Vec::new();
    for (i, (c, cells)) in rows.into_iter().enumerate() {
        c_alpha.push(c);
        let mut row = Vec::with_capacity(cells.len());
        for (j, cell) in cells.into_iter().enumerate() {
            match cell {
                Ok(v) => row.push(Some(v)),
                Err(reason) => {
                    invalid_cells.push(InvalidCell {
                        alpha: config.alpha_grid[i],
                        a: config.a_grid[j],
                        reason,
                    });
                    row.push(None);
                }
            }
        }
        surface.push(row);
    }

    let key = |i: usize, j: usize| (config.alpha_grid[i], config.a_grid[j]);
    let mut best: Option<(usize, usize, f64)> = None;
    for (i, row) in surface.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let Some(v) = *v else { continue };
            let better = match best {
                None => true,
                Some((bi, bj, bv)) => match v.total_cmp(&bv) {
                    Ordering::Less => true,
                    Ordering::Equal => {
                        let (a, b) = (key(i, j), key(bi, bj));
                        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)) == Ordering::Less
                    }
                    Ordering::Greater => false,
                },
            };
            if better {
                best = Some((i, j, v));
            }
        }
    }
    let (bi, bj, bv) = best.ok_or_else(|| {
        Error::FitFailure(format!(
            "all {} grid cells are invalid{}",
            invalid_cells.len(),
            invalid_cells.first().map(|c| format!(", e.g. {}", c.reason)).unwrap_or_default()
        ))
    })?;
    let (alpha_best, a_best) = key(bi, bj);
    let c_best = c_alpha[bi].expect("valid cell has c_alpha");

    let threshold = if bv == f64::MIN { f64::MIN } else { bv + config.uncertainty_level };
    let mut unc = Uncertainty {
        level: config.uncertainty_level,
        alpha_half_width: 0.0,
        log10_a_half_width: 0.0,
        amplitude_min: f64::INFINITY,
        amplitude_max: f64::NEG_INFINITY,
    };
    for (i, row) in surface.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if v.is_some_and(|v| v <= threshold) {
                let (alpha, a) = key(i, j);
                unc.alpha_half_width = unc.alpha_half_width.max((alpha - alpha_best).abs());
                if a > 0.0 && a_best > 0.0 {
                    unc.log10_a_half_width = unc.log10_a_half_width.max((a.log10() - a_best.log10()).abs());
                }
                if let Some(c) = c_alpha[i] {
                    let amp = scale_amplitude(a, c);
                    unc.amplitude_min = unc.amplitude_min.min(amp);
                    unc.amplitude_max = unc.amplitude_max.max(amp);
                }
            }
        }
    }

    Ok(GridSearchResult {
        alpha_grid: config.alpha_grid.clone(),
        a_grid: config.a_grid.clone(),
        c_alpha,
        surface,
        best: BestCell {
            alpha: alpha_best,
            a: a_best,
            amplitude: scale_amplitude(a_best, c_best),
            log_error: bv,
        },
        uncertainty: unc,
        invalid_cells,
        n_samples: n,
    })
}
