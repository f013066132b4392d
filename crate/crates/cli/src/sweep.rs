//! Seeded parameter sweeps over the full encode, simulate, detect chain.
//!
//! Output is a per-trial CSV and an aggregated CSV with one row per point
//! and coding. Both start with a `# schema=...` line, and every data row
//! carries the configuration hash of the whole experiment.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anisotag_core::codec::{decode, encode, hamming, payload_states, CodecConfig, NonlinearMap};
use anisotag_core::detector::{segment_and_decode, ReferenceSet};
use anisotag_core::gcode::TagLayout;
use anisotag_core::optics::{reference_frames, simulate_swipe_with, ResponseCache, RigSettings, SwipeScenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{short_hash, HarnessError, Result, Settings};

pub const SWEEP_SCHEMA: &str = "anisotag.sweep.v1";
pub const AGGREGATE_SCHEMA: &str = "anisotag.sweep-aggregate.v1";
pub const DEFAULT_TRIALS: usize = 25;

const TRIAL_COLUMNS: &str = "schema_version,config_hash,variable,point,value,trial,coding,seed,n_regions,\
bits_per_region,noise_sigma,beam_diameter,detection_success,regions_found,bit_errors,ber,confusion_bit_errors";
const AGGREGATE_COLUMNS: &str = "schema_version,config_hash,variable,point,value,coding,trials,successes,\
detection_accuracy,extraction_accuracy,ber,confusion_ber";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    NRegions,
    BitsPerRegion,
    NoiseSigma,
    /// Region width divided by the beam diameter; the beam is resized.
    RegionVsBeamWidth,
    /// Noise sigma, with every trial run under Gray and binary coding on
    /// the same payload and seed.
    GrayVsBinary,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            Self::NRegions => "n_regions",
            Self::BitsPerRegion => "bits_per_region",
            Self::NoiseSigma => "noise_sigma",
            Self::RegionVsBeamWidth => "region_vs_beam_width",
            Self::GrayVsBinary => "gray_vs_binary",
        }
    }
}

impl FromStr for SweepVariable {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Self::NRegions,
            Self::BitsPerRegion,
            Self::NoiseSigma,
            Self::RegionVsBeamWidth,
            Self::GrayVsBinary,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| format!("unknown sweep variable {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(HarnessError::Usage("a sweep needs at least one trial per point".into()));
        }
        if self.values.is_empty() {
            return Err(HarnessError::Usage("a sweep needs at least one value".into()));
        }
        let integral = matches!(self.variable, SweepVariable::NRegions | SweepVariable::BitsPerRegion);
        let ratio = self.variable == SweepVariable::RegionVsBeamWidth;
        for &v in &self.values {
            if !v.is_finite() || (integral && (v < 1.0 || v.fract() != 0.0)) || v < 0.0 || (ratio && v == 0.0) {
                return Err(HarnessError::Usage(format!("invalid {} value {v}", self.variable.name())));
            }
        }
        Ok(())
    }

    /// Path of the aggregated companion file: `runs.csv` → `runs.agg.csv`.
    pub fn aggregate_path(&self) -> PathBuf {
        self.output.with_extension("agg.csv")
    }

    /// Digest of the spec and the base settings, recorded on every row.
    pub fn config_hash(&self, base: &Settings) -> String {
        let mut bytes = serde_json::to_vec(self).expect("spec serializes");
        bytes.extend(serde_json::to_vec(base).expect("settings serialize"));
        short_hash(&bytes)
    }
}

/// Settings of one sweep point.
pub fn point_settings(base: &Settings, variable: SweepVariable, value: f64) -> Settings {
    let mut s = *base;
    match variable {
        SweepVariable::NRegions => s.codec.n_regions = value as usize,
        SweepVariable::BitsPerRegion => s.codec.bits_per_region = value as u32,
        SweepVariable::NoiseSigma | SweepVariable::GrayVsBinary => s.rig.noise_sigma = value,
        SweepVariable::RegionVsBeamWidth => {
            s.rig.beam.diameter = s.tag_width / s.codec.n_regions as f64 / value;
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub point: usize,
    pub value: f64,
    pub trial: usize,
    pub coding: &'static str,
    pub seed: u64,
    pub n_regions: usize,
    pub bits_per_region: u32,
    pub noise_sigma: f64,
    pub beam_diameter: f64,
    pub detection_success: bool,
    pub regions_found: usize,
    /// `None` when detection failed.
    pub bit_errors: Option<usize>,
    pub ber: Option<f64>,
    /// Bit errors when one region's true state is moved to a neighbouring
    /// state, independent of the simulation.
    pub confusion_bit_errors: usize,
}

fn coding_name(gray: bool) -> &'static str {
    if gray {
        "gray"
    } else {
        "binary"
    }
}

/// Shared per-point state: references and a warm response cache.
struct PointContext {
    settings: Settings,
    refs: ReferenceSet,
    cache: ResponseCache,
}

impl PointContext {
    fn new(settings: Settings, map: &NonlinearMap) -> Result<Self> {
        settings.validate()?;
        let mut cache = ResponseCache::new(settings.rig.ring());
        let refs = reference_frames(&settings.rig, map, settings.codec.bits_per_region, &mut cache)?;
        Ok(Self {
            settings,
            refs: ReferenceSet::from_references(&refs)?,
            cache,
        })
    }
}

/// Bit errors after moving region `region` one state up or down, with
/// wrap-around since the last state neighbours the first on the circle.
pub fn confusion_bit_errors(payload: &[bool], codec: &CodecConfig, region: usize, up: bool) -> Result<usize> {
    let mut states = payload_states(payload, codec)?;
    let k = codec.states();
    let s = &mut states[region];
    *s = if up { (*s + 1) % k } else { (*s + k - 1) % k };
    Ok(hamming(&decode(&states, codec)?, payload))
}

fn run_trial(
    ctx: &PointContext,
    map: &NonlinearMap,
    codings: &[bool],
    point: usize,
    value: f64,
    trial: usize,
    base_seed: u64,
) -> Result<Vec<TrialRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(((point as u64) << 32) | trial as u64);
    let s = &ctx.settings;
    let payload: Vec<bool> = (0..s.codec.capacity()).map(|_| rng.random()).collect();
    let seed: u64 = rng.random();
    let region = rng.random_range(0..s.codec.n_regions);
    let up: bool = rng.random();
    let mut cache = ctx.cache.clone();
    codings
        .iter()
        .map(|&gray| {
            let codec = CodecConfig { use_gray: gray, ..s.codec };
            let codes = encode(&payload, &codec, map)?;
            let layout = TagLayout::from_codes(s.tag_width, s.tag_height, &codes);
            let scenario = SwipeScenario::new(layout, RigSettings { seed, ..s.rig });
            let trace = simulate_swipe_with(&scenario, &mut cache)?;
            let cfg = Settings { codec, ..*s }.detector();
            let report = segment_and_decode(&trace, &ctx.refs, &cfg, Some(&payload))?;
            let bit_errors = report.detection_success.then(|| hamming(&report.bits, &payload));
            Ok(TrialRow {
                point,
                value,
                trial,
                coding: coding_name(gray),
                seed,
                n_regions: codec.n_regions,
                bits_per_region: codec.bits_per_region,
                noise_sigma: s.rig.noise_sigma,
                beam_diameter: s.rig.beam.diameter,
                detection_success: report.detection_success,
                regions_found: report.region_states.len(),
                bit_errors,
                ber: report.ber,
                confusion_bit_errors: confusion_bit_errors(&payload, &codec, region, up)?,
            })
        })
        .collect()
}

/// Mean accuracies of one point and coding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub point: usize,
    pub value: f64,
    pub coding: &'static str,
    pub trials: usize,
    pub successes: usize,
    pub detection_accuracy: f64,
    /// `None` when no trial was detected.
    pub extraction_accuracy: Option<f64>,
    pub ber: Option<f64>,
    pub confusion_ber: f64,
}

pub fn summarize(rows: &[TrialRow]) -> Vec<PointSummary> {
    let mut keys: Vec<(usize, &'static str)> = rows.iter().map(|r| (r.point, r.coding)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(point, coding)| {
            let group: Vec<&TrialRow> = rows.iter().filter(|r| r.point == point && r.coding == coding).collect();
            let trials = group.len();
            let bits = (group[0].n_regions * group[0].bits_per_region as usize) as f64;
            let detected: Vec<f64> = group.iter().filter_map(|r| r.ber).collect();
            let extraction_accuracy =
                (!detected.is_empty()).then(|| 1.0 - detected.iter().sum::<f64>() / detected.len() as f64);
            PointSummary {
                point,
                value: group[0].value,
                coding,
                trials,
                successes: detected.len(),
                detection_accuracy: group.iter().filter(|r| r.detection_success).count() as f64 / trials as f64,
                extraction_accuracy,
                ber: extraction_accuracy.map(|e| 1.0 - e),
                confusion_ber: group.iter().map(|r| r.confusion_bit_errors as f64).sum::<f64>()
                    / (trials as f64 * bits),
            }
        })
        .collect()
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn trial_line(hash: &str, variable: SweepVariable, r: &TrialRow) -> String {
    format!(
        "{SWEEP_SCHEMA},{hash},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        variable.name(),
        r.point,
        r.value,
        r.trial,
        r.coding,
        r.seed,
        r.n_regions,
        r.bits_per_region,
        r.noise_sigma,
        r.beam_diameter,
        r.detection_success,
        r.regions_found,
        opt(r.bit_errors),
        opt(r.ber.map(|b| format!("{b:.6}"))),
        r.confusion_bit_errors,
    )
}

pub fn format_aggregate(hash: &str, variable: SweepVariable, summaries: &[PointSummary]) -> String {
    let mut out = format!("# schema={AGGREGATE_SCHEMA} variable={} config_hash={hash}\n{AGGREGATE_COLUMNS}\n", variable.name());
    for s in summaries {
        let _ = writeln!(
            out,
            "{AGGREGATE_SCHEMA},{hash},{},{},{},{},{},{},{:.6},{},{},{:.6}",
            variable.name(),
            s.point,
            s.value,
            s.coding,
            s.trials,
            s.successes,
            s.detection_accuracy,
            opt(s.extraction_accuracy.map(|e| format!("{e:.6}"))),
            opt(s.ber.map(|b| format!("{b:.6}"))),
            s.confusion_ber,
        );
    }
    out
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::io(path, e)
}

/// Runs every point in order, trials in parallel, appending each point's
/// sorted rows to the results file and flushing before the next point.
pub fn run_sweep(spec: &ExperimentSpec, base: &Settings, map: &NonlinearMap) -> Result<Vec<PointSummary>> {
    spec.validate()?;
    let hash = spec.config_hash(base);
    let codings: Vec<bool> = match spec.variable {
        SweepVariable::GrayVsBinary => vec![true, false],
        _ => vec![base.codec.use_gray],
    };
    let path = &spec.output;
    let mut out = BufWriter::new(File::create(path).map_err(io(path))?);
    write!(out, "# schema={SWEEP_SCHEMA} variable={} config_hash={hash}\n{TRIAL_COLUMNS}\n", spec.variable.name())
        .map_err(io(path))?;
    let mut rows = Vec::new();
    for (point, &value) in spec.values.iter().enumerate() {
        let ctx = PointContext::new(point_settings(base, spec.variable, value), map)?;
        let mut point_rows: Vec<TrialRow> = (0..spec.trials)
            .into_par_iter()
            .map(|trial| run_trial(&ctx, map, &codings, point, value, trial, spec.seed))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        point_rows.sort_by(|a, b| (a.trial, a.coding).cmp(&(b.trial, b.coding)));
        for r in &point_rows {
            out.write_all(trial_line(&hash, spec.variable, r).as_bytes()).map_err(io(path))?;
        }
        out.flush().map_err(io(path))?;
        rows.extend(point_rows);
    }
    let summaries = summarize(&rows);
    let agg = spec.aggregate_path();
    std::fs::write(&agg, format_aggregate(&hash, spec.variable, &summaries)).map_err(io(&agg))?;
    Ok(summaries)
}
