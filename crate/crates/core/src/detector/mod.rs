//! Frame classification, borderline segmentation and accuracy metrics.
//!
//! Each frame is compared with the reference frame of every state by
//! Pearson correlation after removing the ambient frame. A frame is valid
//! when its best similarity exceeds the threshold. Diffuse borderline
//! frames fall below it and split the swipe into regions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode, hamming, CodecConfig, CodecError};
use crate::optics::{References, SensorFrame};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("frame has {got} channels, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid detector configuration: {0}")]
    InvalidConfig(String),
    #[error("at least two reference states are required, got {0}")]
    TooFewReferences(usize),
    #[error("no reports to evaluate")]
    EmptyInput,
    #[error("{reports} reports but {truths} ground truths")]
    UnmatchedInput { reports: usize, truths: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

pub type Result<T> = std::result::Result<T, DetectorError>;

fn centred_unit(v: &[f64]) -> Option<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    // Relative cut-off so rounding residue of a constant vector counts as zero.
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (norm > 1e-12 * scale.max(1.0)).then(|| c.into_iter().map(|x| x / norm).collect())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(DetectorError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Pearson correlation of `frame - ambient` and `reference - ambient`,
/// clamped to `[-1, 1]`. Zero when either centred vector vanishes.
pub fn similarity(frame: &[f64], reference: &[f64], ambient: &[f64]) -> Result<f64> {
    check_len(reference.len(), frame.len())?;
    check_len(reference.len(), ambient.len())?;
    let x: Vec<f64> = frame.iter().zip(ambient).map(|(f, a)| f - a).collect();
    let y: Vec<f64> = reference.iter().zip(ambient).map(|(r, a)| r - a).collect();
    Ok(match (centred_unit(&x), centred_unit(&y)) {
        (Some(a), Some(b)) => a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>().clamp(-1.0, 1.0),
        _ => 0.0,
    })
}

/// Reference frames prepared for repeated correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSet {
    ambient: Vec<f64>,
    /// Centred unit vectors of `state - ambient`; `None` for flat states.
    units: Vec<Option<Vec<f64>>>,
}

impl ReferenceSet {
    pub fn new(ambient: Vec<f64>, states: &[Vec<f64>]) -> Result<Self> {
        if states.len() < 2 {
            return Err(DetectorError::TooFewReferences(states.len()));
        }
        let units = states
            .iter()
            .map(|s| {
                check_len(ambient.len(), s.len())?;
                let d: Vec<f64> = s.iter().zip(&ambient).map(|(v, a)| v - a).collect();
                Ok(centred_unit(&d))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ambient, units })
    }

    pub fn from_references(refs: &References) -> Result<Self> {
        let states: Vec<Vec<f64>> = refs.states.iter().map(SensorFrame::as_f64).collect();
        Self::new(refs.ambient.as_f64(), &states)
    }

    pub fn state_count(&self) -> usize {
        self.units.len()
    }

    pub fn channels(&self) -> usize {
        self.ambient.len()
    }

    /// Similarity of `frame` with every state.
    pub fn similarities(&self, frame: &[f64]) -> Result<Vec<f64>> {
        check_len(self.channels(), frame.len())?;
        let x: Vec<f64> = frame.iter().zip(&self.ambient).map(|(f, a)| f - a).collect();
        let Some(xu) = centred_unit(&x) else {
            return Ok(vec![0.0; self.units.len()]);
        };
        Ok(self
            .units
            .iter()
            .map(|u| match u {
                Some(u) => u.iter().zip(&xu).map(|(p, q)| p * q).sum::<f64>().clamp(-1.0, 1.0),
                None => 0.0,
            })
            .collect())
    }

    /// Largest off-diagonal correlation between two reference states.
    pub fn max_pair_correlation(&self) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.units.len() {
            for j in i + 1..self.units.len() {
                let c = match (&self.units[i], &self.units[j]) {
                    (Some(a), Some(b)) => a.iter().zip(b).map(|(p, q)| p * q).sum(),
                    _ => 0.0,
                };
                best = best.max(c);
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub threshold: f64,
    pub debounce_frames: usize,
    pub expected_regions: usize,
    pub bits_per_region: u32,
    pub use_gray: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            debounce_frames: 3,
            expected_regions: 17,
            bits_per_region: 3,
            use_gray: true,
        }
    }
}

impl DetectorConfig {
    pub fn for_codec(codec: &CodecConfig) -> Self {
        Self {
            expected_regions: codec.n_regions,
            bits_per_region: codec.bits_per_region,
            use_gray: codec.use_gray,
            ..Self::default()
        }
    }

    pub fn codec(&self) -> CodecConfig {
        CodecConfig {
            n_regions: self.expected_regions,
            bits_per_region: self.bits_per_region,
            use_gray: self.use_gray,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(DetectorError::InvalidConfig(format!(
                "threshold must be in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.debounce_frames == 0 {
            return Err(DetectorError::InvalidConfig("debounce must be at least one frame".into()));
        }
        self.codec().validate()?;
        Ok(())
    }
}

/// Best state for a frame's similarities, or `None` when the maximum does
/// not exceed `threshold`. Ties go to the lowest index.
pub fn classify_similarities(sims: &[f64], threshold: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in sims.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.filter(|&(_, s)| s > threshold).map(|(i, _)| i)
}

pub fn classify_frame(frame: &SensorFrame, refs: &ReferenceSet, cfg: &DetectorConfig) -> Result<Option<usize>> {
    let sims = refs.similarities(&frame.as_f64())?;
    Ok(classify_similarities(&sims, cfg.threshold))
}

/// A maximal run of frames sharing one label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub label: Option<usize>,
    pub start: usize,
    pub len: usize,
}

/// Runs of identical labels after debouncing: valid runs shorter than
/// `debounce` are removed and their neighbours re-joined when they share a
/// label, so an isolated glitch neither adds a region nor splits one.
/// The runs tile the frames: a removed run's frames go to the run before
/// it, or to the run after it at the start of the trace.
pub fn segment_labels(labels: &[Option<usize>], debounce: usize) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.label == label => r.len += 1,
            _ => runs.push(Run { label, start: i, len: 1 }),
        }
    }
    let mut merged: Vec<Run> = Vec::new();
    for run in runs {
        let kept = run.label.is_none() || run.len >= debounce;
        match merged.last_mut() {
            Some(last) if !kept || last.label == run.label => last.len += run.len,
            Some(_) => merged.push(run),
            None if kept => merged.push(Run { start: 0, len: run.start + run.len, ..run }),
            None => {}
        }
    }
    if merged.is_empty() && !labels.is_empty() {
        // Only short valid runs: nothing survives as a region.
        merged.push(Run { label: None, start: 0, len: labels.len() });
    }
    merged
}

/// Frame labels of tiling runs; inverse of [`segment_labels`] on its output.
pub fn expand_runs(runs: &[Run]) -> Vec<Option<usize>> {
    runs.iter().flat_map(|r| std::iter::repeat_n(r.label, r.len)).collect()
}

/// Consecutive valid frames between two invalid ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpan {
    pub start: usize,
    /// Frames from the first to the last valid frame of the span.
    pub len: usize,
    /// Most frequent label in the span; ties go to the lower state.
    pub state: u32,
    /// Whether every valid frame in the span carries `state`.
    pub uniform: bool,
}

/// Groups debounced runs into regions. Only invalid frames separate
/// regions: a direct change from one valid state to another within a span
/// means the borderline was not seen, and the span counts once.
pub fn group_regions(runs: &[Run]) -> Vec<RegionSpan> {
    let mut out = Vec::new();
    let mut k = 0;
    while k < runs.len() {
        if runs[k].label.is_none() {
            k += 1;
            continue;
        }
        let first = k;
        while k < runs.len() && runs[k].label.is_some() {
            k += 1;
        }
        let group = &runs[first..k];
        let mut votes: Vec<(usize, usize)> = Vec::new();
        for r in group {
            let label = r.label.expect("group holds valid runs");
            match votes.iter_mut().find(|(l, _)| *l == label) {
                Some(v) => v.1 += r.len,
                None => votes.push((label, r.len)),
            }
        }
        let (state, _) = votes
            .iter()
            .copied()
            .fold((usize::MAX, 0), |best, (l, c)| if c > best.1 || (c == best.1 && l < best.0) { (l, c) } else { best });
        let last = group[group.len() - 1];
        out.push(RegionSpan {
            start: group[0].start,
            len: last.start + last.len - group[0].start,
            state: state as u32,
            uniform: votes.len() == 1,
        });
    }
    out
}

/// Outcome of decoding one swipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    /// Empty unless detection succeeded.
    pub bits: Vec<bool>,
    /// Detected state of every region, in swipe order.
    pub region_states: Vec<u32>,
    pub regions: Vec<RegionSpan>,
    /// Per frame, the similarity with every reference state.
    pub similarities: Vec<Vec<f64>>,
    pub labels: Vec<Option<usize>>,
    pub detection_success: bool,
    /// Bit error rate against the ground truth, when one was given and
    /// detection succeeded.
    pub ber: Option<f64>,
}

impl DetectionReport {
    pub fn max_similarity(&self, frame: usize) -> f64 {
        self.similarities[frame].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn segment_and_decode(
    trace: &[SensorFrame],
    refs: &ReferenceSet,
    cfg: &DetectorConfig,
    truth: Option<&[bool]>,
) -> Result<DetectionReport> {
    cfg.validate()?;
    let codec = cfg.codec();
    if refs.state_count() != codec.states() as usize {
        return Err(DetectorError::InvalidConfig(format!(
            "{} reference states for {} bits per region",
            refs.state_count(),
            cfg.bits_per_region
        )));
    }
    let similarities = trace
        .iter()
        .map(|f| refs.similarities(&f.as_f64()))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<Option<usize>> = similarities
        .iter()
        .map(|s| classify_similarities(s, cfg.threshold))
        .collect();
    let regions = group_regions(&segment_labels(&labels, cfg.debounce_frames));
    let region_states: Vec<u32> = regions.iter().map(|r| r.state).collect();
    let detection_success = region_states.len() == cfg.expected_regions;
    let bits = if detection_success {
        decode(&region_states, &codec)?
    } else {
        Vec::new()
    };
    let ber = match truth {
        Some(t) if detection_success => Some(hamming(&bits, t) as f64 / t.len().max(1) as f64),
        _ => None,
    };
    Ok(DetectionReport {
        bits,
        region_states,
        regions,
        similarities,
        labels,
        detection_success,
        ber,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub detection_accuracy: f64,
    /// Mean bit recovery rate over successful detections; `None` if there
    /// were none.
    pub extraction_accuracy: Option<f64>,
    pub ber: Option<f64>,
    pub trials: usize,
    pub successes: usize,
}

pub fn evaluate(reports: &[DetectionReport], truths: &[Vec<bool>]) -> Result<Metrics> {
    if reports.is_empty() {
        return Err(DetectorError::EmptyInput);
    }
    if reports.len() != truths.len() {
        return Err(DetectorError::UnmatchedInput {
            reports: reports.len(),
            truths: truths.len(),
        });
    }
    let mut successes = 0;
    let mut recovered = 0.0;
    for (r, t) in reports.iter().zip(truths) {
        if r.detection_success {
            successes += 1;
            recovered += 1.0 - hamming(&r.bits, t) as f64 / t.len().max(1) as f64;
        }
    }
    let extraction_accuracy = (successes > 0).then(|| recovered / successes as f64);
    Ok(Metrics {
        detection_accuracy: successes as f64 / reports.len() as f64,
        extraction_accuracy,
        ber: extraction_accuracy.map(|e| 1.0 - e),
        trials: reports.len(),
        successes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn refs3() -> ReferenceSet {
        let amb = vec![10.0; 4];
        ReferenceSet::new(
            amb,
            &[
                vec![100.0, 10.0, 10.0, 10.0],
                vec![10.0, 100.0, 10.0, 10.0],
                vec![10.0, 10.0, 100.0, 10.0],
                vec![10.0, 10.0, 10.0, 100.0],
            ],
        )
        .unwrap()
    }

    fn frame(values: &[u16]) -> SensorFrame {
        SensorFrame {
            index: 0,
            values: values.to_vec(),
        }
    }

    #[test]
    fn similarity_conventions() {
        let amb = [5.0, 5.0, 5.0];
        let r = [9.0, 5.0, 7.0];
        assert!((similarity(&r, &r, &amb).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(similarity(&amb, &r, &amb).unwrap(), 0.0);
        let scaled: Vec<f64> = r.iter().zip(&amb).map(|(x, a)| a + 3.0 * (x - a) + 2.0).collect();
        assert!((similarity(&scaled, &r, &amb).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            similarity(&[1.0], &r, &amb),
            Err(DetectorError::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn classification() {
        let refs = refs3();
        let cfg = DetectorConfig {
            bits_per_region: 2,
            ..DetectorConfig::default()
        };
        assert_eq!(classify_frame(&frame(&[10, 10, 100, 10]), &refs, &cfg).unwrap(), Some(2));
        assert_eq!(classify_frame(&frame(&[10, 10, 10, 10]), &refs, &cfg).unwrap(), None);
        assert_eq!(classify_frame(&frame(&[50, 50, 10, 10]), &refs, &cfg).unwrap(), None);
        // Exact tie goes to the lower index.
        assert_eq!(classify_similarities(&[0.95, 0.95], 0.9), Some(0));
        assert_eq!(classify_similarities(&[0.9, 0.5], 0.9), None);
        assert!(ReferenceSet::new(vec![0.0; 4], &[vec![1.0; 4]]).is_err());
    }

    #[test]
    fn debounce_and_merge() {
        let l = |v: &[i32]| -> Vec<Option<usize>> { v.iter().map(|&x| (x >= 0).then_some(x as usize)).collect() };
        let runs = segment_labels(&l(&[0, 0, 0, -1, 0, 0, 0, 0, 1, 0, 0, 0, -1, -1, 2, 2]), 3);
        let valid: Vec<_> = runs.iter().filter_map(|r| r.label).collect();
        // The lone `1` is dropped and its neighbours re-joined; the trailing
        // `2` run is too short.
        assert_eq!(valid, vec![0, 0]);
        assert_eq!(runs[2].start, 4);
        assert_eq!(runs[2].len, 8);
        assert_eq!((runs[3].label, runs[3].start, runs[3].len), (None, 12, 4));
        let runs = segment_labels(&l(&[1, 1, 1, 2, 2, 2]), 3);
        assert_eq!(runs.len(), 2);
        assert!(segment_labels(&[], 3).is_empty());
        // A leading glitch goes to the first kept run.
        let runs = segment_labels(&l(&[4, 1, 1, 1, -1]), 3);
        assert_eq!((runs[0].label, runs[0].start, runs[0].len), (Some(1), 0, 4));
        assert_eq!(segment_labels(&l(&[4, 4, 1]), 3), vec![Run { label: None, start: 0, len: 3 }]);
    }

    #[test]
    fn segmentation_tiles_and_is_idempotent() {
        let l = |v: &[i32]| -> Vec<Option<usize>> { v.iter().map(|&x| (x >= 0).then_some(x as usize)).collect() };
        let labels = l(&[2, 0, 0, 0, 5, 0, 0, -1, 3, -1, -1, 1, 1, 1, 1, 2, 2, 1, 1, 1]);
        let runs = segment_labels(&labels, 3);
        let expanded = expand_runs(&runs);
        assert_eq!(expanded.len(), labels.len());
        assert_eq!(segment_labels(&expanded, 3), runs);
    }

    #[test]
    fn only_invalid_frames_separate_regions() {
        let l = |v: &[i32]| -> Vec<Option<usize>> { v.iter().map(|&x| (x >= 0).then_some(x as usize)).collect() };
        let spans = group_regions(&segment_labels(&l(&[-1, 1, 1, 1, 2, 2, 2, 2, -1, 1, 1, 1, -1]), 3));
        assert_eq!(spans.len(), 2);
        assert_eq!((spans[0].start, spans[0].len, spans[0].state, spans[0].uniform), (1, 7, 2, false));
        assert_eq!((spans[1].state, spans[1].uniform), (1, true));
        // Equal votes go to the lower state.
        let spans = group_regions(&segment_labels(&l(&[3, 3, 3, 1, 1, 1]), 3));
        assert_eq!(spans[0].state, 1);
    }

    #[test]
    fn report_and_metrics() {
        let refs = refs3();
        let cfg = DetectorConfig {
            expected_regions: 2,
            bits_per_region: 2,
            ..DetectorConfig::default()
        };
        let a = frame(&[100, 10, 10, 10]);
        let b = frame(&[10, 10, 10, 100]);
        let gap = frame(&[10, 10, 10, 10]);
        let trace = vec![a.clone(), a.clone(), a.clone(), gap.clone(), b.clone(), b.clone(), b];
        // States 0 and 3 are Gray words 00 and 10.
        let truth = vec![false, false, true, false];
        let rep = segment_and_decode(&trace, &refs, &cfg, Some(&truth)).unwrap();
        assert!(rep.detection_success);
        assert_eq!(rep.region_states, vec![0, 3]);
        assert_eq!(rep.ber, Some(0.0));
        let short = segment_and_decode(&trace[..5], &refs, &cfg, Some(&truth)).unwrap();
        assert!(!short.detection_success);
        assert!(short.bits.is_empty());

        let m = evaluate(&[rep.clone(), short], &[truth.clone(), truth.clone()]).unwrap();
        assert_eq!(m.detection_accuracy, 0.5);
        assert_eq!(m.extraction_accuracy, Some(1.0));
        assert_eq!(m.ber, Some(0.0));
        assert!(matches!(evaluate(&[], &[]), Err(DetectorError::EmptyInput)));
        assert!(evaluate(&[rep], &[]).is_err());
    }
}
