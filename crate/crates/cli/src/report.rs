//! Plot-ready outputs: per-step metrics CSV, raw entropy CSV and graymaps.

use haltonmask_core::simulate::{EntropyMap, SamplingTrace};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{CliError, Result};

pub const METRICS_HEADER: [&str; 7] = [
    "step",
    "scheduler",
    "entropy_sum_nats",
    "intra_min_nn",
    "intra_mean_nn",
    "mean_dist_revealed",
    "kl_step_nats",
];

pub const ENTROPY_HEADER: [&str; 5] = ["step", "row", "col", "revealed", "entropy_nats"];

/// Gray level reserved for revealed cells.
pub const REVEALED_GRAY: u8 = 255;

/// Shortest text that parses back to the same value; empty when not
/// applicable.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_error(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("csv encoding failed: {e}"))
}

/// Accumulates metrics rows for several schedulers into one CSV.
pub struct MetricsCsv {
    writer: csv::Writer<Vec<u8>>,
}

impl MetricsCsv {
    pub fn new() -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(METRICS_HEADER).map_err(csv_error)?;
        Ok(MetricsCsv { writer })
    }

    /// One row per step of `trace`; `kl` holds one value per step in exact
    /// mode.
    pub fn push_trace(
        &mut self,
        scheduler: &str,
        trace: &SamplingTrace,
        kl: Option<&[f64]>,
    ) -> Result<()> {
        for (i, step) in trace.steps.iter().enumerate() {
            let m = &step.metrics;
            self.writer
                .write_record([
                    m.step_index.to_string(),
                    scheduler.to_string(),
                    num(m.entropy_sum),
                    num(m.intra_step_min_nn_distance),
                    num(m.intra_step_mean_nn_distance),
                    opt(m.mean_distance_to_revealed),
                    opt(kl.and_then(|k| k.get(i).copied())),
                ])
                .map_err(csv_error)?;
        }
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<u8>> {
        self.writer.into_inner().map_err(csv_error)
    }
}

/// Raw entropies of every frame, `frames[s - 1]` being the state after
/// step `s`.
pub fn entropy_csv(frames: &[EntropyMap]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ENTROPY_HEADER).map_err(csv_error)?;
    for (s, frame) in frames.iter().enumerate() {
        for c in frame.grid().cells() {
            let h = frame.get(c);
            w.write_record([
                (s + 1).to_string(),
                c.row.to_string(),
                c.col.to_string(),
                u8::from(h.is_none()).to_string(),
                opt(h),
            ])
            .map_err(csv_error)?;
        }
    }
    w.into_inner().map_err(csv_error)
}

/// Entropy mapped linearly onto 0..=254, with 254 at `ln vocab`.
pub fn gray_level(entropy: f64, vocab: usize) -> u8 {
    let max = (vocab as f64).ln();
    (254.0 * entropy / max).round().clamp(0.0, 254.0) as u8
}

/// Binary graymap of one frame: darker is more certain, revealed cells at
/// [`REVEALED_GRAY`].
pub fn frame_pgm(frame: &EntropyMap, vocab: usize) -> Result<Vec<u8>> {
    let grid = frame.grid();
    let pixels: Vec<u8> = frame
        .values()
        .iter()
        .map(|h| h.map_or(REVEALED_GRAY, |h| gray_level(h, vocab)))
        .collect();
    let dim =
        |n: usize| u32::try_from(n).map_err(|_| CliError::config("grid too large for an image"));
    let mut out = Vec::new();
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(
            &pixels,
            dim(grid.width())?,
            dim(grid.height())?,
            ExtendedColorType::L8,
        )
        .map_err(|e| CliError::Internal(format!("graymap encoding failed: {e}")))?;
    Ok(out)
}

/// File name of frame `step` out of `steps`, zero padded so names sort.
pub fn frame_name(step: usize, steps: usize) -> String {
    let width = steps.to_string().len().max(3);
    format!("entropy_{step:0width$}.pgm")
}
