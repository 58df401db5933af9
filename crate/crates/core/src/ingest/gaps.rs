use chrono::Duration;

use super::{IngestError, MeterSample, MeterSeries, CADENCE_SECONDS};

/// Fills runs of up to `max_gap_steps` missing intervals by linear
/// interpolation of P and Q independently. Longer runs are rejected.
pub fn fill_gaps(series: &MeterSeries, max_gap_steps: usize) -> Result<MeterSeries, IngestError> {
    let mut samples = Vec::with_capacity(series.samples.len());
    for (i, cur) in series.samples.iter().enumerate() {
        if let Some(prev) = i.checked_sub(1).map(|j| &series.samples[j]) {
            let steps = (cur.timestamp - prev.timestamp).num_seconds() / CADENCE_SECONDS;
            let missing = steps - 1;
            if missing > max_gap_steps as i64 {
                return Err(IngestError::GapTooLarge {
                    meter: series.meter_id.clone(),
                    start: prev.timestamp + Duration::seconds(CADENCE_SECONDS),
                    missing_steps: missing,
                });
            }
            for m in 1..steps {
                let frac = m as f64 / steps as f64;
                samples.push(MeterSample {
                    timestamp: prev.timestamp + Duration::seconds(CADENCE_SECONDS * m),
                    p_kw: prev.p_kw + (cur.p_kw - prev.p_kw) * frac,
                    q_kvar: prev.q_kvar + (cur.q_kvar - prev.q_kvar) * frac,
                });
            }
        }
        samples.push(*cur);
    }
    Ok(MeterSeries {
        samples,
        ..series.clone()
    })
}
