//! SER/EVM waterfall over (MCS, SNR).
//!
//! Every cell replays the same trial seeds, so cells differ only in MCS and
//! noise level (common random numbers).

use ofdmrx_core::frame::Format;
use ofdmrx_core::txref::Modulation;

use crate::config::RunConfig;
use crate::run::{run_trials, RunError};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub format: Format,
    pub mcs: u8,
    pub modulation: Modulation,
    pub snr_db: f64,
    pub trials: usize,
    pub ser: f64,
    pub evm_db: f64,
    pub detect_rate: f64,
}

/// Runs `base.trials` trials per cell; rows are MCS-major, SNR ascending.
pub fn sweep(base: &RunConfig, mcs: &[u8], snr_db: &[f64]) -> Result<Vec<SweepCell>, RunError> {
    let mut snr = snr_db.to_vec();
    snr.sort_by(f64::total_cmp);
    let mut cells = Vec::with_capacity(mcs.len() * snr.len());
    for &m in mcs {
        for &s in &snr {
            let mut cfg = base.clone();
            cfg.packet.mcs = m;
            cfg.channel.snr_db = s;
            let modulation = cfg.packet_config()?.modulation();
            let r = run_trials(&cfg)?;
            cells.push(SweepCell {
                format: cfg.packet.format,
                mcs: m,
                modulation,
                snr_db: s,
                trials: r.packets,
                ser: r.ser_of(modulation).unwrap_or(0.0),
                evm_db: r.evm_db,
                detect_rate: r.detect_rate,
            });
        }
    }
    Ok(cells)
}

/// Cells of one MCS in SNR order.
pub fn curve(cells: &[SweepCell], mcs: u8) -> Vec<&SweepCell> {
    cells.iter().filter(|c| c.mcs == mcs).collect()
}

/// Adjacent SNR steps along which SER increases.
pub fn inversions(curve: &[&SweepCell]) -> usize {
    curve.windows(2).filter(|w| w[1].ser > w[0].ser).count()
}

/// Lowest SNR at which SER reaches `target`, interpolated linearly between
/// the bracketing grid points. `None` if the curve never gets there.
pub fn required_snr(curve: &[&SweepCell], target: f64) -> Option<f64> {
    let i = curve.iter().position(|c| c.ser <= target)?;
    if i == 0 {
        return Some(curve[0].snr_db);
    }
    let (a, b) = (curve[i - 1], curve[i]);
    Some(a.snr_db + (a.ser - target) / (a.ser - b.ser) * (b.snr_db - a.snr_db))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(snr_db: f64, ser: f64) -> SweepCell {
        SweepCell {
            format: Format::Ht,
            mcs: 0,
            modulation: Modulation::Bpsk,
            snr_db,
            trials: 1,
            ser,
            evm_db: 0.0,
            detect_rate: 1.0,
        }
    }

    #[test]
    fn interpolates_required_snr() {
        let c = [cell(0.0, 0.3), cell(2.0, 0.1), cell(4.0, 0.06), cell(6.0, 0.0)];
        let r: Vec<&SweepCell> = c.iter().collect();
        assert!((required_snr(&r, 0.08).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(required_snr(&r, 0.5), Some(0.0));
        assert_eq!(required_snr(&r[..2], 0.01), None);
        assert_eq!(inversions(&r), 0);
        let bumpy = [cell(0.0, 0.3), cell(2.0, 0.31), cell(4.0, 0.0)];
        assert_eq!(inversions(&bumpy.iter().collect::<Vec<_>>()), 1);
    }

    #[test]
    fn infinite_snr_row_is_error_free_and_sweep_is_deterministic() {
        let mut base = RunConfig::default();
        base.trials = 3;
        base.packet.nof_ofdm_sym = 2;
        let snr = [f64::INFINITY, 5.0];
        let cells = sweep(&base, &[0, 3, 7], &snr).unwrap();
        assert_eq!(cells.len(), 6);
        for c in cells.iter().filter(|c| c.snr_db.is_infinite()) {
            assert_eq!(c.ser, 0.0, "mcs {}", c.mcs);
        }
        assert_eq!(cells[0].snr_db, 5.0);
        assert_eq!(sweep(&base, &[0, 3, 7], &snr).unwrap(), cells);
    }
}
