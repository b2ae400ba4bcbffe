//! CSV outputs. Every file opens with a `# ofdmrx <kind> v<N>` line naming
//! its column set; readers skip `#` lines.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use ofdmrx_core::chanest::Csi;
use ofdmrx_core::equalizer::EqualizedSymbol;
use ofdmrx_core::frame::active_indices;
use thiserror::Error;

use crate::run::MetricsReport;
use crate::sweep::SweepCell;

pub const POINTS_HEADER: &str = "# ofdmrx equalized-points v1";
pub const CSI_HEADER: &str = "# ofdmrx csi v1";
pub const METRICS_HEADER: &str = "# ofdmrx metrics v1";
pub const SWEEP_HEADER: &str = "# ofdmrx sweep v1";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<io::Error> for DumpError {
    fn from(source: io::Error) -> Self {
        DumpError::Io { path: String::new(), source }
    }
}

fn writer<W: Write>(mut out: W, header: &str, preamble: &[String]) -> Result<csv::Writer<W>, DumpError> {
    writeln!(out, "{header}")?;
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    Ok(csv::Writer::from_writer(out))
}

/// Rows (symbol_index, subcarrier_index, re, im, flags); flags in hex.
pub fn write_points<W: Write>(out: W, symbols: &[EqualizedSymbol]) -> Result<(), DumpError> {
    let mut w = writer(out, POINTS_HEADER, &[])?;
    w.write_record(["symbol_index", "subcarrier_index", "re", "im", "flags"])?;
    for (j, sym) in symbols.iter().enumerate() {
        let idx = ofdmrx_core::frame::data_indices(sym.format);
        for ((p, f), k) in sym.points.iter().zip(&sym.point_flags).zip(idx) {
            let z = p.to_complex();
            w.serialize((j, k, z.re, z.im, format!("{:#04x}", (*f | sym.flags).bits())))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows (subcarrier_index, re, im) over the active subcarriers.
pub fn write_csi<W: Write>(out: W, csi: &Csi) -> Result<(), DumpError> {
    let mut w = writer(out, CSI_HEADER, &[])?;
    w.write_record(["subcarrier_index", "re", "im"])?;
    for k in active_indices(csi.format) {
        let h = csi.at(k).to_complex();
        w.serialize((k, h.re, h.im))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows (metric, key, value). `key` is the symbol index of per-symbol EVM
/// and the constellation of SER rows. `config` (which holds the seed) is
/// embedded as comments.
pub fn write_metrics<W: Write>(out: W, report: &MetricsReport, config: &str) -> Result<(), DumpError> {
    let preamble: Vec<String> = config.lines().filter(|l| !l.trim().is_empty()).map(str::to_owned).collect();
    let mut w = writer(out, METRICS_HEADER, &preamble)?;
    w.write_record(["metric", "key", "value"])?;
    let mut row = |m: &str, k: String, v: f64| w.serialize((m, k, v));
    row("packets", String::new(), report.packets as f64)?;
    row("failed", String::new(), report.failed as f64)?;
    row("detect_rate", String::new(), report.detect_rate)?;
    row("evm_db", String::new(), report.evm_db)?;
    for (j, e) in report.evm_db_per_symbol.iter().enumerate() {
        row("evm_db", j.to_string(), *e)?;
    }
    for c in &report.ser {
        row("ser", c.modulation.to_string(), c.ratio())?;
    }
    row("residual_cfo_hz", String::new(), report.residual_cfo_hz)?;
    row("throughput_msps", String::new(), report.throughput_msps)?;
    w.flush()?;
    Ok(())
}

/// Rows (format, mcs, modulation, snr_db, trials, ser, evm_db, detect_rate).
pub fn write_sweep<W: Write>(out: W, cells: &[SweepCell], seed: u64) -> Result<(), DumpError> {
    let mut w = writer(out, SWEEP_HEADER, &[format!("seed = {seed}")])?;
    w.write_record(["format", "mcs", "modulation", "snr_db", "trials", "ser", "evm_db", "detect_rate"])?;
    for c in cells {
        w.serialize((
            c.format.to_string(),
            c.mcs,
            c.modulation.to_string(),
            c.snr_db,
            c.trials,
            c.ser,
            c.evm_db,
            c.detect_rate,
        ))?;
    }
    w.flush()?;
    Ok(())
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn to_file(path: &Path, f: impl FnOnce(io::BufWriter<File>) -> Result<(), DumpError>) -> Result<(), DumpError> {
    let file = File::create(path).map_err(|source| DumpError::Io { path: path.display().to_string(), source })?;
    f(io::BufWriter::new(file))
}

/// Parses a dump back into its records, checking the version line.
pub fn read_records(text: &str, header: &str) -> Result<Vec<csv::StringRecord>, DumpError> {
    if text.lines().next() != Some(header) {
        return Err(DumpError::Csv(csv::Error::from(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("expected version line {header:?}"),
        ))));
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(r.records().collect::<Result<_, _>>()?)
}
