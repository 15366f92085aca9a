use serde::Serialize;

use packconv::{throughput_grid, MultiplierSpec, ThroughputCell};

use crate::{to_json, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// One grid row. Geometry columns are empty for infeasible cells.
#[derive(Debug, Serialize)]
struct Row {
    p: u32,
    q: u32,
    #[serde(rename = "S")]
    s: Option<u32>,
    #[serde(rename = "Gb")]
    gb: Option<u32>,
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "K")]
    k: Option<usize>,
    ops: u64,
}

impl From<&ThroughputCell> for Row {
    fn from(c: &ThroughputCell) -> Self {
        let g = c.geometry;
        Row {
            p: c.p,
            q: c.q,
            s: g.map(|g| g.slice_width),
            gb: g.map(|g| g.guard_bits),
            n: g.map(|g| g.n),
            k: g.map(|g| g.k),
            ops: c.ops,
        }
    }
}

pub fn run(
    bit_a: u32,
    bit_b: u32,
    pmax: u32,
    qmax: u32,
    format: Format,
) -> Result<String, CliError> {
    let spec = MultiplierSpec::new(bit_a, bit_b)?;
    let grid = throughput_grid(spec, pmax, qmax)?;
    let rows: Vec<Row> = grid.iter().map(Row::from).collect();
    match format {
        Format::Json => Ok(to_json(&rows)),
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            for row in &rows {
                w.serialize(row)
                    .map_err(|e| CliError::failure(e.to_string()))?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::failure(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}
