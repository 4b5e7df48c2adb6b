//! Text and JSON serialization.
//!
//! * Complex scalars use the token form `re+imj` (for example
//!   `0.5-0.5j`), parsed and written with `.` as the decimal separator
//!   regardless of locale. Bare reals (`1.5`) and bare imaginaries
//!   (`2j`) are accepted on input; output is always the full form.
//! * Matrices use a text block: a `rows cols` header line followed by
//!   the entries as whitespace-separated tokens, one row per line on
//!   output.
//! * State files prepend a `dims d_A d_B` header line to a matrix
//!   block; a single-column block is an amplitude vector, a square one
//!   a density matrix. Amplitude norms and traces may deviate from 1 by
//!   up to 1e-3 (for hand-truncated decimals) and are renormalized.
//! * Channels and generators are JSON objects whose matrices embed
//!   either as text blocks in strings or as nested `[[re, im], ...]`
//!   row arrays; both parse, arrays are canonical on output.
//! * Trajectories export as CSV with the exact header
//!   `t,tr,purity,lambda_minus,negativity`.
//! * Detection reports serialize as JSON objects with fields `method`,
//!   `witness`, `intervals` (as `[start, end, open_ended]` triples),
//!   and `trajectory_csv_path`.

use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::entanglement::EntanglementVerdict;
use crate::error::{Error, Result};
use crate::ftd::{EntanglementTrajectory, FtdInterval, FtdReport, Method};
use crate::lindblad::LindbladGenerator;
use crate::states::{DensityOperator, PureState, StateTolerance};
use crate::tensor::{vec_norm, BipartiteDims, ComplexMatrix, C64};

/// Norm/trace slack granted to hand-written state files before
/// renormalization.
pub const FILE_NORM_SLACK: f64 = 1e-3;

const FILE_STATE_TOLERANCE: StateTolerance = StateTolerance {
    hermiticity: 1e-6,
    trace: 1e-6,
    positivity: 1e-6,
};

fn clean(x: f64) -> f64 {
    // Collapses -0.0 so equal values format identically.
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Formats a complex number as `re+imj`.
pub fn format_complex(z: C64) -> String {
    let re = clean(z.re);
    let im = clean(z.im);
    if im < 0.0 {
        format!("{re}-{}j", -im)
    } else {
        format!("{re}+{im}j")
    }
}

/// Parses a `re+imj` token; also accepts bare reals and bare
/// imaginaries.
pub fn parse_complex(token: &str) -> Result<C64> {
    let t = token.trim();
    let bad = || Error::Parse(format!("invalid complex token {token:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix(['j', 'J']) else {
        return Ok(C64::new(t.parse::<f64>().map_err(|_| bad())?, 0.0));
    };
    let bytes = body.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        if (bytes[i] == b'+' || bytes[i] == b'-')
            && bytes[i - 1] != b'e'
            && bytes[i - 1] != b'E'
        {
            split = Some(i);
            break;
        }
    }
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().map_err(|_| bad())?;
            let sign = if bytes[i] == b'-' { -1.0 } else { 1.0 };
            let mag_str = &body[i + 1..];
            let mag = if mag_str.is_empty() {
                1.0
            } else {
                mag_str.parse::<f64>().map_err(|_| bad())?
            };
            Ok(C64::new(re, sign * mag))
        }
        None => {
            let im = match body {
                "" => 1.0,
                "-" => -1.0,
                "+" => 1.0,
                _ => body.parse::<f64>().map_err(|_| bad())?,
            };
            Ok(C64::new(0.0, im))
        }
    }
}

/// Writes a matrix in the text block form.
pub fn format_matrix(m: &ComplexMatrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format_complex(m.get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a matrix text block: a `rows cols` header, then exactly
/// rows*cols entry tokens (line breaks are not significant).
pub fn parse_matrix(text: &str) -> Result<ComplexMatrix> {
    let mut lines = text.lines();
    let header = loop {
        match lines.next() {
            Some(l) if !l.trim().is_empty() => break l,
            Some(_) => continue,
            None => return Err(Error::Parse("empty matrix block".into())),
        }
    };
    let mut hp = header.split_whitespace();
    let bad_header = || Error::Parse(format!("invalid matrix header {header:?}"));
    let rows: usize = hp.next().ok_or_else(bad_header)?.parse().map_err(|_| bad_header())?;
    let cols: usize = hp.next().ok_or_else(bad_header)?.parse().map_err(|_| bad_header())?;
    if hp.next().is_some() || rows == 0 || cols == 0 {
        return Err(bad_header());
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for line in lines {
        for tok in line.split_whitespace() {
            entries.push(parse_complex(tok)?);
        }
    }
    if entries.len() != rows * cols {
        return Err(Error::Parse(format!(
            "matrix body has {} entries, header promises {}",
            entries.len(),
            rows * cols
        )));
    }
    let m = ComplexMatrix::from_fn(rows, cols, |i, j| entries[i * cols + j]);
    m.check_finite()?;
    Ok(m)
}

/// Content of a state file.
#[derive(Debug, Clone)]
pub enum StateFile {
    Pure(PureState),
    Density(DensityOperator),
}

impl StateFile {
    pub fn into_density(self) -> DensityOperator {
        match self {
            StateFile::Pure(psi) => psi.density(),
            StateFile::Density(rho) => rho,
        }
    }
}

/// Writes a pure state as a dims header plus a one-column block.
pub fn format_pure_state(psi: &PureState) -> String {
    let dims = psi.dims();
    let mut out = format!("dims {} {}\n{} 1\n", dims.d_a(), dims.d_b(), dims.total());
    for a in psi.amplitudes() {
        out.push_str(&format_complex(*a));
        out.push('\n');
    }
    out
}

/// Writes a density operator as a dims header plus a square block.
pub fn format_density(rho: &DensityOperator) -> String {
    let dims = rho.dims();
    format!(
        "dims {} {}\n{}",
        dims.d_a(),
        dims.d_b(),
        format_matrix(rho.matrix())
    )
}

/// Parses a state file: `dims d_A d_B` header, then a matrix block.
pub fn parse_state(text: &str) -> Result<StateFile> {
    let mut consumed = 0;
    let mut header = None;
    for line in text.split_inclusive('\n') {
        consumed += line.len();
        if !line.trim().is_empty() {
            header = Some(line.trim().to_string());
            break;
        }
    }
    let header = header.ok_or_else(|| Error::Parse("empty state file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let bad_header = || Error::Parse(format!("invalid state header {header:?}"));
    if parts.len() != 3 || parts[0] != "dims" {
        return Err(bad_header());
    }
    let d_a: usize = parts[1].parse().map_err(|_| bad_header())?;
    let d_b: usize = parts[2].parse().map_err(|_| bad_header())?;
    let dims = BipartiteDims::new(d_a, d_b)?;
    let m = parse_matrix(&text[consumed..])?;
    let d = dims.total();
    if m.cols() == 1 && m.rows() == d {
        let amps: Vec<C64> = (0..d).map(|i| m.get(i, 0)).collect();
        let norm = vec_norm(&amps);
        if (norm - 1.0).abs() > FILE_NORM_SLACK {
            return Err(Error::Parse(format!(
                "state vector norm {norm} deviates from 1 beyond {FILE_NORM_SLACK:.0e}"
            )));
        }
        Ok(StateFile::Pure(PureState::from_unnormalized(&amps, dims)?))
    } else if m.rows() == d && m.cols() == d {
        let trace = m.trace();
        if (trace.re - 1.0).abs() > FILE_NORM_SLACK || trace.im.abs() > FILE_NORM_SLACK {
            return Err(Error::Parse(format!(
                "density trace {trace} deviates from 1 beyond {FILE_NORM_SLACK:.0e}"
            )));
        }
        let rescaled = m.scale_re(1.0 / trace.re).hermitize();
        Ok(StateFile::Density(DensityOperator::with_tolerance(
            rescaled,
            dims,
            FILE_STATE_TOLERANCE,
        )?))
    } else {
        Err(Error::DimensionMismatch(format!(
            "state block is {} x {}, dims {d_a} x {d_b} need a {d}-vector or {d} x {d} matrix",
            m.rows(),
            m.cols()
        )))
    }
}

/// A matrix inside a JSON document: a text block in a string, or
/// nested row arrays of `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixRepr {
    Text(String),
    Rows(Vec<Vec<[f64; 2]>>),
}

impl MatrixRepr {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        match self {
            MatrixRepr::Text(s) => parse_matrix(s),
            MatrixRepr::Rows(rows) => {
                let r = rows.len();
                if r == 0 {
                    return Err(Error::Parse("empty matrix array".into()));
                }
                let c = rows[0].len();
                if c == 0 || rows.iter().any(|row| row.len() != c) {
                    return Err(Error::Parse("ragged matrix array".into()));
                }
                let m =
                    ComplexMatrix::from_fn(r, c, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
                m.check_finite()?;
                Ok(m)
            }
        }
    }

    /// The canonical (nested array) representation.
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        MatrixRepr::Rows(
            (0..m.rows())
                .map(|i| {
                    (0..m.cols())
                        .map(|j| {
                            let z = m.get(i, j);
                            [clean(z.re), clean(z.im)]
                        })
                        .collect()
                })
                .collect(),
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    dims: [usize; 2],
    kraus: Vec<MatrixRepr>,
}

/// Serializes a channel; the channel must carry bipartite dims.
pub fn channel_to_json(ch: &Channel) -> Result<String> {
    let dims = ch.dims().ok_or_else(|| {
        Error::Precondition("channel carries no bipartite dims to serialize".into())
    })?;
    let file = ChannelFile {
        dims: [dims.d_a(), dims.d_b()],
        kraus: ch.kraus().iter().map(MatrixRepr::from_matrix).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn channel_from_json(text: &str) -> Result<Channel> {
    let file: ChannelFile = serde_json::from_str(text)?;
    let dims = BipartiteDims::new(file.dims[0], file.dims[1])?;
    let kraus = file
        .kraus
        .iter()
        .map(MatrixRepr::to_matrix)
        .collect::<Result<Vec<_>>>()?;
    Channel::new(kraus, Some(dims))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorFile {
    dims: [usize; 2],
    hamiltonian: MatrixRepr,
    jumps: Vec<MatrixRepr>,
}

pub fn generator_to_json(gen: &LindbladGenerator) -> Result<String> {
    let dims = gen.dims();
    let file = GeneratorFile {
        dims: [dims.d_a(), dims.d_b()],
        hamiltonian: MatrixRepr::from_matrix(gen.hamiltonian()),
        jumps: gen.jumps().iter().map(MatrixRepr::from_matrix).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn generator_from_json(text: &str) -> Result<LindbladGenerator> {
    let file: GeneratorFile = serde_json::from_str(text)?;
    let dims = BipartiteDims::new(file.dims[0], file.dims[1])?;
    let hamiltonian = file.hamiltonian.to_matrix()?;
    let jumps = file
        .jumps
        .iter()
        .map(MatrixRepr::to_matrix)
        .collect::<Result<Vec<_>>>()?;
    LindbladGenerator::new(hamiltonian, jumps, dims)
}

/// Exact CSV header of trajectory exports.
pub const TRAJECTORY_CSV_HEADER: &str = "t,tr,purity,lambda_minus,negativity";

/// Renders a trajectory as CSV, one row per sample.
pub fn trajectory_to_csv(traj: &EntanglementTrajectory) -> String {
    let mut out = String::from(TRAJECTORY_CSV_HEADER);
    out.push('\n');
    for i in 0..traj.len() {
        let v = &traj.verdicts[i];
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            clean(traj.times[i]),
            clean(traj.trace[i]),
            clean(traj.purity[i]),
            clean(v.lambda_minus),
            clean(v.negativity)
        ));
    }
    out
}

pub fn verdict_to_json(v: &EntanglementVerdict) -> String {
    serde_json::to_string_pretty(v).expect("verdict serializes")
}

pub fn verdict_from_json(text: &str) -> Result<EntanglementVerdict> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportFileRaw {
    method: String,
    witness: MatrixRepr,
    intervals: Vec<(f64, f64, bool)>,
    trajectory_csv_path: String,
}

/// A detection report read back from disk. The witness is kept as a
/// raw matrix because the bipartite split is not part of the file.
#[derive(Debug, Clone)]
pub struct ReportFile {
    pub method: Method,
    pub witness: ComplexMatrix,
    pub intervals: Vec<FtdInterval>,
    pub trajectory_csv_path: String,
}

/// Serializes a report; the trajectory itself is referenced by the
/// path its CSV was (or will be) written to.
pub fn report_to_json(report: &FtdReport, trajectory_csv_path: &str) -> String {
    let file = ReportFileRaw {
        method: report.method.as_str().to_string(),
        witness: MatrixRepr::from_matrix(report.witness_state.matrix()),
        intervals: report
            .intervals
            .iter()
            .map(|iv| (iv.start, iv.end, iv.open_ended))
            .collect(),
        trajectory_csv_path: trajectory_csv_path.to_string(),
    };
    serde_json::to_string_pretty(&file).expect("report serializes")
}

pub fn report_from_json(text: &str) -> Result<ReportFile> {
    let raw: ReportFileRaw = serde_json::from_str(text)?;
    let method = Method::parse(&raw.method)
        .ok_or_else(|| Error::Parse(format!("unknown report method {:?}", raw.method)))?;
    Ok(ReportFile {
        method,
        witness: raw.witness.to_matrix()?,
        intervals: raw
            .intervals
            .into_iter()
            .map(|(start, end, open_ended)| FtdInterval {
                start,
                end,
                open_ended,
            })
            .collect(),
        trajectory_csv_path: raw.trajectory_csv_path,
    })
}
