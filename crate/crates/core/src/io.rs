//! File formats: TOML configs, the binary demonstration dataset and CSV exports.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expert::{SupervisionTuple, RECORD_LEN};
use crate::harness::{RunLog, ScenarioConfig, SuiteConfig, SummaryRow};
use crate::policy::DEFAULT_HORIZON;
use crate::scenario::{EnvParams, Task};
use crate::verifier::{VerificationReport, VerifyConfig};

pub const DATASET_MAGIC: [u8; 4] = *b"FADM";
pub const DATASET_VERSION: u32 = 1;

pub fn file_error(path: &Path, source: std::io::Error) -> Error {
    Error::File { path: path.display().to_string(), source }
}

/// Parses TOML text. Errors carry the line and column of the offending field.
pub fn parse_toml<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::ConfigParse(format!("{origin}: {}", e.to_string().trim_end())))
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    parse_toml(&text, &path.display().to_string())
}

/// Settings for demonstration generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    pub task: Task,
    #[serde(default)]
    pub env: EnvParams,
    /// Action-chunk horizon recorded in the dataset header.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_count() -> usize {
    1
}

impl DemoConfig {
    pub fn new(task: Task) -> Self {
        Self { task, env: EnvParams::default(), horizon: DEFAULT_HORIZON, seed: 0, count: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("count must be >= 1".into()));
        }
        if self.horizon == 0 || self.horizon > u32::MAX as usize {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        self.env.validate()
    }
}

pub fn load_demo_config(path: &Path) -> Result<DemoConfig> {
    let cfg: DemoConfig = read_toml(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = read_toml(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_suite(path: &Path) -> Result<SuiteConfig> {
    let cfg: SuiteConfig = read_toml(path)?;
    cfg.scenario.validate()?;
    for ev in &cfg.disturbances {
        ev.validate()?;
    }
    Ok(cfg)
}

pub fn load_verify_config(path: &Path) -> Result<VerifyConfig> {
    let cfg: VerifyConfig = read_toml(path)?;
    cfg.grid()?;
    Ok(cfg)
}

/// Demonstrations for one task.
///
/// Layout, all little-endian: magic `FADM`, `u32` version, `u32` task code,
/// `u32` horizon, `u64` episode count, `u64` tuple count, one `u64` length
/// per episode, then `tuple count` records of 14 `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub task: Task,
    pub horizon: usize,
    pub episodes: Vec<Vec<SupervisionTuple>>,
}

impl DatasetFile {
    pub fn tuple_count(&self) -> usize {
        self.episodes.iter().map(Vec::len).sum()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let horizon = u32::try_from(self.horizon)
            .map_err(|_| Error::Dataset(format!("horizon {} does not fit the header", self.horizon)))?;
        w.write_all(&DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&self.task.code().to_le_bytes())?;
        w.write_all(&horizon.to_le_bytes())?;
        w.write_all(&(self.episodes.len() as u64).to_le_bytes())?;
        w.write_all(&(self.tuple_count() as u64).to_le_bytes())?;
        for ep in &self.episodes {
            w.write_all(&(ep.len() as u64).to_le_bytes())?;
        }
        for t in self.episodes.iter().flatten() {
            for v in t.to_record() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic, "magic")?;
        if magic != DATASET_MAGIC {
            return Err(Error::Dataset("not a dataset file (bad magic)".into()));
        }
        let version = read_u32(r, "version")?;
        if version != DATASET_VERSION {
            return Err(Error::Dataset(format!("unsupported version {version}")));
        }
        let code = read_u32(r, "task code")?;
        let task = Task::from_code(code).ok_or_else(|| Error::Dataset(format!("unknown task code {code}")))?;
        let horizon = read_u32(r, "horizon")? as usize;
        let n_eps = read_u64(r, "episode count")?;
        let n_tuples = read_u64(r, "tuple count")?;
        let mut lengths = Vec::new();
        for _ in 0..n_eps {
            lengths.push(read_u64(r, "episode length")?);
        }
        if lengths.iter().try_fold(0u64, |a, &l| a.checked_add(l)) != Some(n_tuples) {
            return Err(Error::Dataset("episode lengths do not sum to the tuple count".into()));
        }
        let mut episodes = Vec::with_capacity(lengths.len());
        let mut buf = [0u8; 8 * RECORD_LEN];
        for len in lengths {
            let mut ep = Vec::with_capacity(len as usize);
            for _ in 0..len {
                read_exact(r, &mut buf, "record")?;
                let mut rec = [0.0; RECORD_LEN];
                for (v, chunk) in rec.iter_mut().zip(buf.chunks_exact(8)) {
                    *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
                }
                ep.push(SupervisionTuple::from_record(&rec)?);
            }
            episodes.push(ep);
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Dataset("trailing bytes after the last record".into()));
        }
        Ok(Self { task, horizon, episodes })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| file_error(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| file_error(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| file_error(path, e))?;
        Self::read_from(&mut BufReader::new(f))
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Dataset(format!("truncated file while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

pub const TRACE_HEADER: [&str; 19] = [
    "t",
    "x",
    "y",
    "z",
    "vx",
    "vy",
    "vz",
    "fx",
    "fy",
    "fz",
    "fcmd_x",
    "fcmd_y",
    "fcmd_z",
    "k1",
    "k2",
    "k3",
    "phase",
    "contact",
    "disturbed",
];

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// One row per controller tick. Forces are the sensed values.
pub fn write_trace<W: Write>(log: &RunLog, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for r in &log.records {
        let mut row: Vec<String> = Vec::with_capacity(TRACE_HEADER.len());
        row.push(r.t.to_string());
        for v in [r.x_r, r.v_r, r.f_ext, r.f_cmd] {
            row.extend(v.to_array().iter().map(f64::to_string));
        }
        row.extend(r.k_eig.iter().map(f64::to_string));
        row.push(r.phase.name().to_string());
        row.push(flag(r.contact).to_string());
        row.push(flag(r.disturbed).to_string());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub const REPORT_HEADER: [&str; 5] = ["proposition", "params", "measured", "bound", "pass"];

/// One row per report; `measured` and `bound` come from its tightest check.
pub fn write_report<W: Write>(reports: &[VerificationReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(REPORT_HEADER)?;
    for r in reports {
        let (measured, bound) = match r.worst() {
            Some(c) => (format!("{:e}", c.measured), format!("{:e}", c.bound)),
            None => (String::new(), String::new()),
        };
        let pass = if r.skipped { "skipped" } else { flag(r.pass) };
        out.write_record([r.proposition.id(), &r.params, &measured, &bound, pass])?;
    }
    out.flush()?;
    Ok(())
}

pub const SUMMARY_HEADER: [&str; 8] =
    ["task", "mode", "disturbed", "count", "success_rate", "safety_stop_rate", "mean_metric", "mean_peak_force"];

pub fn write_summary<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SUMMARY_HEADER)?;
    for r in rows {
        out.write_record([
            r.task.name().to_string(),
            r.mode.name().to_string(),
            flag(r.disturbed).to_string(),
            r.count.to_string(),
            r.success_rate.to_string(),
            r.safety_stop_rate.to_string(),
            r.mean_metric.to_string(),
            r.mean_peak_force.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert::sample_demo;

    #[test]
    fn dataset_round_trip_in_memory() {
        let d = sample_demo(Task::WW, &EnvParams::default(), 1, 0).unwrap();
        let ds = DatasetFile { task: Task::WW, horizon: 16, episodes: vec![d.tuples.clone(), d.tuples[..5].to_vec()] };
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 12 + 16 + 16 + ds.tuple_count() * RECORD_LEN * 8);
        assert_eq!(DatasetFile::read_from(&mut buf.as_slice()).unwrap(), ds);

        buf.truncate(buf.len() - 3);
        assert!(matches!(DatasetFile::read_from(&mut buf.as_slice()), Err(Error::Dataset(_))));
    }

    #[test]
    fn unknown_task_reports_line() {
        let err = parse_toml::<ScenarioConfig>("seed = 3\ntask = \"XX\"\n", "s.toml").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::ConfigParse(_)));
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(parse_toml::<ScenarioConfig>("task = \"WW\"\nspeed = 2\n", "s.toml").is_err());
    }

    #[test]
    fn empty_summary_is_header_only() {
        let mut buf = Vec::new();
        write_summary(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }
}
