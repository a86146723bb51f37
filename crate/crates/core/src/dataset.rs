//! Training corpus: channel gains paired with solver-optimal blocklengths.
//!
//! On disk a dataset is a CSV file with one row per solved frame,
//! `frame,g_1..g_N,m_1..m_N`, and a JSON sidecar (`<stem>.meta.json`)
//! carrying the format version, the generating config and seed, and the
//! normalization statistics the model is trained with.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSim;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::solver;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetOptions {
    pub frames: usize,
    pub seed: u64,
    /// A fresh topology and shadowing draw every this many frames.
    pub frames_per_topology: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions { frames: 5000, seed: 0, frames_per_topology: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub frame_index: u64,
    pub gains: Vec<f64>,
    pub m_opt: Vec<u32>,
}

/// Per-dimension z-score statistics of the gains in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionStats {
    pub mean_db: Vec<f64>,
    pub std_db: Vec<f64>,
}

impl ConditionStats {
    /// Statistics over `rows` of linear gains. Dimensions without spread
    /// get a unit std so normalization stays invertible.
    pub fn from_gains<'a>(rows: impl IntoIterator<Item = &'a [f64]>, n: usize) -> Result<Self> {
        let mut sum = vec![0.0; n];
        let mut sum_sq = vec![0.0; n];
        let mut count = 0usize;
        for row in rows {
            if row.len() != n {
                return Err(Error::Shape(format!("gain row of length {} for N = {n}", row.len())));
            }
            for (i, &g) in row.iter().enumerate() {
                let db = to_db(g)?;
                sum[i] += db;
                sum_sq[i] += db * db;
            }
            count += 1;
        }
        if count == 0 {
            return Err(Error::Domain("no gain rows to compute statistics from".into()));
        }
        let c = count as f64;
        let mean_db: Vec<f64> = sum.iter().map(|s| s / c).collect();
        let std_db = sum_sq
            .iter()
            .zip(&mean_db)
            .map(|(sq, mu)| {
                let var = (sq / c - mu * mu).max(0.0);
                let sd = var.sqrt();
                if sd > 1e-9 { sd } else { 1.0 }
            })
            .collect();
        Ok(ConditionStats { mean_db, std_db })
    }

    pub fn dim(&self) -> usize {
        self.mean_db.len()
    }

    pub fn normalize(&self, gains: &[f64]) -> Result<Vec<f64>> {
        if gains.len() != self.dim() {
            return Err(Error::Shape(format!("{} gains for a {}-node model", gains.len(), self.dim())));
        }
        gains
            .iter()
            .enumerate()
            .map(|(i, &g)| Ok((to_db(g)? - self.mean_db[i]) / self.std_db[i]))
            .collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, &v)| 10f64.powf((v * self.std_db[i] + self.mean_db[i]) / 10.0))
            .collect()
    }
}

fn to_db(g: f64) -> Result<f64> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::Domain(format!("channel gain must be positive and finite, got {g}")));
    }
    Ok(10.0 * g.log10())
}

/// Affine map between integer blocklengths in `[lo, hi]` and `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlocklengthCodec {
    pub lo: u32,
    pub hi: u32,
}

impl BlocklengthCodec {
    pub fn new(lo: u32, hi: u32) -> Result<Self> {
        if lo >= hi {
            return Err(Error::Domain(format!("blocklength encode range needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(BlocklengthCodec { lo, hi })
    }

    /// Global bounds from the config: 1 up to the MAD/cap limit.
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        Self::new(1, cfg.max_blocklength())
    }

    pub fn encode(&self, m: u32) -> f64 {
        let span = (self.hi - self.lo) as f64;
        2.0 * (m as f64 - self.lo as f64) / span - 1.0
    }

    /// Inverse map, rounding half up and clamping into range.
    pub fn decode(&self, y: f64) -> u32 {
        let span = (self.hi - self.lo) as f64;
        let v = self.lo as f64 + (y + 1.0) * span / 2.0;
        let r = (v + 0.5).floor();
        if r.is_nan() {
            return self.lo;
        }
        r.clamp(self.lo as f64, self.hi as f64) as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub n: usize,
    /// Frames requested; solved records may be fewer (see `skipped_frames`).
    pub frame_count: usize,
    pub seed: u64,
    pub frames_per_topology: usize,
    pub config: SystemConfig,
    pub condition: ConditionStats,
    pub codec: BlocklengthCodec,
    /// Frames whose allocation problem had no solution.
    pub skipped_frames: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<DatasetRecord>,
    pub meta: DatasetMeta,
}

/// Derive an independent stream seed for a sub-experiment.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulate `opts.frames` frames and solve each one.
///
/// Topologies are independent of each other (each gets a seed derived from
/// `opts.seed` and its index), so they are generated in parallel and
/// concatenated in order; the result does not depend on thread count.
pub fn generate_dataset(cfg: &SystemConfig, opts: &DatasetOptions) -> Result<Dataset> {
    cfg.validate()?;
    if opts.frames == 0 {
        return Err(Error::Domain("dataset needs at least one frame".into()));
    }
    if opts.frames_per_topology == 0 {
        return Err(Error::Domain("frames_per_topology must be >= 1".into()));
    }
    let codec = BlocklengthCodec::from_config(cfg)?;
    let n_topologies = opts.frames.div_ceil(opts.frames_per_topology);

    let chunks: Vec<(Vec<DatasetRecord>, Vec<u64>)> = (0..n_topologies)
        .into_par_iter()
        .map(|t| {
            let mut sim = ChannelSim::new(cfg, derive_seed(opts.seed, t as u64));
            let start = t * opts.frames_per_topology;
            let end = (start + opts.frames_per_topology).min(opts.frames);
            let mut records = Vec::with_capacity(end - start);
            let mut skipped = Vec::new();
            for frame in start..end {
                let gains = sim.next_gains();
                match solver::solve_network(&gains, cfg) {
                    Ok(alloc) => records.push(DatasetRecord { frame_index: frame as u64, gains, m_opt: alloc.blocklengths() }),
                    Err(Error::InfeasibleLink { .. } | Error::NetworkInfeasible { .. }) => skipped.push(frame as u64),
                    Err(e) => return Err(e),
                }
            }
            Ok((records, skipped))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(opts.frames);
    let mut skipped_frames = Vec::new();
    for (r, s) in chunks {
        records.extend(r);
        skipped_frames.extend(s);
    }
    if records.is_empty() {
        return Err(Error::Infeasible(format!("all {} frames were infeasible", opts.frames)));
    }
    let condition = ConditionStats::from_gains(records.iter().map(|r| r.gains.as_slice()), cfg.node_count)?;
    Ok(Dataset {
        records,
        meta: DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            n: cfg.node_count,
            frame_count: opts.frames,
            seed: opts.seed,
            frames_per_topology: opts.frames_per_topology,
            config: cfg.clone(),
            condition,
            codec,
            skipped_frames,
        },
    })
}

pub fn normalize_condition(gains: &[f64], meta: &DatasetMeta) -> Result<Vec<f64>> {
    meta.condition.normalize(gains)
}

pub fn encode_blocklength(m: u32, meta: &DatasetMeta) -> f64 {
    meta.codec.encode(m)
}

pub fn decode_blocklength(y: f64, meta: &DatasetMeta) -> u32 {
    meta.codec.decode(y)
}

/// `data.csv` → `data.meta.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let file_name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn gains_header(n: usize) -> String {
    let mut h = String::from("frame");
    for i in 1..=n {
        write!(h, ",g_{i}").unwrap();
    }
    h
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let n = data.meta.n;
    let mut out = gains_header(n);
    for i in 1..=n {
        write!(out, ",m_{i}").unwrap();
    }
    out.push('\n');
    for r in &data.records {
        if r.gains.len() != n || r.m_opt.len() != n {
            return Err(Error::Shape(format!("record {} does not have {n} nodes", r.frame_index)));
        }
        write!(out, "{}", r.frame_index).unwrap();
        for g in &r.gains {
            write!(out, ",{g:e}").unwrap();
        }
        for m in &r.m_opt {
            write!(out, ",{m}").unwrap();
        }
        out.push('\n');
    }
    let meta = serde_json::to_string_pretty(&data.meta).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, out.as_bytes())?;
    write_atomic(&sidecar_path(path), meta.as_bytes())
}

pub fn read_meta(path: &Path) -> Result<DatasetMeta> {
    let sidecar = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: sidecar.clone(),
        row: e.line(),
        msg: e.to_string(),
    })?;
    let version = value.get("format_version").and_then(|v| v.as_u64());
    if version != Some(DATASET_FORMAT_VERSION as u64) {
        return Err(Error::Format(format!(
            "{}: dataset format version {version:?}, expected {DATASET_FORMAT_VERSION}",
            sidecar.display()
        )));
    }
    serde_json::from_value(value).map_err(|e| Error::Parse { path: sidecar, row: 0, msg: e.to_string() })
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let meta = read_meta(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let n = meta.n;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse { path: path.into(), row: 1, msg: "empty file".into() })?;
    let width = header.split(',').count();
    if width != 1 + 2 * n {
        return Err(Error::Format(format!(
            "{}: header has {width} columns but the sidecar declares N = {n} ({} expected)",
            path.display(),
            1 + 2 * n
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        let bad = |what: &str, v: &str| Error::Parse { path: path.into(), row, msg: format!("bad {what} `{v}`") };
        let frame_index = fields[0].trim().parse().map_err(|_| bad("frame index", fields[0]))?;
        let gains = fields[1..=n]
            .iter()
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad("gain", v)))
            .collect::<Result<Vec<_>>>()?;
        let m_opt = fields[n + 1..]
            .iter()
            .map(|v| v.trim().parse::<u32>().map_err(|_| bad("blocklength", v)))
            .collect::<Result<Vec<_>>>()?;
        records.push(DatasetRecord { frame_index, gains, m_opt });
    }
    Ok(Dataset { records, meta })
}

/// Per-frame gain vectors from a CSV whose header names `g_*` columns;
/// any other columns except `frame` are ignored.
pub fn read_gains_csv(path: &Path) -> Result<Vec<(u64, Vec<f64>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse { path: path.into(), row: 1, msg: "empty file".into() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let frame_col = cols.iter().position(|&c| c == "frame");
    let gain_cols: Vec<usize> = cols.iter().enumerate().filter(|(_, c)| c.starts_with("g_")).map(|(i, _)| i).collect();
    if gain_cols.is_empty() {
        return Err(Error::Parse { path: path.into(), row: 1, msg: "no g_* columns in header".into() });
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let row = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                path: path.into(),
                row,
                msg: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        let frame = match frame_col {
            Some(c) => fields[c].parse().map_err(|_| Error::Parse { path: path.into(), row, msg: format!("bad frame `{}`", fields[c]) })?,
            None => (row - 2) as u64,
        };
        let gains = gain_cols
            .iter()
            .map(|&c| fields[c].parse::<f64>().map_err(|_| Error::Parse { path: path.into(), row, msg: format!("bad gain `{}`", fields[c]) }))
            .collect::<Result<Vec<_>>>()?;
        out.push((frame, gains));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_cfg() -> SystemConfig {
        SystemConfig { node_count: 3, ..SystemConfig::default() }
    }

    fn meta_with(stats: ConditionStats, codec: BlocklengthCodec) -> DatasetMeta {
        DatasetMeta {
            format_version: DATASET_FORMAT_VERSION,
            n: stats.dim(),
            frame_count: 1,
            seed: 0,
            frames_per_topology: 1,
            config: SystemConfig::default(),
            condition: stats,
            codec,
            skipped_frames: vec![],
        }
    }

    #[test]
    fn codec_endpoints_and_midpoint() {
        let c = BlocklengthCodec::new(1, 101).unwrap();
        assert_eq!(c.decode(-1.0), 1);
        assert_eq!(c.decode(1.0), 101);
        assert_eq!(c.encode(51), 0.0);
        assert_eq!(c.decode(-7.0), 1);
        assert_eq!(c.decode(3.0), 101);
        assert_eq!(c.decode(f64::NAN), 1);
        // exactly half a step above 50 rounds up
        assert_eq!(c.decode(c.encode(50) + 0.01), 51);
        assert!(BlocklengthCodec::new(5, 5).is_err());
    }

    #[test]
    fn codec_roundtrips_every_integer() {
        let c = BlocklengthCodec::new(1, 100).unwrap();
        for m in 1..=100 {
            assert_eq!(c.decode(c.encode(m)), m);
            assert!((-1.0..=1.0).contains(&c.encode(m)));
        }
    }

    #[test]
    fn normalization_examples() {
        let stats = ConditionStats { mean_db: vec![-90.0, -80.0], std_db: vec![5.0, 2.0] };
        let meta = meta_with(stats, BlocklengthCodec::new(1, 100).unwrap());
        let at_mean = normalize_condition(&[1e-9, 1e-8], &meta).unwrap();
        assert!(at_mean.iter().all(|z| z.abs() < 1e-12));
        let one_up = normalize_condition(&[10f64.powf(-8.5), 10f64.powf(-7.8)], &meta).unwrap();
        assert!(one_up.iter().all(|z| (z - 1.0).abs() < 1e-12), "{one_up:?}");
        assert!(normalize_condition(&[0.0, 1e-8], &meta).is_err());
        assert!(normalize_condition(&[1e-8], &meta).is_err());
    }

    proptest! {
        #[test]
        fn normalize_roundtrip(db in proptest::collection::vec(-150.0f64..-20.0, 4)) {
            let stats = ConditionStats { mean_db: vec![-90.0, -85.0, -70.0, -100.0], std_db: vec![6.0, 3.0, 9.0, 1.5] };
            let gains: Vec<f64> = db.iter().map(|d| 10f64.powf(d / 10.0)).collect();
            let back = stats.denormalize(&stats.normalize(&gains).unwrap());
            for (a, b) in gains.iter().zip(&back) {
                prop_assert!((a / b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_frame_dataset_reverifies() {
        let cfg = small_cfg();
        let opts = DatasetOptions { frames: 1, seed: 3, frames_per_topology: 10 };
        let data = generate_dataset(&cfg, &opts).unwrap();
        assert_eq!(data.records.len() + data.meta.skipped_frames.len(), 1);
        for r in &data.records {
            let alloc = solver::solve_network(&r.gains, &cfg).unwrap();
            assert_eq!(alloc.blocklengths(), r.m_opt);
        }
        assert!(data.meta.condition.std_db.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn generation_is_deterministic_and_reproducible() {
        let cfg = small_cfg();
        let opts = DatasetOptions { frames: 120, seed: 8, frames_per_topology: 25 };
        let a = generate_dataset(&cfg, &opts).unwrap();
        let b = generate_dataset(&cfg, &opts).unwrap();
        assert_eq!(a, b);
        for r in &a.records {
            let (m_lo, _) = (a.meta.codec.lo, a.meta.codec.hi);
            assert!(r.m_opt.iter().all(|&m| m >= m_lo && m <= cfg.max_blocklength()));
            assert_eq!(solver::solve_network(&r.gains, &cfg).unwrap().blocklengths(), r.m_opt);
        }
        let recomputed = ConditionStats::from_gains(a.records.iter().map(|r| r.gains.as_slice()), 3).unwrap();
        for (x, y) in recomputed.mean_db.iter().chain(&recomputed.std_db).zip(a.meta.condition.mean_db.iter().chain(&a.meta.condition.std_db)) {
            assert!((x / y - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn file_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let cfg = small_cfg();
        let data = generate_dataset(&cfg, &DatasetOptions { frames: 30, seed: 1, frames_per_topology: 10 }).unwrap();
        write_dataset(&path, &data).unwrap();
        assert!(sidecar_path(&path).ends_with("data.meta.json"));
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, data);

        let bytes = std::fs::read(&path).unwrap();
        write_dataset(&path, &data).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);

        // truncate the third data row
        let text = String::from_utf8(bytes.clone()).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let cut = lines[3].rfind(',').unwrap();
        lines[3].truncate(cut);
        std::fs::write(&path, lines.join("\n")).unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 4, .. }), "{err}");

        // sidecar N disagrees with the rows
        std::fs::write(&path, &bytes).unwrap();
        let mut meta = data.meta.clone();
        meta.n = 4;
        std::fs::write(sidecar_path(&path), serde_json::to_string(&meta).unwrap()).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));

        // version mismatch
        meta.n = 3;
        meta.format_version = 99;
        std::fs::write(sidecar_path(&path), serde_json::to_string(&meta).unwrap()).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
    }

    #[test]
    fn gains_reader_ignores_blocklength_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        std::fs::write(&path, "frame,g_1,g_2,m_1,m_2\n7,1e-9,2e-9,5,6\n").unwrap();
        let rows = read_gains_csv(&path).unwrap();
        assert_eq!(rows, vec![(7, vec![1e-9, 2e-9])]);
    }

    #[test]
    fn seed_derivation_separates_streams() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }
}
