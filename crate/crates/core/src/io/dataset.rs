//! On-disk dataset layout and loading. A dataset root holds three parallel
//! directories matched by file stem:
//!
//! ```text
//! root/rgb/<stem>.ppm      color input
//! root/thermal/<stem>.pgm  thermal input
//! root/gt/<stem>.pgm       binary ground-truth mask
//! ```
//!
//! Scanning reports *every* incomplete stem at once rather than failing on
//! the first, so a broken dataset can be repaired in one pass.

use crate::error::{Error, Result};
use crate::io::pgm;
use crate::synth;
use crate::tensor::Tensor;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

/// Paths of one rgb/thermal/gt triple.
#[derive(Debug, Clone)]
pub struct SamplePaths {
    pub stem: String,
    pub rgb: PathBuf,
    pub thermal: PathBuf,
    pub gt: PathBuf,
}

/// One in-memory training pair: `rgb` is `[3, h, w]`, `thermal` and the
/// binary `gt` are `[1, h, w]`.
#[derive(Debug, Clone)]
pub struct Sample {
    pub rgb: Tensor,
    pub thermal: Tensor,
    pub gt: Tensor,
}

/// Lists the stems under `root`, sorted. Any stem missing one of its three
/// files becomes an indexed offender line in a single dataset error.
pub fn scan(root: &Path) -> Result<Vec<SamplePaths>> {
    let stems_of = |dir: &str, ext: &str| -> Result<BTreeSet<String>> {
        let path = root.join(dir);
        let mut stems = BTreeSet::new();
        let entries = std::fs::read_dir(&path)
            .map_err(|e| Error::format(format!("{}: {e}", path.display())))?;
        for entry in entries {
            let p = entry?.path();
            if p.extension().and_then(|s| s.to_str()) == Some(ext) {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    stems.insert(stem.to_string());
                }
            }
        }
        Ok(stems)
    };
    let rgb = stems_of("rgb", "ppm")?;
    let thermal = stems_of("thermal", "pgm")?;
    let gt = stems_of("gt", "pgm")?;

    let all: BTreeSet<&String> = rgb.iter().chain(&thermal).chain(&gt).collect();
    let mut offenders = Vec::new();
    let mut paths = Vec::new();
    for (i, stem) in all.iter().enumerate() {
        let mut missing = Vec::new();
        for (set, dir, ext) in [(&rgb, "rgb", "ppm"), (&thermal, "thermal", "pgm"), (&gt, "gt", "pgm")] {
            if !set.contains(*stem) {
                missing.push(format!("{dir}/{stem}.{ext}"));
            }
        }
        if missing.is_empty() {
            paths.push(SamplePaths {
                stem: (*stem).clone(),
                rgb: root.join("rgb").join(format!("{stem}.ppm")),
                thermal: root.join("thermal").join(format!("{stem}.pgm")),
                gt: root.join("gt").join(format!("{stem}.pgm")),
            });
        } else {
            offenders.push(format!("sample {i} ({stem}): missing {}", missing.join(", ")));
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Dataset(offenders));
    }
    if paths.is_empty() {
        return Err(Error::Dataset(vec![format!("{}: no samples found", root.display())]));
    }
    Ok(paths)
}

/// Reads one triple and validates it: rgb must be 3-channel, thermal
/// 1-channel of the same height and width, and gt is binarized at 1/2 (edge
/// antialiasing in hand-made masks must not leak fractional labels).
pub fn load_sample(paths: &SamplePaths) -> Result<Sample> {
    let rgb = pgm::read_image(&paths.rgb)?;
    let thermal = pgm::read_image(&paths.thermal)?;
    let mut gt = pgm::read_image(&paths.gt)?;
    if rgb.shape()[0] != 3 {
        return Err(Error::format(format!("{}: expected color image", paths.rgb.display())));
    }
    for (t, p) in [(&thermal, &paths.thermal), (&gt, &paths.gt)] {
        if t.shape()[0] != 1 {
            return Err(Error::format(format!("{}: expected grayscale image", p.display())));
        }
        if t.shape()[1..] != rgb.shape()[1..] {
            return Err(Error::format(format!(
                "{}: size {:?} does not match rgb size {:?}",
                p.display(),
                &t.shape()[1..],
                &rgb.shape()[1..]
            )));
        }
    }
    for v in gt.data_mut() {
        *v = if *v >= 0.5 { 1.0 } else { 0.0 };
    }
    Ok(Sample { rgb, thermal, gt })
}

/// Scans and eagerly loads a whole dataset in stem order.
pub fn load_dir(root: &Path) -> Result<Vec<Sample>> {
    scan(root)?.iter().map(load_sample).collect()
}

/// Materializes `count` deterministic synthetic pairs under `root` in the
/// standard layout; stems are `s000`, `s001`, ….
pub fn write_synthetic_dataset(root: &Path, count: usize, size: usize, seed: u64) -> Result<()> {
    for dir in ["rgb", "thermal", "gt"] {
        std::fs::create_dir_all(root.join(dir))?;
    }
    for i in 0..count {
        let s = synth::sample(size, seed.wrapping_add(i as u64));
        let stem = format!("s{i:03}");
        pgm::write_ppm(&root.join("rgb").join(format!("{stem}.ppm")), &s.rgb)?;
        pgm::write_pgm(&root.join("thermal").join(format!("{stem}.pgm")), &s.thermal)?;
        pgm::write_pgm(&root.join("gt").join(format!("{stem}.pgm")), &s.gt)?;
    }
    Ok(())
}
