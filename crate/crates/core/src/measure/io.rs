//! Density CSV (`x,density`, one row per grid node, segments in order) with
//! a JSON sidecar holding the atoms and the node count of each segment.
//!
//! Floats are written with 17 significant digits, so a measure read back
//! is identical to the one written.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Atom, Segment, SpectralMeasure};
use crate::error::{Error, Result};

/// Shortest text that always parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub atoms: Vec<Atom>,
    /// Node count per segment, in CSV row order.
    #[serde(default)]
    pub segments: Vec<usize>,
    #[serde(default = "unit")]
    pub renormalization: f64,
}

fn unit() -> f64 {
    1.0
}

impl Sidecar {
    pub fn of(mu: &SpectralMeasure) -> Self {
        Sidecar {
            atoms: mu.atoms().to_vec(),
            segments: mu.segments().iter().map(Segment::len).collect(),
            renormalization: mu.renormalization(),
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_density_csv<W: Write>(mu: &SpectralMeasure, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "density"]).map_err(csv_error)?;
    for s in mu.segments() {
        for (x, d) in s.grid().iter().zip(s.density()) {
            w.write_record([format_float(*x), format_float(*d)]).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_measure<R: Read>(csv_in: R, sidecar: &Sidecar) -> Result<SpectralMeasure> {
    let mut rdr = csv::Reader::from_reader(csv_in);
    let headers = rdr.headers().map_err(csv_error)?;
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "density" {
        return Err(Error::Io(format!("expected header `x,density`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|t| t.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Io(format!("row {}: unreadable field {}", line + 1, k + 1)))
        };
        rows.push((parse(0)?, parse(1)?));
    }
    let counts = if sidecar.segments.is_empty() && !rows.is_empty() {
        vec![rows.len()]
    } else {
        sidecar.segments.clone()
    };
    if counts.iter().sum::<usize>() != rows.len() {
        return Err(Error::Io(format!(
            "sidecar lists {} nodes but the CSV has {} rows",
            counts.iter().sum::<usize>(),
            rows.len()
        )));
    }
    let mut segments = Vec::with_capacity(counts.len());
    let mut start = 0;
    for n in counts {
        let chunk = &rows[start..start + n];
        segments.push(Segment::new(
            chunk.iter().map(|r| r.0).collect(),
            chunk.iter().map(|r| r.1).collect(),
        )?);
        start += n;
    }
    let mut mu = SpectralMeasure::new(sidecar.atoms.clone(), segments)?;
    mu.set_renormalization(sidecar.renormalization);
    Ok(mu)
}

/// Sidecar path next to a density CSV: `foo.csv` → `foo.atoms.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("atoms.json")
}

pub fn save_measure(mu: &SpectralMeasure, csv_path: &Path) -> Result<()> {
    write_density_csv(mu, std::fs::File::create(csv_path)?)?;
    let side = serde_json::to_string_pretty(&Sidecar::of(mu))?;
    std::fs::write(sidecar_path(csv_path), side + "\n")?;
    Ok(())
}

pub fn load_measure(csv_path: &Path) -> Result<SpectralMeasure> {
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(csv_path))?)?;
    read_measure(std::fs::File::open(csv_path)?, &side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{make_law, LawSpec};
    use proptest::prelude::*;

    fn round_trip(mu: &SpectralMeasure) -> SpectralMeasure {
        let mut buf = Vec::new();
        write_density_csv(mu, &mut buf).unwrap();
        let side: Sidecar = serde_json::from_str(&serde_json::to_string(&Sidecar::of(mu)).unwrap()).unwrap();
        read_measure(buf.as_slice(), &side).unwrap()
    }

    #[test]
    fn catalog_laws_round_trip() {
        for spec in [
            LawSpec::Semicircle { sigma: 1.0 },
            LawSpec::MarchenkoPastur { ratio: 2.0 },
            LawSpec::TwoAtom { p: 0.5, x1: -1.0, x2: 1.0 },
            LawSpec::Arcsine { half_width: 1.5 },
        ] {
            let mu = make_law(&spec, 200).unwrap();
            assert_eq!(round_trip(&mu), mu);
        }
    }

    #[test]
    fn header_is_checked() {
        let side = Sidecar { atoms: vec![], segments: vec![2], renormalization: 1.0 };
        let bad = "a,b\n0,1\n1,1\n";
        assert!(read_measure(bad.as_bytes(), &side).is_err());
        let short = "x,density\n0,1\n";
        assert!(read_measure(short.as_bytes(), &side).is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = std::env::temp_dir().join(format!("freeprob-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mp.csv");
        let mu = make_law(&LawSpec::MarchenkoPastur { ratio: 0.5 }, 64).unwrap();
        save_measure(&mu, &path).unwrap();
        assert_eq!(load_measure(&path).unwrap(), mu);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #[test]
        fn random_measures_round_trip(
            xs in proptest::collection::btree_set(-1000i32..1000, 1..5),
            seg in proptest::collection::vec(0.01f64..10.0, 2..20),
            lo in -5.0f64..5.0,
            width in 0.1f64..3.0,
            atom_share in 0.0f64..0.9,
        ) {
            let n = seg.len();
            let grid: Vec<f64> = (0..n).map(|k| lo + width * k as f64 / (n - 1) as f64).collect();
            let s = Segment::new(grid, seg).unwrap();
            let s = s.scaled((1.0 - atom_share) / s.mass());
            let w = atom_share / xs.len() as f64;
            let atoms: Vec<Atom> = xs.iter().map(|&x| Atom::new(10.0 + x as f64 * 0.37, w)).collect();
            let mu = SpectralMeasure::new(atoms, vec![s]).unwrap();
            prop_assert_eq!(round_trip(&mu), mu);
        }

        #[test]
        fn floats_survive_formatting(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }
}
