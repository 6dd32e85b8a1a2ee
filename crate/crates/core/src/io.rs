//! Plot-ready CSV tables.
//!
//! Every table has a header row and uses `.` as decimal separator. Floats are
//! written in Rust's shortest round-trip form, so equal values always produce
//! equal bytes.

use std::path::Path;

use crate::branching::EmbeddedRun;
use crate::error::{Error, Result};
use crate::hierarchical::Snapshot;
use crate::loglaplace::CatalyzingFunction;
use crate::pde::GridField2D;

fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes `header` followed by `rows` to `path`.
pub fn write_table<P, I, R>(path: P, header: &[&str], rows: I) -> Result<()>
where
    P: AsRef<Path>,
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    w.flush()?;
    Ok(())
}

/// Grid function as `(x, value)` rows, with an `se` column when given.
pub fn write_function(path: impl AsRef<Path>, f: &CatalyzingFunction, se: Option<&[f64]>) -> Result<()> {
    if let Some(se) = se {
        if se.len() != f.values().len() {
            return Err(Error::Parameter("standard errors do not match the grid".into()));
        }
        let rows = f.nodes().zip(f.values()).zip(se).map(|((x, v), s)| vec![num(x), num(*v), num(*s)]);
        write_table(path, &["x", "value", "se"], rows)
    } else {
        let rows = f.nodes().zip(f.values()).map(|(x, v)| vec![num(x), num(*v)]);
        write_table(path, &["x", "value"], rows)
    }
}

/// Reads a table written by [`write_function`]; nodes must be the uniform
/// grid on [0,1].
pub fn read_function(path: impl AsRef<Path>) -> Result<CatalyzingFunction> {
    let mut r = csv::Reader::from_path(path)?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            let s = rec.get(i).ok_or_else(|| Error::Parse(format!("row has no column {i}")))?;
            s.trim().parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
        };
        xs.push(field(0)?);
        vs.push(field(1)?);
    }
    if xs.len() < 2 {
        return Err(Error::Parse("need at least two grid rows".into()));
    }
    let m = (xs.len() - 1) as f64;
    if let Some((i, x)) = xs.iter().enumerate().find(|(i, x)| (**x - *i as f64 / m).abs() > 1e-9) {
        return Err(Error::Parse(format!("row {i}: node {x} is off the uniform grid")));
    }
    CatalyzingFunction::new(vs)
}

pub fn write_field_2d(path: impl AsRef<Path>, field: &GridField2D) -> Result<()> {
    write_table(path, &["x1", "x2", "w11", "w12", "w22"], field.rows().map(|r| r.map(num)))
}

/// Residual history `(t, residual)` of a flow run.
pub fn write_history(path: impl AsRef<Path>, history: &[(f64, f64)]) -> Result<()> {
    write_table(path, &["t", "residual"], history.iter().map(|(t, r)| [num(*t), num(*r)]))
}

/// Site trajectories, one row per recorded time and site.
pub fn write_trajectory(path: impl AsRef<Path>, snapshots: &[Snapshot]) -> Result<()> {
    let rows = snapshots.iter().flat_map(|s| {
        s.state.sites.iter().enumerate().map(move |(i, x)| [num(s.t), i.to_string(), num(x[0]), num(x[1])])
    });
    write_table(path, &["t", "site_id", "x1", "x2"], rows)
}

/// Interaction chain as extracted (outermost level first).
pub fn write_chain(path: impl AsRef<Path>, chain: &[[f64; 2]]) -> Result<()> {
    let top = chain.len().saturating_sub(1);
    let rows = chain.iter().enumerate().map(|(i, x)| [(top - i).to_string(), num(x[0]), num(x[1])]);
    write_table(path, &["level", "x1", "x2"], rows)
}

/// Particle counts of embedded runs, one row per run and step, with
/// `⟨X,h⟩` for the particle system taken as the count itself.
pub fn write_embedded_runs(path: impl AsRef<Path>, runs: &[EmbeddedRun]) -> Result<()> {
    let rows = runs.iter().enumerate().flat_map(|(r, run)| {
        run.counts.iter().enumerate().map(move |(k, c)| [r.to_string(), k.to_string(), c.to_string(), c.to_string()])
    });
    write_table(path, &["replica", "step", "particle_count", "weighted_mass"], rows)
}

/// Histogram with bins `(-∞, e0), [e0, e1), ..., [e_last, ∞]`.
pub fn write_histogram(path: impl AsRef<Path>, edges: &[f64], counts: &[usize]) -> Result<()> {
    if counts.len() != edges.len() + 1 {
        return Err(Error::Parameter("histogram needs one more bin than edges".into()));
    }
    let lo = std::iter::once(f64::NEG_INFINITY).chain(edges.iter().copied());
    let hi = edges.iter().copied().chain(std::iter::once(f64::INFINITY));
    let rows = lo.zip(hi).zip(counts).map(|((a, b), c)| [num(a), num(b), c.to_string()]);
    write_table(path, &["lower", "upper", "count"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_round_trip() {
        let dir = std::env::temp_dir().join(format!("wfren-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.csv");
        let f = CatalyzingFunction::from_fn(7, |x| x * (1.0 - x) + 0.1).unwrap();
        write_function(&path, &f, None).unwrap();
        assert_eq!(read_function(&path).unwrap(), f);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,value\n0,0.1\n"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn off_grid_rows_rejected() {
        let dir = std::env::temp_dir().join(format!("wfren-io-bad-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.csv");
        std::fs::write(&path, "x,value\n0,1\n0.4,1\n1,1\n").unwrap();
        assert!(matches!(read_function(&path), Err(Error::Parse(_))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
