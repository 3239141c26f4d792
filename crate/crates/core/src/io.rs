//! Text formats: GF1 field dumps, history CSV and key=value summaries.
//!
//! A GF1 file starts with `GF1 <n> <components>` and then holds, for each
//! component, `n` lines of `n` values: line `i` lists nodes `(i, 0..n)`.
//! Values are written with 17 significant digits so that a round trip is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{FluxField, ScalarField, TorusGrid};
use crate::solvers::{HistoryRow, SolveReport};

/// A field loaded from a GF1 file.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Flux(FluxField),
}

impl Field {
    pub fn into_scalar(self) -> Result<ScalarField> {
        match self {
            Field::Scalar(f) => Ok(f),
            Field::Flux(_) => Err(Error::Parse("expected a scalar field, found a flux field".into())),
        }
    }

    pub fn into_flux(self) -> Result<FluxField> {
        match self {
            Field::Flux(f) => Ok(f),
            Field::Scalar(_) => Err(Error::Parse("expected a flux field, found a scalar field".into())),
        }
    }
}

fn write_block(out: &mut String, grid: TorusGrid, value: impl Fn(usize) -> f64) {
    let n = grid.n();
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", value(grid.index(i, j)));
        }
        out.push('\n');
    }
}

pub fn write_gf1_scalar(mut w: impl Write, field: &ScalarField) -> Result<()> {
    let grid = field.grid();
    let mut out = format!("GF1 {} 1\n", grid.n());
    write_block(&mut out, grid, |k| field[k]);
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_gf1_flux(mut w: impl Write, field: &FluxField) -> Result<()> {
    let grid = field.grid();
    let mut out = format!("GF1 {} 4\n", grid.n());
    for c in 0..4 {
        write_block(&mut out, grid, |k| field[k][c]);
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_gf1(r: impl BufRead) -> Result<Field> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty GF1 input".into()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "GF1" {
        return Err(Error::Parse(format!("bad GF1 header `{header}`")));
    }
    let n: usize = parts[1]
        .parse()
        .map_err(|_| Error::Parse(format!("bad grid size `{}`", parts[1])))?;
    let components: usize = parts[2]
        .parse()
        .map_err(|_| Error::Parse(format!("bad component count `{}`", parts[2])))?;
    if components != 1 && components != 4 {
        return Err(Error::Parse(format!("component count must be 1 or 4, got {components}")));
    }
    let grid = TorusGrid::new(n)?;
    let mut values = vec![0.0; grid.len() * components];
    let mut row = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= n * components {
            return Err(Error::Parse(format!("more than {} data rows", n * components)));
        }
        let (c, i) = (row / n, row % n);
        let mut count = 0;
        for (j, tok) in line.split_whitespace().enumerate() {
            if j >= n {
                return Err(Error::Parse(format!("row {} has more than {n} values", row + 1)));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad value `{tok}` in row {}", row + 1)))?;
            values[grid.index(i, j) * components + c] = v;
            count += 1;
        }
        if count != n {
            return Err(Error::Parse(format!("row {} has {count} values, expected {n}", row + 1)));
        }
        row += 1;
    }
    if row != n * components {
        return Err(Error::Parse(format!("found {row} data rows, expected {}", n * components)));
    }
    if components == 1 {
        Ok(Field::Scalar(ScalarField::from_vec(grid, values)?))
    } else {
        let flux = values
            .chunks_exact(4)
            .map(|c| [c[0], c[1], c[2], c[3]])
            .collect();
        Ok(Field::Flux(FluxField::from_vec(grid, flux)?))
    }
}

pub fn save_scalar(path: &Path, field: &ScalarField) -> Result<()> {
    write_gf1_scalar(fs::File::create(path)?, field)
}

pub fn save_flux(path: &Path, field: &FluxField) -> Result<()> {
    write_gf1_flux(fs::File::create(path)?, field)
}

pub fn load_gf1(path: &Path) -> Result<Field> {
    read_gf1(BufReader::new(fs::File::open(path)?))
}

pub const HISTORY_HEADER: &str = "iter,primal_change,res_hjb,res_fp,res_mass,res_compl,gap,lambda";

pub fn write_history_csv(mut w: impl Write, rows: &[HistoryRow]) -> Result<()> {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:.16e}",
            r.iter, r.primal_change, r.res_hjb, r.res_fp, r.res_mass, r.res_compl, r.gap, r.lambda
        );
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_history_csv(r: impl BufRead) -> Result<Vec<HistoryRow>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty history".into()))??;
    if header.trim() != HISTORY_HEADER {
        return Err(Error::Parse(format!("unexpected history header `{header}`")));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Parse(format!("history row {} has {} fields", lineno + 2, f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad number `{s}` in history row {}", lineno + 2)))
        };
        rows.push(HistoryRow {
            iter: f[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad iteration `{}`", f[0])))?,
            primal_change: num(f[1])?,
            res_hjb: num(f[2])?,
            res_fp: num(f[3])?,
            res_mass: num(f[4])?,
            res_compl: num(f[5])?,
            gap: num(f[6])?,
            lambda: num(f[7])?,
        });
    }
    Ok(rows)
}

/// Ordered `key=value` record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Parse(format!("summary has no `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::Parse(format!("summary `{key}` = `{raw}` is not a number")))
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    /// Run outcome fields shared by every solve.
    pub fn from_report(report: &SolveReport) -> Self {
        let mut s = Self::new();
        s.set("algorithm", &report.algorithm);
        s.set("n", report.m.grid().n());
        s.set("converged", report.converged);
        s.set("iterations", report.iterations);
        s.set("final_change", format!("{:e}", report.final_change));
        s.set("tol", format!("{:e}", report.tol));
        s.set("gamma", format!("{:e}", report.steps.gamma));
        s.set("tau", format!("{:e}", report.steps.tau));
        s.set("theta", report.steps.theta);
        s.set("xi_norm", format!("{:e}", report.xi_norm));
        s.set("steps_within_bound", report.steps_within_bound);
        s.set("empirical", report.empirical);
        s.set("linear_solver", &report.linear_solver);
        s.set("linear_solves", report.linear_solves);
        s.set("lambda", format!("{:.16e}", report.lambda));
        s.set("res_hjb", format!("{:e}", report.kkt.res_hjb));
        s.set("res_fp", format!("{:e}", report.kkt.res_fp));
        s.set("res_mass", format!("{:e}", report.kkt.res_mass));
        s.set("res_compl", format!("{:e}", report.kkt.res_compl));
        s.set("kkt_scale", format!("{:e}", report.kkt.scale));
        s.set("primal", format!("{:.16e}", report.primal_value));
        if let Some(d) = report.dual_value {
            s.set("dual", format!("{d:.16e}"));
        }
        if let Some(g) = report.gap {
            s.set("gap", format!("{g:e}"));
        }
        s.set("min_m", format!("{:.16e}", report.m.min()));
        s.set("max_m", format!("{:.16e}", report.m.max()));
        s
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut s = Self::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("summary line {} has no `=`", lineno + 1)))?;
            s.set(k.trim(), v.trim());
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(fs::File::open(path)?))
    }
}
