use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::SparseError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub generator: String,
}

/// Design matrix (row-major) and responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    d: usize,
    pub provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self, SparseError> {
        let n = rows.len();
        if n == 0 || y.len() != n {
            return Err(SparseError::Empty);
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(SparseError::Empty);
        }
        let mut x = Vec::with_capacity(n * d);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != d {
                return Err(SparseError::Ragged { row: i, expected: d, got: r.len() });
            }
            x.extend(r);
        }
        Self::from_flat(x, y, d)
    }

    /// `x` holds `n * d` values row by row.
    pub fn from_flat(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Self, SparseError> {
        let n = y.len();
        if n == 0 || d == 0 {
            return Err(SparseError::Empty);
        }
        if x.len() != n * d {
            return Err(SparseError::Dimension(format!("{} values for {n}x{d}", x.len())));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite { row: k / d, col: k % d });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(SparseError::NonFinite { row: i, col: d });
        }
        Ok(Self { x, y, n, d, provenance: None })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Copy with columns reordered so that new column `j` is old column `perm[j]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let mut x = Vec::with_capacity(self.x.len());
        for i in 0..self.n {
            let r = self.row(i);
            x.extend(perm.iter().map(|&j| r[j]));
        }
        Self { x, y: self.y.clone(), n: self.n, d: self.d, provenance: self.provenance.clone() }
    }

    /// Summary statistics of the rows in `rows`.
    pub fn gram_of(&self, rows: impl IntoIterator<Item = usize>) -> Gram {
        let d = self.d;
        let mut g = Gram::zeros(d);
        for i in rows {
            let r = self.row(i);
            let yi = self.y[i];
            for a in 0..d {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                let row = &mut g.xtx[a * d..a * d + a + 1];
                for (b, v) in row.iter_mut().enumerate() {
                    *v += ra * r[b];
                }
                g.xty[a] += ra * yi;
            }
            g.yty += yi * yi;
            g.n += 1;
        }
        g.symmetrize_lower();
        g
    }

    pub fn gram(&self) -> Gram {
        self.gram_of(0..self.n)
    }

    /// Reads a CSV with a header row; the column named `y` is the response
    /// and every other column is a feature, in header order.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SparseError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let y_col = headers.iter().position(|h| h.trim() == "y").ok_or(SparseError::MissingResponse)?;
        let d = headers.len() - 1;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(SparseError::Ragged { row: i, expected: d, got: rec.len().saturating_sub(1) });
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| SparseError::NonFinite { row: i, col: j })?;
                if j == y_col {
                    y.push(v);
                } else {
                    x.push(v);
                }
            }
        }
        Self::from_flat(x, y, d)
    }

    /// Writes `x0..x{d-1},y`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SparseError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.d).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for i in 0..self.n {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.y[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `XᵀX`, `Xᵀy`, `yᵀy` and the row count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gram {
    pub d: usize,
    /// Row-major `d × d`.
    pub xtx: Vec<f64>,
    pub xty: Vec<f64>,
    pub yty: f64,
    pub n: usize,
}

impl Gram {
    pub fn zeros(d: usize) -> Self {
        Self { d, xtx: vec![0.0; d * d], xty: vec![0.0; d], yty: 0.0, n: 0 }
    }

    pub(crate) fn symmetrize_lower(&mut self) {
        let d = self.d;
        for a in 0..d {
            for b in 0..a {
                self.xtx[b * d + a] = self.xtx[a * d + b];
            }
        }
    }

    pub fn add(&mut self, other: &Gram) {
        for (a, b) in self.xtx.iter_mut().zip(&other.xtx) {
            *a += b;
        }
        for (a, b) in self.xty.iter_mut().zip(&other.xty) {
            *a += b;
        }
        self.yty += other.yty;
        self.n += other.n;
    }

    pub fn sub(&mut self, other: &Gram) {
        for (a, b) in self.xtx.iter_mut().zip(&other.xtx) {
            *a -= b;
        }
        for (a, b) in self.xty.iter_mut().zip(&other.xty) {
            *a -= b;
        }
        self.yty -= other.yty;
        self.n -= other.n;
    }

    /// Mean squared residual `‖y − Xβ‖²/n` of these rows.
    pub fn mse(&self, beta: &[f64]) -> f64 {
        let d = self.d;
        let mut quad = 0.0;
        let mut lin = 0.0;
        for a in 0..d {
            if beta[a] == 0.0 {
                continue;
            }
            lin += beta[a] * self.xty[a];
            let row = &self.xtx[a * d..(a + 1) * d];
            let mut s = 0.0;
            for b in 0..d {
                s += row[b] * beta[b];
            }
            quad += beta[a] * s;
        }
        ((self.yty - 2.0 * lin + quad) / self.n as f64).max(0.0)
    }
}
