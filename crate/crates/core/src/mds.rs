//! Matrices over GF(2^w) and the outer erasure code: a Vandermonde
//! generator whose every m-row subset is invertible, encoding of the task
//! matrix, and erasure decoding from any m distinct coded rows by Gaussian
//! elimination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{self, FieldElement, FieldWidth};
use crate::ratio::Frac;
use crate::rng::DetRng;

/// Dense row-major matrix of field elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<FieldElement>,
}

impl FieldMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        FieldMatrix {
            rows,
            cols,
            entries: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<FieldElement>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c));
        FieldMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    /// Uniformly random entries, zero included.
    pub fn random(rows: usize, cols: usize, width: FieldWidth, rng: &mut DetRng) -> Self {
        let entries = (0..rows * cols).map(|_| rng.next_field(width)).collect();
        FieldMatrix {
            rows,
            cols,
            entries,
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> FieldElement {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FieldElement) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElement] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    /// Plain matrix product over the field.
    pub fn mul(&self, other: &FieldMatrix, width: FieldWidth) -> Result<FieldMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} * {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = FieldMatrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = gf::mul(width, a, other.at(k, j));
                    out.entries[i * other.cols + j] ^= v;
                }
            }
        }
        Ok(out)
    }
}

/// Generator of the (r1 m, m) outer code. Row i is the power sequence
/// (x_i^0, ..., x_i^{m-1}) at evaluation point x_i = i, so any m rows form
/// an invertible Vandermonde system; at rate 1 the generator degenerates to
/// the identity and coding is skipped entirely.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    pub message_len: usize,
    pub codeword_len: usize,
    pub width: FieldWidth,
    identity: bool,
}

/// Builds the generator for m message rows at MDS rate r1 = num/den.
pub fn make_generator(m: usize, r1: Frac, width: FieldWidth) -> Result<GeneratorMatrix> {
    if r1.num < r1.den {
        return Err(Error::InvalidParams(format!("MDS rate {r1} below 1")));
    }
    let scaled = m as u64 * r1.num;
    if !scaled.is_multiple_of(r1.den) {
        return Err(Error::NonIntegerCodewordLength {
            num: r1.num,
            den: r1.den,
        });
    }
    let codeword_len = (scaled / r1.den) as usize;
    let identity = codeword_len == m;
    if !identity && codeword_len as u64 > width.order() as u64 {
        return Err(Error::FieldTooSmall {
            width: width.bits(),
            needed: codeword_len as u64,
        });
    }
    Ok(GeneratorMatrix {
        message_len: m,
        codeword_len,
        width,
        identity,
    })
}

impl GeneratorMatrix {
    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// Evaluation point of coded row i.
    pub fn point(&self, i: usize) -> FieldElement {
        debug_assert!(i < self.codeword_len);
        i as FieldElement
    }

    /// Row i of the generator, materialized.
    pub fn row(&self, i: usize) -> Vec<FieldElement> {
        if self.identity {
            let mut row = vec![0; self.message_len];
            row[i] = 1;
            return row;
        }
        let x = self.point(i);
        let mut row = Vec::with_capacity(self.message_len);
        let mut p: FieldElement = 1;
        for _ in 0..self.message_len {
            row.push(p);
            p = gf::mul(self.width, p, x);
        }
        row
    }

    /// C = G * A; A must have exactly m rows.
    pub fn encode(&self, a: &FieldMatrix) -> Result<FieldMatrix> {
        if a.rows != self.message_len {
            return Err(Error::DimensionMismatch(format!(
                "encode expects {} rows, got {}",
                self.message_len, a.rows
            )));
        }
        if self.identity {
            return Ok(a.clone());
        }
        let mut out = FieldMatrix::zero(self.codeword_len, a.cols);
        for i in 0..self.codeword_len {
            let x = self.point(i);
            // Horner-free: accumulate powers once per row.
            let mut coeff: FieldElement = 1;
            for k in 0..self.message_len {
                if coeff != 0 {
                    for j in 0..a.cols {
                        let v = gf::mul(self.width, coeff, a.at(k, j));
                        out.entries[i * a.cols + j] ^= v;
                    }
                }
                coeff = gf::mul(self.width, coeff, x);
            }
        }
        Ok(out)
    }

    /// Recovers the message block from coded rows. `coded` holds one row of
    /// values per entry of `row_ids` (same order); when more than m rows are
    /// supplied, the m smallest indices are used. Solves the m x m
    /// Vandermonde system once and back-substitutes every column.
    pub fn decode_rows(
        &self,
        row_ids: &[usize],
        coded: &FieldMatrix,
    ) -> Result<FieldMatrix> {
        if coded.rows != row_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} row ids for {} value rows",
                row_ids.len(),
                coded.rows
            )));
        }
        let m = self.message_len;
        let mut ids: Vec<(usize, usize)> =
            row_ids.iter().copied().enumerate().map(|(pos, id)| (id, pos)).collect();
        ids.sort_unstable();
        ids.dedup_by_key(|(id, _)| *id);
        if ids.len() < m {
            return Err(Error::InsufficientRows {
                have: ids.len(),
                need: m,
            });
        }
        ids.truncate(m);
        if let Some(&(id, _)) = ids.iter().find(|(id, _)| *id >= self.codeword_len) {
            return Err(Error::DimensionMismatch(format!(
                "coded row id {id} out of range (codeword length {})",
                self.codeword_len
            )));
        }

        if self.identity {
            // C = A: the m distinct ids must be 0..m-1; reorder the values.
            let mut out = FieldMatrix::zero(m, coded.cols);
            for &(id, pos) in &ids {
                for c in 0..coded.cols {
                    out.set(id, c, coded.at(pos, c));
                }
            }
            return Ok(out);
        }

        let w = self.width;
        let cols = coded.cols;
        // Augmented system [V | values]: V[r][c] = x_{id_r}^c.
        let stride = m + cols;
        let mut aug = vec![0u16; m * stride];
        for (r, &(id, pos)) in ids.iter().enumerate() {
            let x = self.point(id);
            let mut p: FieldElement = 1;
            for c in 0..m {
                aug[r * stride + c] = p;
                p = gf::mul(w, p, x);
            }
            for c in 0..cols {
                aug[r * stride + m + c] = coded.at(pos, c);
            }
        }

        // Forward elimination to upper triangular with unit diagonal;
        // distinct evaluation points guarantee a pivot.
        for col in 0..m {
            let pivot_row = (col..m)
                .find(|&r| aug[r * stride + col] != 0)
                .ok_or_else(|| {
                    Error::PlanInconsistency("singular decode system".into())
                })?;
            if pivot_row != col {
                for c in 0..stride {
                    aug.swap(col * stride + c, pivot_row * stride + c);
                }
            }
            let inv = gf::inv(w, aug[col * stride + col])?;
            for c in col..stride {
                aug[col * stride + c] = gf::mul(w, inv, aug[col * stride + c]);
            }
            for r in col + 1..m {
                let factor = aug[r * stride + col];
                if factor == 0 {
                    continue;
                }
                for c in col..stride {
                    let v = gf::mul(w, factor, aug[col * stride + c]);
                    aug[r * stride + c] ^= v;
                }
            }
        }

        // Back substitution straight into the output.
        let mut out = FieldMatrix::zero(m, cols);
        for r in (0..m).rev() {
            for c in 0..cols {
                out.set(r, c, aug[r * stride + m + c]);
            }
            for upper in r + 1..m {
                let f = aug[r * stride + upper];
                if f == 0 {
                    continue;
                }
                for c in 0..cols {
                    let v = gf::mul(w, f, out.at(upper, c));
                    out.entries[r * cols + c] ^= v;
                }
            }
        }
        Ok(out)
    }
}
