//! Token-to-vector tables with the on-disk f32/sidecar representation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EmbedError;
use crate::io::{self, F32Matrix};

/// Learned embedding vectors, one row per token, all the same width.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Row-major, tokens.len() x dim.
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    dim: usize,
    tokens: Vec<String>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            tokens: Vec::new(),
            index: BTreeMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Appends a row; panics on dimension mismatch or duplicate token.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector width mismatch");
        let token = token.into();
        let prev = self.index.insert(token.clone(), self.tokens.len());
        assert!(prev.is_none(), "duplicate token {token:?}");
        self.tokens.push(token);
        self.data.extend(vector);
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Mean of the vectors for `tokens` that exist in the table; `None` when
    /// none of them do.
    pub fn mean_of(&self, tokens: &[&str]) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        let mut n = 0usize;
        for t in tokens {
            if let Some(v) = self.get(t) {
                for (a, b) in acc.iter_mut().zip(v) {
                    *a += b;
                }
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        for a in &mut acc {
            *a /= n as f64;
        }
        Some(acc)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn write(&self, path: &Path) -> Result<(), EmbedError> {
        let mut matrix = F32Matrix::zeros(self.tokens.len(), self.dim);
        for (i, v) in self.data.iter().enumerate() {
            matrix.data[i] = *v as f32;
        }
        io::write_f32_matrix(
            path,
            &matrix,
            &Sidecar {
                dim: self.dim,
                tokens: self.tokens.clone(),
            },
        )?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, EmbedError> {
        let (matrix, side): (F32Matrix, Sidecar) =
            io::read_f32_matrix(path, |s: &Sidecar| (s.tokens.len(), s.dim))?;
        let mut table = EmbeddingTable::new(side.dim);
        for (i, token) in side.tokens.iter().enumerate() {
            table.insert(
                token.clone(),
                matrix.row(i).iter().map(|v| *v as f64).collect(),
            );
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_get_mean() {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", vec![1.0, 2.0]);
        t.insert("b", vec![3.0, 4.0]);
        assert_eq!(t.get("a"), Some(&[1.0, 2.0][..]));
        assert_eq!(t.mean_of(&["a", "b"]), Some(vec![2.0, 3.0]));
        assert_eq!(t.mean_of(&["zzz"]), None);
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = EmbeddingTable::new(3);
        t.insert("x", vec![0.5, -1.25, 2.0]);
        t.insert("y", vec![0.0, 3.5, -0.75]);
        let path = dir.path().join("emb.f32");
        t.write(&path).unwrap();
        let t2 = EmbeddingTable::read(&path).unwrap();
        // Values chosen to be exactly representable in f32.
        assert_eq!(t, t2);
    }
}
