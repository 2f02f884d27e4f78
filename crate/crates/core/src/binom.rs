//! Cached Pascal triangle in double precision, rows 0..=1024.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const MAX_ROW: usize = 1024;

struct Pascal {
    // Row k starts at offset k (k + 1) / 2.
    flat: Vec<f64>,
}

fn table() -> &'static Pascal {
    static TABLE: OnceLock<Pascal> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut flat = Vec::with_capacity((MAX_ROW + 1) * (MAX_ROW + 2) / 2);
        flat.push(1.0);
        for k in 1..=MAX_ROW {
            let prev = (k - 1) * k / 2;
            flat.push(1.0);
            for j in 1..k {
                let v = flat[prev + j - 1] + flat[prev + j];
                flat.push(v);
            }
            flat.push(1.0);
        }
        Pascal { flat }
    })
}

/// The row `C(k, 0..=k)`.
pub fn row(k: usize) -> Result<&'static [f64]> {
    if k > MAX_ROW {
        return Err(Error::Range(format!(
            "binomial row {k} exceeds the cached limit {MAX_ROW}"
        )));
    }
    let start = k * (k + 1) / 2;
    Ok(&table().flat[start..=start + k])
}

pub fn choose(k: usize, j: usize) -> Result<f64> {
    if j > k {
        return Ok(0.0);
    }
    Ok(row(k)?[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_rows() {
        assert_eq!(row(0).unwrap(), &[1.0]);
        assert_eq!(row(4).unwrap(), &[1.0, 4.0, 6.0, 4.0, 1.0]);
        assert_eq!(choose(10, 3).unwrap(), 120.0);
        assert_eq!(choose(3, 5).unwrap(), 0.0);
    }

    #[test]
    fn last_row_is_finite_and_symmetric() {
        let r = row(MAX_ROW).unwrap();
        assert!(r.iter().all(|v| v.is_finite()));
        assert_eq!(r[1], 1024.0);
        assert_eq!(r[100], r[MAX_ROW - 100]);
        assert!(row(MAX_ROW + 1).is_err());
    }
}
