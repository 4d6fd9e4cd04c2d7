/// Name of the orthogonal-matrix construction, echoed in run metadata.
pub const XI_CONSTRUCTION: &str = "householder";

/// The `d + 1` equiprobable diffusion outcomes of one lattice step.
///
/// Rows are `sqrt(d+1)` times the first `d` entries of the rows of an
/// orthogonal `(d+1) x (d+1)` matrix whose last column is constant, so the
/// outcomes have mean zero and identity covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct XiTable {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

/// Largest deviations of a table from its moment identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiDefects {
    pub mean: f64,
    pub covariance: f64,
    pub norm: f64,
}

impl XiDefects {
    pub fn max(&self) -> f64 {
        self.mean.max(self.covariance).max(self.norm)
    }
}

/// Builds the table from the Householder reflection `I - 2 v v^T / |v|^2`
/// with `v = e_{d+1} - u`, `u = (1, ..., 1) / sqrt(d+1)`. The reflection
/// maps `e_{d+1}` to `u`, so its last column is `u`.
pub fn build_xi(d: usize) -> XiTable {
    assert!(d >= 1, "dimension must be at least 1");
    let m = d + 1;
    let c = 1.0 / (m as f64).sqrt();
    let mut v = vec![-c; m];
    v[d] = 1.0 - c;
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    let scale = (m as f64).sqrt();
    let rows = (0..m)
        .map(|w| {
            (0..d)
                .map(|j| {
                    let delta = if w == j { 1.0 } else { 0.0 };
                    scale * (delta - 2.0 * v[w] * v[j] / norm2)
                })
                .collect()
        })
        .collect();
    XiTable { dim: d, rows }
}

impl XiTable {
    /// Wraps arbitrary rows without checking the moment identities.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        assert_eq!(rows.len(), dim + 1, "need d + 1 rows of length d");
        assert!(rows.iter().all(|r| r.len() == dim), "ragged xi rows");
        Self { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, w: usize) -> &[f64] {
        &self.rows[w]
    }

    pub fn defects(&self) -> XiDefects {
        let d = self.dim;
        let m = self.rows.len() as f64;
        let mut mean = 0.0f64;
        let mut covariance = 0.0f64;
        for i in 0..d {
            let s: f64 = self.rows.iter().map(|r| r[i]).sum();
            mean = mean.max((s / m).abs());
            for j in 0..d {
                let c: f64 = self.rows.iter().map(|r| r[i] * r[j]).sum::<f64>() / m;
                let target = if i == j { 1.0 } else { 0.0 };
                covariance = covariance.max((c - target).abs());
            }
        }
        let norm = self
            .rows
            .iter()
            .map(|r| (r.iter().map(|x| x * x).sum::<f64>() - d as f64).abs())
            .fold(0.0, f64::max);
        XiDefects { mean, covariance, norm }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimension_is_plus_minus_one() {
        let xi = build_xi(1);
        assert!((xi.row(0)[0] + 1.0).abs() < 1e-15);
        assert!((xi.row(1)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moment_identities_hold() {
        for d in 1..=8 {
            let defects = build_xi(d).defects();
            assert!(defects.max() <= 1e-12, "d = {d}: {defects:?}");
        }
    }

    #[test]
    fn two_dimensions_have_norm_two() {
        let xi = build_xi(2);
        for r in xi.rows() {
            assert!((r[0] * r[0] + r[1] * r[1] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn corrupted_table_is_detected() {
        let mut rows = build_xi(2).rows().to_vec();
        rows[0][1] += 1e-6;
        assert!(XiTable::from_rows(rows).defects().max() > 1e-12);
    }
}
