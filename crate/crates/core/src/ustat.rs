//! Unbiased fourth-order U-statistic for `‖p_{XY} − p_X p_Y‖₂²`.
//!
//! `u_statistic_naive` enumerates every quadruple and every ordering of it.
//! `u_statistic_fast` uses a closed form in the joint counts `N_xy` and the
//! marginal counts `N_x`, `N_y`, obtained by counting the ordered 4-tuples of
//! distinct indices that make each product of indicators nonzero.

use serde::{Deserialize, Serialize};

use crate::error::{CiError, Result};

/// Paired categorical observations, categories 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscretePairSample {
    pub xs: Vec<u32>,
    pub ys: Vec<u32>,
    pub ell1: usize,
    pub ell2: usize,
}

impl DiscretePairSample {
    pub fn new(xs: Vec<u32>, ys: Vec<u32>, ell1: usize, ell2: usize) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(CiError::Dimension {
                expected: format!("{} y values", xs.len()),
                got: ys.len().to_string(),
            });
        }
        if let Some(&x) = xs.iter().find(|&&x| x as usize >= ell1) {
            return Err(CiError::Dimension {
                expected: format!("x < {ell1}"),
                got: x.to_string(),
            });
        }
        if let Some(&y) = ys.iter().find(|&&y| y as usize >= ell2) {
            return Err(CiError::Dimension {
                expected: format!("y < {ell2}"),
                got: y.to_string(),
            });
        }
        Ok(Self { xs, ys, ell1, ell2 })
    }

    pub fn empty(ell1: usize, ell2: usize) -> Self {
        Self {
            xs: Vec::new(),
            ys: Vec::new(),
            ell1,
            ell2,
        }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn push(&mut self, x: u32, y: u32) {
        self.xs.push(x);
        self.ys.push(y);
    }
}

fn require_four(sigma: usize) -> Result<()> {
    if sigma < 4 {
        return Err(CiError::InsufficientSample { needed: 4, got: sigma });
    }
    Ok(())
}

const PERMUTATIONS_OF_4: [[usize; 4]; 24] = [
    [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
    [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
    [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
    [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
];

/// Kernel enumeration with an arbitrary per-cell divisor.
fn naive_with<W: Fn(usize, usize) -> f64>(data: &DiscretePairSample, cell_weight: W) -> Result<f64> {
    let n = data.len();
    require_four(n)?;
    let phi = |i: usize, j: usize, x: usize, y: usize| -> f64 {
        let xi = data.xs[i] as usize == x;
        let joint = xi && data.ys[i] as usize == y;
        let split = xi && data.ys[j] as usize == y;
        joint as i32 as f64 - split as i32 as f64
    };
    let mut total = 0.0;
    let mut quads = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let idx = [i, j, k, l];
                    let mut h = 0.0;
                    for p in &PERMUTATIONS_OF_4 {
                        let (a, b, c, d) = (idx[p[0]], idx[p[1]], idx[p[2]], idx[p[3]]);
                        for x in 0..data.ell1 {
                            for y in 0..data.ell2 {
                                h += phi(a, b, x, y) * phi(c, d, x, y) / cell_weight(x, y);
                            }
                        }
                    }
                    total += h / 24.0;
                    quads += 1;
                }
            }
        }
    }
    Ok(total / quads as f64)
}

/// Brute-force estimator: average of the symmetrized kernel over all quadruples.
pub fn u_statistic_naive(data: &DiscretePairSample) -> Result<f64> {
    naive_with(data, |_, _| 1.0)
}

/// Brute-force weighted estimator with cell divisor `wx[x]·wy[y]`.
pub fn weighted_u_statistic_naive(data: &DiscretePairSample, wx: &[f64], wy: &[f64]) -> Result<f64> {
    check_weight_lengths(data, wx, wy)?;
    naive_with(data, |x, y| wx[x] * wy[y])
}

/// Count-based estimator; agrees with [`u_statistic_naive`].
pub fn u_statistic_fast(data: &DiscretePairSample) -> Result<f64> {
    require_four(data.len())?;
    Ok(u_from_slices(&data.xs, &data.ys, data.ell1, data.ell2, None))
}

/// Count-based weighted estimator; agrees with [`weighted_u_statistic_naive`].
pub fn weighted_u_statistic_fast(data: &DiscretePairSample, wx: &[f64], wy: &[f64]) -> Result<f64> {
    require_four(data.len())?;
    check_weight_lengths(data, wx, wy)?;
    Ok(u_from_slices(&data.xs, &data.ys, data.ell1, data.ell2, Some((wx, wy))))
}

fn check_weight_lengths(data: &DiscretePairSample, wx: &[f64], wy: &[f64]) -> Result<()> {
    if wx.len() != data.ell1 || wy.len() != data.ell2 {
        return Err(CiError::Dimension {
            expected: format!("weights of length {} and {}", data.ell1, data.ell2),
            got: format!("{} and {}", wx.len(), wy.len()),
        });
    }
    Ok(())
}

/// Number of ordered 4-tuples of distinct indices, summed over kernel terms,
/// contributed by one cell; the estimator is `Σ_cells term / σ(σ−1)(σ−2)(σ−3)`.
#[inline]
fn cell_numerator(s: i128, nxy: i128, nx: i128, ny: i128) -> i128 {
    // a, c both in the cell; b, d free.
    let t1 = (s - 2) * (s - 3) * (nxy * nxy - nxy);
    // a in the cell, X_c = x, Y_d = y; b free.
    let s2 = nxy * nx * ny - nxy * ny - nxy * nx - nxy * nxy + 2 * nxy;
    let t2 = (s - 3) * s2;
    // X_a = X_c = x, Y_b = Y_d = y, all four distinct.
    let s4 = nx * nx * ny * ny - (nx * ny * ny + nx * nx * ny + 4 * nxy * nx * ny)
        + (nx * ny + 2 * nxy * nxy)
        + 2 * (2 * nxy * nx + 2 * nxy * ny)
        - 6 * nxy;
    t1 - 2 * t2 + s4
}

/// Core of the fast estimators. Requires `xs.len() ≥ 4`.
pub(crate) fn u_from_slices(
    xs: &[u32],
    ys: &[u32],
    ell1: usize,
    ell2: usize,
    weights: Option<(&[f64], &[f64])>,
) -> f64 {
    let sigma = xs.len();
    debug_assert!(sigma >= 4);
    let mut nx = vec![0i64; ell1];
    let mut ny = vec![0i64; ell2];
    let mut nxy = vec![0i64; ell1 * ell2];
    for (&x, &y) in xs.iter().zip(ys) {
        nx[x as usize] += 1;
        ny[y as usize] += 1;
        nxy[x as usize * ell2 + y as usize] += 1;
    }
    let s = sigma as i128;
    let denom = (s * (s - 1) * (s - 2) * (s - 3)) as f64;
    match weights {
        None => {
            let mut num: i128 = 0;
            for (x, &cx) in nx.iter().enumerate().filter(|(_, c)| **c > 0) {
                for (y, &cy) in ny.iter().enumerate().filter(|(_, c)| **c > 0) {
                    num += cell_numerator(s, nxy[x * ell2 + y] as i128, cx as i128, cy as i128);
                }
            }
            num as f64 / denom
        }
        Some((wx, wy)) => {
            let mut acc = 0.0;
            for (x, &cx) in nx.iter().enumerate().filter(|(_, c)| **c > 0) {
                for (y, &cy) in ny.iter().enumerate().filter(|(_, c)| **c > 0) {
                    let num = cell_numerator(s, nxy[x * ell2 + y] as i128, cx as i128, cy as i128);
                    if num != 0 {
                        acc += num as f64 / (wx[x] * wy[y]);
                    }
                }
            }
            acc / denom
        }
    }
}
