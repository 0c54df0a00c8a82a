//! Kendall's tau between two lists and its mapping to the coupling parameter
//! theta.
//!
//! Tau is the normalized signed count of concordant minus discordant pairs
//! over all `C(m, 2)` document pairs; the sign function scores ties as zero.
//! Intermediate fused score vectors can carry ties, so the fast path handles
//! them, while fresh rank vectors are always tie-free permutations.

use thiserror::Error;

use crate::Tunables;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConcordanceError {
    #[error("vectors have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("at least 2 observations required, got {m}")]
    TooFew { m: usize },
}

/// Kernel family driving the tau-to-theta mapping and the theta domain.
///
/// Clayton covers the Clayton copula and the power-function composition;
/// Gumbel covers the Gumbel copula and the exponential-logarithmic
/// composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Clayton,
    Gumbel,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::Clayton => "clayton",
            Self::Gumbel => "gumbel",
        }
    }
}

/// A tau measurement together with the clamped global parameter it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaEstimate {
    pub tau: f64,
    pub theta_g: f64,
    pub family: KernelFamily,
}

/// Sample Kendall's tau of two equally indexed observation vectors.
///
/// Runs in `O(m log m)` via merge-sort inversion counting. The result is the
/// exact signed pair count divided by `C(m, 2)`, identical to the brute-force
/// sum of signs over all pairs.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64, ConcordanceError> {
    if x.len() != y.len() {
        return Err(ConcordanceError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let m = x.len();
    if m < 2 {
        return Err(ConcordanceError::TooFew { m });
    }

    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then_with(|| y[a].total_cmp(&y[b])));

    let total = pairs(m as u64) as i64;
    // Pairs tied in x, and pairs tied in both, from runs of the (x, y) sort.
    let mut tied_x: i64 = 0;
    let mut tied_xy: i64 = 0;
    let mut i = 0;
    while i < m {
        let mut j = i + 1;
        while j < m && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        tied_x += pairs((j - i) as u64) as i64;
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && y[idx[l]] == y[idx[k]] {
                l += 1;
            }
            tied_xy += pairs((l - k) as u64) as i64;
            k = l;
        }
        i = j;
    }

    // Pairs tied in y, from runs of a plain y sort.
    let mut ys: Vec<f64> = y.to_vec();
    ys.sort_by(f64::total_cmp);
    let mut tied_y: i64 = 0;
    let mut i = 0;
    while i < m {
        let mut j = i + 1;
        while j < m && ys[j] == ys[i] {
            j += 1;
        }
        tied_y += pairs((j - i) as u64) as i64;
        i = j;
    }

    // Strict inversions of y in (x, y)-sorted order are exactly the
    // discordant pairs: equal x values were pre-sorted by y, so they never
    // produce a strict inversion.
    let mut y_in_x_order: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let discordant = count_inversions(&mut y_in_x_order) as i64;

    // concordant = (total - tied_x - tied_y + tied_xy) - discordant
    let numerator = total - tied_x - tied_y + tied_xy - 2 * discordant;
    Ok(numerator as f64 / total as f64)
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Strict inversions (`i < j` with `v[i] > v[j]`) by merge sort.
fn count_inversions(values: &mut [f64]) -> u64 {
    let mut buf = vec![0.0; values.len()];
    merge_count(values, &mut buf)
}

fn merge_count(values: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inversions = merge_count(&mut values[..mid], &mut buf[..mid])
        + merge_count(&mut values[mid..], &mut buf[mid..]);
    let (left, right) = values.split_at(mid);
    let (mut i, mut j) = (0, 0);
    for slot in buf[..n].iter_mut() {
        // Take from the left on ties so equal values are never counted.
        if i < left.len() && (j >= right.len() || left[i] <= right[j]) {
            *slot = left[i];
            i += 1;
        } else {
            *slot = right[j];
            j += 1;
            inversions += (left.len() - i) as u64;
        }
    }
    values.copy_from_slice(&buf[..n]);
    inversions
}

/// Map tau to the global coupling parameter of the family.
///
/// Clayton-based kernels use `theta = 2*tau / (1 - tau)`, Gumbel-based ones
/// `theta = 1 / (1 - tau)`. The raw value is floored at zero and then clamped
/// to the family domain: `[epsilon_theta, theta_max]` for Clayton,
/// `[1, theta_max]` for Gumbel. Total for any `tau` in `[-1, 1]`; `tau = 1`
/// maps to `theta_max`.
pub fn theta_from_tau(tau: f64, family: KernelFamily, tunables: &Tunables) -> ThetaEstimate {
    debug_assert!((-1.0..=1.0).contains(&tau), "tau out of range: {tau}");
    let raw = match family {
        KernelFamily::Clayton => 2.0 * tau / (1.0 - tau),
        KernelFamily::Gumbel => 1.0 / (1.0 - tau),
    };
    let floored = raw.max(0.0);
    let theta_g = match family {
        KernelFamily::Clayton => floored.clamp(tunables.epsilon_theta, tunables.theta_max),
        KernelFamily::Gumbel => floored.clamp(1.0, tunables.theta_max),
    };
    ThetaEstimate {
        tau,
        theta_g,
        family,
    }
}

/// Analytic tau implied by a family parameter: `theta / (theta + 2)` for
/// Clayton, `(theta - 1) / theta` for Gumbel.
pub fn tau_from_theta(theta: f64, family: KernelFamily) -> f64 {
    match family {
        KernelFamily::Clayton => theta / (theta + 2.0),
        KernelFamily::Gumbel => (theta - 1.0) / theta,
    }
}
