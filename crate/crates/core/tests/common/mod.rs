//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sgap_core::SamplingMask;

/// Rank-1 completion by propagating ratios over the bipartite graph of the
/// mask: fix `a[0] = 1`, then `b[j] = x[i][j] / a[i]` and
/// `a[i] = x[i][j] / b[j]` along observed edges. `None` if disconnected.
pub fn rank1_propagate(n: usize, m: usize, obs: &[(usize, usize, f64)]) -> Option<Vec<Vec<f64>>> {
    let mut a = vec![None; n];
    let mut b = vec![None; m];
    a[0] = Some(1.0);
    let mut changed = true;
    while changed {
        changed = false;
        for &(i, j, x) in obs {
            match (a[i], b[j]) {
                (Some(ai), None) => {
                    b[j] = Some(x / ai);
                    changed = true;
                }
                (None, Some(bj)) => {
                    a[i] = Some(x / bj);
                    changed = true;
                }
                _ => {}
            }
        }
    }
    let a: Vec<f64> = a.into_iter().collect::<Option<_>>()?;
    let b: Vec<f64> = b.into_iter().collect::<Option<_>>()?;
    Some(a.iter().map(|ai| b.iter().map(|bj| ai * bj).collect()).collect())
}

/// Random `n x m` mask at `density` with every row and column sampled and a
/// connected bipartite graph (rejection sampling).
pub fn connected_mask(n: usize, m: usize, density: f64, rng: &mut ChaCha8Rng) -> SamplingMask {
    loop {
        let coords: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .filter(|_| rng.random::<f64>() < density)
            .collect();
        let Ok((mask, _)) = SamplingMask::from_coords(n, m, &coords) else {
            continue;
        };
        let full = mask.row_counts().iter().all(|&c| c > 0) && mask.col_counts().iter().all(|&c| c > 0);
        if full && sgap_core::spectral::connected_components(&mask).components == 1 {
            return mask;
        }
    }
}

/// Entries bounded away from zero with random signs.
pub fn nonzero_factor(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len)
        .map(|_| {
            let v = rng.random_range(0.5..2.0);
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect()
}
