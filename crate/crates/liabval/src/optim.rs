//! Derivative-free minimization: Nelder-Mead with quasi-random restarts,
//! used by the replication searches where the objective is piecewise smooth
//! but has kinks at the positive-part boundaries.

use crate::scalar::Real;

/// Termination tolerances for [`nelder_mead`].
pub const COORD_TOL: f64 = 1e-9;
pub const OBJ_TOL: f64 = 1e-12;

const MAX_ITER: usize = 20_000;

/// Standard Nelder-Mead from one starting simplex. Returns (argmin, min).
pub fn nelder_mead<S: Real, F: Fn(&[S]) -> S>(f: &F, start: &[S], scale: S) -> (Vec<S>, S) {
    let n = start.len();
    if n == 0 {
        return (Vec::new(), f(start));
    }
    let mut simplex: Vec<Vec<S>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] = p[i] + scale;
        simplex.push(p);
    }
    let mut values: Vec<S> = simplex.iter().map(|p| f(p)).collect();

    for _ in 0..MAX_ITER {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = values[worst] - values[best];
        let diam = (0..n)
            .map(|i| (simplex[worst][i] - simplex[best][i]).abs())
            .fold(S::zero(), |a, b| a.max(b));
        if spread <= S::of(OBJ_TOL) && diam <= S::of(COORD_TOL) {
            break;
        }

        let centroid: Vec<S> = (0..n)
            .map(|i| {
                order[..n]
                    .iter()
                    .map(|&k| simplex[k][i])
                    .fold(S::zero(), |a, b| a + b)
                    / S::of(n as f64)
            })
            .collect();

        let lerp = |coef: S| -> Vec<S> {
            (0..n)
                .map(|i| centroid[i] + coef * (simplex[worst][i] - centroid[i]))
                .collect()
        };
        let reflected = lerp(-S::one());
        let fr = f(&reflected);

        if fr < values[best] {
            let expanded = lerp(-S::of(2.0));
            let fe = f(&expanded);
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = if fr < values[worst] { lerp(-S::of(0.5)) } else { lerp(S::of(0.5)) };
            let fc = f(&contracted);
            if fc < values[worst].min(fr) {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                let anchor = simplex[best].clone();
                for k in 0..=n {
                    if k == best {
                        continue;
                    }
                    for i in 0..n {
                        simplex[k][i] = anchor[i] + S::of(0.5) * (simplex[k][i] - anchor[i]);
                    }
                    values[k] = f(&simplex[k]);
                }
            }
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap())
        .unwrap();
    (simplex[best].clone(), values[best])
}

/// Halton sequence point `index` in `dim` dimensions, coordinates in (0,1).
pub fn halton<S: Real>(index: usize, dim: usize) -> Vec<S> {
    const PRIMES: [usize; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut i = index + 1;
            let mut f = 1.0f64;
            let mut x = 0.0f64;
            while i > 0 {
                f /= base as f64;
                x += f * (i % base) as f64;
                i /= base;
            }
            S::of(x)
        })
        .collect()
}

/// The outcome of a multi-start search.
#[derive(Debug, Clone)]
pub struct MultiStart<S> {
    pub argmin: Vec<S>,
    pub min: S,
    /// Distinct near-optimal minimizers (objective within 1e-9 of the best
    /// but more than 1e-6 apart in coordinates), the best one first.
    pub ties: Vec<Vec<S>>,
}

/// Nelder-Mead from `seed` plus `restarts` quasi-random starting points in
/// the box `center +- radius`, followed by `probes` Halton evaluations; any
/// probe beating the incumbent triggers one more local search from it.
pub fn multistart_minimize<S: Real, F: Fn(&[S]) -> S>(
    f: &F,
    seed: &[S],
    radius: S,
    restarts: usize,
    probes: usize,
) -> MultiStart<S> {
    let n = seed.len();
    let mut results: Vec<(Vec<S>, S)> = Vec::new();
    let (x0, f0) = nelder_mead(f, seed, radius * S::of(0.1));
    results.push((x0, f0));
    for k in 0..restarts {
        let u = halton::<S>(k, n);
        let start: Vec<S> = (0..n)
            .map(|i| seed[i] + radius * (S::of(2.0) * u[i] - S::one()))
            .collect();
        results.push(nelder_mead(f, &start, radius * S::of(0.2)));
    }

    let mut best = results
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .cloned()
        .unwrap();

    // Certification pass: a coarse quasi-random sweep over a wider box.
    for round in 0..3 {
        let mut improved = false;
        for k in 0..probes {
            let u = halton::<S>(restarts + round * probes + k, n);
            let p: Vec<S> = (0..n)
                .map(|i| best.0[i] + S::of(3.0) * radius * (S::of(2.0) * u[i] - S::one()))
                .collect();
            if f(&p) < best.1 - S::of(OBJ_TOL) {
                let cand = nelder_mead(f, &p, radius * S::of(0.1));
                if cand.1 < best.1 {
                    results.push(cand.clone());
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    let mut ties: Vec<Vec<S>> = vec![best.0.clone()];
    for (x, v) in &results {
        if (*v - best.1).abs() <= S::of(1e-9) {
            let dist = x
                .iter()
                .zip(best.0.iter())
                .map(|(&a, &b)| (a - b).abs())
                .fold(S::zero(), |a, b| a.max(b));
            let new = ties.iter().all(|t| {
                x.iter()
                    .zip(t.iter())
                    .map(|(&a, &b)| (a - b).abs())
                    .fold(S::zero(), |a, b| a.max(b))
                    > S::of(1e-6)
            });
            if dist > S::of(1e-6) && new {
                ties.push(x.clone());
            }
        }
    }
    MultiStart { argmin: best.0, min: best.1, ties }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 2.0 * (x[1] + 3.0).powi(2);
        let (x, v) = nelder_mead(&f, &[0.0, 0.0], 1.0);
        assert!((x[0] - 1.0).abs() < 1e-6);
        assert!((x[1] + 3.0).abs() < 1e-6);
        assert!(v < 1e-10);
    }

    #[test]
    fn kinked_objective() {
        // |x - 2| + |y| has its kink exactly at the minimizer.
        let f = |x: &[f64]| (x[0] - 2.0).abs() + x[1].abs();
        let out = multistart_minimize(&f, &[0.0, 0.0], 4.0, 8, 200);
        assert!((out.argmin[0] - 2.0).abs() < 1e-6);
        assert!(out.argmin[1].abs() < 1e-6);
    }

    #[test]
    fn multistart_escapes_local_min() {
        // Double well with the deeper well away from the seed.
        let f = |x: &[f64]| {
            let a = (x[0] + 2.0).powi(2);
            let b = (x[0] - 3.0).powi(2) - 1.0;
            a.min(b)
        };
        let out = multistart_minimize(&f, &[-2.0], 6.0, 8, 400);
        assert!((out.argmin[0] - 3.0).abs() < 1e-5, "{:?}", out.argmin);
    }

    #[test]
    fn halton_in_unit_cube() {
        for k in 0..50 {
            let p = halton::<f64>(k, 3);
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        }
    }

    #[test]
    fn zero_dim_is_identity() {
        let f = |_: &[f64]| 7.0;
        let (x, v) = nelder_mead(&f, &[], 1.0);
        assert!(x.is_empty());
        assert_eq!(v, 7.0);
    }
}
