//! Linear-Gaussian cash-flow models: factor process
//! G_t = A_t + sum_{s<=t} B_{t,s} eps_s with eps_s iid standard normal
//! under P and a Girsanov density moving each eps_s mean to lambda_s under
//! Q. Flows X_t = g_t' G_t give deterministic capital schedules and
//! closed-form values.

use crate::error::{Error, Result};
use crate::linalg::{self, mat_vec};
use crate::normal;
use crate::risk::RiskMeasureSpec;
use crate::scalar::Real;

pub type Mat<S> = Vec<Vec<S>>;

#[derive(Debug, Clone)]
pub struct GaussianModel<S> {
    /// A_t for t = 1..=T, each of length `dim`.
    pub a: Vec<Vec<S>>,
    /// b[t-1][s-1] = B_{t,s}, square `dim x dim`, row-major, s <= t.
    pub b: Vec<Vec<Mat<S>>>,
    /// Girsanov shifts lambda_t for t = 1..=T.
    pub lambda: Vec<Vec<S>>,
    /// Flow loadings: X_t = g_t' G_t.
    pub g: Vec<Vec<S>>,
}

impl<S: Real> GaussianModel<S> {
    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn dim(&self) -> usize {
        self.a.first().map(|v| v.len()).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let horizon = self.horizon();
        let d = self.dim();
        if horizon == 0 || d == 0 {
            return Err(Error::Model("empty model".into()));
        }
        for (name, seq) in [("A", &self.a), ("lambda", &self.lambda), ("g", &self.g)] {
            if seq.len() != horizon {
                return Err(Error::Model(format!(
                    "{name} has {} periods, expected {horizon}",
                    seq.len()
                )));
            }
            if seq.iter().any(|v| v.len() != d) {
                return Err(Error::Model(format!("{name} entries must have length {d}")));
            }
        }
        if self.b.len() != horizon {
            return Err(Error::Model(format!(
                "B has {} periods, expected {horizon}",
                self.b.len()
            )));
        }
        for (t, row) in self.b.iter().enumerate() {
            if row.len() != t + 1 {
                return Err(Error::Model(format!(
                    "B at time {} must have {} blocks, found {}",
                    t + 1,
                    t + 1,
                    row.len()
                )));
            }
            for m in row {
                if m.len() != d || m.iter().any(|r| r.len() != d) {
                    return Err(Error::Model(format!("B blocks at time {} must be {d}x{d}", t + 1)));
                }
            }
            // The innovation must genuinely enter: scale rows, then require
            // a non-negligible determinant of B_{t,t}.
            let diag = &row[t];
            let scaled: Mat<S> = diag
                .iter()
                .map(|r| {
                    let m = r.iter().fold(S::zero(), |a, &b| a.max(b.abs()));
                    if m == S::zero() {
                        r.clone()
                    } else {
                        r.iter().map(|&x| x / m).collect()
                    }
                })
                .collect();
            if linalg::det(&scaled).abs() <= S::of(1e-10) {
                return Err(Error::Model(format!(
                    "B_{{{t1},{t1}}} is singular: the time-{t1} innovation does not reach all factors",
                    t1 = t + 1
                )));
            }
        }
        Ok(())
    }

    /// Mean shift of G_v between F_u conditioning under P and Q:
    /// sum_{s=u+1}^{v} B_{v,s} lambda_s.
    pub fn measure_shift(&self, u: usize, v: usize) -> Result<Vec<S>> {
        let d = self.dim();
        if v == 0 || v > self.horizon() || u > v {
            return Err(Error::Argument(format!("need 0 <= u <= v <= T, got u={u}, v={v}")));
        }
        let mut out = vec![S::zero(); d];
        for s in u + 1..=v {
            let shift = mat_vec(&self.b[v - 1][s - 1], &self.lambda[s - 1]);
            for i in 0..d {
                out[i] = out[i] + shift[i];
            }
        }
        Ok(out)
    }

    /// E_0^Q[X_t] = g_t' (A_t + sum_{u<=t} B_{t,u} lambda_u), t = 1..=T.
    pub fn mean_flows_q(&self) -> Result<Vec<S>> {
        (1..=self.horizon())
            .map(|t| {
                let mut mean = self.a[t - 1].clone();
                let shift = self.measure_shift(0, t)?;
                for i in 0..mean.len() {
                    mean[i] = mean[i] + shift[i];
                }
                Ok(linalg::dot(&self.g[t - 1], &mean))
            })
            .collect()
    }

    /// One joint path of flows (X_1, ..., X_T) from innovations `eps`
    /// (`eps[s-1]` is eps_s). Under Q, shift each eps_s by lambda_s first.
    pub fn flows_from_innovations(&self, eps: &[Vec<S>]) -> Vec<S> {
        let d = self.dim();
        (1..=self.horizon())
            .map(|t| {
                let mut state = self.a[t - 1].clone();
                for s in 1..=t {
                    let inc = mat_vec(&self.b[t - 1][s - 1], &eps[s - 1]);
                    for i in 0..d {
                        state[i] = state[i] + inc[i];
                    }
                }
                linalg::dot(&self.g[t - 1], &state)
            })
            .collect()
    }
}

/// E[(a + sigma Z)_+] for Z standard normal:
/// a Phi(a/sigma) + sigma phi(a/sigma), or (a)_+ when sigma = 0.
pub fn positive_part_gaussian<S: Real>(a: S, sigma: S) -> S {
    debug_assert!(sigma >= S::zero());
    if sigma <= S::zero() {
        a.max(S::zero())
    } else {
        let z = a / sigma;
        a * normal::cdf(z) + sigma * normal::pdf(z)
    }
}

/// The deterministic per-period schedule driving the closed forms:
/// w_s = sum_{j>=s} B_{j,s}' g_j, sigma_s = |w_s|, delta_s = w_s . lambda_s.
#[derive(Debug, Clone)]
pub struct Schedule<S> {
    /// sigma_s for s = 1..=T (index s-1).
    pub sigma: Vec<S>,
    /// delta_s for s = 1..=T.
    pub delta: Vec<S>,
}

pub fn schedule<S: Real>(model: &GaussianModel<S>) -> Result<Schedule<S>> {
    model.validate()?;
    let horizon = model.horizon();
    let d = model.dim();
    let mut sigma = Vec::with_capacity(horizon);
    let mut delta = Vec::with_capacity(horizon);
    for s in 1..=horizon {
        let mut w = vec![S::zero(); d];
        for j in s..=horizon {
            let block = &model.b[j - 1][s - 1];
            for col in 0..d {
                let mut acc = S::zero();
                for row in 0..d {
                    acc = acc + block[row][col] * model.g[j - 1][row];
                }
                w[col] = w[col] + acc;
            }
        }
        sigma.push(linalg::norm2(&w));
        delta.push(linalg::dot(&w, &model.lambda[s - 1]));
    }
    Ok(Schedule { sigma, delta })
}

/// Closed-form valuation of a Gaussian model.
#[derive(Debug, Clone)]
pub struct GaussianValuation<S> {
    pub schedule: Schedule<S>,
    /// C_t for t = 0..T, deterministic.
    pub c: Vec<S>,
    /// K^Q_t for t = 0..=T: the deterministic part of V_t on top of
    /// E_t^Q[sum_{s>t} X_s].
    pub k_q: Vec<S>,
    /// K^P_t: same but with P-expectations of the flows.
    pub k_p: Vec<S>,
    /// E_0^Q[X_t] for t = 1..=T.
    pub mean_flows_q: Vec<S>,
    /// V_0 = sum_t E_0^Q[X_t] + K^Q_0.
    pub v0: S,
}

/// C_t = pos_part(sigma_{t+1} r0 - delta_{t+1}, sigma_{t+1}),
/// K^Q_t = sum_{s>t} (sigma_s r0 - delta_s - C-term_s),
/// K^P_t = sum_{s>t} (sigma_s r0 - C-term_s).
pub fn gaussian_valuation<S: Real>(
    model: &GaussianModel<S>,
    spec: &RiskMeasureSpec<S>,
) -> Result<GaussianValuation<S>> {
    spec.validate()?;
    let sched = schedule(model)?;
    let r0 = spec.r0()?;
    let horizon = model.horizon();

    let c: Vec<S> = (0..horizon)
        .map(|t| positive_part_gaussian(sched.sigma[t] * r0 - sched.delta[t], sched.sigma[t]))
        .collect();
    let mut k_q = vec![S::zero(); horizon + 1];
    let mut k_p = vec![S::zero(); horizon + 1];
    for t in (0..horizon).rev() {
        k_q[t] = k_q[t + 1] + sched.sigma[t] * r0 - sched.delta[t] - c[t];
        k_p[t] = k_p[t + 1] + sched.sigma[t] * r0 - c[t];
    }
    let mean_flows_q = model.mean_flows_q()?;
    let v0 = mean_flows_q.iter().copied().sum::<S>() + k_q[0];
    Ok(GaussianValuation { schedule: sched, c, k_q, k_p, mean_flows_q, v0 })
}

/// Hedge weights found by minimizing the frictional cost of capital.
#[derive(Debug, Clone)]
pub struct OptimalReplication<S> {
    /// Portfolio vector: coordinate 0 pinned to 1 (the liability), the next
    /// `m` coordinates are hedge weights, the rest zero.
    pub g: Vec<S>,
    /// Minimized objective sum_t pos_part(sigma_t r0 - g'S_t lambda_t, sigma_t).
    pub objective: S,
    /// K^Q_0 of the residual at the optimum.
    pub k_q0: S,
    /// L_0 = sum_t E_0^Q[X^o_t] + K^Q_0.
    pub l0: S,
    /// Distinct near-optimal hedge vectors (best first).
    pub ties: Vec<Vec<S>>,
}

/// Minimizes g |-> sum_{t=1}^T pos_part(sigma_t(g) r0 - g'S_t lambda_t,
/// sigma_t(g)) with S_t = sum_{u>=t} B_{u,t}, sigma_t(g) = |S_t' g|, over
/// portfolios with g_1 = 1 and at most `m` hedge coordinates. The liability
/// flow is the first factor coordinate of G_t.
pub fn optimal_replication_g<S: Real>(
    model: &GaussianModel<S>,
    m: usize,
    spec: &RiskMeasureSpec<S>,
) -> Result<OptimalReplication<S>> {
    model.validate()?;
    spec.validate()?;
    let d = model.dim();
    if m + 1 > d {
        return Err(Error::Argument(format!(
            "{m} hedge instruments need factor dimension >= {}, model has {d}",
            m + 1
        )));
    }
    let horizon = model.horizon();
    let r0 = spec.r0()?;

    // S_t = sum_{u>=t} B_{u,t}.
    let s_t: Vec<Mat<S>> = (1..=horizon)
        .map(|t| {
            let mut acc = vec![vec![S::zero(); d]; d];
            for u in t..=horizon {
                let block = &model.b[u - 1][t - 1];
                for i in 0..d {
                    for j in 0..d {
                        acc[i][j] = acc[i][j] + block[i][j];
                    }
                }
            }
            acc
        })
        .collect();

    let embed = |free: &[S]| -> Vec<S> {
        let mut g = vec![S::zero(); d];
        g[0] = S::one();
        g[1..=m].copy_from_slice(free);
        g
    };
    let terms = |g: &[S]| -> Vec<(S, S)> {
        s_t.iter()
            .zip(model.lambda.iter())
            .map(|(st, lam)| {
                let mut w = vec![S::zero(); d];
                for col in 0..d {
                    for row in 0..d {
                        w[col] = w[col] + st[row][col] * g[row];
                    }
                }
                (linalg::norm2(&w), linalg::dot(&w, lam))
            })
            .collect()
    };
    let objective = |free: &[S]| -> S {
        terms(&embed(free))
            .into_iter()
            .map(|(sig, del)| positive_part_gaussian(sig * r0 - del, sig))
            .sum()
    };

    let scale = model
        .g
        .iter()
        .flat_map(|v| v.iter())
        .fold(S::one(), |a, &b| a.max(b.abs()));
    let out = crate::optim::multistart_minimize(
        &objective,
        &vec![S::zero(); m],
        scale * S::of(2.0),
        8,
        1000,
    );

    let g = embed(&out.argmin);
    let k_q0 = terms(&g)
        .into_iter()
        .map(|(sig, del)| {
            sig * r0 - del - positive_part_gaussian(sig * r0 - del, sig)
        })
        .sum::<S>();
    // L_0 needs only the liability's own Q-mean flows: the hedge is priced
    // at market and cancels.
    let mut liability_mean = S::zero();
    for t in 1..=horizon {
        let mut mean = model.a[t - 1].clone();
        let shift = model.measure_shift(0, t)?;
        for i in 0..d {
            mean[i] = mean[i] + shift[i];
        }
        liability_mean = liability_mean + mean[0];
    }
    Ok(OptimalReplication {
        g,
        objective: out.min,
        k_q0,
        l0: liability_mean + k_q0,
        ties: out.ties.into_iter().map(|f| embed(&f)).collect(),
    })
}
