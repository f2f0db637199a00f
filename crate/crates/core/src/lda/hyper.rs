//! Fixed-point Dirichlet hyperparameter updates (Minka).
//!
//! For the document-topic prior:
//!
//! `α_k ← α_k · Σ_d [Ψ(n_dk + α_k) − Ψ(α_k)] / Σ_d [Ψ(N_d + Σα) − Ψ(Σα)]`
//!
//! Terms with a zero count vanish, so the sums skip them.

use statrs::function::gamma::digamma;

use super::{BetaPrior, TopicModelConfig, TopicModelState};

const FLOOR: f64 = 1e-8;
const MAX_ROUNDS: usize = 100;
const TOLERANCE: f64 = 1e-6;

/// One fixed-point step for an asymmetric `α`. `n_dk` is `D x K` row-major.
/// Returns `None` when the update is not finite (e.g. every document empty).
pub fn minka_alpha_step(alpha: &[f64], n_dk: &[u32], doc_lens: &[usize]) -> Option<Vec<f64>> {
    let kk = alpha.len();
    let sum: f64 = alpha.iter().sum();
    let psi_sum = digamma(sum);
    let denom: f64 = doc_lens
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| digamma(n as f64 + sum) - psi_sum)
        .sum();
    if !(denom.is_finite() && denom > 0.0) {
        return None;
    }
    let mut out = Vec::with_capacity(kk);
    for (k, &a) in alpha.iter().enumerate() {
        let psi_a = digamma(a);
        let num: f64 = n_dk
            .chunks_exact(kk)
            .map(|row| row[k])
            .filter(|&n| n > 0)
            .map(|n| digamma(n as f64 + a) - psi_a)
            .sum();
        let next = a * num / denom;
        if !next.is_finite() {
            return None;
        }
        out.push(next.max(FLOOR));
    }
    Some(out)
}

/// Iterates [`minka_alpha_step`] until the largest relative change drops
/// below 1e-6, or for at most 100 rounds.
pub fn optimize_alpha(alpha: &[f64], n_dk: &[u32], doc_lens: &[usize]) -> Option<Vec<f64>> {
    let mut current = alpha.to_vec();
    for _ in 0..MAX_ROUNDS {
        let next = minka_alpha_step(&current, n_dk, doc_lens)?;
        let change = next
            .iter()
            .zip(&current)
            .map(|(n, c)| ((n - c) / c).abs())
            .fold(0.0, f64::max);
        current = next;
        if change < TOLERANCE {
            break;
        }
    }
    Some(current)
}

/// One fixed-point step for a symmetric `β` over the `V x K` word-topic counts.
pub fn minka_beta_step(beta: f64, n_xk: &[u32], n_k: &[u64], vocab_size: usize) -> Option<f64> {
    let v = vocab_size as f64;
    let psi_b = digamma(beta);
    let psi_vb = digamma(v * beta);
    let num: f64 = n_xk
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| digamma(n as f64 + beta) - psi_b)
        .sum();
    let denom: f64 = v * n_k
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| digamma(n as f64 + v * beta) - psi_vb)
        .sum::<f64>();
    if !(denom.is_finite() && denom > 0.0) {
        return None;
    }
    let next = beta * num / denom;
    next.is_finite().then(|| next.max(FLOOR))
}

pub fn optimize_beta(beta: f64, n_xk: &[u32], n_k: &[u64], vocab_size: usize) -> Option<f64> {
    let mut current = beta;
    for _ in 0..MAX_ROUNDS {
        let next = minka_beta_step(current, n_xk, n_k, vocab_size)?;
        let change = ((next - current) / current).abs();
        current = next;
        if change < TOLERANCE {
            break;
        }
    }
    Some(current)
}

/// Updates `config.alpha` and, when symmetric, `config.beta` in place.
/// A non-finite update leaves the parameter unchanged and logs a warning.
/// Returns true if anything changed.
pub fn optimize_hyperparameters(state: &TopicModelState, config: &mut TopicModelConfig, doc_lens: &[usize]) -> bool {
    let mut changed = false;
    match optimize_alpha(&config.alpha, &state.n_dk, doc_lens) {
        Some(a) => {
            changed |= a != config.alpha;
            config.alpha = a;
        }
        None => log::warn!("alpha update not finite; keeping {:?}", config.alpha),
    }
    if let BetaPrior::Symmetric(b) = config.beta {
        match optimize_beta(b, &state.n_xk, &state.n_k, state.vocab_size) {
            Some(nb) => {
                changed |= nb != b;
                config.beta = BetaPrior::Symmetric(nb);
            }
            None => log::warn!("beta update not finite; keeping {b}"),
        }
    }
    changed
}
