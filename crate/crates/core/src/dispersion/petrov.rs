//! Concentration decay of partial sums `S_n = Σ_{j ≤ n} Y_j`.
//!
//! For independent summands, `Q(S_n; λ) ≤ B (Σ_{k ≤ n} D(Y_k^s; λ))^{-1/2}`
//! with an absolute constant `B`. The probe tabulates `Q̂(S_n; λ)` from
//! simulated sums and the product `Q̂ · sqrt(Σ D)`, which should stay
//! bounded along the grid.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{empirical_q_sorted, plug_in_d};
use crate::error::{Error, Result};
use crate::increments::{analytic_d, LevelLaw, WaitingTimeModel};
use crate::rng::stream;

pub const MIN_PETROV_SAMPLES: u64 = 100_000;
/// Draws per level for the plug-in `D` of doubly symmetrized summands.
const PLUG_IN_DRAWS: usize = 4096;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumMode {
    /// `Y_j = X_j`; `D(X_j^s)` comes from the closed form or quadrature.
    #[default]
    Raw,
    /// `Y_j = X_j^s`; `D(Y_j^s)` has no closed form and is a plug-in estimate.
    Symmetrized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetrovRow {
    pub n: u64,
    pub q_hat: f64,
    pub d_sum: f64,
    /// `q_hat * sqrt(d_sum)`; absent when `d_sum` is zero.
    pub product: Option<f64>,
    /// The bound says nothing here because `Σ D = 0`.
    pub vacuous: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PetrovTable {
    pub lambda: f64,
    pub samples: u64,
    pub mode: SumMode,
    pub rows: Vec<PetrovRow>,
}

impl PetrovTable {
    /// Largest over smallest product along the grid, when at least two
    /// rows carry a product.
    pub fn spread(&self) -> Option<f64> {
        let products: Vec<f64> = self.rows.iter().filter_map(|r| r.product).collect();
        if products.len() < 2 {
            return None;
        }
        let max = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = products.iter().copied().fold(f64::INFINITY, f64::min);
        Some(max / min)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<W> {
        writeln!(w, "n,q_hat,d_sum,product")?;
        for r in &self.rows {
            match r.product {
                Some(p) => writeln!(w, "{},{},{},{}", r.n, r.q_hat, r.d_sum, p)?,
                None => writeln!(w, "{},{},{},", r.n, r.q_hat, r.d_sum)?,
            }
        }
        Ok(w)
    }
}

/// Copy `i` of the partial sums uses the random stream `i` of `master_seed`;
/// the plug-in `D` for level `k` uses stream `samples + k`.
pub fn petrov_probe(
    model: &WaitingTimeModel,
    n_grid: &[u64],
    lambda: f64,
    samples: u64,
    mode: SumMode,
    master_seed: u64,
) -> Result<PetrovTable> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::argument("n grid must be strictly increasing and start at >= 1"));
    }
    if samples < MIN_PETROV_SAMPLES {
        return Err(Error::argument(format!(
            "the probe needs >= {MIN_PETROV_SAMPLES} samples, got {samples}"
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::argument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let n_max = *n_grid.last().expect("non-empty");
    let laws: Vec<LevelLaw<'_>> = (1..=n_max).map(|j| model.law(j)).collect::<Result<_>>()?;

    let draw = |law: &LevelLaw<'_>, rng: &mut _| match mode {
        SumMode::Raw => law.sample(rng),
        SumMode::Symmetrized => law.sample(rng) - law.sample(rng),
    };

    // sums[i][g]: copy i's partial sum at n_grid[g].
    let sums: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(master_seed, i);
            let mut out = Vec::with_capacity(n_grid.len());
            let mut s = 0.0;
            let mut g = 0;
            for (j, law) in laws.iter().enumerate() {
                s += draw(law, &mut rng);
                if n_grid[g] == j as u64 + 1 {
                    out.push(s);
                    g += 1;
                }
            }
            out
        })
        .collect();

    let d_terms: Vec<f64> = match mode {
        SumMode::Raw => (1..=n_max)
            .map(|k| analytic_d(model, k, lambda))
            .collect::<Result<_>>()?,
        SumMode::Symmetrized => laws
            .par_iter()
            .enumerate()
            .map(|(k, law)| {
                let mut rng = stream(master_seed, samples + k as u64);
                let ys: Vec<f64> = (0..PLUG_IN_DRAWS)
                    .map(|_| draw(law, &mut rng) - draw(law, &mut rng))
                    .collect();
                plug_in_d(&ys, lambda)
            })
            .collect::<Result<_>>()?,
    };

    let mut rows = Vec::with_capacity(n_grid.len());
    let mut column = vec![0.0; samples as usize];
    for (g, &n) in n_grid.iter().enumerate() {
        for (c, copy) in column.iter_mut().zip(&sums) {
            *c = copy[g];
        }
        column.sort_by(f64::total_cmp);
        let q_hat = empirical_q_sorted(&column, lambda)?;
        let d_sum: f64 = d_terms[..n as usize].iter().sum();
        let vacuous = d_sum == 0.0;
        rows.push(PetrovRow {
            n,
            q_hat,
            d_sum,
            product: (!vacuous).then(|| q_hat * d_sum.sqrt()),
            vacuous,
        });
    }
    Ok(PetrovTable {
        lambda,
        samples,
        mode,
        rows,
    })
}
