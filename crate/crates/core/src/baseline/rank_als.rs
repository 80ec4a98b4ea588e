//! Alternating least squares on the pairwise squared ranking loss.
//!
//! Every training rating is an implicit positive (`r = 1`), everything else
//! is `r = 0`, and for each user the loss sums over all (rated `i`, any `j`)
//! pairs:
//!
//! ```text
//! L = Σ_u Σ_{i ∈ I_u} Σ_j ((p_u·q_i − p_u·q_j) − (r_ui − r_uj))²
//!     + reg · (Σ_u |p_u|² + Σ_j |q_j|²)
//! ```
//!
//! The user step solves each `p_u` exactly from catalog-wide sums. The item
//! step visits items in order and solves each `q_k` exactly with all other
//! factors held at their current values, keeping running aggregates so a
//! sweep costs `O(nnz·f² + |V|·f³)`. Both steps are exact block minimizations
//! of a convex quadratic, so `L` never increases.

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Scorer;
use crate::error::{Error, Result};
use crate::ids::{ItemId, UserId};
use crate::ingest::RatingsTable;
use crate::linalg::{add_outer, axpy, dot, mat_vec, solve_spd};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Hyperparams {
    pub factors: usize,
    pub regularization: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            factors: 10,
            regularization: 0.01,
            iterations: 20,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel<T> {
    pub(crate) n_users: usize,
    pub(crate) n_items: usize,
    pub(crate) factors: usize,
    pub(crate) user_factors: Vec<T>,
    pub(crate) item_factors: Vec<T>,
    // items with at least one training rating; only these are recommendable
    pub(crate) observed: Vec<bool>,
    pub(crate) hyperparams: Hyperparams,
}

impl<T: Scalar> FactorModel<T> {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn user_vector(&self, user: UserId) -> &[T] {
        let f = self.factors;
        &self.user_factors[user.index() * f..(user.index() + 1) * f]
    }

    pub fn item_vector(&self, item: ItemId) -> &[T] {
        let f = self.factors;
        &self.item_factors[item.index() * f..(item.index() + 1) * f]
    }

    pub fn user_factors(&self) -> &[T] {
        &self.user_factors
    }

    pub fn item_factors(&self) -> &[T] {
        &self.item_factors
    }

    pub fn is_observed(&self, item: ItemId) -> bool {
        self.observed.get(item.index()).copied().unwrap_or(false)
    }

    pub fn score(&self, user: UserId, item: ItemId) -> T {
        dot(self.user_vector(user), self.item_vector(item))
    }

    fn all_finite(&self) -> bool {
        self.user_factors
            .iter()
            .chain(&self.item_factors)
            .all(|v| v.is_finite())
    }
}

impl<T: Scalar> Scorer<T> for FactorModel<T> {
    fn n_users(&self) -> usize {
        self.n_users
    }

    fn n_items(&self) -> usize {
        self.n_items
    }

    fn is_eligible(&self, item: ItemId) -> bool {
        self.is_observed(item)
    }

    fn score_items(&self, user: UserId) -> Result<Vec<T>> {
        if user.index() >= self.n_users {
            return Err(Error::UnknownUser(user));
        }
        let p = self.user_vector(user);
        Ok(self
            .item_factors
            .chunks_exact(self.factors)
            .map(|q| dot(p, q))
            .collect())
    }
}

/// Training outcome: the model plus the objective after initialization and
/// after every half step (user step, item step, user step, ...).
#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub model: FactorModel<T>,
    pub objective: Vec<f64>,
}

/// Summed pairwise loss plus the ridge term, evaluated in `f64`.
pub fn objective<T: Scalar>(model: &FactorModel<T>, train: &RatingsTable) -> f64 {
    let n = model.n_items as f64;
    let loss: f64 = (0..model.n_users)
        .into_par_iter()
        .map(|u| {
            let user = UserId(u as u32);
            let ratings = train.user_ratings(user);
            if ratings.is_empty() {
                return 0.0;
            }
            let scores: Vec<f64> = model
                .score_items(user)
                .expect("user in range")
                .into_iter()
                .map(Scalar::as_f64)
                .collect();
            let c = ratings.len() as f64;
            let mut rated = vec![false; model.n_items];
            let (mut pos_sum, mut pos_sq) = (0.0, 0.0);
            for r in ratings {
                rated[r.item.index()] = true;
                let s = scores[r.item.index()];
                pos_sum += s;
                pos_sq += s * s;
            }
            // t_j = s_j + 1 − r_j, and Σ_i Σ_j (s_i − t_j)² expands to the sums below
            let (mut t_sum, mut t_sq) = (0.0, 0.0);
            for (j, &s) in scores.iter().enumerate() {
                let t = if rated[j] { s } else { s + 1.0 };
                t_sum += t;
                t_sq += t * t;
            }
            n * pos_sq - 2.0 * pos_sum * t_sum + c * t_sq
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    let norm: f64 = model
        .user_factors
        .iter()
        .chain(&model.item_factors)
        .map(|v| v.as_f64() * v.as_f64())
        .sum();
    loss + model.hyperparams.regularization * norm
}

pub fn train<T: Scalar>(train: &RatingsTable, hyperparams: &Hyperparams) -> Result<FactorModel<T>> {
    train_with_report(train, hyperparams).map(|r| r.model)
}

pub fn train_with_report<T: Scalar>(
    table: &RatingsTable,
    hyperparams: &Hyperparams,
) -> Result<TrainReport<T>> {
    let f = hyperparams.factors;
    if f == 0 {
        return Err(Error::Config("latent dimension must be at least 1".into()));
    }
    if table.is_empty() {
        return Err(Error::Config("cannot train on an empty table".into()));
    }
    if !(hyperparams.regularization >= 0.0 && hyperparams.regularization.is_finite()) {
        return Err(Error::Config(format!(
            "regularization must be finite and non-negative, got {}",
            hyperparams.regularization
        )));
    }
    let (nu, ni) = (table.n_users(), table.n_items());
    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    let scale = 0.1 / (f as f64).sqrt();
    let mut init = |len: usize| -> Vec<T> {
        (0..len)
            .map(|_| T::of(rng.gen_range(-1.0..1.0) * scale))
            .collect()
    };
    let user_factors = init(nu * f);
    let item_factors = init(ni * f);
    let mut observed = vec![false; ni];
    for r in table.ratings() {
        observed[r.item.index()] = true;
    }
    let mut model = FactorModel {
        n_users: nu,
        n_items: ni,
        factors: f,
        user_factors,
        item_factors,
        observed,
        hyperparams: *hyperparams,
    };

    let item_users = item_user_index(table);
    let mut trace = vec![objective(&model, table)];
    info!(
        "rank-als: f={f} reg={} initial objective {:.6e}",
        hyperparams.regularization, trace[0]
    );
    for iteration in 1..=hyperparams.iterations {
        user_step(&mut model, table);
        trace.push(objective(&model, table));
        item_step(&mut model, table, &item_users);
        if !model.all_finite() {
            return Err(Error::NonFinite { iteration });
        }
        let value = objective(&model, table);
        trace.push(value);
        debug!("rank-als: sweep {iteration} objective {value:.6e}");
    }
    info!("rank-als: final objective {:.6e}", trace[trace.len() - 1]);
    Ok(TrainReport {
        model,
        objective: trace,
    })
}

fn item_user_index(table: &RatingsTable) -> Vec<Vec<UserId>> {
    let mut index = vec![Vec::new(); table.n_items()];
    for r in table.ratings() {
        index[r.item.index()].push(r.user);
    }
    index
}

/// Catalog-wide Σ_j q_j and Σ_j q_j q_jᵀ.
fn item_moments<T: Scalar>(model: &FactorModel<T>) -> (Vec<T>, Vec<T>) {
    let f = model.factors;
    let mut sum = vec![T::zero(); f];
    let mut second = vec![T::zero(); f * f];
    for q in model.item_factors.chunks_exact(f) {
        axpy(&mut sum, q, T::one());
        add_outer(&mut second, q, q, T::one());
    }
    (sum, second)
}

pub(crate) fn user_step<T: Scalar>(model: &mut FactorModel<T>, table: &RatingsTable) {
    let f = model.factors;
    let n = T::of_count(model.n_items);
    let reg = T::of(model.hyperparams.regularization);
    let (q_sum, q_second) = item_moments(model);
    let items = &model.item_factors;
    let solved: Vec<Vec<T>> = (0..model.n_users)
        .into_par_iter()
        .map(|u| {
            let ratings = table.user_ratings(UserId(u as u32));
            let c = T::of_count(ratings.len());
            let mut pos_sum = vec![T::zero(); f];
            let mut system = q_second.iter().map(|&v| v * c).collect::<Vec<_>>();
            for r in ratings {
                let q = &items[r.item.index() * f..(r.item.index() + 1) * f];
                axpy(&mut pos_sum, q, T::one());
                add_outer(&mut system, q, q, n);
            }
            add_outer(&mut system, &pos_sum, &q_sum, -T::one());
            add_outer(&mut system, &q_sum, &pos_sum, -T::one());
            let rhs: Vec<T> = pos_sum
                .iter()
                .zip(&q_sum)
                .map(|(&a, &b)| n * a - c * b)
                .collect();
            let (x, used) = solve_spd(&system, &rhs, reg);
            if used != reg {
                debug!("user {u}: normal equations needed ridge {used}");
            }
            x
        })
        .collect();
    for (u, p) in solved.into_iter().enumerate() {
        model.user_factors[u * f..(u + 1) * f].copy_from_slice(&p);
    }
}

pub(crate) fn item_step<T: Scalar>(
    model: &mut FactorModel<T>,
    table: &RatingsTable,
    item_users: &[Vec<UserId>],
) {
    let f = model.factors;
    let n = T::of_count(model.n_items);
    let reg = T::of(model.hyperparams.regularization);
    let two = T::of(2.0);

    // per-user Σ_{i∈I_u} q_i, kept current as items change
    let mut pos_sums = vec![T::zero(); model.n_users * f];
    // G = Σ_u c_u p_u p_uᵀ and g = Σ_u p_u (p_u·q̄_u − c_u)
    let mut gram = vec![T::zero(); f * f];
    let mut lin = vec![T::zero(); f];
    for u in 0..model.n_users {
        let ratings = table.user_ratings(UserId(u as u32));
        let acc = &mut pos_sums[u * f..(u + 1) * f];
        for r in ratings {
            axpy(
                acc,
                &model.item_factors[r.item.index() * f..(r.item.index() + 1) * f],
                T::one(),
            );
        }
        let p = &model.user_factors[u * f..(u + 1) * f];
        let c = T::of_count(ratings.len());
        add_outer(&mut gram, p, p, c);
        axpy(&mut lin, p, dot(p, acc) - c);
    }
    let (mut q_sum, _) = item_moments(model);

    let mut local = vec![T::zero(); f * f];
    for k in 0..model.n_items {
        let users = &item_users[k];
        local.iter_mut().for_each(|v| *v = T::zero());
        let mut rhs = lin.clone();
        let q_k = model.item_factors[k * f..(k + 1) * f].to_vec();
        for &u in users {
            let p = &model.user_factors[u.index() * f..(u.index() + 1) * f];
            add_outer(&mut local, p, p, T::one());
            axpy(&mut rhs, p, dot(p, &q_sum) - two * dot(p, &q_k) + n);
        }
        let system: Vec<T> = gram
            .iter()
            .zip(&local)
            .map(|(&g, &s)| g + (n - two) * s)
            .collect();
        let (x, used) = solve_spd(&system, &rhs, reg);
        if used != reg {
            debug!("item {k}: normal equations needed ridge {used}");
        }
        let delta: Vec<T> = x.iter().zip(&q_k).map(|(&a, &b)| a - b).collect();
        model.item_factors[k * f..(k + 1) * f].copy_from_slice(&x);
        axpy(&mut q_sum, &delta, T::one());
        axpy(&mut lin, &mat_vec(&local, &delta), T::one());
        for &u in users {
            axpy(
                &mut pos_sums[u.index() * f..(u.index() + 1) * f],
                &delta,
                T::one(),
            );
        }
    }
}
