//! Feature maps `phi: S x A -> R^d`, all scaled so `||phi||_2 <= 1`.
//!
//! Random Fourier features approximate the RBF kernel; because of the extra
//! `1/sqrt(2)` scaling that pins the norm at 1 deterministically, the inner
//! product `phi(x) . phi(y)` approximates *half* the RBF kernel value.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::matio;
use crate::mdp::{Action, State};
use crate::stream::StreamSeed;

/// Default output dimension for random Fourier features.
pub const DEFAULT_RFF_DIM: usize = 20;

#[derive(Clone)]
pub enum FeatureMap {
    Rff(RffFeatures),
    OneHot { n_states: usize, n_actions: usize },
    Polynomial(PolynomialFeatures),
    Custom(CustomFeatures),
}

#[derive(Clone)]
pub struct RffFeatures {
    /// Frequency matrix, `d x input_dim`.
    pub omega: DMatrix<f64>,
    /// Phase offsets, length `d`.
    pub phase: DVector<f64>,
    pub bandwidth: f64,
}

#[derive(Clone)]
pub struct PolynomialFeatures {
    pub degree: usize,
    /// Declared input box; inputs are clamped into it before evaluation.
    pub low: DVector<f64>,
    pub high: DVector<f64>,
    /// Monomial exponent tuples, including the constant term.
    exponents: Vec<Vec<usize>>,
    /// `1 / sup_box ||monomials||_2`, so the map stays inside the unit ball.
    scale: f64,
}

#[derive(Clone)]
pub struct CustomFeatures {
    pub dim: usize,
    /// Writes the features into a preallocated buffer of length `dim`.
    #[allow(clippy::type_complexity)]
    pub f: Arc<dyn Fn(&State, &Action, &mut DVector<f64>) + Send + Sync>,
}

/// Random Fourier features for the RBF kernel with the given bandwidth:
/// `phi(x) = cos(Omega x + b) / sqrt(d)` with `Omega` rows drawn from
/// `N(0, I / bandwidth^2)` and phases uniform on `[0, 2*pi)`.
pub fn rff_new(input_dim: usize, d: usize, bandwidth: f64, seed: u64) -> Result<FeatureMap> {
    if input_dim == 0 || d == 0 {
        return Err(Error::invalid("rff dimensions must be positive"));
    }
    if bandwidth <= 0.0 {
        return Err(Error::invalid("rff bandwidth must be positive"));
    }
    let mut rng = StreamSeed::new(seed).labeled("rff").rng();
    let normal = Normal::new(0.0, 1.0 / bandwidth).map_err(|e| Error::Numeric(e.to_string()))?;
    let omega = DMatrix::from_fn(d, input_dim, |_, _| normal.sample(&mut rng));
    let phase = DVector::from_fn(d, |_, _| rng.random_range(0.0..2.0 * PI));
    Ok(FeatureMap::Rff(RffFeatures {
        omega,
        phase,
        bandwidth,
    }))
}

/// RFF over affinely rescaled inputs `(x - shift) / scale` (per coordinate).
/// The rescaling folds into the frequency matrix and phases, so the result is
/// an ordinary RFF map.
pub fn rff_new_scaled(
    d: usize,
    bandwidth: f64,
    shift: &DVector<f64>,
    scale: &DVector<f64>,
    seed: u64,
) -> Result<FeatureMap> {
    if scale.iter().any(|s| *s <= 0.0) {
        return Err(Error::invalid("rff input scales must be positive"));
    }
    let map = rff_new(shift.len(), d, bandwidth, seed)?;
    let FeatureMap::Rff(mut rff) = map else {
        unreachable!()
    };
    for j in 0..scale.len() {
        let col = rff.omega.column(j) / scale[j];
        rff.omega.set_column(j, &col);
    }
    rff.phase -= &rff.omega * shift;
    Ok(FeatureMap::Rff(rff))
}

/// One-hot encoding of a tabular state-action pair.
pub fn one_hot(
    s_index: usize,
    a_index: usize,
    n_states: usize,
    n_actions: usize,
) -> Result<DVector<f64>> {
    if s_index >= n_states || a_index >= n_actions {
        return Err(Error::invalid(format!(
            "index ({s_index},{a_index}) out of range for {n_states}x{n_actions}"
        )));
    }
    let mut v = DVector::zeros(n_states * n_actions);
    v[s_index * n_actions + a_index] = 1.0;
    Ok(v)
}

fn monomial_exponents(n_vars: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, var: usize, left: usize) {
        if var == cur.capacity() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=left {
            cur.push(e);
            rec(out, cur, var + 1, left - e);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n_vars);
    rec(&mut out, &mut cur, 0, degree);
    out
}

pub fn polynomial_new(degree: usize, low: DVector<f64>, high: DVector<f64>) -> Result<FeatureMap> {
    if low.len() != high.len() || low.is_empty() {
        return Err(Error::invalid("polynomial box dimensions inconsistent"));
    }
    if low.iter().zip(high.iter()).any(|(l, h)| l >= h) {
        return Err(Error::invalid("polynomial box must have low < high"));
    }
    let exponents = monomial_exponents(low.len(), degree);
    // Per-monomial sup over the box, combined into a norm bound.
    let mut sq = 0.0;
    for exps in &exponents {
        let mut bound = 1.0;
        for (i, e) in exps.iter().enumerate() {
            bound *= low[i].abs().max(high[i].abs()).powi(*e as i32);
        }
        sq += bound * bound;
    }
    Ok(FeatureMap::Polynomial(PolynomialFeatures {
        degree,
        low,
        high,
        exponents,
        scale: 1.0 / sq.sqrt(),
    }))
}

impl FeatureMap {
    pub fn custom<F>(dim: usize, f: F) -> FeatureMap
    where
        F: Fn(&State, &Action) -> DVector<f64> + Send + Sync + 'static,
    {
        FeatureMap::Custom(CustomFeatures {
            dim,
            f: Arc::new(move |s, a, out| out.copy_from(&f(s, a))),
        })
    }

    /// Allocation-free custom map: the closure writes into the output buffer.
    pub fn custom_into<F>(dim: usize, f: F) -> FeatureMap
    where
        F: Fn(&State, &Action, &mut DVector<f64>) + Send + Sync + 'static,
    {
        FeatureMap::Custom(CustomFeatures {
            dim,
            f: Arc::new(f),
        })
    }

    /// Evaluates into a preallocated buffer; the custom kind is
    /// allocation-free, the others fall back to `eval`.
    pub fn eval_into(&self, state: &State, action: &Action, out: &mut DVector<f64>) -> Result<()> {
        match self {
            FeatureMap::Custom(c) => {
                if out.len() != c.dim {
                    return Err(Error::Dimension {
                        context: "feature buffer",
                        expected: c.dim,
                        found: out.len(),
                    });
                }
                (c.f)(state, action, out);
                Ok(())
            }
            _ => {
                let v = self.eval(state, action)?;
                if out.len() != v.len() {
                    return Err(Error::Dimension {
                        context: "feature buffer",
                        expected: v.len(),
                        found: out.len(),
                    });
                }
                out.copy_from(&v);
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Rff(r) => r.omega.nrows(),
            FeatureMap::OneHot {
                n_states,
                n_actions,
            } => n_states * n_actions,
            FeatureMap::Polynomial(p) => p.exponents.len(),
            FeatureMap::Custom(c) => c.dim,
        }
    }

    pub fn eval(&self, state: &State, action: &Action) -> Result<DVector<f64>> {
        match self {
            FeatureMap::Rff(r) => {
                let x = concat_input(state, action)?;
                if x.len() != r.omega.ncols() {
                    return Err(Error::Dimension {
                        context: "rff input",
                        expected: r.omega.ncols(),
                        found: x.len(),
                    });
                }
                let mut z = &r.omega * x + &r.phase;
                let inv = 1.0 / (r.omega.nrows() as f64).sqrt();
                z.apply(|v| *v = v.cos() * inv);
                Ok(z)
            }
            FeatureMap::OneHot {
                n_states,
                n_actions,
            } => one_hot(state.as_index()?, action.as_index()?, *n_states, *n_actions),
            FeatureMap::Polynomial(p) => {
                let x = concat_input(state, action)?;
                if x.len() != p.low.len() {
                    return Err(Error::Dimension {
                        context: "polynomial input",
                        expected: p.low.len(),
                        found: x.len(),
                    });
                }
                let clamped = DVector::from_fn(x.len(), |i, _| x[i].clamp(p.low[i], p.high[i]));
                let mut out = DVector::zeros(p.exponents.len());
                for (j, exps) in p.exponents.iter().enumerate() {
                    let mut v = 1.0;
                    for (i, e) in exps.iter().enumerate() {
                        v *= clamped[i].powi(*e as i32);
                    }
                    out[j] = v * p.scale;
                }
                Ok(out)
            }
            FeatureMap::Custom(c) => {
                let mut out = DVector::zeros(c.dim);
                (c.f)(state, action, &mut out);
                Ok(out)
            }
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        match self {
            FeatureMap::Rff(r) => {
                s.push_str("rff\n");
                s.push_str(&format!("{}\n", matio::format_f64(r.bandwidth)));
                matio::write_matrix(&mut s, &r.omega);
                matio::write_matrix(&mut s, &DMatrix::from_row_slice(1, r.phase.len(), r.phase.as_slice()));
            }
            FeatureMap::OneHot {
                n_states,
                n_actions,
            } => {
                s.push_str("one_hot\n");
                s.push_str(&format!("{n_states} {n_actions}\n"));
            }
            FeatureMap::Polynomial(p) => {
                s.push_str("polynomial\n");
                s.push_str(&format!("{}\n", p.degree));
                matio::write_matrix(&mut s, &DMatrix::from_row_slice(1, p.low.len(), p.low.as_slice()));
                matio::write_matrix(&mut s, &DMatrix::from_row_slice(1, p.high.len(), p.high.as_slice()));
            }
            FeatureMap::Custom(_) => {
                return Err(Error::UnsupportedModel("custom feature maps do not serialize"))
            }
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<FeatureMap> {
        let mut lines = text.lines();
        let kind = lines
            .next()
            .ok_or_else(|| Error::Parse("empty feature map".into()))?;
        match kind.trim() {
            "rff" => {
                let bw: f64 = lines
                    .next()
                    .ok_or_else(|| Error::Parse("missing bandwidth".into()))?
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse("bad bandwidth".into()))?;
                let omega = matio::read_matrix(&mut lines)?;
                let phase_m = matio::read_matrix(&mut lines)?;
                let phase = DVector::from_row_slice(phase_m.row(0).transpose().as_slice());
                if phase.len() != omega.nrows() {
                    return Err(Error::Parse("phase length mismatch".into()));
                }
                Ok(FeatureMap::Rff(RffFeatures {
                    omega,
                    phase,
                    bandwidth: bw,
                }))
            }
            "one_hot" => {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Parse("missing one_hot sizes".into()))?;
                let mut it = line.split_whitespace();
                let n_states = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse("bad n_states".into()))?;
                let n_actions = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse("bad n_actions".into()))?;
                Ok(FeatureMap::OneHot {
                    n_states,
                    n_actions,
                })
            }
            "polynomial" => {
                let degree = lines
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| Error::Parse("bad degree".into()))?;
                let low_m = matio::read_matrix(&mut lines)?;
                let high_m = matio::read_matrix(&mut lines)?;
                polynomial_new(
                    degree,
                    DVector::from_row_slice(low_m.row(0).transpose().as_slice()),
                    DVector::from_row_slice(high_m.row(0).transpose().as_slice()),
                )
            }
            other => Err(Error::Parse(format!("unknown feature map kind {other:?}"))),
        }
    }
}

fn concat_input(state: &State, action: &Action) -> Result<DVector<f64>> {
    let s = state.as_vector()?;
    let a = action.as_vector()?;
    let mut x = DVector::zeros(s.len() + a.len());
    x.rows_mut(0, s.len()).copy_from(s);
    x.rows_mut(s.len(), a.len()).copy_from(a);
    Ok(x)
}
