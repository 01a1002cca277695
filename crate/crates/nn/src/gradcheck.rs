//! Central finite-difference verification of analytic gradients.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::NnError;
use crate::graph::{Graph, Var};
use crate::tensor::ParameterStore;

/// Analytic gradients keyed by parameter name.
pub type GradientMap = BTreeMap<String, Vec<f64>>;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Coordinates checked per parameter tensor; tensors at or below this
    /// size are checked exhaustively.
    pub coords_per_param: usize,
    /// Lower bound on the relative-error denominator. Central differences
    /// at `step = 1e-6` carry roughly `1e-10·|loss|` of roundoff, so exactly
    /// zero gradients would otherwise report huge relative errors.
    pub denom_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-6,
            coords_per_param: 8,
            denom_floor: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter, flat index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub coords_checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

fn eval_loss<F, E>(store: &ParameterStore, f: &F) -> std::result::Result<f64, E>
where
    F: Fn(&mut Graph, &ParameterStore) -> std::result::Result<Var, E>,
{
    let mut g = Graph::new();
    let loss = f(&mut g, store)?;
    Ok(g.scalar(loss))
}

/// Analytic gradients of `f` at `store` via one backward pass.
///
/// `f` may use any error type that absorbs [`NnError`](crate::NnError), so
/// callers can check their own model-building code.
pub fn analytic_gradients<F, E>(store: &ParameterStore, f: &F) -> std::result::Result<GradientMap, E>
where
    F: Fn(&mut Graph, &ParameterStore) -> std::result::Result<Var, E>,
    E: From<NnError>,
{
    let mut work = store.clone();
    work.zero_grads();
    let mut g = Graph::new();
    let loss = f(&mut g, &work)?;
    g.backward(loss, &mut work)?;
    Ok(work
        .iter()
        .map(|(name, t)| {
            let grad = t.grad.clone().unwrap_or_else(|| vec![0.0; t.numel()]);
            (name.clone(), grad)
        })
        .collect())
}

/// Compares `analytic` against central differences of `f`.
pub fn compare_gradients<F, E>(
    store: &ParameterStore,
    analytic: &GradientMap,
    f: F,
    opts: GradCheckOptions,
) -> std::result::Result<GradCheckReport, E>
where
    F: Fn(&mut Graph, &ParameterStore) -> std::result::Result<Var, E>,
    E: From<NnError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = store.clone();
    let mut report = GradCheckReport::default();
    let names: Vec<String> = store.names().cloned().collect();
    for name in names {
        let n = store.get(&name)?.numel();
        let coords: Vec<usize> = if n <= opts.coords_per_param {
            (0..n).collect()
        } else {
            let mut c = sample(&mut rng, n, opts.coords_per_param).into_vec();
            c.sort_unstable();
            c
        };
        let grad = analytic.get(&name);
        for i in coords {
            let orig = store.get(&name)?.values[i];
            work.get_mut(&name)?.values[i] = orig + opts.step;
            let plus = eval_loss(&work, &f)?;
            work.get_mut(&name)?.values[i] = orig - opts.step;
            let minus = eval_loss(&work, &f)?;
            work.get_mut(&name)?.values[i] = orig;

            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grad.map_or(0.0, |g| g[i]);
            let denom = a.abs().max(numeric.abs()).max(opts.denom_floor);
            let rel = (a - numeric).abs() / denom;
            report.coords_checked += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((name.clone(), i, a, numeric));
            }
        }
    }
    Ok(report)
}

/// Backward-pass gradients of `f` versus central finite differences, over a
/// deterministic sample of coordinates of every parameter in `store`.
pub fn gradient_check<F, E>(
    store: &ParameterStore,
    f: F,
    opts: GradCheckOptions,
) -> std::result::Result<GradCheckReport, E>
where
    F: Fn(&mut Graph, &ParameterStore) -> std::result::Result<Var, E>,
    E: From<NnError>,
{
    let analytic = analytic_gradients(store, &f)?;
    compare_gradients(store, &analytic, f, opts)
}
