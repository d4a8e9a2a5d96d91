use crate::design::{BipartiteDesign, OutcomeSet};
use crate::error::{RaschError, Result};
use crate::model::{gradient_into, nll_unchecked, ParamVector};

use super::{inf_norm, validate_inputs, Existence, FitResult, SolverConfig};

/// Default ridge weight `1 / (r + t)`.
pub fn default_lambda(design: &BipartiteDesign) -> f64 {
    1.0 / design.nodes() as f64
}

/// Minimises `l(w) + (lambda / 2) ||w||^2` by fixed-step gradient descent
/// `w <- w - eta (grad l(w) + lambda w)` with `eta = 1 / (lambda + s p)`,
/// started at zero.
///
/// `s` is `max(r, t)` and `p` the observed density `|E| / (r t)`. The
/// objective is strongly convex, so the minimiser always exists; separation
/// only slows convergence, which is why the default iteration budget follows
/// the guaranteed contraction rate `1 - eta * lambda`.
pub fn fit_regularized(
    design: &BipartiteDesign,
    outcomes: &OutcomeSet,
    lambda: Option<f64>,
    config: &SolverConfig,
) -> Result<FitResult> {
    validate_inputs(design, outcomes)?;
    let lambda = lambda.unwrap_or_else(|| default_lambda(design));
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(RaschError::InvalidArgument(format!(
            "ridge weight must be positive and finite, got {lambda}"
        )));
    }
    let tol = match config.tolerance {
        Some(t) if t > 0.0 => t,
        Some(t) => {
            return Err(RaschError::InvalidArgument(format!(
                "tolerance must be positive, got {t}"
            )))
        }
        None => config.tolerance_for(design),
    };

    let n = design.nodes();
    let (r, t) = (design.r(), design.t());
    let p = design.density();
    let scale = r.max(t) as f64;
    let mut eta = 1.0 / (lambda + scale * p);
    // The loss gradient is Lipschitz with constant at most d_max / 2; keep the
    // step inside the stable range 2 / L on very irregular designs.
    let lipschitz = design.max_degree() as f64 / 2.0 + lambda;
    if eta * lipschitz >= 2.0 {
        eta = 1.0 / lipschitz;
    }
    let max_iter = config.max_iterations.unwrap_or_else(|| {
        let contraction = (40.0 / (eta * lambda)).ceil();
        (50 * n).max(contraction.min(1e9) as usize)
    });

    let objective = |w: &[f64]| nll_unchecked(design, outcomes, w) + 0.5 * lambda * w.iter().map(|x| x * x).sum::<f64>();

    let mut w = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut f = objective(&w);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut converged = false;
    let mut residual;
    loop {
        gradient_into(design, outcomes, &w, &mut g);
        for (gk, wk) in g.iter_mut().zip(&w) {
            *gk += lambda * wk;
        }
        residual = inf_norm(&g);
        if residual <= tol {
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        for (wk, gk) in w.iter_mut().zip(&g) {
            *wk -= eta * gk;
        }
        iterations += 1;
        // The objective is only recorded every so often; evaluating it costs
        // as much as a gradient.
        if iterations % 64 == 0 {
            f = objective(&w);
            trace.push(f);
        }
    }
    f = objective(&w);
    if trace.last() != Some(&f) {
        trace.push(f);
    }

    Ok(FitResult {
        theta_hat: ParamVector::from_theta(w, r, config.identification),
        converged,
        iterations,
        grad_inf_norm: residual,
        existence: if converged {
            Existence::Exists
        } else {
            Existence::DivergedSeparation
        },
        nll: f,
        trace,
    })
}
