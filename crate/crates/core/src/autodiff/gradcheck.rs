use alloc::vec::Vec;

use super::{Tape, Tensor, Var};
use crate::Result;

/// Outcome of a central finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Number of scalar coordinates perturbed.
    pub probes: usize,
    pub max_rel_err: f64,
    /// Fraction of coordinates with relative error below `1e-4`.
    pub frac_below_1e4: f64,
}

/// `|a - n| / max(|a|, |n|, 1e-6)`; the floor keeps vanishing gradients from
/// producing meaningless ratios.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compare the tape gradient of `loss_fn` with central differences
/// `(f(x+h) - f(x-h)) / 2h` at every coordinate of every tensor in `params`.
///
/// `loss_fn` receives a fresh tape and the parameter variables (in the order
/// of `params`) and must return a scalar loss. `params` is restored on exit.
pub fn check_gradients<F>(params: &mut [Tensor], h: f64, mut loss_fn: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut eval = |params: &[Tensor], want_grad: bool| -> Result<(f64, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        let loss = loss_fn(&mut tape, &vars)?;
        let value = tape.value(loss).data()[0];
        if !want_grad {
            return Ok((value, Vec::new()));
        }
        let grads = tape.backward(loss)?;
        Ok((value, vars.iter().map(|&v| grads.get(v)).collect()))
    };

    let (_, analytic) = eval(params, true)?;
    let mut probes = 0;
    let mut below = 0;
    let mut max_rel_err = 0.0f64;
    for p in 0..params.len() {
        for k in 0..params[p].len() {
            let orig = params[p].data()[k];
            params[p].data_mut()[k] = orig + h;
            let plus = eval(params, false)?.0;
            params[p].data_mut()[k] = orig - h;
            let minus = eval(params, false)?.0;
            params[p].data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[p].data()[k], numeric);
            max_rel_err = max_rel_err.max(err);
            if err < 1e-4 {
                below += 1;
            }
            probes += 1;
        }
    }
    Ok(GradCheckReport {
        probes,
        max_rel_err,
        frac_below_1e4: if probes == 0 {
            1.0
        } else {
            below as f64 / probes as f64
        },
    })
}
