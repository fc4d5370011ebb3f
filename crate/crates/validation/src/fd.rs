//! Central finite-difference gradient checks.

use gradcell::nn::Mlp;
use gradcell::rng::stream;
use gradcell::topopt::{
    compliance, deformation_objective, sensitivities, solve_macro, DesignField, MacroModel,
    Objective,
};
use rand::Rng;

/// Worst relative error between `analytic` and central differences of `loss` over
/// `coords` randomly chosen parameters. NaN when the analytic gradient is zero.
pub fn mlp_worst(
    net: &Mlp,
    analytic: &[f64],
    loss: impl Fn(&Mlp) -> f64,
    coords: usize,
    seed: u64,
) -> f64 {
    let mut rng = stream(seed, 0);
    let base = net.params_flat();
    let gmax = analytic.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if gmax == 0.0 || analytic.len() != base.len() {
        return f64::NAN;
    }
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let k = rng.random_range(0..base.len());
        let h = 1e-5 * base[k].abs().max(1.0);
        let eval = |delta: f64| {
            let mut p = base.clone();
            p[k] += delta;
            let mut n = net.clone();
            n.set_params_flat(&p);
            loss(&n)
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let err = (fd - analytic[k]).abs() / fd.abs().max(analytic[k].abs()).max(1e-6 * gmax);
        worst = if err.is_finite() {
            worst.max(err)
        } else {
            f64::NAN
        };
    }
    worst
}

fn objective_at(m: &MacroModel, f: &DesignField, obj: &Objective) -> f64 {
    let u = solve_macro(m, f).expect("macro solve");
    match obj {
        Objective::Compliance => compliance(m, f, &u).expect("compliance"),
        Objective::TargetDeformation { targets } => {
            deformation_objective(&u, targets).expect("deformation")
        }
    }
}

/// Worst relative error of the adjoint sensitivities against central differences
/// in every element's `E` and `ν`.
pub fn macro_worst(m: &MacroModel, f: &DesignField, obj: &Objective) -> f64 {
    let u = solve_macro(m, f).expect("macro solve");
    let (de, dnu) = sensitivities(m, f, &u, obj).expect("sensitivities");
    let scale = de.iter().chain(&dnu).fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return f64::NAN;
    }
    let mut worst = 0.0f64;
    for i in 0..f.len() {
        for (which, g) in [(0, de[i]), (1, dnu[i])] {
            let (mut fp, mut fm) = (f.clone(), f.clone());
            let h = if which == 0 {
                1e-5 * f.e[i]
            } else {
                1e-5 * f.nu[i]
            };
            if which == 0 {
                fp.e[i] += h;
                fm.e[i] -= h;
            } else {
                fp.nu[i] += h;
                fm.nu[i] -= h;
            }
            let fd = (objective_at(m, &fp, obj) - objective_at(m, &fm, obj)) / (2.0 * h);
            worst = worst.max((g - fd).abs() / fd.abs().max(1e-3 * scale));
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use gradcell::topopt::cantilever;

    #[test]
    fn compliance_check_on_a_tiny_cantilever() {
        let (m, obj) = cantilever(3, 2, 10.0).build().unwrap();
        let f = DesignField {
            nx: 3,
            ny: 2,
            e: vec![40.0, 60.0, 80.0, 50.0, 70.0, 30.0],
            nu: vec![0.25, 0.3, 0.28, 0.26, 0.31, 0.27],
        };
        assert!(macro_worst(&m, &f, &obj) <= 1e-4);
    }
}
