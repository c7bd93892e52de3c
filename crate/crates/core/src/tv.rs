//! Isotropic total-variation refinement solved by ADMM.
//!
//! Minimises `1/2 ||I - I0||^2 + eta * sum |grad I|` with the split
//! `z = grad I`. The image update solves `(Id + rho * grad^T grad) I = rhs`
//! by conjugate gradients; the split variable is updated by isotropic
//! shrinkage and the scaled dual by a `gamma`-relaxed ascent step.

use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvParams {
    /// Regularisation weight.
    pub eta: f64,
    /// ADMM penalty.
    pub rho: f64,
    /// Dual step relaxation in `(0, 2]`.
    pub gamma: f64,
    pub max_iters: usize,
    /// Relative primal/dual residual tolerance.
    pub tol: f64,
}

impl Default for TvParams {
    fn default() -> Self {
        Self {
            eta: 1e-5,
            rho: 1.0,
            gamma: 1.0,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

impl TvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::param("eta", "must be non-negative"));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::param("rho", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return Err(Error::param("gamma", "must lie in (0, 2]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be positive"));
        }
        Ok(())
    }
}

/// Horizontal and vertical components of a gradient-shaped field.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub height: usize,
    pub width: usize,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
}

impl GradientField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            h: vec![0.0; height * width],
            v: vec![0.0; height * width],
        }
    }

    fn norm_sq(&self) -> f64 {
        self.h.iter().chain(&self.v).map(|x| x * x).sum()
    }
}

/// Forward differences with zero difference on the last column/row.
pub fn gradient_of(data: &[f64], height: usize, width: usize) -> GradientField {
    let mut g = GradientField::zeros(height, width);
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if c + 1 < width {
                g.h[i] = data[i + 1] - data[i];
            }
            if r + 1 < height {
                g.v[i] = data[i + width] - data[i];
            }
        }
    }
    g
}

/// Gradient of a gray image.
pub fn gradient(img: &Image) -> Result<GradientField> {
    if img.planes() != 1 {
        return Err(Error::param("planes", "gradient needs a gray image"));
    }
    Ok(gradient_of(img.data(), img.height(), img.width()))
}

/// Adjoint of [`gradient_of`], i.e. minus the divergence.
pub fn gradient_adjoint(p: &GradientField) -> Vec<f64> {
    let (h, w) = (p.height, p.width);
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut acc = 0.0;
            if c + 1 < w {
                acc -= p.h[i];
            }
            if c > 0 {
                acc += p.h[i - 1];
            }
            if r + 1 < h {
                acc -= p.v[i];
            }
            if r > 0 {
                acc += p.v[i - w];
            }
            out[i] = acc;
        }
    }
    out
}

/// Divergence, `-gradient_adjoint`.
pub fn divergence(p: &GradientField) -> Vec<f64> {
    gradient_adjoint(p).into_iter().map(|x| -x).collect()
}

/// Per-pixel isotropic soft threshold of a vector field.
pub fn shrink_iso(p: &GradientField, t: f64) -> GradientField {
    let mut out = GradientField::zeros(p.height, p.width);
    for i in 0..p.h.len() {
        let m = p.h[i].hypot(p.v[i]);
        if m > t && m > 0.0 {
            let s = (m - t) / m;
            out.h[i] = s * p.h[i];
            out.v[i] = s * p.v[i];
        }
    }
    out
}

/// Isotropic total variation.
pub fn total_variation(data: &[f64], height: usize, width: usize) -> f64 {
    let g = gradient_of(data, height, width);
    g.h.iter().zip(&g.v).map(|(a, b)| a.hypot(*b)).sum()
}

/// `1/2 ||x - x0||^2 + eta * TV(x)`.
pub fn tv_objective(x: &[f64], x0: &[f64], height: usize, width: usize, eta: f64) -> f64 {
    let fit: f64 = x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * fit + eta * total_variation(x, height, width)
}

/// Result of a TV solve.
#[derive(Debug, Clone)]
pub struct TvOutcome {
    pub image: Image,
    pub converged: bool,
    pub iterations: usize,
    /// Objective of the (unclipped) iterate after every iteration.
    pub objective: Vec<f64>,
}

fn apply_system(x: &[f64], h: usize, w: usize, rho: f64) -> Vec<f64> {
    let lap = gradient_adjoint(&gradient_of(x, h, w));
    x.iter().zip(&lap).map(|(a, l)| a + rho * l).collect()
}

/// Conjugate gradients on the SPD system `(Id + rho grad^T grad) x = b`,
/// warm-started from `x`.
fn solve_system(x: &mut [f64], b: &[f64], h: usize, w: usize, rho: f64) {
    let ax = apply_system(x, h, w, rho);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let b_norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let stop = (1e-13 * b_norm).powi(2).max(1e-300);
    if rs <= stop {
        return;
    }
    let mut p = r.clone();
    for _ in 0..(4 * x.len()).max(50) {
        let ap = apply_system(&p, h, w, rho);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        if rs_new <= stop {
            break;
        }
        let beta = rs_new / rs;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
}

/// Runs ADMM on a gray image. `eta = 0` returns the input unchanged.
///
/// If the tolerance is not met within `max_iters`, the lowest-objective
/// iterate is returned with `converged = false`.
pub fn tv_admm(input: &Image, params: &TvParams) -> Result<TvOutcome> {
    params.validate()?;
    if input.planes() != 1 {
        return Err(Error::param("planes", "TV refinement works on one plane at a time"));
    }
    let (h, w) = (input.height(), input.width());
    let x0 = input.data();
    if params.eta == 0.0 {
        return Ok(TvOutcome {
            image: input.clone(),
            converged: true,
            iterations: 0,
            objective: vec![tv_objective(x0, x0, h, w, 0.0)],
        });
    }

    let mut x = x0.to_vec();
    let mut z = gradient_of(&x, h, w);
    let mut u = GradientField::zeros(h, w);
    let threshold = params.eta / params.rho;
    let mut objective = Vec::new();
    let mut best = (tv_objective(&x, x0, h, w, params.eta), x.clone());
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..params.max_iters {
        iterations = it + 1;
        let mut rhs_field = GradientField::zeros(h, w);
        for i in 0..h * w {
            rhs_field.h[i] = z.h[i] - u.h[i];
            rhs_field.v[i] = z.v[i] - u.v[i];
        }
        let adj = gradient_adjoint(&rhs_field);
        let b: Vec<f64> = x0.iter().zip(&adj).map(|(a, g)| a + params.rho * g).collect();
        solve_system(&mut x, &b, h, w, params.rho);

        let gx = gradient_of(&x, h, w);
        let mut shifted = GradientField::zeros(h, w);
        for i in 0..h * w {
            shifted.h[i] = gx.h[i] + u.h[i];
            shifted.v[i] = gx.v[i] + u.v[i];
        }
        let z_prev = std::mem::replace(&mut z, shrink_iso(&shifted, threshold));

        let mut primal = GradientField::zeros(h, w);
        let mut dz = GradientField::zeros(h, w);
        for i in 0..h * w {
            primal.h[i] = gx.h[i] - z.h[i];
            primal.v[i] = gx.v[i] - z.v[i];
            u.h[i] += params.gamma * primal.h[i];
            u.v[i] += params.gamma * primal.v[i];
            dz.h[i] = z.h[i] - z_prev.h[i];
            dz.v[i] = z.v[i] - z_prev.v[i];
        }

        let obj = tv_objective(&x, x0, h, w, params.eta);
        objective.push(obj);
        if obj < best.0 {
            best = (obj, x.clone());
        }

        let r_norm = primal.norm_sq().sqrt();
        let s_norm = params.rho * gradient_adjoint(&dz).iter().map(|v| v * v).sum::<f64>().sqrt();
        let r_scale = gx.norm_sq().sqrt().max(z.norm_sq().sqrt()).max(1e-12);
        let s_scale = (params.rho * gradient_adjoint(&u).iter().map(|v| v * v).sum::<f64>().sqrt()).max(1e-12);
        if (r_norm / r_scale).max(s_norm / s_scale) < params.tol {
            converged = true;
            break;
        }
    }

    let chosen = if converged { x } else { best.1 };
    if !converged {
        log::warn!(
            "TV-ADMM stopped after {} iterations without meeting tolerance {:e}",
            params.max_iters,
            params.tol
        );
    }
    if chosen.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("TV iterate"));
    }
    Ok(TvOutcome {
        image: Image::from_clipped(h, w, 1, chosen)?,
        converged,
        iterations,
        objective,
    })
}
