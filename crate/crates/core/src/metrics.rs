//! Fusion quality metrics.
//!
//! NMI and Q_AB/F need only the sources and the fused image; SSIM and MSE
//! compare against a reference. All metrics work on the 0-255 scale.

use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, Image};

const BINS: usize = 256;

// Edge-preservation sigmoid constants (Xydeas & Petrovic).
const GAMMA_G: f64 = 0.9994;
const KAPPA_G: f64 = -15.0;
const SIGMA_G: f64 = 0.5;
const GAMMA_A: f64 = 0.9879;
const KAPPA_A: f64 = -22.0;
const SIGMA_A: f64 = 0.8;

/// Metric values for one fused image. Reference-based entries are `None`
/// when no reference was supplied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub nmi: f64,
    pub qabf: f64,
    pub ssim: Option<f64>,
    pub mse: Option<f64>,
}

/// Evaluates all metrics. Color inputs are reduced to luma first, except
/// for MSE which uses every plane.
pub fn evaluate(sources: &[Image], fused: &Image, reference: Option<&Image>) -> Result<MetricReport> {
    let grays: Vec<Image> = sources.iter().map(to_grayscale).collect();
    let fused_gray = to_grayscale(fused);
    let (ssim_v, mse_v) = match reference {
        Some(r) => (Some(ssim(&to_grayscale(r), &fused_gray)?), Some(mse(r, fused)?)),
        None => (None, None),
    };
    Ok(MetricReport {
        nmi: nmi_multi(&grays, &fused_gray)?,
        qabf: qabf_multi(&grays, &fused_gray)?,
        ssim: ssim_v,
        mse: mse_v,
    })
}

/// Mean squared error on the 0-255 scale over all pixels and planes.
pub fn mse(reference: &Image, fused: &Image) -> Result<f64> {
    reference.check_same_shape(fused, "mse")?;
    let n = reference.data().len() as f64;
    Ok(reference
        .data()
        .iter()
        .zip(fused.data())
        .map(|(a, b)| (255.0 * (a - b)).powi(2))
        .sum::<f64>()
        / n)
}

fn gray_check(a: &Image, b: &Image, what: &str) -> Result<()> {
    a.check_same_shape(b, what)?;
    if a.planes() != 1 {
        return Err(Error::param("planes", format!("{what} expects gray images")));
    }
    Ok(())
}

/// Mean SSIM over all 8x8 windows (stride 1, uniform weights), with
/// `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`, `L = 255`.
pub fn ssim(reference: &Image, fused: &Image) -> Result<f64> {
    ssim_with(reference, fused, 8, 0.01, 0.03, 255.0)
}

pub fn ssim_with(reference: &Image, fused: &Image, window: usize, k1: f64, k2: f64, range: f64) -> Result<f64> {
    gray_check(reference, fused, "ssim")?;
    let (h, w) = (reference.height(), reference.width());
    let win = window.min(h).min(w);
    let c1 = (k1 * range).powi(2);
    let c2 = (k2 * range).powi(2);
    let x: Vec<f64> = reference.data().iter().map(|v| v * 255.0).collect();
    let y: Vec<f64> = fused.data().iter().map(|v| v * 255.0).collect();
    let n = (win * win) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=h - win {
        for c in 0..=w - win {
            let (mut sx, mut sy) = (0.0, 0.0);
            for dr in 0..win {
                let row = (r + dr) * w + c;
                for i in row..row + win {
                    sx += x[i];
                    sy += y[i];
                }
            }
            let (mx, my) = (sx / n, sy / n);
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for dr in 0..win {
                let row = (r + dr) * w + c;
                for i in row..row + win {
                    let (a, b) = (x[i] - mx, y[i] - my);
                    vx += a * a;
                    vy += b * b;
                    cov += a * b;
                }
            }
            let (vx, vy, cov) = (vx / n, vy / n, cov / n);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn bin_index(v: f64) -> usize {
    ((v.clamp(0.0, 1.0) * 255.0).round() as usize).min(BINS - 1)
}

fn entropy(counts: &[u64], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Shannon entropy (nats) of a gray image's 256-bin histogram.
pub fn image_entropy(img: &Image) -> f64 {
    let mut counts = vec![0u64; BINS];
    for &v in img.plane(0) {
        counts[bin_index(v)] += 1;
    }
    entropy(&counts, img.len() as f64)
}

/// Mutual information and the two marginal entropies, from a joint
/// 256 x 256 histogram.
pub fn mutual_information(a: &Image, b: &Image) -> Result<(f64, f64, f64)> {
    gray_check(a, b, "mutual information")?;
    let mut joint = vec![0u64; BINS * BINS];
    let mut ha = vec![0u64; BINS];
    let mut hb = vec![0u64; BINS];
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (i, j) = (bin_index(x), bin_index(y));
        joint[i * BINS + j] += 1;
        ha[i] += 1;
        hb[j] += 1;
    }
    let n = a.len() as f64;
    let (ea, eb, eab) = (entropy(&ha, n), entropy(&hb, n), entropy(&joint, n));
    Ok((ea + eb - eab, ea, eb))
}

/// `2 * [MI(A;F)/(H(A)+H(F)) + MI(B;F)/(H(B)+H(F))]`.
pub fn nmi(a: &Image, b: &Image, fused: &Image) -> Result<f64> {
    nmi_multi(&[a.clone(), b.clone()], fused)
}

/// NMI summed over any number of sources.
pub fn nmi_multi(sources: &[Image], fused: &Image) -> Result<f64> {
    let mut total = 0.0;
    for s in sources {
        let (mi, hs, hf) = mutual_information(s, fused)?;
        if hs + hf > 0.0 {
            total += mi / (hs + hf);
        }
    }
    Ok(2.0 * total)
}

fn sobel(img: &Image) -> (Vec<f64>, Vec<f64>) {
    let (h, w) = (img.height(), img.width());
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        img.get(0, r, c) * 255.0
    };
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let i = r as usize * w + c as usize;
            gx[i] = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            gy[i] = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
        }
    }
    (gx, gy)
}

struct EdgeMap {
    strength: Vec<f64>,
    orientation: Vec<f64>,
}

fn edge_map(img: &Image) -> EdgeMap {
    let (gx, gy) = sobel(img);
    let strength = gx.iter().zip(&gy).map(|(x, y)| x.hypot(*y)).collect();
    let orientation = gx
        .iter()
        .zip(&gy)
        .map(|(&x, &y)| match (x == 0.0, y == 0.0) {
            (true, true) => 0.0,
            (true, false) => std::f64::consts::FRAC_PI_2.copysign(y),
            _ => (y / x).atan(),
        })
        .collect();
    EdgeMap { strength, orientation }
}

/// Per-pixel edge preservation `Q^{SF}` of source `s` in fused `f`.
fn preservation(s: &EdgeMap, f: &EdgeMap) -> Vec<f64> {
    s.strength
        .iter()
        .zip(&f.strength)
        .zip(s.orientation.iter().zip(&f.orientation))
        .map(|((&gs, &gf), (&as_, &af))| {
            let g = if gs > gf {
                gf / gs
            } else if gf > 0.0 {
                gs / gf
            } else {
                0.0
            };
            let a = 1.0 - (as_ - af).abs() / std::f64::consts::FRAC_PI_2;
            let qg = GAMMA_G / (1.0 + (KAPPA_G * (g - SIGMA_G)).exp());
            let qa = GAMMA_A / (1.0 + (KAPPA_A * (a - SIGMA_A)).exp());
            qg * qa
        })
        .collect()
}

/// Edge-preservation metric Q_AB/F for two sources.
pub fn qabf(a: &Image, b: &Image, fused: &Image) -> Result<f64> {
    qabf_multi(&[a.clone(), b.clone()], fused)
}

/// Q_AB/F generalised to any number of sources: preservation of each
/// source's edges weighted by that source's edge strength.
pub fn qabf_multi(sources: &[Image], fused: &Image) -> Result<f64> {
    for s in sources {
        gray_check(s, fused, "qabf")?;
    }
    let fe = edge_map(fused);
    let (mut num, mut den) = (0.0, 0.0);
    for s in sources {
        let se = edge_map(s);
        let q = preservation(&se, &fe);
        for (qi, &wi) in q.iter().zip(&se.strength) {
            num += qi * wi;
            den += wi;
        }
    }
    if den == 0.0 {
        log::warn!("Q_AB/F undefined for sources without gradients; reporting 0");
        return Ok(0.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(h: usize, w: usize) -> Image {
        Image::from_fn(h, w, |r, c| ((r * 37 + c * 91 + (r * c) % 13) % 256) as f64 / 255.0).unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = textured(6, 6);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let zero = Image::filled(4, 4, 0.0).unwrap();
        let step = Image::filled(4, 4, 1.0 / 255.0).unwrap();
        assert!((mse(&zero, &step).unwrap() - 1.0).abs() < 1e-12);
        let black = Image::filled(4, 4, 0.0).unwrap();
        let white = Image::filled(4, 4, 1.0).unwrap();
        assert_eq!(mse(&black, &white).unwrap(), 65025.0);
        assert!(mse(&a, &zero).is_err());
    }

    #[test]
    fn ssim_examples() {
        let a = textured(24, 24);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let inv = Image::new(24, 24, 1, a.data().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ssim(&a, &inv).unwrap() < 0.5);
    }

    #[test]
    fn nmi_of_identical_images_is_two() {
        let a = textured(20, 20);
        let v = nmi(&a, &a, &a).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn qabf_identity_and_flat() {
        let a = textured(20, 20);
        let flat = Image::filled(20, 20, 0.5).unwrap();
        assert!(qabf(&a, &a, &flat).unwrap() < 0.05);
        assert_eq!(qabf(&flat, &flat, &a).unwrap(), 0.0);
    }
}
