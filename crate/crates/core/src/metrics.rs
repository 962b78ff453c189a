//! Scalar evaluation and loss quantities.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geom::{KdTree, Point3, PointCloud};
use crate::{math, Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-7;

const BRUTE_FORCE_LIMIT: usize = 64;

/// Mean over `a` of the squared distance to the nearest point of `b`.
fn mean_nearest_sq(a: &[Point3], b: &[Point3]) -> f64 {
    let sum: f64 = if b.len() <= BRUTE_FORCE_LIMIT {
        a.iter()
            .map(|p| b.iter().map(|q| p.dist_sq(*q)).fold(f64::INFINITY, f64::min))
            .sum()
    } else {
        let tree = KdTree::new(b);
        a.iter().map(|p| tree.nearest(*p).expect("non-empty").1).sum()
    };
    sum / a.len() as f64
}

/// Symmetric squared Chamfer distance (m²) between two point sets.
pub fn chamfer_sq_points(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty { what: "chamfer input" });
    }
    Ok(mean_nearest_sq(a, b) + mean_nearest_sq(b, a))
}

pub fn chamfer_sq(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    chamfer_sq_points(a.points(), b.points())
}

/// Chamfer distance reported both raw (m²) and as its square root (m).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamferReport {
    pub cd_sq: f64,
    pub cd_rms: f64,
}

pub fn chamfer_report(a: &PointCloud, b: &PointCloud) -> Result<ChamferReport> {
    let cd_sq = chamfer_sq(a, b)?;
    Ok(ChamferReport {
        cd_sq,
        cd_rms: math::sqrt(cd_sq),
    })
}

/// Weights of the training objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub lambda_com: f64,
    pub lambda_adv: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, lambda_com: f64, lambda_adv: f64) -> Result<Self> {
        let w = LossWeights {
            alpha,
            lambda_com,
            lambda_adv,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.lambda_com, self.lambda_adv];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("loss weights", "must be finite and non-negative"));
        }
        if (self.lambda_com + self.lambda_adv - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("loss weights", "lambda_com + lambda_adv must equal 1"));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.01,
            lambda_com: 0.9,
            lambda_adv: 0.1,
        }
    }
}

/// `cd(fine, gt) + alpha * cd(middle, gt_mid) + 2 alpha * cd(coarse, gt_coarse)`.
pub fn completion_loss(
    fine: &PointCloud,
    middle: &PointCloud,
    coarse: &PointCloud,
    gt: &PointCloud,
    gt_mid: &PointCloud,
    gt_coarse: &PointCloud,
    alpha: f64,
) -> Result<f64> {
    Ok(chamfer_sq(fine, gt)? + alpha * chamfer_sq(middle, gt_mid)? + 2.0 * alpha * chamfer_sq(coarse, gt_coarse)?)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `Σ ln D(real) + Σ ln(1 − D(fake))`, the quantity the discriminator maximises.
pub fn adversarial_loss(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    if d_real.len() != d_fake.len() {
        return Err(Error::invalid("adversarial loss", "batch sizes differ"));
    }
    if d_real.iter().chain(d_fake).any(|v| v.is_nan()) {
        return Err(Error::non_finite("discriminator output"));
    }
    let real: f64 = d_real.iter().map(|&p| math::ln(clamp_prob(p))).sum();
    let fake: f64 = d_fake.iter().map(|&p| math::ln(1.0 - clamp_prob(p))).sum();
    Ok(real + fake)
}

/// Form of the generator's adversarial term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorAdversarial {
    /// `−Σ ln D(G(x))`
    #[default]
    NonSaturating,
    /// `Σ ln(1 − D(G(x)))`, the fake half of the minimax objective.
    Minimax,
}

pub fn generator_adversarial_term(d_fake: &[f64], mode: GeneratorAdversarial) -> f64 {
    match mode {
        GeneratorAdversarial::NonSaturating => d_fake.iter().map(|&p| -math::ln(clamp_prob(p))).sum(),
        GeneratorAdversarial::Minimax => d_fake.iter().map(|&p| math::ln(1.0 - clamp_prob(p))).sum(),
    }
}

/// `λ_com · L_com + λ_adv · L_adv`.
pub fn total_loss(l_com: f64, l_adv_generator: f64, weights: &LossWeights) -> Result<f64> {
    weights.validate()?;
    Ok(weights.lambda_com * l_com + weights.lambda_adv * l_adv_generator)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ssim3dFeature {
    /// Mean distance to the k nearest neighbours within the same cloud.
    #[default]
    MeanKnnDistance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ssim3dConfig {
    pub eps: f64,
    pub k: usize,
    pub feature: Ssim3dFeature,
}

impl Default for Ssim3dConfig {
    fn default() -> Self {
        Ssim3dConfig {
            eps: 1e-9,
            k: 10,
            feature: Ssim3dFeature::MeanKnnDistance,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ssim3d {
    /// `1 − error`, in `[0, 1]`, higher is more similar.
    pub similarity: f64,
    /// Mean clamped relative feature difference.
    pub error: f64,
}

/// Per-point local feature of a cloud.
pub fn point_features(points: &[Point3], cfg: &Ssim3dConfig) -> Result<Vec<f64>> {
    if points.len() < cfg.k + 1 {
        return Err(Error::TooFew {
            what: "ssim3d points",
            requested: cfg.k + 1,
            available: points.len(),
        });
    }
    let tree = KdTree::new(points);
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nb = tree.knn(*p, cfg.k, Some(i));
            nb.iter().map(|e| math::sqrt(e.1)).sum::<f64>() / cfg.k as f64
        })
        .collect())
}

/// Structural similarity of `y` against reference `x`.
///
/// For each `p` in `y`, `q` is its nearest neighbour in `x`; the per-point
/// error `|F_x(q) − F_y(p)| / (max(|F_x(q)|, |F_y(p)|) + eps)` is clamped to
/// `[0, 1]` and averaged.
pub fn ssim3d(x: &PointCloud, y: &PointCloud, cfg: &Ssim3dConfig) -> Result<Ssim3d> {
    if !(cfg.eps > 0.0) || cfg.k == 0 {
        return Err(Error::invalid("ssim3d config", "eps must be > 0 and k >= 1"));
    }
    let fx = point_features(x.points(), cfg)?;
    let fy = point_features(y.points(), cfg)?;
    let tree = KdTree::new(x.points());
    let mut err = 0.0;
    for (p, f_p) in y.points().iter().zip(&fy) {
        let (q, _) = tree.nearest(*p).expect("non-empty");
        let f_q = fx[q];
        let r = (f_q - f_p).abs() / (f_q.abs().max(f_p.abs()) + cfg.eps);
        err += r.clamp(0.0, 1.0);
    }
    let error = err / y.len() as f64;
    Ok(Ssim3d {
        similarity: 1.0 - error,
        error,
    })
}

/// Points not flagged occluded (all points when the cloud carries no flags).
pub fn surface_only(cloud: &PointCloud) -> PointCloud {
    match cloud.occluded() {
        Some(flags) => cloud.filter(|i| !flags[i]),
        None => cloud.clone(),
    }
}

/// Index and score of the simulation most similar to `real`, lowest index on
/// ties. The simulations are expected to be surface-only already.
pub fn best_match_ssim(real: &PointCloud, sims: &[PointCloud], cfg: &Ssim3dConfig) -> Result<(usize, f64)> {
    if sims.is_empty() {
        return Err(Error::Empty { what: "simulation set" });
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, s) in sims.iter().enumerate() {
        let score = ssim3d(s, real, cfg)?.similarity;
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best)
}

/// Least-squares line with coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Ordinary least squares `y ≈ slope · x + intercept` with
/// `R² = 1 − SS_res / SS_tot` (0 when `y` is constant).
pub fn ols_fit_r2(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::invalid("regression", "x and y lengths differ"));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFew {
            what: "regression points",
            requested: 3,
            available: n,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::non_finite("regression input"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("regression", "x has zero variance"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    Ok(OlsFit {
        slope,
        intercept,
        r2,
        n,
    })
}
