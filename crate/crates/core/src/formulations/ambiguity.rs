use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};
use crate::fund::{simplex_error, DiscountScenarios, ReturnScenarios};

/// Convex hull of finitely many likelihood vectors for `p` and for `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureAmbiguity {
    pub discount: Vec<Vec<f64>>,
    pub returns: Vec<Vec<f64>>,
}

impl MixtureAmbiguity {
    pub fn singleton(p: &[f64], q: &[f64]) -> Self {
        Self {
            discount: vec![p.to_vec()],
            returns: vec![q.to_vec()],
        }
    }

    pub fn validate(&self, s_len: usize, k_len: usize) -> Result<()> {
        if self.discount.is_empty() || self.returns.is_empty() {
            return Err(AlmError::Validation("mixture needs at least one likelihood for p and q".into()));
        }
        for (name, set, len) in [("p", &self.discount, s_len), ("q", &self.returns, k_len)] {
            for (i, v) in set.iter().enumerate() {
                if v.len() != len {
                    return Err(AlmError::Validation(format!(
                        "mixture {name}^{}: length {} but {len} scenarios",
                        i + 1,
                        v.len()
                    )));
                }
                if let Some(msg) = simplex_error(v) {
                    return Err(AlmError::Validation(format!("mixture {name}^{}: {msg}", i + 1)));
                }
            }
        }
        Ok(())
    }
}

/// Perturbations `lower <= η <= upper` with `Σ η = 0` around `nominal`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityBox {
    pub nominal: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ProbabilityBox {
    /// `±half_width` around `nominal`, clipped so `nominal + η` stays in `[0, 1]`.
    pub fn symmetric(nominal: &[f64], half_width: f64) -> Self {
        Self {
            nominal: nominal.to_vec(),
            lower: nominal.iter().map(|p| (-half_width).max(-p)).collect(),
            upper: nominal.iter().map(|p| half_width.min(1.0 - p)).collect(),
        }
    }

    pub fn validate(&self, len: usize, name: &str) -> Result<()> {
        if self.nominal.len() != len || self.lower.len() != len || self.upper.len() != len {
            return Err(AlmError::Validation(format!("box {name}: expected {len} entries")));
        }
        if let Some(msg) = simplex_error(&self.nominal) {
            return Err(AlmError::Validation(format!("box {name} nominal: {msg}")));
        }
        for i in 0..len {
            let (p, lo, hi) = (self.nominal[i], self.lower[i], self.upper[i]);
            if !(lo <= 0.0 && 0.0 <= hi) {
                return Err(AlmError::Validation(format!(
                    "box {name}[{i}]: bounds [{lo}, {hi}] must contain 0"
                )));
            }
            if p + lo < -1e-12 || p + hi > 1.0 + 1e-12 {
                return Err(AlmError::Validation(format!(
                    "box {name}[{i}]: perturbed probability leaves [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxAmbiguity {
    pub discount: ProbabilityBox,
    pub returns: ProbabilityBox,
}

impl BoxAmbiguity {
    pub fn symmetric(p0: &[f64], q0: &[f64], half_width: f64) -> Self {
        Self {
            discount: ProbabilityBox::symmetric(p0, half_width),
            returns: ProbabilityBox::symmetric(q0, half_width),
        }
    }

    pub fn validate(&self, s_len: usize, k_len: usize) -> Result<()> {
        self.discount.validate(s_len, "p")?;
        self.returns.validate(k_len, "q")
    }
}

/// Axis-aligned support `lower <= ξ <= upper`, encoded as `[I; -I] ξ <= [upper; -lower]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSupport {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSupport {
    /// Coordinate-wise hull of `points` widened by `widen` times its range on each side.
    pub fn around(points: &[Vec<f64>], widen: f64) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let mut lower = vec![f64::INFINITY; dim];
        let mut upper = vec![f64::NEG_INFINITY; dim];
        for p in points {
            for j in 0..dim {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        for j in 0..dim {
            let pad = widen * (upper[j] - lower[j]);
            lower[j] -= pad;
            upper[j] += pad;
        }
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *lo - tol <= *x && *x <= *hi + tol)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| v * c).collect(),
            upper: self.upper.iter().map(|v| v * c).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WassersteinAmbiguity {
    /// `ε¹` for the discounted wage vector.
    pub wage_radius: f64,
    /// `ε¹_t` per period.
    pub liability_radii: Vec<f64>,
    /// `ε²_t` per period.
    pub return_radii: Vec<f64>,
    pub wage_support: BoxSupport,
    pub liability_supports: Vec<BoxSupport>,
    pub return_supports: Vec<BoxSupport>,
}

/// Empirical atoms of the three Wasserstein blocks.
pub(crate) fn wage_points(ds: &DiscountScenarios) -> Vec<Vec<f64>> {
    (0..ds.n_scenarios()).map(|s| ds.wage_vector(s).to_vec()).collect()
}

pub(crate) fn liability_points(ds: &DiscountScenarios, i: usize) -> Vec<Vec<f64>> {
    (0..ds.n_scenarios())
        .map(|s| vec![ds.liabilities_pv[[i, s]]])
        .collect()
}

pub(crate) fn return_points(rs: &ReturnScenarios, i: usize) -> Vec<Vec<f64>> {
    (0..rs.n_scenarios()).map(|k| rs.at(i, k).to_vec()).collect()
}

impl WassersteinAmbiguity {
    /// Radii given explicitly; supports are the empirical hulls widened by `widen`.
    pub fn with_radii(
        ds: &DiscountScenarios,
        rs: &ReturnScenarios,
        wage_radius: f64,
        liability_radii: Vec<f64>,
        return_radii: Vec<f64>,
        widen: f64,
    ) -> Self {
        let t_len = ds.n_periods();
        Self {
            wage_radius,
            liability_radii,
            return_radii,
            wage_support: BoxSupport::around(&wage_points(ds), widen),
            liability_supports: (0..t_len)
                .map(|i| BoxSupport::around(&liability_points(ds, i), widen))
                .collect(),
            return_supports: (0..t_len)
                .map(|i| BoxSupport::around(&return_points(rs, i), widen))
                .collect(),
        }
    }

    /// Radius rule scaled by `half_range`:
    ///
    /// * `ε²_t = half_range · m_t` with `m_t` the nominal mean net return of the
    ///   risky assets at period `t`;
    /// * `ε¹ = half_range · m̄ · mean_s ‖Ŵ_s‖₂` and `ε¹_t = half_range · m̄ · mean_s L̂_{s,t}`
    ///   with `m̄` the horizon average of `m_t`, so the wage and liability radii
    ///   carry currency units.
    pub fn from_rule(ds: &DiscountScenarios, rs: &ReturnScenarios, half_range: f64, widen: f64) -> Self {
        let t_len = ds.n_periods();
        let n = rs.n_assets();
        let mean_net: Vec<f64> = (0..t_len)
            .map(|i| {
                let e = rs.expected(i);
                let risky = if n > 1 { &e[1..] } else { &e[..] };
                (risky.iter().sum::<f64>() / risky.len() as f64 - 1.0).abs()
            })
            .collect();
        let m_bar = mean_net.iter().sum::<f64>() / t_len as f64;
        let s_len = ds.n_scenarios() as f64;
        let wage_norm = (0..ds.n_scenarios())
            .map(|s| ds.wage_vector(s).iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            / s_len;
        let wage_radius = half_range * m_bar * wage_norm;
        let liability_radii = (0..t_len)
            .map(|i| half_range * m_bar * ds.liabilities_pv.row(i).sum() / s_len)
            .collect();
        let return_radii = mean_net.iter().map(|m| half_range * m).collect();
        Self::with_radii(ds, rs, wage_radius, liability_radii, return_radii, widen)
    }

    /// Same supports, every radius multiplied by `factor`.
    pub fn with_radius_factor(&self, factor: f64) -> Self {
        Self {
            wage_radius: self.wage_radius * factor,
            liability_radii: self.liability_radii.iter().map(|r| r * factor).collect(),
            return_radii: self.return_radii.iter().map(|r| r * factor).collect(),
            ..self.clone()
        }
    }

    pub fn validate(&self, ds: &DiscountScenarios, rs: &ReturnScenarios) -> Result<()> {
        let t_len = ds.n_periods();
        let radii = std::iter::once(&self.wage_radius)
            .chain(&self.liability_radii)
            .chain(&self.return_radii);
        for r in radii {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(AlmError::Validation(format!("radius {r} must be finite and >= 0")));
            }
        }
        if self.liability_radii.len() != t_len
            || self.return_radii.len() != t_len
            || self.liability_supports.len() != t_len
            || self.return_supports.len() != t_len
        {
            return Err(AlmError::Validation(format!(
                "Wasserstein radii and supports must cover {t_len} periods"
            )));
        }
        let tol = 1e-9;
        let check = |support: &BoxSupport, points: Vec<Vec<f64>>, what: &str| -> Result<()> {
            let scale = 1.0
                + support
                    .upper
                    .iter()
                    .chain(&support.lower)
                    .fold(0.0_f64, |a, v| a.max(v.abs()));
            if support.lower.iter().zip(&support.upper).any(|(l, u)| !(l <= u)) {
                return Err(AlmError::Validation(format!("{what}: empty support")));
            }
            if points.iter().any(|p| !support.contains(p, tol * scale)) {
                return Err(AlmError::Validation(format!(
                    "{what}: an empirical scenario lies outside the support"
                )));
            }
            Ok(())
        };
        check(&self.wage_support, wage_points(ds), "wage support")?;
        for i in 0..t_len {
            check(&self.liability_supports[i], liability_points(ds, i), "liability support")?;
            check(&self.return_supports[i], return_points(rs, i), "return support")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmbiguitySpec {
    Mixture(MixtureAmbiguity),
    Box(BoxAmbiguity),
    Wasserstein(WassersteinAmbiguity),
}
