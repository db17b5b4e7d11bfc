//! Single-mode Gaussian states, Uhlmann fidelity and Bures distance.
//!
//! Units: ħ = 1 and quadratures `q = (a + a†)/√2`, `p = (a − a†)/(i√2)`, so the
//! vacuum covariance matrix is `I/2` and a physical state obeys `det σ ≥ 1/4`.
//!
//! The determinant of every state is carried alongside its covariance matrix.
//! It is exact for states built from parameters (`(N + ½)²`) and is updated in
//! closed form by [`AffineMap`], which keeps the fidelity of strongly squeezed
//! states free of cancellation noise along a trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical slack on the Heisenberg bound and symmetry checks.
pub const EPS_TOL: f64 = 1e-12;

/// Symmetric 2×2 covariance matrix, stored once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub qq: f64,
    pub qp: f64,
    pub pp: f64,
}

impl Covariance {
    pub const fn diag(qq: f64, pp: f64) -> Self {
        Self { qq, qp: 0.0, pp }
    }

    /// Builds a covariance from a full matrix, rejecting asymmetric input.
    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self> {
        if (m[0][1] - m[1][0]).abs() > 0.0 {
            return Err(Error::NonPhysical(format!(
                "covariance matrix is not symmetric ({} vs {})",
                m[0][1], m[1][0]
            )));
        }
        Ok(Self {
            qq: m[0][0],
            qp: m[0][1],
            pp: m[1][1],
        })
    }

    pub fn trace(&self) -> f64 {
        self.qq + self.pp
    }

    pub fn det(&self) -> f64 {
        self.qq * self.pp - self.qp * self.qp
    }

    pub fn to_matrix(&self) -> [[f64; 2]; 2] {
        [[self.qq, self.qp], [self.qp, self.pp]]
    }

    /// `tr(adj(self) · other)`, the mixed term of `det(self + other)`.
    fn mixed_det(&self, other: &Covariance) -> f64 {
        self.qq * other.pp + self.pp * other.qq - 2.0 * self.qp * other.qp
    }

    fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            qq: c * c * self.qq - 2.0 * c * s * self.qp + s * s * self.pp,
            qp: c * s * (self.qq - self.pp) + (c * c - s * s) * self.qp,
            pp: s * s * self.qq + 2.0 * c * s * self.qp + c * c * self.pp,
        }
    }
}

/// Parameters of one state `D(β) S(ξ) ν_th(N) S†(ξ) D†(β)` with `ξ = r e^{iφ}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateParams {
    /// Mean thermal quanta `N ≥ 0`.
    pub thermal: f64,
    /// Squeezing magnitude `r ≥ 0`.
    pub squeeze: f64,
    /// Squeezing angle `φ`.
    pub squeeze_angle: f64,
    /// Displacement magnitude `|β| ≥ 0`.
    pub beta_mag: f64,
    /// Displacement phase `θ`.
    pub beta_arg: f64,
}

impl StateParams {
    pub fn coherent(beta_mag: f64, beta_arg: f64) -> Self {
        Self {
            beta_mag,
            beta_arg,
            ..Self::default()
        }
    }

    pub fn squeezed(squeeze: f64, squeeze_angle: f64) -> Self {
        Self {
            squeeze,
            squeeze_angle,
            ..Self::default()
        }
    }

    pub fn thermal(thermal: f64) -> Self {
        Self {
            thermal,
            ..Self::default()
        }
    }
}

/// The collective arguments `P_N`, `P_S`, `P_C` identifying a pair of initial states.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StatePairParams {
    /// `{N₁, N₂}`
    pub thermal: [f64; 2],
    /// `{r₁, r₂}`
    pub squeeze: [f64; 2],
    /// `{φ₁, φ₂}`
    pub squeeze_angle: [f64; 2],
    /// `{|β₁|, |β₂|}`
    pub beta_mag: [f64; 2],
    /// `{θ₁, θ₂}`
    pub beta_arg: [f64; 2],
}

impl StatePairParams {
    pub fn from_states(first: StateParams, second: StateParams) -> Self {
        Self {
            thermal: [first.thermal, second.thermal],
            squeeze: [first.squeeze, second.squeeze],
            squeeze_angle: [first.squeeze_angle, second.squeeze_angle],
            beta_mag: [first.beta_mag, second.beta_mag],
            beta_arg: [first.beta_arg, second.beta_arg],
        }
    }

    pub fn state(&self, index: usize) -> StateParams {
        StateParams {
            thermal: self.thermal[index],
            squeeze: self.squeeze[index],
            squeeze_angle: self.squeeze_angle[index],
            beta_mag: self.beta_mag[index],
            beta_arg: self.beta_arg[index],
        }
    }

    pub fn states(&self) -> Result<(GaussianState, GaussianState)> {
        Ok((make_gaussian(&self.state(0))?, make_gaussian(&self.state(1))?))
    }

    /// `K = |β₁ e^{iθ₁} − β₂ e^{iθ₂}|² / 2`.
    pub fn coherent_k(&self) -> f64 {
        let (s1, c1) = self.beta_arg[0].sin_cos();
        let (s2, c2) = self.beta_arg[1].sin_cos();
        let dre = self.beta_mag[0] * c1 - self.beta_mag[1] * c2;
        let dim = self.beta_mag[0] * s1 - self.beta_mag[1] * s2;
        0.5 * (dre * dre + dim * dim)
    }
}

/// A single-mode Gaussian state: first moments plus covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    mean: [f64; 2],
    cov: Covariance,
    det: f64,
}

impl GaussianState {
    /// Validating constructor from raw moments.
    pub fn new(mean: [f64; 2], cov: Covariance) -> Result<Self> {
        let state = Self {
            mean,
            cov,
            det: cov.det(),
        };
        state.validate()?;
        Ok(state)
    }

    pub fn vacuum() -> Self {
        Self {
            mean: [0.0, 0.0],
            cov: Covariance::diag(0.5, 0.5),
            det: 0.25,
        }
    }

    pub fn mean(&self) -> [f64; 2] {
        self.mean
    }

    pub fn cov(&self) -> Covariance {
        self.cov
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// `det σ − 1/4`, the excess over the Heisenberg bound.
    pub fn purity_gap(&self) -> f64 {
        self.det - 0.25
    }

    pub fn is_physical(&self) -> bool {
        self.validate().is_ok()
    }

    fn validate(&self) -> Result<()> {
        let c = &self.cov;
        if !(self.mean.iter().all(|m| m.is_finite())
            && c.qq.is_finite()
            && c.qp.is_finite()
            && c.pp.is_finite())
        {
            return Err(Error::NonPhysical("non-finite moments".into()));
        }
        if c.qq <= 0.0 || c.pp <= 0.0 || self.det <= 0.0 {
            return Err(Error::NonPhysical(format!(
                "covariance is not positive definite (qq={}, pp={}, det={})",
                c.qq, c.pp, self.det
            )));
        }
        if self.det < 0.25 - EPS_TOL {
            return Err(Error::NonPhysical(format!(
                "Heisenberg bound violated: det σ = {} < 1/4",
                self.det
            )));
        }
        Ok(())
    }

    /// Applies the phase-space rotation `R(angle)` to moments and covariance.
    pub fn rotated(&self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            mean: [
                c * self.mean[0] - s * self.mean[1],
                s * self.mean[0] + c * self.mean[1],
            ],
            cov: self.cov.rotated(angle),
            det: self.det,
        }
    }

    /// Applies an affine Gaussian map. The result is not validated; callers in
    /// first-order mode may legitimately produce non-physical covariances.
    pub fn apply(&self, map: &AffineMap) -> Self {
        let a = map.cov_scale;
        let b = map.noise;
        Self {
            mean: [map.mean_scale * self.mean[0], map.mean_scale * self.mean[1]],
            cov: Covariance {
                qq: a * self.cov.qq + 0.5 * b,
                qp: a * self.cov.qp,
                pp: a * self.cov.pp + 0.5 * b,
            },
            det: a * a * self.det + 0.5 * a * b * self.cov.trace() + 0.25 * b * b,
        }
    }
}

/// `X̄ → m X̄`, `σ → a σ + b I/2`: the form taken by every channel in this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub mean_scale: f64,
    pub cov_scale: f64,
    pub noise: f64,
}

impl AffineMap {
    pub const IDENTITY: AffineMap = AffineMap {
        mean_scale: 1.0,
        cov_scale: 1.0,
        noise: 0.0,
    };
}

/// Builds `D(β) S(ξ) ν_th(N) S†(ξ) D†(β)` as moments.
pub fn make_gaussian(params: &StateParams) -> Result<GaussianState> {
    let StateParams {
        thermal,
        squeeze,
        squeeze_angle,
        beta_mag,
        beta_arg,
    } = *params;
    for (name, v) in [
        ("N", thermal),
        ("r", squeeze),
        ("phi", squeeze_angle),
        ("|beta|", beta_mag),
        ("theta", beta_arg),
    ] {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite, got {v}")));
        }
    }
    if thermal < 0.0 {
        return Err(Error::Domain(format!("thermal occupation N must be ≥ 0, got {thermal}")));
    }
    if squeeze < 0.0 {
        return Err(Error::Domain(format!("squeezing r must be ≥ 0, got {squeeze}")));
    }
    if beta_mag < 0.0 {
        return Err(Error::Domain(format!("|beta| must be ≥ 0, got {beta_mag}")));
    }
    let n = thermal + 0.5;
    let (s, c) = (0.5 * squeeze_angle).sin_cos();
    let lo = (-2.0 * squeeze).exp();
    let hi = (2.0 * squeeze).exp();
    let cov = Covariance {
        qq: n * (lo * c * c + hi * s * s),
        qp: n * (lo - hi) * c * s,
        pp: n * (lo * s * s + hi * c * c),
    };
    let (bs, bc) = beta_arg.sin_cos();
    let root2 = std::f64::consts::SQRT_2;
    Ok(GaussianState {
        mean: [root2 * beta_mag * bc, root2 * beta_mag * bs],
        cov,
        det: n * n,
    })
}

/// Uhlmann fidelity `Tr√(√ρ₁ ρ₂ √ρ₁)` between two physical Gaussian states.
pub fn fidelity(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    fidelity_unchecked(a, b)
}

/// Fidelity formula without the physicality check.
///
/// Used by the first-order pipeline, whose truncated covariances may dip
/// below the Heisenberg bound. A negative `δ` (the two states on opposite
/// sides of the bound) is clamped to zero.
pub fn fidelity_unchecked(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    let det_sum = a.det + b.det + a.cov.mixed_det(&b.cov);
    if !(det_sum > 0.0) || !det_sum.is_finite() {
        return Err(Error::Numerical(format!(
            "σ₁ + σ₂ is singular (det = {det_sum})"
        )));
    }
    let big_delta = 4.0 * det_sum;
    let small_delta = (16.0 * a.purity_gap() * b.purity_gap()).max(0.0);
    let root = small_delta.sqrt();
    // 2 / (√(Δ+δ) − √δ) rewritten without the cancellation.
    let prefactor = 2.0 * ((big_delta + small_delta).sqrt() + root) / big_delta;

    let s = Covariance {
        qq: a.cov.qq + b.cov.qq,
        qp: a.cov.qp + b.cov.qp,
        pp: a.cov.pp + b.cov.pp,
    };
    let dq = a.mean[0] - b.mean[0];
    let dp = a.mean[1] - b.mean[1];
    let quad = (s.pp * dq * dq - 2.0 * s.qp * dq * dp + s.qq * dp * dp) / det_sum;
    let squared = prefactor * (-0.5 * quad).exp();
    Ok(squared.sqrt())
}

/// Bures distance `√(2 − 2√F)`.
pub fn bures_distance(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    let f = fidelity(a, b)?;
    Ok((2.0 - 2.0 * f.sqrt()).max(0.0).sqrt())
}
