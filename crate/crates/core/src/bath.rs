//! Bath parametrization: spectral densities, the exponential expansion of
//! the bath correlation function, discretization into undamped modes, and
//! bath diagnostics.
//!
//! The quantum correlation function of a bath with spectral density
//! `J(omega)` (odd in omega) at inverse temperature beta is
//!
//! ```text
//! C(t) = (1/pi) int_{-inf}^{inf} J(w) [n(w) + 1] e^{-iwt} dw
//!      = (1/pi) int_0^inf J(w) [coth(bw/2) cos(wt) - i sin(wt)] dw
//! ```
//!
//! with `n` the Bose function. For Lorentzian spectral densities the
//! integral closes in the lower half plane and `C(t)` becomes a finite
//! sum of damped exponentials `sum_k a_k e^{i g_k t}`: one term per pole
//! of `J` below the real axis plus one Matsubara term per Bose pole
//! `-i 2 pi k / beta`. The conjugate-side amplitudes are defined through
//! `C*(t) = sum_k at_k e^{i g_k t}` with the same exponents.


use crate::numerics::{adaptive_quad, golden_max, Pchip};
use crate::units::kelvin_to_beta;
use crate::{C64, CoreError, Result};

/// One two-pole Lorentzian of an Ohmic-type spectral density:
/// `p * w / ([(w+W)^2+G^2][(w-W)^2+G^2])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicTerm {
    pub weight: f64,
    pub center: f64,
    pub width: f64,
}

/// One four-pole super-Ohmic term:
/// `p * w^3 / (Y(W1,G1) Y(W2,G2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperOhmicTerm {
    pub weight: f64,
    pub center1: f64,
    pub width1: f64,
    pub center2: f64,
    pub width2: f64,
}

/// An undamped bath mode: frequency and mass-weighted coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteMode {
    pub frequency: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    LorentzianOhmic(Vec<OhmicTerm>),
    LorentzianSuperOhmic(Vec<SuperOhmicTerm>),
    Discrete(Vec<DiscreteMode>),
}

impl SpectralDensity {
    pub fn validate(&self) -> Result<()> {
        match self {
            SpectralDensity::LorentzianOhmic(terms) => {
                if terms.is_empty() {
                    return Err(CoreError::Config("spectral density has no terms".into()));
                }
                for t in terms {
                    if t.width <= 0.0 || t.center <= 0.0 {
                        return Err(CoreError::Config(
                            "Lorentzian centers and widths must be positive".into(),
                        ));
                    }
                }
            }
            SpectralDensity::LorentzianSuperOhmic(terms) => {
                if terms.is_empty() {
                    return Err(CoreError::Config("spectral density has no terms".into()));
                }
                for t in terms {
                    if t.width1 <= 0.0 || t.width2 <= 0.0 || t.center1 <= 0.0 || t.center2 <= 0.0 {
                        return Err(CoreError::Config(
                            "Lorentzian centers and widths must be positive".into(),
                        ));
                    }
                    if (t.center1 - t.center2).abs() < 1e-14 && (t.width1 - t.width2).abs() < 1e-14
                    {
                        return Err(CoreError::Config(
                            "super-Ohmic pole pairs must be distinct (simple poles)".into(),
                        ));
                    }
                }
            }
            SpectralDensity::Discrete(modes) => {
                if modes.is_empty() {
                    return Err(CoreError::Config("discrete bath has no modes".into()));
                }
                let mut prev = 0.0;
                for m in modes {
                    if m.frequency <= prev {
                        return Err(CoreError::Config(
                            "discrete mode frequencies must be positive and strictly increasing"
                                .into(),
                        ));
                    }
                    prev = m.frequency;
                }
            }
        }
        Ok(())
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, SpectralDensity::Discrete(_))
    }

    /// J(omega) with the antisymmetric continuation J(-w) = -J(w).
    ///
    /// The discrete variant is reported in its broadened display form
    /// `pi c_j^2 / (2 w_j D_j)` over a bin of width `D_j` (local mode
    /// spacing) around each mode, and zero between bins.
    pub fn evaluate(&self, omega: f64) -> f64 {
        if omega < 0.0 {
            return -self.evaluate(-omega);
        }
        match self {
            SpectralDensity::LorentzianOhmic(terms) => terms
                .iter()
                .map(|t| t.weight * omega / upsilon(omega, t.center, t.width))
                .sum(),
            SpectralDensity::LorentzianSuperOhmic(terms) => terms
                .iter()
                .map(|t| {
                    t.weight * omega.powi(3)
                        / (upsilon(omega, t.center1, t.width1)
                            * upsilon(omega, t.center2, t.width2))
                })
                .sum(),
            SpectralDensity::Discrete(modes) => {
                for (j, m) in modes.iter().enumerate() {
                    let d = local_spacing(modes, j);
                    if (omega - m.frequency).abs() <= 0.5 * d {
                        return std::f64::consts::PI * m.coupling.powi(2)
                            / (2.0 * m.frequency * d);
                    }
                }
                0.0
            }
        }
    }

    /// J at a complex argument (continuous variants only); used for the
    /// Matsubara residues.
    fn evaluate_complex(&self, z: C64) -> C64 {
        match self {
            SpectralDensity::LorentzianOhmic(terms) => terms
                .iter()
                .map(|t| t.weight * z / upsilon_c(z, t.center, t.width))
                .sum(),
            SpectralDensity::LorentzianSuperOhmic(terms) => terms
                .iter()
                .map(|t| {
                    t.weight * z * z * z
                        / (upsilon_c(z, t.center1, t.width1) * upsilon_c(z, t.center2, t.width2))
                })
                .sum(),
            SpectralDensity::Discrete(_) => unreachable!("complex evaluation of a discrete bath"),
        }
    }

    /// Poles of J in the lower half plane together with the residues of J
    /// there. Continuous variants only.
    fn lhp_poles(&self) -> Vec<(C64, C64)> {
        let mut out = Vec::new();
        match self {
            SpectralDensity::LorentzianOhmic(terms) => {
                for t in terms {
                    let roots = upsilon_roots(t.center, t.width);
                    for &z in roots.iter().filter(|z| z.im < 0.0) {
                        let res = t.weight * z / poly_prod_skip(&roots, z);
                        out.push((z, res));
                    }
                }
            }
            SpectralDensity::LorentzianSuperOhmic(terms) => {
                for t in terms {
                    let mut roots = upsilon_roots(t.center1, t.width1);
                    roots.extend(upsilon_roots(t.center2, t.width2));
                    for &z in roots.iter().filter(|z| z.im < 0.0) {
                        let res = t.weight * z * z * z / poly_prod_skip(&roots, z);
                        out.push((z, res));
                    }
                }
            }
            SpectralDensity::Discrete(_) => unreachable!("pole expansion of a discrete bath"),
        }
        out
    }

    /// Reorganization energy `lambda = (1/pi) int_0^inf J(w)/w dw`,
    /// evaluated in closed form (residues) for the Lorentzian families and
    /// as the exact sum `sum c_j^2 / (2 w_j^2)` for discrete baths.
    pub fn reorganization_energy(&self) -> f64 {
        match self {
            SpectralDensity::Discrete(modes) => modes
                .iter()
                .map(|m| m.coupling.powi(2) / (2.0 * m.frequency.powi(2)))
                .sum(),
            SpectralDensity::LorentzianOhmic(terms) => {
                // (1/pi) int_0^inf p/Y dw = p / (4 G (W^2 + G^2))
                terms
                    .iter()
                    .map(|t| t.weight / (4.0 * t.width * (t.center.powi(2) + t.width.powi(2))))
                    .sum()
            }
            SpectralDensity::LorentzianSuperOhmic(terms) => {
                // lambda = i * sum_{UHP poles} Res[J(w)/w]; J/w is even and
                // analytic at 0, so the half-line integral is half the line.
                let mut lam = C64::new(0.0, 0.0);
                for t in terms {
                    let mut roots = upsilon_roots(t.center1, t.width1);
                    roots.extend(upsilon_roots(t.center2, t.width2));
                    for &z in roots.iter().filter(|z| z.im > 0.0) {
                        lam += t.weight * z * z / poly_prod_skip(&roots, z);
                    }
                }
                (C64::i() * lam).re
            }
        }
    }

    /// Position of the maximum of J on the positive half line (the cutoff
    /// estimate `Lambda`). Grid scan plus golden-section refinement.
    pub fn argmax(&self) -> f64 {
        match self {
            SpectralDensity::Discrete(modes) => {
                let mut best = (0.0, f64::MIN);
                for (j, m) in modes.iter().enumerate() {
                    let d = local_spacing(modes, j);
                    let v = std::f64::consts::PI * m.coupling.powi(2) / (2.0 * m.frequency * d);
                    if v > best.1 {
                        best = (m.frequency, v);
                    }
                }
                best.0
            }
            _ => {
                let hi = self.frequency_scale_hi();
                let lo = hi * 1e-6;
                let n = 4096;
                let ratio = (hi / lo).ln() / (n as f64 - 1.0);
                let mut best = (lo, f64::MIN);
                for i in 0..n {
                    let w = lo * (ratio * i as f64).exp();
                    let v = self.evaluate(w);
                    if v > best.1 {
                        best = (w, v);
                    }
                }
                let a = best.0 * (-ratio).exp();
                let b = best.0 * ratio.exp();
                golden_max(|w| self.evaluate(w), a, b, 1e-12 * best.0)
            }
        }
    }

    /// Upper frequency scale beyond which J is negligible.
    fn frequency_scale_hi(&self) -> f64 {
        match self {
            SpectralDensity::LorentzianOhmic(terms) => terms
                .iter()
                .map(|t| t.center + 40.0 * t.width)
                .fold(0.0, f64::max),
            SpectralDensity::LorentzianSuperOhmic(terms) => terms
                .iter()
                .map(|t| (t.center1 + 40.0 * t.width1).max(t.center2 + 40.0 * t.width2))
                .fold(0.0, f64::max),
            SpectralDensity::Discrete(modes) => modes.last().map(|m| 2.0 * m.frequency).unwrap_or(1.0),
        }
    }

    fn frequency_scale_lo(&self) -> f64 {
        match self {
            SpectralDensity::LorentzianOhmic(terms) => {
                terms.iter().map(|t| t.center).fold(f64::MAX, f64::min) * 1e-6
            }
            SpectralDensity::LorentzianSuperOhmic(terms) => {
                terms
                    .iter()
                    .map(|t| t.center1.min(t.center2))
                    .fold(f64::MAX, f64::min)
                    * 1e-6
            }
            SpectralDensity::Discrete(modes) => modes[0].frequency * 1e-3,
        }
    }
}

fn upsilon(w: f64, center: f64, width: f64) -> f64 {
    ((w + center).powi(2) + width.powi(2)) * ((w - center).powi(2) + width.powi(2))
}

fn upsilon_c(z: C64, center: f64, width: f64) -> C64 {
    let g2 = C64::new(width * width, 0.0);
    ((z + center) * (z + center) + g2) * ((z - center) * (z - center) + g2)
}

/// The four simple roots of Y(W, G) as a monic quartic in omega.
fn upsilon_roots(center: f64, width: f64) -> Vec<C64> {
    vec![
        C64::new(center, width),
        C64::new(center, -width),
        C64::new(-center, width),
        C64::new(-center, -width),
    ]
}

/// prod_{j != k} (z_k - z_j) for the root list: the derivative of the
/// monic polynomial at one of its simple roots.
fn poly_prod_skip(roots: &[C64], z: C64) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    let mut skipped = false;
    for &r in roots {
        if !skipped && (r - z).norm() < 1e-300 {
            skipped = true;
            continue;
        }
        p *= z - r;
    }
    p
}

fn local_spacing(modes: &[DiscreteMode], j: usize) -> f64 {
    let n = modes.len();
    if n == 1 {
        return modes[0].frequency;
    }
    if j == 0 {
        modes[1].frequency - modes[0].frequency
    } else if j == n - 1 {
        modes[n - 1].frequency - modes[n - 2].frequency
    } else {
        0.5 * (modes[j + 1].frequency - modes[j - 1].frequency)
    }
}

/// coth for complex argument, stable for large |Re z|.
fn coth_c(z: C64) -> C64 {
    if z.re.abs() > 20.0 {
        let s = if z.re > 0.0 { 1.0 } else { -1.0 };
        let e = (-2.0 * s * z).exp();
        return C64::new(s, 0.0) * (1.0 + e) / (1.0 - e);
    }
    let e = (2.0 * z).exp();
    (e + 1.0) / (e - 1.0)
}

/// One exponential term of the correlation expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    /// alpha_k in C(t) = sum alpha_k exp(i gamma_k t).
    pub amp: C64,
    /// alpha-tilde_k in C*(t) = sum at_k exp(i gamma_k t).
    pub amp_conj: C64,
    /// gamma_k; the ADO damping rate is i gamma_k.
    pub exponent: C64,
    /// True when the term stems from a Bose-function pole.
    pub matsubara: bool,
}

/// The list of damped exponentials representing C(t); the sole bath input
/// the hierarchy needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationExpansion {
    pub terms: Vec<ExpTerm>,
}

impl CorrelationExpansion {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// C(t) from the expansion (t >= 0).
    pub fn eval(&self, t: f64) -> C64 {
        self.terms
            .iter()
            .map(|c| c.amp * (C64::i() * c.exponent * t).exp())
            .sum()
    }

    /// C*(t) from the conjugate-side amplitudes (t >= 0).
    pub fn eval_conj_side(&self, t: f64) -> C64 {
        self.terms
            .iter()
            .map(|c| c.amp_conj * (C64::i() * c.exponent * t).exp())
            .sum()
    }

    /// C(0) = sum_k alpha_k; real for a valid expansion.
    pub fn c0(&self) -> C64 {
        self.terms.iter().map(|c| c.amp).sum()
    }

    fn pair_conjugates(terms: &mut Vec<ExpTerm>) -> Result<()> {
        // at(gamma) = conj(alpha(gamma')) where gamma' = -conj(gamma).
        let exps: Vec<C64> = terms.iter().map(|t| t.exponent).collect();
        let amps: Vec<C64> = terms.iter().map(|t| t.amp).collect();
        for term in terms.iter_mut() {
            let target = -term.exponent.conj();
            let scale = term.exponent.norm().max(1.0);
            let partner = exps
                .iter()
                .position(|g| (g - target).norm() <= 1e-10 * scale)
                .ok_or_else(|| {
                    CoreError::Numerics(
                        "correlation expansion has no conjugate partner term".into(),
                    )
                })?;
            term.amp_conj = amps[partner].conj();
        }
        Ok(())
    }
}

/// A bath attached to a system: spectral density, temperature, Matsubara
/// count and the index of the system coupling operator it belongs to.
#[derive(Debug, Clone)]
pub struct BathSpec {
    pub sd: SpectralDensity,
    pub temperature: f64,
    pub n_matsubara: usize,
    pub coupling_op: usize,
}

impl BathSpec {
    pub fn beta(&self) -> f64 {
        kelvin_to_beta(self.temperature)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature <= 0.0 {
            return Err(CoreError::Config("temperature must be positive".into()));
        }
        self.sd.validate()
    }

    /// Expansion dispatch: pole/residue expansion for continuous baths,
    /// the exact two-terms-per-mode expansion for discrete baths.
    pub fn expand(&self) -> Result<CorrelationExpansion> {
        self.validate()?;
        match &self.sd {
            SpectralDensity::Discrete(modes) => Ok(discrete_expansion(modes, self.beta())),
            _ => expand_correlation(&self.sd, self.beta(), self.n_matsubara),
        }
    }
}

/// Exponential expansion of C(t) for a continuous spectral density:
/// one term per lower-half-plane pole of J (two per Ohmic Lorentzian,
/// four per super-Ohmic term) plus `n_matsubara` Bose-pole terms at
/// gamma = i 2 pi k / beta.
pub fn expand_correlation(
    sd: &SpectralDensity,
    beta: f64,
    n_matsubara: usize,
) -> Result<CorrelationExpansion> {
    if beta <= 0.0 {
        return Err(CoreError::Config("beta must be positive".into()));
    }
    if !sd.is_continuous() {
        return Err(CoreError::Config(
            "pole expansion needs a continuous spectral density".into(),
        ));
    }
    sd.validate()?;
    let mut terms = Vec::new();
    // C(t>0) = -2i sum_p Res[J](w_p) (n(w_p)+1) e^{-i w_p t}  (poles of J)
    //          - (2i/beta) sum_k J(-i nu_k) e^{-nu_k t}        (Bose poles)
    for (pole, res) in sd.lhp_poles() {
        let n_plus_1 = 0.5 * (coth_c(0.5 * beta * pole) + 1.0);
        let amp = -2.0 * C64::i() * res * n_plus_1;
        terms.push(ExpTerm {
            amp,
            amp_conj: C64::new(0.0, 0.0),
            exponent: -pole,
            matsubara: false,
        });
    }
    for k in 1..=n_matsubara {
        let nu = 2.0 * std::f64::consts::PI * k as f64 / beta;
        let amp = -2.0 * C64::i() / beta * sd.evaluate_complex(C64::new(0.0, -nu));
        terms.push(ExpTerm {
            amp,
            amp_conj: C64::new(0.0, 0.0),
            exponent: C64::new(0.0, nu),
            matsubara: true,
        });
    }
    CorrelationExpansion::pair_conjugates(&mut terms)?;
    Ok(CorrelationExpansion { terms })
}

/// Exact expansion for a bath of undamped modes: two oscillatory terms
/// per mode, weighted by coth(beta w/2) +/- 1 so that
/// `C(t) = sum_j (c_j^2/2w_j) [coth(beta w_j/2) cos(w_j t) - i sin(w_j t)]`.
/// No Matsubara terms arise.
pub fn discrete_expansion(modes: &[DiscreteMode], beta: f64) -> CorrelationExpansion {
    let mut terms = Vec::with_capacity(2 * modes.len());
    for m in modes {
        let pref = m.coupling.powi(2) / (4.0 * m.frequency);
        let coth = coth_c(C64::new(0.5 * beta * m.frequency, 0.0)).re;
        let absorb = C64::new(pref * (coth + 1.0), 0.0);
        let emit = C64::new(pref * (coth - 1.0), 0.0);
        terms.push(ExpTerm {
            amp: absorb,
            amp_conj: emit,
            exponent: C64::new(-m.frequency, 0.0),
            matsubara: false,
        });
        terms.push(ExpTerm {
            amp: emit,
            amp_conj: absorb,
            exponent: C64::new(m.frequency, 0.0),
            matsubara: false,
        });
    }
    CorrelationExpansion { terms }
}

/// Crude total-weight scale used to bound truncation tails.
fn weight_scale(sd: &SpectralDensity) -> f64 {
    match sd {
        SpectralDensity::LorentzianOhmic(terms) => terms.iter().map(|t| t.weight.abs()).sum(),
        SpectralDensity::LorentzianSuperOhmic(terms) => {
            terms.iter().map(|t| t.weight.abs()).sum()
        }
        SpectralDensity::Discrete(_) => 0.0,
    }
}

/// Numerical C(t) directly from the defining integral; the oracle the
/// expansion is validated against. The removable singularity of the Bose
/// factor at omega = 0 is handled by a series expansion of
/// `w coth(beta w / 2)` for small `|beta w|`. The upper cutoff is pushed
/// out until the neglected Lorentzian tail (bounded by `p / 2 W^2`) is
/// negligible against a rough magnitude estimate of C(0).
pub fn correlation_quadrature(sd: &SpectralDensity, beta: f64, t: f64) -> Result<C64> {
    if !sd.is_continuous() {
        return Err(CoreError::Config(
            "quadrature oracle needs a continuous spectral density".into(),
        ));
    }
    if beta <= 0.0 {
        return Err(CoreError::Config("beta must be positive".into()));
    }
    let pi = std::f64::consts::PI;
    let hi_base = sd.frequency_scale_hi() + 40.0 / beta;
    // rough scale of C(0) from the reorganization energy
    let scale = (sd.reorganization_energy()
        * (2.0 / beta).max(sd.argmax()))
    .abs()
    .max(1e-300);
    let mut hi = hi_base;
    while weight_scale(sd) / (2.0 * pi * hi * hi) > 1e-6 * scale && hi < 1e6 {
        hi *= 2.0;
    }
    // real part: (1/pi) int_0^inf [J(w)/w] * [w coth(bw/2)] cos(wt) dw
    let re_integrand = |w: f64| {
        if w == 0.0 {
            // J/w at 0 times 2/beta
            let jw = sd.evaluate(1e-12) / 1e-12;
            return jw * 2.0 / beta / pi;
        }
        let x = 0.5 * beta * w;
        let wcoth = if x.abs() < 1e-3 {
            // w coth(bw/2) = 2/b + b w^2/6 - b^3 w^4/360 + ...
            2.0 / beta + beta * w * w / 6.0 - beta.powi(3) * w.powi(4) / 360.0
        } else {
            w / x.tanh()
        };
        sd.evaluate(w) / w * wcoth * (w * t).cos() / pi
    };
    let im_integrand = |w: f64| -sd.evaluate(w) * (w * t).sin() / pi;
    // Panel budget scales with the number of oscillation periods.
    let periods = (hi * t.abs() / (2.0 * pi)).ceil() as usize;
    let max_panels = 600 + 40 * periods.min(4000);
    let re = adaptive_quad(re_integrand, 0.0, hi, 1e-10, 1e-16, max_panels)?;
    let im = adaptive_quad(im_integrand, 0.0, hi, 1e-10, 1e-16, max_panels)?;
    Ok(C64::new(re, im))
}

/// Reorganization energy by adaptive quadrature (test oracle for the
/// closed forms).
pub fn reorganization_energy_quadrature(sd: &SpectralDensity) -> Result<f64> {
    match sd {
        SpectralDensity::Discrete(_) => Ok(sd.reorganization_energy()),
        _ => {
            let hi = sd.frequency_scale_hi();
            adaptive_quad(
                |w| {
                    if w == 0.0 {
                        sd.evaluate(1e-12) / 1e-12 / std::f64::consts::PI
                    } else {
                        sd.evaluate(w) / w / std::f64::consts::PI
                    }
                },
                0.0,
                hi,
                1e-11,
                1e-18,
                4000,
            )
        }
    }
}

/// Discretize a continuous spectral density into `n` undamped modes, each
/// carrying an equal fraction of the reorganization energy. The cumulative
/// reorganization integral is inverted with monotone cubic interpolation
/// on a 10^4-point logarithmic grid.
pub fn discretize_makri(sd: &SpectralDensity, n: usize) -> Result<Vec<DiscreteMode>> {
    if n == 0 {
        return Err(CoreError::Config("discretization needs at least one mode".into()));
    }
    if !sd.is_continuous() {
        return Err(CoreError::Config("can only discretize a continuous density".into()));
    }
    sd.validate()?;
    let lambda = sd.reorganization_energy();
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(CoreError::Config("reorganization energy must be finite and positive".into()));
    }

    let n_grid = 10_000;
    let lo = sd.frequency_scale_lo();
    let mut hi = sd.frequency_scale_hi();
    let pi = std::f64::consts::PI;
    // Extend the grid until the cumulative integral captures lambda.
    let mut grid;
    let mut cum;
    let mut attempts = 0;
    loop {
        let ratio = (hi / lo).ln() / (n_grid as f64 - 1.0);
        grid = (0..n_grid)
            .map(|i| lo * (ratio * i as f64).exp())
            .collect::<Vec<f64>>();
        cum = vec![0.0f64; n_grid];
        let mut acc = 0.0;
        let mut prev_w = 0.0;
        let mut prev_f = sd.evaluate(1e-12) / 1e-12 / pi;
        for i in 0..n_grid {
            let w = grid[i];
            let f = sd.evaluate(w) / w / pi;
            acc += 0.5 * (f + prev_f) * (w - prev_w);
            cum[i] = acc;
            prev_w = w;
            prev_f = f;
        }
        if cum[n_grid - 1] >= lambda * (1.0 - 1e-7) || attempts >= 12 {
            break;
        }
        hi *= 2.0;
        attempts += 1;
    }
    let total = cum[n_grid - 1];
    if total < lambda * (1.0 - 1e-4) {
        return Err(CoreError::Numerics(
            "cumulative reorganization integral failed to reach lambda".into(),
        ));
    }
    // Strictly increasing subset for the inverse interpolant.
    let mut xs = Vec::with_capacity(n_grid);
    let mut ys = Vec::with_capacity(n_grid);
    let mut last = -1.0;
    for i in 0..n_grid {
        if cum[i] > last {
            xs.push(cum[i]);
            ys.push(grid[i]);
            last = cum[i];
        }
    }
    if xs.len() < 4 {
        return Err(CoreError::Numerics(
            "cumulative reorganization integral is not invertible (non-monotone)".into(),
        ));
    }
    let inverse = Pchip::new(xs, ys)?;
    let c_scale = (2.0 * lambda / n as f64).sqrt();
    let mut modes = Vec::with_capacity(n);
    let mut prev = 0.0;
    for j in 0..n {
        let target = total * (j as f64 + 0.5) / n as f64;
        let w = inverse.eval(target);
        if !(w.is_finite() && w > prev) {
            return Err(CoreError::Numerics(
                "discretization produced non-increasing frequencies".into(),
            ));
        }
        modes.push(DiscreteMode { frequency: w, coupling: w * c_scale });
        prev = w;
    }
    Ok(modes)
}

/// Bath fluctuation amplitude squared, `Delta^2 = C(0)`, by quadrature.
pub fn fluctuation_amplitude_sq(sd: &SpectralDensity, beta: f64) -> Result<f64> {
    match sd {
        SpectralDensity::Discrete(modes) => Ok(modes
            .iter()
            .map(|m| {
                m.coupling.powi(2) / (2.0 * m.frequency)
                    * coth_c(C64::new(0.5 * beta * m.frequency, 0.0)).re
            })
            .sum()),
        _ => {
            let c0 = correlation_quadrature(sd, beta, 0.0)?;
            Ok(c0.re)
        }
    }
}

/// Mukamel's kappa = Lambda / Delta: ratio of the spectral-density cutoff
/// (energy at the maximum of J) to the fluctuation amplitude.
pub fn kappa(sd: &SpectralDensity, beta: f64) -> Result<f64> {
    let d2 = fluctuation_amplitude_sq(sd, beta)?;
    if d2 <= 0.0 {
        return Err(CoreError::Numerics("C(0) must be positive for kappa".into()));
    }
    Ok(sd.argmax() / d2.sqrt())
}

/// Construct a single-term Ohmic Lorentzian hitting target values of
/// (kappa, lambda) at inverse temperature beta, with a fixed shape ratio
/// `width/center`. Used to realize spectral-density ladders for which only
/// kappa and lambda are prescribed.
pub fn fit_kappa_lambda(
    kappa_target: f64,
    lambda_target: f64,
    beta: f64,
    shape: f64,
) -> Result<SpectralDensity> {
    if !(kappa_target > 0.0 && lambda_target > 0.0 && shape > 0.0) {
        return Err(CoreError::Config("fit targets must be positive".into()));
    }
    let base_center = 1.0;
    let unit = |scale: f64| -> SpectralDensity {
        SpectralDensity::LorentzianOhmic(vec![OhmicTerm {
            weight: 1.0,
            center: base_center * scale,
            width: shape * base_center * scale,
        }])
    };
    // At fixed sigma: Delta^2 and lambda are linear in the weight, so the
    // weight is eliminated and a 1-D root find in log-scale remains.
    let lambda_of = |log_sigma: f64| -> Result<(f64, f64, f64)> {
        let sigma = log_sigma.exp();
        let sd = unit(sigma);
        let cutoff = sd.argmax();
        let d2_unit = fluctuation_amplitude_sq(&sd, beta)?;
        let lam_unit = sd.reorganization_energy();
        let weight = cutoff.powi(2) / (kappa_target.powi(2) * d2_unit);
        Ok((weight * lam_unit, weight, sigma))
    };
    let mut lo = -14.0f64;
    let mut hi = 2.0f64;
    let f_lo = lambda_of(lo)?.0 - lambda_target;
    let f_hi = lambda_of(hi)?.0 - lambda_target;
    if f_lo * f_hi > 0.0 {
        return Err(CoreError::Numerics(
            "kappa/lambda targets not bracketed by the scale sweep".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = lambda_of(mid)?.0 - lambda_target;
        if f_mid.abs() <= 1e-10 * lambda_target {
            break;
        }
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, weight, sigma) = lambda_of(0.5 * (lo + hi))?;
    let sd = SpectralDensity::LorentzianOhmic(vec![OhmicTerm {
        weight,
        center: base_center * sigma,
        width: shape * base_center * sigma,
    }]);
    Ok(sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn app_sd() -> SpectralDensity {
        SpectralDensity::LorentzianOhmic(vec![OhmicTerm {
            weight: 2.0e-12,
            center: 4.5e-3,
            width: 4.0e-4,
        }])
    }

    #[test]
    fn sd_is_odd_and_vanishes_at_zero() {
        let sd = app_sd();
        assert_eq!(sd.evaluate(0.0), 0.0);
        for &w in &[1e-4, 3.3e-3, 8e-3] {
            assert_eq!(sd.evaluate(-w), -sd.evaluate(w));
        }
    }

    #[test]
    fn ohmic_closed_form_matches_direct_formula() {
        let (p, w0, g) = (3.7e-10, 2.0e-3, 5.0e-4);
        let sd = SpectralDensity::LorentzianOhmic(vec![OhmicTerm {
            weight: p,
            center: w0,
            width: g,
        }]);
        for i in 0..10 {
            let w = 1e-4 + 9e-4 * i as f64;
            let y = ((w + w0).powi(2) + g.powi(2)) * ((w - w0).powi(2) + g.powi(2));
            assert!((sd.evaluate(w) - p * w / y).abs() < 1e-18);
        }
    }

    #[test]
    fn sd_peak_near_center() {
        let sd = app_sd();
        let peak = sd.argmax();
        assert!(
            (peak - 4.5e-3).abs() < 2e-4,
            "peak {peak} should sit near the center frequency"
        );
    }

    #[test]
    fn superohmic_low_frequency_cubic() {
        let sd = SpectralDensity::LorentzianSuperOhmic(vec![SuperOhmicTerm {
            weight: 1.0e-8,
            center1: 2.0e-3,
            width1: 4.0e-4,
            center2: 3.0e-3,
            width2: 6.0e-4,
        }]);
        // slope of log J vs log w -> 3 as w -> 0+
        let (w1, w2) = (1e-6, 2e-6);
        let slope = (sd.evaluate(w2).ln() - sd.evaluate(w1).ln()) / (w2.ln() - w1.ln());
        assert!((slope - 3.0).abs() < 1e-3, "slope {slope}");
    }

    #[test]
    fn lambda_closed_form_vs_quadrature() {
        let sd = app_sd();
        let lam = sd.reorganization_energy();
        let lam_q = reorganization_energy_quadrature(&sd).unwrap();
        assert!((lam - lam_q).abs() < 1e-9 * lam.abs());

        let sd2 = SpectralDensity::LorentzianSuperOhmic(vec![SuperOhmicTerm {
            weight: 1.0e-8,
            center1: 2.0e-3,
            width1: 4.0e-4,
            center2: 3.0e-3,
            width2: 6.0e-4,
        }]);
        let lam2 = sd2.reorganization_energy();
        let lam2_q = reorganization_energy_quadrature(&sd2).unwrap();
        assert!(lam2 > 0.0);
        assert!((lam2 - lam2_q).abs() < 1e-8 * lam2.abs());
    }

    #[test]
    fn app_lambda_gives_printed_coupling_ratio() {
        // eta = lambda / cutoff with the cutoff at the density maximum
        let sd = app_sd();
        let eta = sd.reorganization_energy() / 4.5e-3;
        assert!((eta - 0.013).abs() < 1e-3, "eta = {eta}");
    }

    #[test]
    fn correlation_is_real_at_t0() {
        let sd = app_sd();
        let beta = kelvin_to_beta(298.0);
        let c0 = correlation_quadrature(&sd, beta, 0.0).unwrap();
        assert!(c0.re > 0.0);
        assert!(c0.im.abs() < 1e-10 * c0.re);
    }

    #[test]
    fn zero_weight_density_gives_zero_correlation() {
        let sd = SpectralDensity::LorentzianOhmic(vec![OhmicTerm {
            weight: 0.0,
            center: 1e-3,
            width: 1e-4,
        }]);
        let c = correlation_quadrature(&sd, 1000.0, 5.0).unwrap();
        assert!(c.norm() < 1e-18);
    }

    #[test]
    fn expansion_matches_quadrature_high_temperature() {
        let sd = app_sd();
        let beta = kelvin_to_beta(298.0);
        let exp = expand_correlation(&sd, beta, 0).unwrap();
        assert_eq!(exp.len(), 2);
        let c0 = exp.c0();
        assert!(c0.im.abs() < 1e-10 * c0.re.abs());
        let scale = c0.re;
        // [0, 1 ps]
        for i in 0..40 {
            let t = 41341.0 * i as f64 / 39.0;
            let a = exp.eval(t);
            let b = correlation_quadrature(&sd, beta, t).unwrap();
            assert!(
                (a - b).norm() < 1e-3 * scale,
                "t={t}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn matsubara_terms_fix_low_temperature_expansion() {
        // beta*center ~ 20: the bare pole terms are visibly wrong, the
        // Matsubara series repairs them.
        let sd = SpectralDensity::LorentzianOhmic(vec![OhmicTerm {
            weight: 5.0e-11,
            center: 4.0e-3,
            width: 8.0e-4,
        }]);
        let beta = 5000.0;
        let bare = expand_correlation(&sd, beta, 0).unwrap();
        let fixed = expand_correlation(&sd, beta, 40).unwrap();
        let scale = correlation_quadrature(&sd, beta, 0.0).unwrap().re;
        let mut worst_bare = 0.0f64;
        let mut worst_fixed = 0.0f64;
        for i in 0..25 {
            let t = 4000.0 * i as f64 / 24.0;
            let q = correlation_quadrature(&sd, beta, t).unwrap();
            worst_bare = worst_bare.max((bare.eval(t) - q).norm() / scale);
            worst_fixed = worst_fixed.max((fixed.eval(t) - q).norm() / scale);
        }
        assert!(worst_fixed < 2e-4, "with Matsubara: {worst_fixed}");
        assert!(worst_bare > 10.0 * worst_fixed, "bare {worst_bare} vs fixed {worst_fixed}");
    }

    #[test]
    fn conjugate_side_reconstructs_c_of_minus_t() {
        let sd = app_sd();
        let beta = kelvin_to_beta(298.0);
        for n_mats in [0usize, 3] {
            let exp = expand_correlation(&sd, beta, n_mats).unwrap();
            for i in 0..30 {
                let t = 9000.0 * i as f64 / 29.0;
                let lhs = exp.eval_conj_side(t);
                let rhs = exp.eval(t).conj();
                assert!(
                    (lhs - rhs).norm() <= 1e-8 * rhs.norm().max(1e-300),
                    "t={t}"
                );
            }
        }
    }

    #[test]
    fn discrete_expansion_matches_closed_form() {
        let modes = vec![
            DiscreteMode { frequency: 2.0e-3, coupling: 3.0e-4 },
            DiscreteMode { frequency: 5.0e-3, coupling: 1.0e-4 },
        ];
        let beta = 1059.0;
        let exp = discrete_expansion(&modes, beta);
        assert_eq!(exp.len(), 4);
        let c0_closed: f64 = modes
            .iter()
            .map(|m| m.coupling.powi(2) / (2.0 * m.frequency) * (0.5 * beta * m.frequency).tanh().recip())
            .sum();
        assert!((exp.c0().re - c0_closed).abs() < 1e-15 * c0_closed.abs());
        assert!(exp.c0().im.abs() < 1e-18);
        for i in 0..20 {
            let t = 500.0 * i as f64;
            let want: C64 = modes
                .iter()
                .map(|m| {
                    let coth = (0.5 * beta * m.frequency).tanh().recip();
                    let pref = m.coupling.powi(2) / (2.0 * m.frequency);
                    C64::new(
                        pref * coth * (m.frequency * t).cos(),
                        -pref * (m.frequency * t).sin(),
                    )
                })
                .sum();
            assert!((exp.eval(t) - want).norm() < 1e-14 * want.norm().max(1e-30));
        }
    }

    #[test]
    fn discrete_zero_temperature_kills_emission_side() {
        let w = 1.0e-2;
        let beta = 50.0 / w; // beta * w = 50
        let modes = vec![DiscreteMode { frequency: w, coupling: 1e-3 }];
        let exp = discrete_expansion(&modes, beta);
        let absorb = exp.terms[0].amp.norm();
        let emit = exp.terms[1].amp.norm();
        assert!(emit < 1e-20 * absorb, "emit/absorb = {}", emit / absorb);
    }

    #[test]
    fn makri_modes_carry_equal_lambda_fractions() {
        let sd = app_sd();
        let lam = sd.reorganization_energy();
        for n in [1usize, 7, 40] {
            let modes = discretize_makri(&sd, n).unwrap();
            assert_eq!(modes.len(), n);
            let lam_sum: f64 = modes
                .iter()
                .map(|m| m.coupling.powi(2) / (2.0 * m.frequency.powi(2)))
                .sum();
            assert!(
                (lam_sum - lam).abs() < 1e-6 * lam,
                "n={n}: {lam_sum} vs {lam}"
            );
            for m in &modes {
                let lam_j = m.coupling.powi(2) / (2.0 * m.frequency.powi(2));
                assert!((lam_j - lam / n as f64).abs() < 1e-12 * lam);
            }
        }
    }

    #[test]
    fn single_makri_mode_sits_at_median_lambda_frequency() {
        let sd = app_sd();
        let modes = discretize_makri(&sd, 1).unwrap();
        let w_med = modes[0].frequency;
        // Half the reorganization energy lies below the mode frequency.
        let lam = sd.reorganization_energy();
        let below = adaptive_quad(
            |w| {
                if w == 0.0 {
                    0.0
                } else {
                    sd.evaluate(w) / w / std::f64::consts::PI
                }
            },
            0.0,
            w_med,
            1e-10,
            1e-18,
            2000,
        )
        .unwrap();
        assert!((below - 0.5 * lam).abs() < 2e-3 * lam, "below={below} lam={lam}");
    }

    #[test]
    fn kappa_scaling_halves_when_weights_quadruple() {
        let sd = app_sd();
        let beta = kelvin_to_beta(298.0);
        let k1 = kappa(&sd, beta).unwrap();
        let sd4 = SpectralDensity::LorentzianOhmic(vec![OhmicTerm {
            weight: 4.0 * 2.0e-12,
            center: 4.5e-3,
            width: 4.0e-4,
        }]);
        let k4 = kappa(&sd4, beta).unwrap();
        assert!((k4 - 0.5 * k1).abs() < 1e-6 * k1);
    }

    #[test]
    fn kappa_from_expansion_delta_agrees_with_quadrature() {
        let sd = app_sd();
        let beta = kelvin_to_beta(298.0);
        let d2_quad = fluctuation_amplitude_sq(&sd, beta).unwrap();
        let d2_exp = expand_correlation(&sd, beta, 60).unwrap().c0().re;
        assert!(
            (d2_quad - d2_exp).abs() < 1e-6 * d2_quad,
            "{d2_quad} vs {d2_exp}"
        );
    }

    #[test]
    fn fit_hits_kappa_lambda_targets() {
        let beta = kelvin_to_beta(298.0);
        for (kt, lt) in [(1.45, 1.25e-3), (0.65, 6.2e-3), (0.21, 1.9e-2)] {
            let sd = fit_kappa_lambda(kt, lt, beta, 0.5).unwrap();
            let k = kappa(&sd, beta).unwrap();
            let l = sd.reorganization_energy();
            assert!((k - kt).abs() < 1e-2 * kt, "kappa {k} vs {kt}");
            assert!((l - lt).abs() < 1e-3 * lt, "lambda {l} vs {lt}");
        }
    }

    #[test]
    fn rejects_nonpositive_beta() {
        let sd = app_sd();
        assert!(expand_correlation(&sd, 0.0, 0).is_err());
        assert!(expand_correlation(&sd, -3.0, 2).is_err());
    }
}
