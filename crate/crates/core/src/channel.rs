//! Heterogeneous user populations and Kronecker-correlated Rayleigh channels.
//!
//! `H_k = sqrt(ρ_k) R_r^{1/2} H_w R_t^{1/2}` with `[R]_{ij} = c^{|i-j|²}` and a
//! path-loss power normalized to the reference distance.
//!
//! Randomness is counter-based: one ChaCha8 stream per trial, and inside it a
//! disjoint block of words per user, so any trial can be regenerated on any
//! thread without replaying earlier ones.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::{row_space_basis, CMatrix, OrthonormalBasis};

/// Words reserved per user inside a trial stream.
const USER_BLOCK_SHIFT: u32 = 40;
/// Streams with this bit set feed schedulers, never channels.
const SCHEDULER_DOMAIN: u64 = 1 << 63;
/// Stream used for attributes that stay fixed across trials.
const FIXED_ATTRIBUTE_STREAM: u64 = u64::MAX;

/// Receive-antenna count of a user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Antennas {
    Fixed(usize),
    /// Uniform on `{1, ..., n}`.
    UniformUpTo(usize),
}

/// A real-valued attribute that is either fixed or drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Draw {
    Fixed(f64),
    Uniform { low: f64, high: f64 },
}

impl Draw {
    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Draw::Fixed(v) => v,
            Draw::Uniform { low, high } if low == high => low,
            Draw::Uniform { low, high } => rng.random_range(low..=high),
        }
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            Draw::Fixed(v) => (v, v),
            Draw::Uniform { low, high } => (low, high),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: usize,
    pub antennas: Antennas,
    /// Distance to the base station in meters.
    pub distance: Draw,
    /// Receive correlation coefficient `γ_r`.
    pub receive_correlation: Draw,
    /// Transmit correlation coefficient `τ_t`.
    pub transmit_correlation: Draw,
}

impl UserProfile {
    /// A user drawn the default way: distance in `[200, 1000]` m and both
    /// correlation coefficients uniform on `[0, 1]`.
    pub fn randomized(id: usize, antennas: Antennas) -> Self {
        Self {
            id,
            antennas,
            distance: Draw::Uniform {
                low: 200.0,
                high: 1000.0,
            },
            receive_correlation: Draw::Uniform { low: 0.0, high: 1.0 },
            transmit_correlation: Draw::Uniform { low: 0.0, high: 1.0 },
        }
    }

    fn max_antennas(&self) -> usize {
        match self.antennas {
            Antennas::Fixed(n) | Antennas::UniformUpTo(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub transmit_antennas: usize,
    pub users: Vec<UserProfile>,
    /// Reference transmit power `P_T`; it cancels in the normalized `ρ_k`.
    pub transmit_power: f64,
    pub noise_variance: f64,
    pub path_loss_exponent: f64,
    pub reference_distance: f64,
    /// `P_T / σ_n²` points in dB.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Redraw random user attributes every trial; otherwise draw them once.
    pub redraw_per_trial: bool,
}

impl Scenario {
    /// Scenario with the default simulation constants and the given users.
    pub fn new(transmit_antennas: usize, users: Vec<UserProfile>) -> Self {
        Self {
            transmit_antennas,
            users,
            transmit_power: 1.0,
            noise_variance: 1.0,
            path_loss_exponent: 3.0,
            reference_distance: 200.0,
            snr_db: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            trials: 2000,
            seed: 0,
            redraw_per_trial: true,
        }
    }

    /// Users with fixed antenna counts and randomized everything else.
    pub fn with_antennas(transmit_antennas: usize, antennas: &[usize]) -> Self {
        let users = antennas
            .iter()
            .enumerate()
            .map(|(id, &n)| UserProfile::randomized(id, Antennas::Fixed(n)))
            .collect();
        Self::new(transmit_antennas, users)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.transmit_antennas == 0 {
            return bad("transmit_antennas must be >= 1".into());
        }
        if self.users.is_empty() {
            return bad("at least one user is required".into());
        }
        if !(self.path_loss_exponent > 0.0) {
            return bad("path_loss_exponent must be > 0".into());
        }
        if !(self.reference_distance > 0.0) {
            return bad("reference_distance must be > 0".into());
        }
        if !(self.noise_variance > 0.0) || !(self.transmit_power > 0.0) {
            return bad("noise_variance and transmit_power must be > 0".into());
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.snr_db.iter().any(|x| !x.is_finite()) {
            return bad("snr_db entries must be finite".into());
        }
        for u in &self.users {
            if u.max_antennas() == 0 {
                return bad(format!("user {}: antenna count must be >= 1", u.id));
            }
            let (lo, hi) = u.distance.bounds();
            if !(lo >= self.reference_distance) || !(hi >= lo) || !hi.is_finite() {
                return bad(format!(
                    "user {}: distance range [{lo}, {hi}] must lie at or beyond {} m",
                    u.id, self.reference_distance
                ));
            }
            for (name, d) in [
                ("receive_correlation", u.receive_correlation),
                ("transmit_correlation", u.transmit_correlation),
            ] {
                let (lo, hi) = d.bounds();
                if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || hi < lo {
                    return bad(format!("user {}: {name} must lie in [0, 1]", u.id));
                }
            }
        }
        let antenna_total: usize = self.users.iter().map(UserProfile::max_antennas).sum();
        if antenna_total <= self.transmit_antennas {
            log::warn!(
                "scenario is not overloaded: {antenna_total} receive antennas vs {} transmit",
                self.transmit_antennas
            );
        }
        Ok(())
    }

    /// Same scenario restricted to the first `count` users.
    pub fn truncated(&self, count: usize) -> Self {
        let mut s = self.clone();
        s.users.truncate(count);
        s
    }
}

/// One user's channel in one trial.
#[derive(Debug, Clone)]
pub struct UserChannel {
    pub id: usize,
    /// Normalized received power `ρ_k` in `(0, 1]`.
    pub rho: f64,
    /// Small-scale part `H̄_k`.
    pub hbar: CMatrix,
    /// Full channel `sqrt(ρ_k) H̄_k`.
    pub h: CMatrix,
    row_basis: Option<OrthonormalBasis>,
    frobenius: f64,
}

impl UserChannel {
    pub fn new(id: usize, rho: f64, hbar: CMatrix) -> Self {
        let h = &hbar * Complex64::new(rho.sqrt(), 0.0);
        let row_basis = row_space_basis(&hbar).ok();
        let frobenius = h.norm();
        Self {
            id,
            rho,
            hbar,
            h,
            row_basis,
            frobenius,
        }
    }

    pub fn receive_antennas(&self) -> usize {
        self.hbar.nrows()
    }

    pub fn transmit_antennas(&self) -> usize {
        self.hbar.ncols()
    }

    /// Orthonormal basis of the row space, `None` for an all-zero channel.
    pub fn row_basis(&self) -> Option<&OrthonormalBasis> {
        self.row_basis.as_ref()
    }

    /// Numerical rank of the channel.
    pub fn rank(&self) -> usize {
        self.row_basis.as_ref().map_or(0, OrthonormalBasis::dim)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius
    }
}

#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub transmit_antennas: usize,
    pub users: Vec<UserChannel>,
}

impl ChannelRealization {
    pub fn new(transmit_antennas: usize, users: Vec<UserChannel>) -> Self {
        Self {
            transmit_antennas,
            users,
        }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn user(&self, index: usize) -> &UserChannel {
        &self.users[index]
    }

    pub fn select(&self, indices: &[usize]) -> Vec<&UserChannel> {
        indices.iter().map(|&i| &self.users[i]).collect()
    }
}

/// Counter-based random streams derived from one seed.
#[derive(Debug, Clone, Copy)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn block(&self, stream: u64, block: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(block) << USER_BLOCK_SHIFT);
        rng
    }

    /// Channel stream of user `user` in trial `trial`.
    pub fn user(&self, trial: u64, user: usize) -> ChaCha8Rng {
        self.block(trial & !SCHEDULER_DOMAIN, user as u64)
    }

    /// Stream for attributes drawn once for the whole run.
    pub fn fixed_attributes(&self, user: usize) -> ChaCha8Rng {
        self.block(FIXED_ATTRIBUTE_STREAM, user as u64)
    }

    /// Stream for randomized scheduling decisions of run `run` in trial `trial`.
    pub fn scheduler(&self, trial: u64, run: usize) -> ChaCha8Rng {
        self.block(trial | SCHEDULER_DOMAIN, run as u64)
    }
}

/// `ρ = (P_T / (M_T d^α)) / (P_T / (M_T d_ref^α)) = (d_ref / d)^α`.
pub fn received_power(
    transmit_power: f64,
    transmit_antennas: usize,
    distance: f64,
    alpha: f64,
    reference_distance: f64,
) -> Result<f64> {
    if !(reference_distance > 0.0) || !(distance >= reference_distance) {
        return Err(Error::InvalidParameter(format!(
            "distance {distance} must be >= reference distance {reference_distance} > 0"
        )));
    }
    if transmit_antennas == 0 || !(transmit_power > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidParameter(
            "transmit power, antenna count and path-loss exponent must be positive".into(),
        ));
    }
    let m_t = transmit_antennas as f64;
    let raw = transmit_power / (m_t * distance.powf(alpha));
    let peak = transmit_power / (m_t * reference_distance.powf(alpha));
    Ok((raw / peak).min(1.0))
}

/// `[R]_{ij} = coef^{(i-j)²}` with `0⁰ = 1`.
pub fn correlation_matrix(coef: f64, n: usize) -> Result<CMatrix> {
    if !(0.0..=1.0).contains(&coef) {
        return Err(Error::InvalidParameter(format!(
            "correlation coefficient {coef} outside [0, 1]"
        )));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j) as i32;
        Complex64::new(coef.powi(d * d), 0.0)
    }))
}

/// Hermitian PSD square root through the eigendecomposition.
pub fn matrix_sqrt_psd(r: &CMatrix) -> Result<CMatrix> {
    if !r.is_square() {
        return Err(Error::ShapeMismatch {
            left: r.shape(),
            right: (r.nrows(), r.nrows()),
        });
    }
    crate::subspace::check_finite(r)?;
    let asymmetry = (r - r.adjoint()).camax();
    if asymmetry > 1e-10 {
        return Err(Error::NotHermitian { asymmetry });
    }
    let eig = r.clone().symmetric_eigen();
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &lambda in eig.eigenvalues.iter() {
        if lambda < -1e-10 {
            return Err(Error::Indefinite { eigenvalue: lambda });
        }
        roots.push(Complex64::new(lambda.max(0.0).sqrt(), 0.0));
    }
    let v = &eig.eigenvectors;
    let scaled = CMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * roots[j]);
    Ok(scaled * v.adjoint())
}

/// `n_r × n_t` matrix of i.i.d. `CN(0, 1)` entries, drawn row by row.
pub fn complex_gaussian(n_r: usize, n_t: usize, rng: &mut impl Rng) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(n_r, n_t);
    for i in 0..n_r {
        for j in 0..n_t {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = Complex64::new(re * scale, im * scale);
        }
    }
    m
}

/// Attributes of one user in one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserDraw {
    pub antennas: usize,
    pub distance: f64,
    pub receive_correlation: f64,
    pub transmit_correlation: f64,
}

fn draw_attributes(profile: &UserProfile, rng: &mut impl Rng) -> UserDraw {
    let antennas = match profile.antennas {
        Antennas::Fixed(n) => n,
        Antennas::UniformUpTo(n) => rng.random_range(1..=n),
    };
    UserDraw {
        antennas,
        distance: profile.distance.sample(rng),
        receive_correlation: profile.receive_correlation.sample(rng),
        transmit_correlation: profile.transmit_correlation.sample(rng),
    }
}

/// Kronecker channel `R_r^{1/2} H_w R_t^{1/2}` for fixed attributes.
pub fn kronecker_channel(
    draw: &UserDraw,
    transmit_antennas: usize,
    rng: &mut impl Rng,
) -> Result<CMatrix> {
    let hw = complex_gaussian(draw.antennas, transmit_antennas, rng);
    let rr = matrix_sqrt_psd(&correlation_matrix(draw.receive_correlation, draw.antennas)?)?;
    let rt = matrix_sqrt_psd(&correlation_matrix(draw.transmit_correlation, transmit_antennas)?)?;
    Ok(rr * hw * rt)
}

/// Channel realization of trial `trial`.
pub fn generate_realization(scenario: &Scenario, trial: u64) -> Result<ChannelRealization> {
    let streams = RngStreams::new(scenario.seed);
    let m_t = scenario.transmit_antennas;
    let mut users = Vec::with_capacity(scenario.users.len());
    for (index, profile) in scenario.users.iter().enumerate() {
        let mut rng = streams.user(trial, index);
        let draw = if scenario.redraw_per_trial {
            draw_attributes(profile, &mut rng)
        } else {
            draw_attributes(profile, &mut streams.fixed_attributes(index))
        };
        let rho = received_power(
            scenario.transmit_power,
            m_t,
            draw.distance,
            scenario.path_loss_exponent,
            scenario.reference_distance,
        )?;
        let hbar = kronecker_channel(&draw, m_t, &mut rng)?;
        users.push(UserChannel::new(index, rho, hbar));
    }
    Ok(ChannelRealization::new(m_t, users))
}
