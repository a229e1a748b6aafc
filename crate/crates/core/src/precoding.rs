//! Block-diagonalization precoding, power allocation and per-group capacity.
//!
//! Each user's precoder lives in the null space of every other group
//! member's channel. The second stage is the SVD of the resulting effective
//! channel, with power spread over its eigenmodes either uniformly or by
//! water-filling.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::UserChannel;
use crate::error::{Error, Result};
use crate::subspace::{span_union, CMatrix, OrthonormalBasis, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerPolicy {
    /// Same power on every active eigenmode of the group.
    Equal,
    #[default]
    Waterfilling,
}

impl std::fmt::Display for PowerPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PowerPolicy::Equal => "equal",
            PowerPolicy::Waterfilling => "waterfilling",
        })
    }
}

impl std::str::FromStr for PowerPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equal" => Ok(PowerPolicy::Equal),
            "waterfilling" => Ok(PowerPolicy::Waterfilling),
            other => Err(Error::Config(format!(
                "unknown power policy {other:?}; expected equal or waterfilling"
            ))),
        }
    }
}

/// Precoder of one scheduled user.
#[derive(Debug, Clone)]
pub struct UserPrecoder {
    pub id: usize,
    /// `F_a`: orthonormal basis of the null space of the other members.
    pub null_basis: OrthonormalBasis,
    /// `H_k F_a`.
    pub effective_channel: CMatrix,
    /// Right singular vectors of the effective channel, one per active mode.
    pub modes: CMatrix,
    /// `σ_i² / σ_n²` of each active mode, descending.
    pub gains: Vec<f64>,
    /// Power on each active mode.
    pub powers: Vec<f64>,
}

impl UserPrecoder {
    /// `Σ log2(1 + g_i p_i)`.
    pub fn capacity(&self) -> f64 {
        self.gains
            .iter()
            .zip(&self.powers)
            .map(|(g, p)| (g * p).ln_1p())
            .sum::<f64>()
            / std::f64::consts::LN_2
    }

    /// Full precoder `F_a F_b diag(sqrt(p))`, `M_T × modes`.
    pub fn precoder(&self) -> CMatrix {
        let mut fb = self.modes.clone();
        for (j, p) in self.powers.iter().enumerate() {
            fb.column_mut(j).scale_mut(p.sqrt());
        }
        self.null_basis.columns() * fb
    }
}

#[derive(Debug, Clone)]
pub struct BdPrecoderSet {
    pub users: Vec<UserPrecoder>,
    /// Amplitude per mode under an equal split of the budget, `sqrt(P_T / modes)`.
    pub beta: f64,
}

impl BdPrecoderSet {
    pub fn capacity(&self) -> f64 {
        self.users.iter().map(UserPrecoder::capacity).sum()
    }

    pub fn total_power(&self) -> f64 {
        self.users.iter().flat_map(|u| &u.powers).sum()
    }

    pub fn active_modes(&self) -> usize {
        self.users.iter().map(|u| u.gains.len()).sum()
    }
}

/// Sum of numerical ranks of `group`.
pub fn rank_sum(group: &[&UserChannel]) -> usize {
    group.iter().map(|u| u.rank()).sum()
}

/// True when the group satisfies the BD dimensionality constraint.
pub fn is_bd_feasible(group: &[&UserChannel], transmit_antennas: usize) -> bool {
    rank_sum(group) <= transmit_antennas
}

fn check_feasible(group: &[&UserChannel], transmit_antennas: usize) -> Result<()> {
    let total = rank_sum(group);
    if total > transmit_antennas {
        return Err(Error::BdInfeasible {
            rank_sum: total,
            transmit_antennas,
        });
    }
    for u in group {
        if u.transmit_antennas() != transmit_antennas {
            return Err(Error::DimensionMismatch {
                left: u.transmit_antennas(),
                right: transmit_antennas,
            });
        }
    }
    Ok(())
}

/// Null space of every group member except `skip`.
pub fn interference_null_space(
    group: &[&UserChannel],
    skip: usize,
    transmit_antennas: usize,
) -> Result<OrthonormalBasis> {
    let others = group
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .filter_map(|(_, u)| u.row_basis());
    match span_union(others, transmit_antennas)? {
        None => Ok(OrthonormalBasis::identity(transmit_antennas)),
        Some(span) => match span.complement() {
            Some(null) => Ok(null),
            None => OrthonormalBasis::from_columns(CMatrix::zeros(transmit_antennas, 0)),
        },
    }
}

struct Stage {
    id: usize,
    null_basis: OrthonormalBasis,
    effective: CMatrix,
    modes: CMatrix,
    singular: Vec<f64>,
}

fn null_space_stage(group: &[&UserChannel], transmit_antennas: usize) -> Result<Vec<Stage>> {
    check_feasible(group, transmit_antennas)?;
    let mut stages = Vec::with_capacity(group.len());
    for (i, user) in group.iter().enumerate() {
        let null_basis = interference_null_space(group, i, transmit_antennas)?;
        let effective = &user.h * null_basis.columns();
        let own_max = user
            .h
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max);
        let (modes, singular) = if effective.ncols() == 0 || own_max == 0.0 {
            (CMatrix::zeros(null_basis.dim(), 0), Vec::new())
        } else {
            let svd = effective.clone().svd(false, true);
            let v_t = svd.v_t.expect("right singular vectors requested");
            let s = &svd.singular_values;
            let mut keep: Vec<usize> = (0..s.len())
                .filter(|&j| s[j] > DEFAULT_RANK_TOL * own_max)
                .collect();
            keep.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
            let modes = v_t.select_rows(&keep).adjoint();
            (modes, keep.iter().map(|&j| s[j]).collect())
        };
        stages.push(Stage {
            id: user.id,
            null_basis,
            effective,
            modes,
            singular,
        });
    }
    Ok(stages)
}

/// BD precoders for `group` under `policy` with total power `transmit_power`.
pub fn bd_precoders(
    group: &[&UserChannel],
    transmit_antennas: usize,
    policy: PowerPolicy,
    transmit_power: f64,
    noise_variance: f64,
) -> Result<BdPrecoderSet> {
    if !(transmit_power > 0.0) || !(noise_variance > 0.0) {
        return Err(Error::InvalidParameter(
            "transmit power and noise variance must be > 0".into(),
        ));
    }
    let stages = null_space_stage(group, transmit_antennas)?;
    let gains: Vec<Vec<f64>> = stages
        .iter()
        .map(|s| s.singular.iter().map(|x| x * x / noise_variance).collect())
        .collect();
    let flat: Vec<f64> = gains.iter().flatten().copied().collect();
    let modes = flat.len();
    let flat_powers = if modes == 0 {
        Vec::new()
    } else {
        match policy {
            PowerPolicy::Equal => vec![transmit_power / modes as f64; modes],
            PowerPolicy::Waterfilling => waterfill(&flat, transmit_power)?,
        }
    };
    let mut offset = 0;
    let users = stages
        .into_iter()
        .zip(gains)
        .map(|(s, g)| {
            let powers = flat_powers[offset..offset + g.len()].to_vec();
            offset += g.len();
            UserPrecoder {
                id: s.id,
                null_basis: s.null_basis,
                effective_channel: s.effective,
                modes: s.modes,
                gains: g,
                powers,
            }
        })
        .collect();
    let beta = if modes == 0 {
        0.0
    } else {
        (transmit_power / modes as f64).sqrt()
    };
    Ok(BdPrecoderSet { users, beta })
}

/// Water-filling `p_i = max(0, μ - 1/g_i)` with `Σ p_i = budget`.
///
/// `μ` is found in closed form over the gains sorted descending; zero gains
/// receive nothing.
pub fn waterfill(gains: &[f64], budget: f64) -> Result<Vec<f64>> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::InvalidParameter(format!("power budget must be > 0, got {budget}")));
    }
    if gains.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::InvalidParameter("gains must be finite and >= 0".into()));
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::InvalidParameter("all gains are zero".into()));
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut inverse_sum = 0.0;
    let mut mu = 0.0;
    let mut active = 0;
    for (n, &i) in order.iter().enumerate() {
        let inv = 1.0 / gains[i];
        let candidate = (budget + inverse_sum + inv) / (n + 1) as f64;
        if candidate <= inv {
            break;
        }
        inverse_sum += inv;
        mu = candidate;
        active = n + 1;
    }
    let mut powers = vec![0.0; gains.len()];
    for &i in &order[..active] {
        powers[i] = (mu - 1.0 / gains[i]).max(0.0);
    }
    Ok(powers)
}

/// Sum-rate capacity of a BD group in bits/s/Hz.
pub fn group_sum_capacity(
    group: &[&UserChannel],
    transmit_antennas: usize,
    policy: PowerPolicy,
    transmit_power: f64,
    noise_variance: f64,
) -> Result<f64> {
    Ok(bd_precoders(group, transmit_antennas, policy, transmit_power, noise_variance)?.capacity())
}

fn log2_det_hermitian(m: &CMatrix) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(f64::MIN_POSITIVE).log2())
        .sum()
}

/// `log2 det(I_{M_T} + snr · H^H H F_a F_a^H)`, the transmit-side form.
pub fn user_capacity_transmit_form(h: &CMatrix, null_basis: &OrthonormalBasis, snr: f64) -> f64 {
    let n = h.ncols();
    let gram = h.adjoint() * h;
    let m = CMatrix::identity(n, n) + gram * null_basis.projector() * Complex64::new(snr, 0.0);
    // Not Hermitian in general; the product of eigenvalues is the determinant.
    m.determinant().re.max(f64::MIN_POSITIVE).log2()
}

/// `log2 det(I_{M_R} + snr · H F_a F_a^H H^H)`, the receive-side form.
pub fn user_capacity_receive_form(h: &CMatrix, null_basis: &OrthonormalBasis, snr: f64) -> f64 {
    let eff = h * null_basis.columns();
    let n = h.nrows();
    let m = CMatrix::identity(n, n) + &eff * eff.adjoint() * Complex64::new(snr, 0.0);
    log2_det_hermitian(&m)
}

/// Per-user BD capacities with the same power `snr = p / σ_n²` on every
/// null-space dimension, the regime of the capacity bounds and of the
/// sum-rate-change analysis.
pub fn bd_capacities_fixed_snr(
    group: &[&UserChannel],
    transmit_antennas: usize,
    snr: f64,
) -> Result<Vec<f64>> {
    check_feasible(group, transmit_antennas)?;
    (0..group.len())
        .map(|i| {
            let null = interference_null_space(group, i, transmit_antennas)?;
            Ok(user_capacity_receive_form(&group[i].h, &null, snr))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityBounds {
    pub lower: f64,
    pub upper: f64,
    /// `Σ sin² θ` between the user's row space and the interference of the
    /// rest of the group.
    pub sin2_sum: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Lower and upper bounds on user `index`'s BD capacity within `group` at
/// per-mode SNR `snr` under equal power.
pub fn capacity_bounds(
    index: usize,
    group: &[&UserChannel],
    transmit_antennas: usize,
    snr: f64,
) -> Result<CapacityBounds> {
    check_feasible(group, transmit_antennas)?;
    let user = group
        .get(index)
        .ok_or_else(|| Error::InvalidParameter(format!("group has no member {index}")))?;
    let m_r = user.receive_antennas();
    let mut lambdas: Vec<f64> = user.hbar.singular_values().iter().copied().collect();
    lambdas.sort_by(f64::total_cmp);
    let lambda_max = lambdas.last().copied().unwrap_or(0.0);
    let lambda_min = if m_r > lambdas.len() { 0.0 } else { lambdas[0] };
    let sin2_sum = match user.row_basis() {
        None => 0.0,
        Some(row) => {
            let null = interference_null_space(group, index, transmit_antennas)?;
            // T_k = F_a^H V̄_1; its singular values are the sines.
            (null.columns().adjoint() * row.columns()).norm_squared()
        }
    };
    let s = snr * user.rho;
    let lower = (s * lambda_min * lambda_min * sin2_sum).ln_1p() / std::f64::consts::LN_2;
    let m = m_r as f64;
    let upper = m * (s / m * lambda_max * lambda_max * sin2_sum).ln_1p() / std::f64::consts::LN_2;
    Ok(CapacityBounds {
        lower,
        upper,
        sin2_sum,
        lambda_min,
        lambda_max,
    })
}
