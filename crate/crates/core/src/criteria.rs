//! Scheduling metrics: how well a candidate user fits next to a set of
//! already co-scheduled users.
//!
//! Every metric compares the candidate's row space with the aggregate row
//! space of the others. Some are maximized and some minimized; schedulers
//! work with [`Criterion::goodness`], which is always "larger is better".
//!
//! The sum-rate-change quantities are evaluated in the log domain with a
//! per-mode SNR parameter. Rankings only depend on it through an additive
//! constant, so schedulers pass `snr = 1`.

use std::cell::OnceCell;
use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::UserChannel;
use crate::error::{Error, Result};
use crate::precoding::bd_capacities_fixed_snr;
use crate::subspace::{
    collinearity, gram_determinant, principal_angles, span_union, CMatrix, OrthonormalBasis, PrincipalAngleSet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionKind {
    LargestPrincipalAngle,
    Collinearity,
    Chordal,
    GeometricalAngle,
    GroupingOriented,
    SelectionFull,
    SelectionSimplified,
    FrobeniusNorm,
    /// `‖H_k P⊥‖_F²`, the greedy zero-forcing selection rule.
    ProjectedNorm,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Maximize,
    Minimize,
}

impl CriterionKind {
    pub const ALL: [CriterionKind; 10] = [
        CriterionKind::LargestPrincipalAngle,
        CriterionKind::Collinearity,
        CriterionKind::Chordal,
        CriterionKind::GeometricalAngle,
        CriterionKind::GroupingOriented,
        CriterionKind::SelectionFull,
        CriterionKind::SelectionSimplified,
        CriterionKind::FrobeniusNorm,
        CriterionKind::ProjectedNorm,
        CriterionKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::LargestPrincipalAngle => "largest-principal-angle",
            CriterionKind::Collinearity => "collinearity",
            CriterionKind::Chordal => "chordal",
            CriterionKind::GeometricalAngle => "geometrical-angle",
            CriterionKind::GroupingOriented => "grouping-oriented",
            CriterionKind::SelectionFull => "selection-full",
            CriterionKind::SelectionSimplified => "selection-simplified",
            CriterionKind::FrobeniusNorm => "frobenius-norm",
            CriterionKind::ProjectedNorm => "projected-norm",
            CriterionKind::Random => "random",
        }
    }

    /// Whether the score depends on the operating SNR.
    pub fn depends_on_snr(self) -> bool {
        self == CriterionKind::SelectionFull
    }

    pub fn orientation(self) -> Orientation {
        match self {
            CriterionKind::Collinearity
            | CriterionKind::GeometricalAngle
            | CriterionKind::GroupingOriented => Orientation::Minimize,
            _ => Orientation::Maximize,
        }
    }
}

impl std::fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CriterionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = CriterionKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown criterion {s:?}; valid: {}", valid.join(", ")))
            })
    }
}

/// Largest principal angle. When the dimensions differ the larger subspace
/// keeps directions orthogonal to the smaller one, so the answer is π/2.
pub fn largest_principal_angle(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<f64> {
    let set = principal_angles(u, v)?;
    Ok(if u.dim() != v.dim() { FRAC_PI_2 } else { set.largest() })
}

fn log2_det_gram(hbar: &CMatrix) -> f64 {
    let s = hbar.singular_values();
    if s.len() < hbar.nrows() {
        return f64::NEG_INFINITY;
    }
    s.iter().map(|x| 2.0 * x.log2()).sum()
}

/// A set of co-scheduled users with the aggregate quantities the metrics
/// share across candidates.
pub struct SubsetView<'a> {
    members: Vec<&'a UserChannel>,
    transmit_antennas: usize,
    span: Option<OrthonormalBasis>,
    leave_one_out: OnceCell<Result<Vec<LeaveOneOut>>>,
}

#[derive(Debug, Clone)]
struct LeaveOneOut {
    span: Option<OrthonormalBasis>,
    /// `log2(ρ_j det(H̄_j H̄_j^H) sin²ψ_{j,s\j})`.
    own_log: f64,
    own_sin2: f64,
}

impl<'a> SubsetView<'a> {
    pub fn new(members: Vec<&'a UserChannel>, transmit_antennas: usize) -> Result<Self> {
        for m in &members {
            if m.transmit_antennas() != transmit_antennas {
                return Err(Error::DimensionMismatch {
                    left: m.transmit_antennas(),
                    right: transmit_antennas,
                });
            }
        }
        let span = span_union(members.iter().filter_map(|u| u.row_basis()), transmit_antennas)?;
        Ok(Self {
            members,
            transmit_antennas,
            span,
            leave_one_out: OnceCell::new(),
        })
    }

    pub fn empty(transmit_antennas: usize) -> Self {
        Self {
            members: Vec::new(),
            transmit_antennas,
            span: None,
            leave_one_out: OnceCell::new(),
        }
    }

    pub fn members(&self) -> &[&'a UserChannel] {
        &self.members
    }

    pub fn transmit_antennas(&self) -> usize {
        self.transmit_antennas
    }

    /// Aggregate row space, `None` when no member has a nonzero channel.
    pub fn span(&self) -> Option<&OrthonormalBasis> {
        self.span.as_ref()
    }

    pub fn rank(&self) -> usize {
        self.span.as_ref().map_or(0, OrthonormalBasis::dim)
    }

    fn leave_one_out(&self) -> Result<&[LeaveOneOut]> {
        let cached = self.leave_one_out.get_or_init(|| {
            (0..self.members.len())
                .map(|j| {
                    let rest = self
                        .members
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != j)
                        .filter_map(|(_, u)| u.row_basis());
                    let span = span_union(rest, self.transmit_antennas)?;
                    let member = self.members[j];
                    let own_sin2 = sin2_against(member, span.as_ref())?;
                    let own_log = member.receive_antennas() as f64 * member.rho.log2()
                        + log2_det_gram(&member.hbar)
                        + own_sin2.log2();
                    Ok(LeaveOneOut {
                        span,
                        own_log,
                        own_sin2,
                    })
                })
                .collect()
        });
        match cached {
            Ok(v) => Ok(v),
            Err(e) => Err(Error::InvalidParameter(format!("leave-one-out spans: {e}"))),
        }
    }
}

/// `sin² ψ` between the user's row space and `span`; 1 against nothing and
/// 0 for a zero channel.
fn sin2_against(user: &UserChannel, span: Option<&OrthonormalBasis>) -> Result<f64> {
    match (user.row_basis(), span) {
        (None, _) => Ok(0.0),
        (Some(_), None) => Ok(1.0),
        (Some(row), Some(s)) => Ok(principal_angles(row, s)?.sin2_product().clamp(0.0, 1.0)),
    }
}

fn angles_against(user: &UserChannel, span: &OrthonormalBasis) -> Result<Option<PrincipalAngleSet>> {
    match user.row_basis() {
        None => Ok(None),
        Some(row) => Ok(Some(principal_angles(row, span)?)),
    }
}

/// Largest principal angle between the candidate and the subset, π/2 for an
/// empty subset.
pub fn metric_largest_principal_angle(k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    match (k.row_basis(), subset.span()) {
        (None, _) => Err(Error::ZeroSubspace),
        (Some(_), None) => Ok(FRAC_PI_2),
        (Some(row), Some(span)) => largest_principal_angle(row, span),
    }
}

/// Collinearity of the row-space projectors, 0 for an empty subset.
pub fn metric_collinearity(k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    match (k.row_basis(), subset.span()) {
        (None, _) => Err(Error::ZeroSubspace),
        (Some(_), None) => Ok(0.0),
        (Some(row), Some(span)) => collinearity(&row.projector(), &span.projector()),
    }
}

/// Chordal distance, `sqrt(rank)` for an empty subset.
pub fn metric_chordal(k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    match (k.row_basis(), subset.span()) {
        (None, _) => Err(Error::ZeroSubspace),
        (Some(row), None) => Ok((row.dim() as f64).sqrt()),
        (Some(_), Some(span)) => Ok(angles_against(k, span)?
            .map_or(0.0, |a| a.sin2_sum().sqrt())),
    }
}

/// `cos² ψ` between the candidate and the subset (minimize).
pub fn metric_geometrical(k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    match (k.row_basis(), subset.span()) {
        (None, _) => Err(Error::ZeroSubspace),
        (Some(_), None) => Ok(0.0),
        (Some(_), Some(span)) => Ok(angles_against(k, span)?
            .map_or(0.0, |a| a.cos2_product().clamp(0.0, 1.0))),
    }
}

/// `Σ cos² θ` over the candidate's angles against its interference (minimize).
/// Unpaired directions are orthogonal and add nothing.
pub fn metric_grouping_oriented(k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    match (k.row_basis(), subset.span()) {
        (None, _) => Err(Error::ZeroSubspace),
        (Some(_), None) => Ok(0.0),
        (Some(_), Some(span)) => Ok(angles_against(k, span)?.map_or(0.0, |a| a.cos2_sum())),
    }
}

/// `ρ_k det(H̄_k P⊥ H̄_k^H)` with `P⊥` the projector onto the subset's null
/// space.
pub fn metric_selection_simplified(k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    let projected = match subset.span() {
        None => k.hbar.clone(),
        Some(span) => {
            let q = span.columns();
            &k.hbar - &k.hbar * q * q.adjoint()
        }
    };
    Ok(k.rho * gram_determinant(&projected))
}

/// `ρ_k det(H̄_k H̄_k^H) sin² ψ_{k,s}`, the angle form of the same quantity.
pub fn metric_selection_simplified_angle_form(k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    let det = gram_determinant(&k.hbar);
    Ok(k.rho * det * sin2_against(k, subset.span())?)
}

/// `‖H_k P⊥‖_F²`.
pub fn metric_projected_norm(k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    Ok(match subset.span() {
        None => k.h.norm_squared(),
        Some(span) => {
            let q = span.columns();
            (&k.h - &k.h * q * q.adjoint()).norm_squared()
        }
    })
}

/// Decomposition of the sum-rate change caused by adding a user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaCapacityReport {
    pub c_gain: f64,
    pub c_loss: f64,
    pub delta: f64,
    /// `sin² ψ_{k,s}`.
    pub sin2_candidate_subset: f64,
    /// Per subset member `j`: `(id, sin² ψ_{j,s\j}, sin² ψ_{k,s\j})`.
    pub loss_terms: Vec<(usize, f64, f64)>,
}

/// High-SNR gain `log2 det(snr ρ_k H̄_k H̄_k^H) + log2 sin² ψ_{k,s}`; `-∞`
/// when the candidate lies inside the subset's span. The SNR and `ρ_k`
/// factors enter once per receive antenna, as the determinant expansion
/// requires; for single-antenna users this is `log2(snr ρ_k ‖h̄_k‖² sin² ψ)`.
pub fn c_gain(k: &UserChannel, subset: &SubsetView, snr: f64) -> Result<f64> {
    Ok(delta_capacity(k, subset, snr)?.c_gain)
}

/// `C_loss ≈ Σ_j [log2 det(snr ρ_j H̄_j H̄_j^H) + log2 sin² ψ_{j,s\j} + log2 sin² ψ_{k,s\j}]`,
/// zero for an empty subset. Uses one alternating-projection step for the
/// intersection of null spaces.
pub fn c_loss(k: &UserChannel, subset: &SubsetView, snr: f64) -> Result<f64> {
    Ok(delta_capacity(k, subset, snr)?.c_loss)
}

pub fn delta_capacity(k: &UserChannel, subset: &SubsetView, snr: f64) -> Result<DeltaCapacityReport> {
    let sin2_ks = sin2_against(k, subset.span())?;
    let m_k = k.receive_antennas() as f64;
    let c_gain = m_k * (snr * k.rho).log2() + log2_det_gram(&k.hbar) + sin2_ks.log2();
    let mut c_loss = 0.0;
    let mut loss_terms = Vec::with_capacity(subset.members().len());
    for (member, loo) in subset.members().iter().zip(subset.leave_one_out()?) {
        let sin2_k = sin2_against(k, loo.span.as_ref())?;
        c_loss += member.receive_antennas() as f64 * snr.log2() + loo.own_log + sin2_k.log2();
        loss_terms.push((member.id, loo.own_sin2, sin2_k));
    }
    Ok(DeltaCapacityReport {
        c_gain,
        c_loss,
        delta: c_gain - c_loss,
        sin2_candidate_subset: sin2_ks,
        loss_terms,
    })
}

/// `ΔC = C_gain - C_loss` at per-mode SNR `snr`, log domain.
pub fn metric_selection_full(k: &UserChannel, subset: &SubsetView, snr: f64) -> Result<f64> {
    Ok(delta_capacity(k, subset, snr)?.delta)
}

/// Exact change in BD sum rate, every null-space dimension at per-mode SNR
/// `snr`, when `k` joins `subset`. Reference for the approximations above.
pub fn exact_delta_capacity(
    k: &UserChannel,
    subset: &[&UserChannel],
    transmit_antennas: usize,
    snr: f64,
) -> Result<f64> {
    let pre: f64 = bd_capacities_fixed_snr(subset, transmit_antennas, snr)?.iter().sum();
    let mut with = subset.to_vec();
    with.push(k);
    let post: f64 = bd_capacities_fixed_snr(&with, transmit_antennas, snr)?.iter().sum();
    Ok(post - pre)
}

/// Exact gain term: the candidate's own BD capacity after joining.
pub fn exact_gain(
    k: &UserChannel,
    subset: &[&UserChannel],
    transmit_antennas: usize,
    snr: f64,
) -> Result<f64> {
    let mut with = subset.to_vec();
    with.push(k);
    Ok(*bd_capacities_fixed_snr(&with, transmit_antennas, snr)?
        .last()
        .expect("group is nonempty"))
}

/// Raw metric value in its natural orientation, at unit per-mode SNR.
pub fn evaluate(kind: CriterionKind, k: &UserChannel, subset: &SubsetView) -> Result<f64> {
    evaluate_at(kind, k, subset, 1.0)
}

/// As [`evaluate`]; `snr` only matters for SNR-dependent criteria.
pub fn evaluate_at(kind: CriterionKind, k: &UserChannel, subset: &SubsetView, snr: f64) -> Result<f64> {
    match kind {
        CriterionKind::LargestPrincipalAngle => metric_largest_principal_angle(k, subset),
        CriterionKind::Collinearity => metric_collinearity(k, subset),
        CriterionKind::Chordal => metric_chordal(k, subset),
        CriterionKind::GeometricalAngle => metric_geometrical(k, subset),
        CriterionKind::GroupingOriented => metric_grouping_oriented(k, subset),
        CriterionKind::SelectionFull => metric_selection_full(k, subset, snr),
        CriterionKind::SelectionSimplified => metric_selection_simplified(k, subset),
        CriterionKind::FrobeniusNorm => Ok(k.frobenius_norm()),
        CriterionKind::ProjectedNorm => metric_projected_norm(k, subset),
        CriterionKind::Random => Err(Error::InvalidParameter(
            "the random criterion has no deterministic value".into(),
        )),
    }
}

/// A criterion bound to its source of randomness.
pub struct Criterion<R> {
    kind: CriterionKind,
    rng: R,
    snr: f64,
}

impl<R: Rng> Criterion<R> {
    pub fn new(kind: CriterionKind, rng: R) -> Self {
        Self { kind, rng, snr: 1.0 }
    }

    /// Sets the per-mode SNR used by SNR-dependent criteria.
    pub fn with_snr(mut self, snr: f64) -> Self {
        self.snr = snr;
        self
    }

    pub fn kind(&self) -> CriterionKind {
        self.kind
    }

    /// Oriented score, larger is better. A zero channel scores `-∞`.
    pub fn goodness(&mut self, k: &UserChannel, subset: &SubsetView) -> Result<f64> {
        if self.kind == CriterionKind::Random {
            return Ok(self.rng.random::<f64>());
        }
        if k.row_basis().is_none() {
            return Ok(f64::NEG_INFINITY);
        }
        let v = evaluate_at(self.kind, k, subset, self.snr)?;
        Ok(match self.kind.orientation() {
            Orientation::Maximize => v,
            Orientation::Minimize => -v,
        })
    }
}

/// Index of the best `(score, id)` pair: highest score, then lowest id.
pub fn argmax_by_score<I>(scored: I) -> Option<usize>
where
    I: IntoIterator<Item = (usize, f64, usize)>,
{
    let mut best: Option<(usize, f64, usize)> = None;
    for (index, score, id) in scored {
        let better = match best {
            None => true,
            Some((_, s, i)) => score > s || (score == s && id < i) || (s.is_nan() && !score.is_nan()),
        };
        if better {
            best = Some((index, score, id));
        }
    }
    best.map(|(index, _, _)| index)
}
