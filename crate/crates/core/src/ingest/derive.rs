//! Parameter and state derivations from raw mobility, case and contact data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim, invalid, Result};
use crate::model::EpidemicState;

pub const MINUTES_PER_DAY: f64 = 1440.0;
pub const REPORTING_FACTOR: f64 = 0.217;
pub const SYMPTOMATIC_SHARE: f64 = 0.81;

#[derive(Debug, Clone, PartialEq)]
pub struct RawMobility {
    /// `trips[(i, j)]`: daily trips from `i` to `j`.
    pub trips: DMatrix<f64>,
    pub dwell_minutes: Vec<f64>,
}

/// National totals used to split past infections into recovered and active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NationalTotals {
    pub recovered: f64,
    pub deaths: f64,
    pub cumulative: f64,
}

impl Default for NationalTotals {
    fn default() -> Self {
        Self { recovered: 8_333_018.0, deaths: 276_976.0, cumulative: 14_108_490.0 }
    }
}

impl NationalTotals {
    pub fn recovered_ratio(&self) -> f64 {
        self.recovered / (self.cumulative - self.deaths)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCases {
    pub confirmed: Vec<f64>,
    pub deaths: Vec<f64>,
    pub population: Vec<f64>,
    pub reporting_factor: f64,
    pub national: NationalTotals,
    /// Fraction of active cases that are mild (asymptomatic compartment).
    pub mild_share: f64,
}

impl RawCases {
    pub fn new(confirmed: Vec<f64>, deaths: Vec<f64>, population: Vec<f64>) -> Self {
        Self {
            confirmed,
            deaths,
            population,
            reporting_factor: REPORTING_FACTOR,
            national: NationalTotals::default(),
            mild_share: SYMPTOMATIC_SHARE,
        }
    }
}

/// `tau_ij = (1 - W_i / 1440) k_ij / sum_a k_ia`; rows without trips stay zero.
pub fn build_travel_rates(raw: &RawMobility) -> Result<DMatrix<f64>> {
    let n = raw.trips.nrows();
    if !raw.trips.is_square() || raw.dwell_minutes.len() != n {
        return Err(dim(format!("trip matrix {:?} with {} dwell times", raw.trips.shape(), raw.dwell_minutes.len())));
    }
    if raw.trips.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("trip counts must be finite and nonnegative"));
    }
    let mut tau = DMatrix::zeros(n, n);
    for i in 0..n {
        let w = raw.dwell_minutes[i];
        if !(0.0..=MINUTES_PER_DAY).contains(&w) {
            return Err(invalid(format!("dwell time {w} at location {i} outside [0, 1440]")));
        }
        let total: f64 = raw.trips.row(i).sum();
        if total <= 0.0 {
            log::warn!("location {i} has no trips; treating it as isolated");
            continue;
        }
        for j in 0..n {
            tau[(i, j)] = (1.0 - w / MINUTES_PER_DAY) * raw.trips[(i, j)] / total;
        }
    }
    Ok(tau)
}

fn state_from_counts(confirmed: f64, deaths: f64, pop: f64, raw: &RawCases, cell: usize) -> Result<[f64; 5]> {
    if !(pop > 0.0) {
        return Err(crate::Error::ZeroPopulation(format!("cell {cell}")));
    }
    if !(confirmed >= 0.0 && deaths >= 0.0) {
        return Err(invalid(format!("negative case counts at cell {cell}")));
    }
    let total = confirmed / raw.reporting_factor;
    if total > pop * (1.0 + 1e-12) {
        return Err(invalid(format!("implied infections {total} exceed population {pop} at cell {cell}")));
    }
    if deaths > total {
        return Err(invalid(format!("deaths {deaths} exceed implied infections {total} at cell {cell}")));
    }
    let recovered = (total - deaths) * raw.national.recovered_ratio();
    let active = total - deaths - recovered;
    Ok([
        1.0 - total / pop,
        raw.mild_share * active / pop,
        (1.0 - raw.mild_share) * active / pop,
        deaths / pop,
        recovered / pop,
    ])
}

fn assemble(cells: Vec<[f64; 5]>) -> EpidemicState {
    let mut st = EpidemicState::susceptible(vec![1.0; cells.len()]);
    for (i, c) in cells.into_iter().enumerate() {
        st.s[i] = c[0];
        st.xa[i] = c[1];
        st.xs[i] = c[2];
        st.e[i] = c[3];
        st.h[i] = c[4];
    }
    st
}

/// Initial fractions from cumulative confirmed cases and deaths per location.
pub fn derive_initial_state(raw: &RawCases) -> Result<EpidemicState> {
    let n = raw.population.len();
    if raw.confirmed.len() != n || raw.deaths.len() != n {
        return Err(dim("case columns must have one entry per location"));
    }
    if !(raw.reporting_factor > 0.0 && raw.reporting_factor <= 1.0) {
        return Err(invalid("reporting factor must lie in (0, 1]"));
    }
    let cells = (0..n)
        .map(|i| state_from_counts(raw.confirmed[i], raw.deaths[i], raw.population[i], raw, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(cells))
}

/// Age-split initial state: location counts are shared out by the age
/// profiles `case_share` and `death_share`; `group_pop` is locations x groups.
pub fn derive_group_initial_state(
    raw: &RawCases,
    group_pop: &DMatrix<f64>,
    case_share: &[f64],
    death_share: &[f64],
) -> Result<EpidemicState> {
    let (n, g) = group_pop.shape();
    if raw.confirmed.len() != n || raw.deaths.len() != n || case_share.len() != g || death_share.len() != g {
        return Err(dim("group split inputs disagree in size"));
    }
    let mut cells = Vec::with_capacity(n * g);
    for i in 0..n {
        for a in 0..g {
            cells.push(state_from_counts(
                raw.confirmed[i] * case_share[a],
                raw.deaths[i] * death_share[a],
                group_pop[(i, a)],
                raw,
                i * g + a,
            )?);
        }
    }
    Ok(assemble(cells))
}

/// Infection fatality ratio at `age` years as a fraction.
pub fn ifr_by_age(age: f64) -> f64 {
    10f64.powf(-3.27 + 0.0524 * age) / 100.0
}

/// Mean IFR over the whole years `lo..=hi`.
pub fn mean_ifr(lo: u32, hi: u32) -> f64 {
    (lo..=hi).map(|a| ifr_by_age(a as f64)).sum::<f64>() / (hi - lo + 1) as f64
}

/// Per-group mean IFR for inclusive age ranges.
pub fn group_ifr(ranges: &[(u32, u32)]) -> Vec<f64> {
    ranges.iter().map(|&(lo, hi)| mean_ifr(lo, hi)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub epsilon: f64,
    pub r_a: f64,
    pub r_s: f64,
    pub kappa: f64,
}

/// Inverts `eps + r_a = 1/d_A`, `r_s + kappa = 1/d_S`,
/// `eps / (eps + r_a) = (1 - share) / share` and
/// `(1 - share) / share * kappa / (kappa + r_s) = ifr`.
pub fn derive_disease_params(d_a: f64, d_s: f64, ifr: f64, share: f64) -> Result<DerivedRates> {
    if !(d_a > 0.0 && d_s > 0.0) {
        return Err(invalid("infectious periods must be positive"));
    }
    if !(share > 0.5 && share < 1.0) {
        return Err(invalid(format!("mild share {share} must lie in (0.5, 1)")));
    }
    if !(ifr >= 0.0) {
        return Err(invalid("IFR must be nonnegative"));
    }
    let ratio = (1.0 - share) / share;
    let epsilon = ratio / d_a;
    let frac = ifr / ratio;
    if frac > 1.0 {
        return Err(invalid(format!("IFR {ifr} is inconsistent with the symptomatic share: mortality would exceed 1/d_S")));
    }
    let kappa = frac / d_s;
    Ok(DerivedRates { epsilon, r_a: 1.0 / d_a - epsilon, r_s: 1.0 / d_s - kappa, kappa })
}

/// Per-group variant: shared `epsilon`, `r_a` and group vectors `r_s`, `kappa`.
pub fn derive_group_disease_params(d_a: f64, d_s: f64, ifr: &[f64], share: f64) -> Result<(f64, f64, Vec<f64>, Vec<f64>)> {
    let rows = ifr.iter().map(|&f| derive_disease_params(d_a, d_s, f, share)).collect::<Result<Vec<_>>>()?;
    let first = derive_disease_params(d_a, d_s, 0.0, share)?;
    Ok((first.epsilon, first.r_a, rows.iter().map(|r| r.r_s).collect(), rows.iter().map(|r| r.kappa).collect()))
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("median of an empty table"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Ok(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Componentwise medians of `(d_A, d_S)` estimates.
pub fn median_infectious_periods(table: &[(f64, f64)]) -> Result<(f64, f64)> {
    let a: Vec<f64> = table.iter().map(|r| r.0).collect();
    let s: Vec<f64> = table.iter().map(|r| r.1).collect();
    Ok((median(&a)?, median(&s)?))
}

/// Population-weighted aggregation of a fine contact matrix:
/// `C_ab = sum_{i in a} (p_i / P_a) sum_{j in b} C_ij`.
pub fn aggregate_contact_groups(c_fine: &DMatrix<f64>, fine_pop: &[f64], group_map: &[usize]) -> Result<DMatrix<f64>> {
    let n = c_fine.nrows();
    if !c_fine.is_square() || fine_pop.len() != n || group_map.len() != n {
        return Err(dim("fine contact matrix, populations and group map disagree in size"));
    }
    let g = group_map.iter().copied().max().map_or(0, |m| m + 1);
    let mut pop = vec![0.0; g];
    for (i, &a) in group_map.iter().enumerate() {
        pop[a] += fine_pop[i];
    }
    if let Some(a) = pop.iter().position(|&p| p <= 0.0) {
        return Err(invalid(format!("aggregated group {a} is empty")));
    }
    let mut out = DMatrix::zeros(g, g);
    for i in 0..n {
        let a = group_map[i];
        let w = fine_pop[i] / pop[a];
        for j in 0..n {
            out[(a, group_map[j])] += w * c_fine[(i, j)];
        }
    }
    Ok(out)
}
