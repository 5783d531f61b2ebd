//! Age-structured SEIR model with an all-or-nothing vaccine. Compartments are
//! in persons; `x` marks unprotected (refused or failed) and `v` protected.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::integrate::OdeSystem;
use crate::error::{dim, invalid, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubarModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_names: Option<Vec<String>>,
    pub population: Vec<f64>,
    /// `contact[(i, j)]`: age-j people met per day by one age-i person.
    #[serde(with = "linalg::rows")]
    pub contact: DMatrix<f64>,
    /// Per-contact infection risk of a susceptible in each group.
    pub u: Vec<f64>,
    pub d_e: f64,
    pub d_i: f64,
    pub ifr: Vec<f64>,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubarState {
    pub t: f64,
    pub s: Vec<f64>,
    pub sx: Vec<f64>,
    pub sv: Vec<f64>,
    pub e: Vec<f64>,
    pub ex: Vec<f64>,
    pub ev: Vec<f64>,
    pub i: Vec<f64>,
    pub ix: Vec<f64>,
    pub iv: Vec<f64>,
    pub r: Vec<f64>,
    pub rx: Vec<f64>,
    pub rv: Vec<f64>,
    pub d: Vec<f64>,
    /// Doses already spent on infected or recovered people (not integrated).
    #[serde(default)]
    pub dosed_other: Vec<f64>,
}

pub const BUBAR_BLOCKS: usize = 13;

impl BubarModel {
    pub fn groups(&self) -> usize {
        self.population.len()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.groups();
        if g == 0 {
            return Err(invalid("model has no age groups"));
        }
        if self.contact.shape() != (g, g) {
            return Err(dim(format!("contact matrix is {:?}, expected {g}x{g}", self.contact.shape())));
        }
        if self.u.len() != g || self.ifr.len() != g {
            return Err(dim("u and ifr need one entry per group"));
        }
        if self.population.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::ZeroPopulation("age group".into()));
        }
        if self.contact.iter().chain(&self.u).any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(invalid("contacts and susceptibilities must be nonnegative"));
        }
        if self.ifr.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(invalid("IFR must lie in [0, 1]"));
        }
        if !(self.d_e > 0.0 && self.d_i > 0.0) {
            return Err(invalid("latent and infectious periods must be positive"));
        }
        if !(0.0..=1.0).contains(&self.psi) {
            return Err(invalid("efficacy must lie in [0, 1]"));
        }
        Ok(())
    }

    /// `d_I rho(diag(u) C)`, the reproduction number of a fully susceptible population.
    pub fn basic_reproduction_number(&self) -> Result<f64> {
        self.validate()?;
        let g = self.groups();
        let m = DMatrix::from_fn(g, g, |i, j| self.u[i] * self.contact[(i, j)]);
        Ok(self.d_i * linalg::spectral_radius(&m)?)
    }

    /// Rescales `u` so the basic reproduction number equals `target`.
    pub fn calibrated(&self, target: f64) -> Result<Self> {
        if !(target >= 0.0) {
            return Err(invalid(format!("target R0 {target} must be nonnegative")));
        }
        let r0 = self.basic_reproduction_number()?;
        if r0 <= 0.0 {
            return Err(invalid("template susceptibility is zero"));
        }
        let mut out = self.clone();
        out.u.iter_mut().for_each(|x| *x *= target / r0);
        Ok(out)
    }

    /// `b1 = d_E^-1 / ((d_E^-1 - alpha)(d_I^-1 - alpha))`.
    pub fn b1(&self, alpha: f64) -> Result<f64> {
        let (re, ri) = (1.0 / self.d_e, 1.0 / self.d_i);
        let limit = re.min(ri);
        if !(alpha < limit) {
            return Err(Error::InfeasibleRate { alpha, limit });
        }
        Ok(re / ((re - alpha) * (ri - alpha)))
    }

    pub fn rate_limit(&self) -> f64 {
        (1.0 / self.d_e).min(1.0 / self.d_i)
    }

    /// Seeds `frac` of each group as infected, split evenly between E and I.
    pub fn initial_state(&self, frac: f64) -> BubarState {
        let g = self.groups();
        let z = vec![0.0; g];
        let inf: Vec<f64> = self.population.iter().map(|p| p * frac).collect();
        BubarState {
            t: 0.0,
            s: self.population.iter().zip(&inf).map(|(p, x)| p - x).collect(),
            sx: z.clone(),
            sv: z.clone(),
            e: inf.iter().map(|x| 0.5 * x).collect(),
            ex: z.clone(),
            ev: z.clone(),
            i: inf.iter().map(|x| 0.5 * x).collect(),
            ix: z.clone(),
            iv: z.clone(),
            r: z.clone(),
            rx: z.clone(),
            rv: z.clone(),
            d: z.clone(),
            dosed_other: z,
        }
    }
}

impl BubarState {
    pub fn blocks(&self) -> [&Vec<f64>; BUBAR_BLOCKS] {
        [
            &self.s, &self.sx, &self.sv, &self.e, &self.ex, &self.ev, &self.i, &self.ix, &self.iv, &self.r, &self.rx,
            &self.rv, &self.d,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut Vec<f64>; BUBAR_BLOCKS] {
        [
            &mut self.s,
            &mut self.sx,
            &mut self.sv,
            &mut self.e,
            &mut self.ex,
            &mut self.ev,
            &mut self.i,
            &mut self.ix,
            &mut self.iv,
            &mut self.r,
            &mut self.rx,
            &mut self.rv,
            &mut self.d,
        ]
    }

    pub fn groups(&self) -> usize {
        self.s.len()
    }

    pub fn group_total(&self, g: usize) -> f64 {
        self.blocks().iter().map(|b| b[g]).sum()
    }

    pub fn infectious(&self, g: usize) -> f64 {
        self.i[g] + self.ix[g] + self.iv[g]
    }

    /// Exposed plus infectious persons.
    pub fn active(&self) -> f64 {
        (0..self.groups()).map(|g| self.e[g] + self.ex[g] + self.ev[g] + self.infectious(g)).sum()
    }

    fn dosed_other_at(&self, g: usize) -> f64 {
        self.dosed_other.get(g).copied().unwrap_or(0.0)
    }

    /// People who would receive a dose offered to the group: unvaccinated
    /// `S + I + R`, less the infected and recovered who were already dosed.
    pub fn eligible(&self, g: usize) -> f64 {
        self.s[g] + (self.i[g] + self.r[g] - self.dosed_other_at(g)).max(0.0)
    }

    pub fn pack(&self) -> Vec<f64> {
        self.blocks().iter().flat_map(|b| b.iter().copied()).collect()
    }

    pub fn unpack(&mut self, y: &[f64]) {
        let g = self.groups();
        for (k, b) in self.blocks_mut().into_iter().enumerate() {
            b.copy_from_slice(&y[k * g..(k + 1) * g]);
        }
    }

    pub fn validate(&self, model: &BubarModel) -> Result<()> {
        let g = model.groups();
        if self.blocks().iter().any(|b| b.len() != g) || !(self.dosed_other.is_empty() || self.dosed_other.len() == g) {
            return Err(dim("state blocks must have one entry per group"));
        }
        if self.blocks().iter().any(|b| b.iter().any(|x| !(x.is_finite() && *x >= -1e-9))) {
            return Err(invalid("compartments must be nonnegative"));
        }
        Ok(())
    }
}

/// Force of infection `lambda_i = u_i sum_j c_ij (I_j + Ix_j + Iv_j) / (N_j - D_j)`.
pub fn force_of_infection(model: &BubarModel, st: &BubarState) -> Result<Vec<f64>> {
    let g = model.groups();
    let mut frac = vec![0.0; g];
    for j in 0..g {
        let alive = model.population[j] - st.d[j];
        if alive <= 0.0 {
            return Err(Error::DepletedGroup(j));
        }
        frac[j] = st.infectious(j) / alive;
    }
    Ok((0..g)
        .map(|i| model.u[i] * (0..g).map(|j| model.contact[(i, j)] * frac[j]).sum::<f64>())
        .collect())
}

pub fn rhs_bubar(model: &BubarModel, st: &BubarState) -> Result<BubarState> {
    let lam = force_of_infection(model, st)?;
    let (re, ri) = (1.0 / model.d_e, 1.0 / model.d_i);
    let g = model.groups();
    let mut d = st.clone();
    d.t = 1.0;
    d.dosed_other = vec![0.0; g];
    for k in 0..g {
        let ifr = model.ifr[k];
        d.s[k] = -lam[k] * st.s[k];
        d.sx[k] = -lam[k] * st.sx[k];
        d.sv[k] = 0.0;
        d.e[k] = lam[k] * st.s[k] - re * st.e[k];
        d.ex[k] = lam[k] * st.sx[k] - re * st.ex[k];
        d.ev[k] = -re * st.ev[k];
        d.i[k] = re * st.e[k] - ri * st.i[k];
        d.ix[k] = re * st.ex[k] - ri * st.ix[k];
        d.iv[k] = re * st.ev[k] - ri * st.iv[k];
        d.r[k] = ri * (1.0 - ifr) * st.i[k];
        d.rx[k] = ri * (1.0 - ifr) * st.ix[k];
        d.rv[k] = ri * (1.0 - ifr) * st.iv[k];
        d.d[k] = ri * ifr * st.infectious(k);
    }
    Ok(d)
}

/// All-or-nothing vaccination of a fraction `v_i` of each group's eligible
/// people; only the susceptible share changes compartment.
pub fn vaccinate_bubar(st: &BubarState, v: &[f64], psi: f64) -> Result<BubarState> {
    if v.len() != st.groups() {
        return Err(dim("allocation length"));
    }
    let mut out = st.clone();
    if out.dosed_other.len() != v.len() {
        out.dosed_other = vec![0.0; v.len()];
    }
    for (g, &vg) in v.iter().enumerate() {
        if !(-1e-12..=1.0 + 1e-12).contains(&vg) {
            return Err(Error::AllocationOutOfBox { cell: g, value: vg, cap: 1.0 });
        }
        let dosed = vg.clamp(0.0, 1.0) * st.s[g];
        out.dosed_other[g] += vg.clamp(0.0, 1.0) * (st.eligible(g) - st.s[g]);
        out.s[g] -= dosed;
        out.sv[g] += psi * dosed;
        out.sx[g] += (1.0 - psi) * dosed;
    }
    Ok(out)
}

/// Flat-vector system: the 13 compartment blocks plus cumulative infections.
#[derive(Debug, Clone)]
pub struct BubarSystem {
    pub model: BubarModel,
}

impl BubarSystem {
    pub fn pack(&self, st: &BubarState, cum: &[f64]) -> Vec<f64> {
        let mut y = st.pack();
        y.extend_from_slice(cum);
        y
    }
}

impl OdeSystem for BubarSystem {
    fn dim(&self) -> usize {
        (BUBAR_BLOCKS + 1) * self.model.groups()
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let g = self.model.groups();
        let mut st = self.model.initial_state(0.0);
        st.unpack(&y[..BUBAR_BLOCKS * g]);
        let lam = force_of_infection(&self.model, &st)?;
        let d = rhs_bubar(&self.model, &st)?;
        dy[..BUBAR_BLOCKS * g].copy_from_slice(&d.pack());
        for k in 0..g {
            dy[BUBAR_BLOCKS * g + k] = lam[k] * (st.s[k] + st.sx[k]);
        }
        Ok(())
    }

    fn clamp(&self, y: &mut [f64]) -> usize {
        let mut n = 0;
        for x in y.iter_mut() {
            if *x < 0.0 {
                *x = 0.0;
                n += 1;
            }
        }
        n
    }
}

/// Infected block of the linearization in (E-total, I-total) after dosing `v`.
pub fn bubar_jacobian(model: &BubarModel, st: &BubarState, v: &[f64]) -> DMatrix<f64> {
    let g = model.groups();
    let (re, ri) = (1.0 / model.d_e, 1.0 / model.d_i);
    let s_eff = effective_susceptible(model, st, v);
    let mut m = DMatrix::zeros(2 * g, 2 * g);
    for i in 0..g {
        for j in 0..g {
            m[(i, g + j)] = s_eff[i] * model.u[i] * model.contact[(i, j)] / (model.population[j] - st.d[j]);
        }
        m[(i, i)] = -re;
        m[(g + i, i)] = re;
        m[(g + i, g + i)] = -ri;
    }
    m
}

/// Susceptibles left exposed after dosing: `S + Sx - psi v S`.
pub fn effective_susceptible(model: &BubarModel, st: &BubarState, v: &[f64]) -> DVector<f64> {
    DVector::from_fn(model.groups(), |i, _| st.s[i] + st.sx[i] - model.psi * v[i] * st.s[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_group(ifr: f64) -> BubarModel {
        BubarModel {
            group_names: None,
            population: vec![1000.0],
            contact: DMatrix::from_element(1, 1, 4.0),
            u: vec![0.05],
            d_e: 3.0,
            d_i: 5.0,
            ifr: vec![ifr],
            psi: 0.9,
        }
    }

    #[test]
    fn scalar_force_of_infection() {
        let m = one_group(0.01);
        let mut st = m.initial_state(0.0);
        st.i[0] = 10.0;
        st.d[0] = 100.0;
        let lam = force_of_infection(&m, &st).unwrap();
        assert!((lam[0] - 0.05 * 4.0 * 10.0 / 900.0).abs() < 1e-15);
    }

    #[test]
    fn no_infectious_means_only_latent_decay() {
        let m = one_group(0.01);
        let mut st = m.initial_state(0.0);
        st.e[0] = 6.0;
        let d = rhs_bubar(&m, &st).unwrap();
        assert_eq!(d.s[0], 0.0);
        assert!((d.e[0] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_ifr_means_no_deaths_and_mass_is_conserved() {
        let m = one_group(0.0);
        let st = m.initial_state(0.01);
        let d = rhs_bubar(&m, &st).unwrap();
        assert_eq!(d.d[0], 0.0);
        let total: f64 = d.pack().iter().sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn depleted_group_errors() {
        let m = one_group(0.0);
        let mut st = m.initial_state(0.0);
        st.d[0] = 1000.0;
        assert!(matches!(force_of_infection(&m, &st), Err(Error::DepletedGroup(0))));
    }

    #[test]
    fn vaccination_conserves_people() {
        let m = one_group(0.0);
        let st = m.initial_state(0.01);
        let out = vaccinate_bubar(&st, &[0.5], 0.9).unwrap();
        assert!((out.group_total(0) - st.group_total(0)).abs() < 1e-9);
        assert!((out.sv[0] - 0.9 * 0.5 * 990.0).abs() < 1e-9);
        assert!(vaccinate_bubar(&st, &[1.5], 0.9).is_err());
    }

    #[test]
    fn r0_and_b1() {
        let m = one_group(0.0);
        assert!((m.basic_reproduction_number().unwrap() - 5.0 * 0.2).abs() < 1e-12);
        let c = m.calibrated(1.15).unwrap();
        assert!((c.basic_reproduction_number().unwrap() - 1.15).abs() < 1e-12);
        assert!((m.b1(0.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(m.b1(0.2).is_err());
    }
}
