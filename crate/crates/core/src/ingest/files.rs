//! CSV inputs: trips, dwell times and case counts keyed by location id.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use super::derive::{build_travel_rates, derive_initial_state, RawCases, RawMobility};
use crate::error::{invalid, Result};
use crate::model::{EpidemicState, NetworkInstance};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TripRecord {
    pub origin_id: String,
    pub dest_id: String,
    pub daily_trips: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct DwellRecord {
    pub location_id: String,
    pub median_dwell_minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CaseRecord {
    pub location_id: String,
    pub cum_confirmed: f64,
    pub cum_deaths: f64,
    pub population: f64,
}

fn read_all<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

pub fn read_trips<R: Read>(r: R) -> Result<Vec<TripRecord>> {
    read_all(r)
}

pub fn read_dwell<R: Read>(r: R) -> Result<Vec<DwellRecord>> {
    read_all(r)
}

pub fn read_cases<R: Read>(r: R) -> Result<Vec<CaseRecord>> {
    read_all(r)
}

/// Network and initial state with locations ordered as in the cases file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub network: NetworkInstance,
    pub state: EpidemicState,
}

pub fn assemble_inputs(trips: &[TripRecord], dwell: &[DwellRecord], cases: &[CaseRecord]) -> Result<LoadedData> {
    let ids: Vec<String> = cases.iter().map(|c| c.location_id.clone()).collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if index.len() != ids.len() {
        return Err(invalid("duplicate location id in cases file"));
    }
    let n = ids.len();
    let mut k = DMatrix::zeros(n, n);
    for t in trips {
        match (index.get(t.origin_id.as_str()), index.get(t.dest_id.as_str())) {
            (Some(&i), Some(&j)) => k[(i, j)] += t.daily_trips,
            _ => log::warn!("skipping trips {} -> {}: location not in cases file", t.origin_id, t.dest_id),
        }
    }
    let mut w = vec![None; n];
    for d in dwell {
        if let Some(&i) = index.get(d.location_id.as_str()) {
            w[i] = Some(d.median_dwell_minutes);
        }
    }
    let mut dwell_minutes = Vec::with_capacity(n);
    for i in 0..n {
        match w[i] {
            Some(x) => dwell_minutes.push(x),
            None if k.row(i).sum() == 0.0 => dwell_minutes.push(super::derive::MINUTES_PER_DAY),
            None => return Err(invalid(format!("location {} has trips but no dwell time", ids[i]))),
        }
    }
    let tau = build_travel_rates(&RawMobility { trips: k, dwell_minutes: dwell_minutes.clone() })?;
    let raw = RawCases::new(
        cases.iter().map(|c| c.cum_confirmed).collect(),
        cases.iter().map(|c| c.cum_deaths).collect(),
        cases.iter().map(|c| c.population).collect(),
    );
    let state = derive_initial_state(&raw)?;
    let mut network = NetworkInstance::new(tau, raw.population.clone());
    network.names = Some(ids);
    network.dwell_minutes = Some(dwell_minutes);
    network.validate()?;
    Ok(LoadedData { network, state })
}

pub fn load_inputs(trips: &Path, dwell: &Path, cases: &Path) -> Result<LoadedData> {
    let open = |p: &Path| std::fs::File::open(p);
    assemble_inputs(&read_trips(open(trips)?)?, &read_dwell(open(dwell)?)?, &read_cases(open(cases)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembles_two_locations_and_an_isolated_one() {
        let trips = read_trips("origin_id,dest_id,daily_trips\na,a,8000\na,b,200\nb,a,200\nb,b,8000\n".as_bytes()).unwrap();
        let dwell = read_dwell("location_id,median_dwell_minutes\na,800\nb,800\n".as_bytes()).unwrap();
        let cases = read_cases(
            "location_id,cum_confirmed,cum_deaths,population\na,217,0,10000\nb,0,0,5000\nc,0,0,100\n".as_bytes(),
        )
        .unwrap();
        let d = assemble_inputs(&trips, &dwell, &cases).unwrap();
        assert_eq!(d.network.len(), 3);
        assert!((d.network.tau[(0, 0)] - 0.43360).abs() < 1e-5);
        assert_eq!(d.network.tau.row(2).sum(), 0.0);
        assert!((d.state.s[0] - 0.9).abs() < 1e-12);
        assert_eq!(d.network.location_name(2), "c");
    }

    #[test]
    fn missing_dwell_for_active_location_is_an_error() {
        let trips = read_trips("origin_id,dest_id,daily_trips\na,a,1\n".as_bytes()).unwrap();
        let cases = read_cases("location_id,cum_confirmed,cum_deaths,population\na,0,0,10\n".as_bytes()).unwrap();
        assert!(assemble_inputs(&trips, &[], &cases).is_err());
    }

    #[test]
    fn bad_header_is_a_csv_error() {
        assert!(read_trips("from,to,n\na,b,1\n".as_bytes()).is_err());
    }
}
