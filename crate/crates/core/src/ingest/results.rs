//! Result tables written by the command-line driver, with matching readers.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{BubarState, BubarTrajectory};
use crate::error::{invalid, Result};

/// Final totals of one simulated policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub final_cases: f64,
    pub final_deaths: f64,
    pub total_doses: f64,
}

/// One grid point of a parameter sweep for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub policy: String,
    pub final_cases: f64,
    pub final_deaths: f64,
    pub total_doses: f64,
}

/// Per-cell allocation: `v` is a fraction of the cell population, `doses` persons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub cell: usize,
    pub label: String,
    pub population: f64,
    pub s: f64,
    pub v: f64,
    pub doses: f64,
}

/// One group on one day of an age-structured run (persons).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubarRow {
    pub t: f64,
    pub group: usize,
    pub s: f64,
    pub sx: f64,
    pub sv: f64,
    pub e: f64,
    pub ex: f64,
    pub ev: f64,
    pub i: f64,
    pub ix: f64,
    pub iv: f64,
    pub r: f64,
    pub rx: f64,
    pub rv: f64,
    pub d: f64,
    pub dosed_other: f64,
    pub cum_infections: f64,
    pub doses: f64,
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<Vec<T>, _>>()?)
}

pub fn bubar_rows(traj: &BubarTrajectory) -> Vec<BubarRow> {
    let mut rows = Vec::new();
    for (k, st) in traj.states.iter().enumerate() {
        for g in 0..st.groups() {
            let other = st.dosed_other.get(g).copied().unwrap_or(0.0);
            rows.push(BubarRow {
                t: traj.times[k],
                group: g,
                s: st.s[g],
                sx: st.sx[g],
                sv: st.sv[g],
                e: st.e[g],
                ex: st.ex[g],
                ev: st.ev[g],
                i: st.i[g],
                ix: st.ix[g],
                iv: st.iv[g],
                r: st.r[g],
                rx: st.rx[g],
                rv: st.rv[g],
                d: st.d[g],
                dosed_other: other,
                cum_infections: traj.cum_infections[k][g],
                doses: traj.doses[k][g],
            });
        }
    }
    rows
}

/// Inverse of [`bubar_rows`]; rows must be grouped by day with groups in order.
pub fn bubar_from_rows(rows: &[BubarRow]) -> Result<BubarTrajectory> {
    let g = rows.iter().map(|r| r.group + 1).max().unwrap_or(0);
    if g == 0 || rows.len() % g != 0 {
        return Err(invalid("trajectory rows do not form whole days"));
    }
    let mut traj = BubarTrajectory { times: vec![], states: vec![], cum_infections: vec![], doses: vec![], clamp_events: 0 };
    for day in rows.chunks(g) {
        if day.iter().enumerate().any(|(k, r)| r.group != k || r.t != day[0].t) {
            return Err(invalid(format!("malformed trajectory rows at t = {}", day[0].t)));
        }
        let col = |f: fn(&BubarRow) -> f64| day.iter().map(f).collect::<Vec<f64>>();
        traj.times.push(day[0].t);
        traj.states.push(BubarState {
            t: day[0].t,
            s: col(|r| r.s),
            sx: col(|r| r.sx),
            sv: col(|r| r.sv),
            e: col(|r| r.e),
            ex: col(|r| r.ex),
            ev: col(|r| r.ev),
            i: col(|r| r.i),
            ix: col(|r| r.ix),
            iv: col(|r| r.iv),
            r: col(|r| r.r),
            rx: col(|r| r.rx),
            rv: col(|r| r.rv),
            d: col(|r| r.d),
            dosed_other: col(|r| r.dosed_other),
        });
        traj.cum_infections.push(col(|r| r.cum_infections));
        traj.doses.push(col(|r| r.doses));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_round_trip() {
        let rows = vec![
            SummaryRow { policy: "no-vaccine".into(), final_cases: 12.5, final_deaths: 0.25, total_doses: 0.0 },
            SummaryRow { policy: "age-priority/seniors".into(), final_cases: 1e6, final_deaths: 3.0, total_doses: 5.0 },
        ];
        let mut buf = Vec::new();
        write_rows(&rows, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("policy,final_cases,final_deaths,total_doses\n"));
        assert_eq!(read_rows::<SummaryRow, _>(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn ragged_bubar_rows_rejected() {
        let row = |t: f64, group| BubarRow {
            t,
            group,
            s: 1.0,
            sx: 0.0,
            sv: 0.0,
            e: 0.0,
            ex: 0.0,
            ev: 0.0,
            i: 0.0,
            ix: 0.0,
            iv: 0.0,
            r: 0.0,
            rx: 0.0,
            rv: 0.0,
            d: 0.0,
            dosed_other: 0.0,
            cum_infections: 0.0,
            doses: 0.0,
        };
        assert!(bubar_from_rows(&[row(0.0, 0), row(0.0, 1), row(1.0, 0)]).is_err());
        assert_eq!(bubar_from_rows(&[row(0.0, 0), row(0.0, 1), row(1.0, 0), row(1.0, 1)]).unwrap().times, vec![0.0, 1.0]);
    }
}
