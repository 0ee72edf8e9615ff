//! Analysis variables for alter-ego groups: first-case time, mediator,
//! outcome and the vaccinated/unvaccinated contact summaries.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epidemic::{DiseaseParams, GroupSimulation, Trajectory, VaccinationAssignment, GROUP_ALTER, GROUP_EGO};
use crate::netgraph::{AlterEgoPair, Network};

/// One analysis row per alter-ego group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub pair_id: usize,
    #[serde(rename = "V_a")]
    pub v_a: u8,
    #[serde(rename = "V_e")]
    pub v_e: u8,
    #[serde(rename = "T")]
    pub t: u32,
    #[serde(rename = "Y_aT")]
    pub y_a: u8,
    #[serde(rename = "Y_eTs")]
    pub y_e: u8,
    #[serde(rename = "U_a")]
    pub u_a: u32,
    #[serde(rename = "L_a")]
    pub l_a: u32,
    #[serde(rename = "U_e")]
    pub u_e: u32,
    #[serde(rename = "L_e")]
    pub l_e: u32,
    #[serde(rename = "M_u")]
    pub m_u: u32,
    #[serde(rename = "M_v")]
    pub m_v: u32,
}

/// Columns of [`GroupRecord`] usable as model regressors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    VA,
    VE,
    UA,
    LA,
    UE,
    LE,
    MU,
    MV,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::VA => "V_a",
            Field::VE => "V_e",
            Field::UA => "U_a",
            Field::LA => "L_a",
            Field::UE => "U_e",
            Field::LE => "L_e",
            Field::MU => "M_u",
            Field::MV => "M_v",
        }
    }

    pub fn parse(name: &str) -> Option<Field> {
        [
            Field::VA,
            Field::VE,
            Field::UA,
            Field::LA,
            Field::UE,
            Field::LE,
            Field::MU,
            Field::MV,
        ]
        .into_iter()
        .find(|f| f.name() == name)
    }
}

impl GroupRecord {
    pub fn get(&self, field: Field) -> f64 {
        let v = match field {
            Field::VA => u32::from(self.v_a),
            Field::VE => u32::from(self.v_e),
            Field::UA => self.u_a,
            Field::LA => self.l_a,
            Field::UE => self.u_e,
            Field::LE => self.l_e,
            Field::MU => self.m_u,
            Field::MV => self.m_v,
        };
        f64::from(v)
    }
}

/// Which contacts a summary count includes at its cutoff day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContactCutoff {
    /// Onset on or before the cutoff.
    #[default]
    SickBy,
    /// Infectious on the cutoff day itself.
    InfectiousAt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SummaryOptions {
    /// Leave the ego out of the alter's counts and the alter out of the
    /// ego's counts. When false every tied node is counted.
    pub exclude_partner: bool,
    pub cutoff: ContactCutoff,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            exclude_partner: true,
            cutoff: ContactCutoff::SickBy,
        }
    }
}

/// Day of the first case in the pair, or the end of follow-up when neither
/// member is ever a case.
pub fn first_infection_time(traj: &Trajectory, alter: usize, ego: usize, follow_up: u32) -> u32 {
    [traj.onset(alter), traj.onset(ego)]
        .into_iter()
        .flatten()
        .filter(|&d| d <= follow_up)
        .min()
        .unwrap_or(follow_up)
}

/// 1 when the alter is a case at `t` and the ego is not; simultaneous onsets
/// and never-sick pairs give 0.
pub fn mediator(traj: &Trajectory, alter: usize, ego: usize, t: u32, follow_up: u32) -> u8 {
    let alter_first = traj.onset(alter).is_some_and(|d| d == t && d <= follow_up);
    let ego_healthy = traj.onset(ego).is_none_or(|d| d > t);
    u8::from(alter_first && ego_healthy)
}

/// 1 when the ego's onset lies in `[t + b, t + b + f]`.
pub fn outcome(traj: &Trajectory, ego: usize, t: u32, incubation: u32, infectious_period: u32) -> u8 {
    let lo = t + incubation;
    let hi = t + incubation + infectious_period;
    u8::from(traj.onset(ego).is_some_and(|d| lo <= d && d <= hi))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContactSummaries {
    pub u_a: u32,
    pub l_a: u32,
    pub u_e: u32,
    pub l_e: u32,
    pub m_u: u32,
    pub m_v: u32,
}

/// Counts of unvaccinated / vaccinated contacts who were cases by a cutoff:
/// the alter's contacts by `t - b`, the ego's contacts by `t + f`, and the
/// mutual contacts by `t - b`.
pub fn contact_summaries(
    net: &Network,
    traj: &Trajectory,
    vacc: &VaccinationAssignment,
    pair: &AlterEgoPair,
    t: u32,
    incubation: u32,
    infectious_period: u32,
    opts: SummaryOptions,
) -> ContactSummaries {
    let alter_cut = i64::from(t) - i64::from(incubation);
    let ego_cut = i64::from(t) + i64::from(infectious_period);
    let sick_by = |i: usize, cut: i64| {
        traj.onset(i).is_some_and(|d| {
            let d = i64::from(d);
            match opts.cutoff {
                ContactCutoff::SickBy => d <= cut,
                ContactCutoff::InfectiousAt => d <= cut && cut <= d + i64::from(infectious_period),
            }
        })
    };
    let mut s = ContactSummaries::default();

    let alter_contacts = net.neighbors(pair.alter);
    let ego_contacts = net.neighbors(pair.ego);
    for &j in alter_contacts {
        if opts.exclude_partner && j == pair.ego {
            continue;
        }
        if sick_by(j, alter_cut) {
            if vacc.is_vaccinated(j) {
                s.l_a += 1;
            } else {
                s.u_a += 1;
            }
        }
    }
    for &j in ego_contacts {
        if opts.exclude_partner && j == pair.alter {
            continue;
        }
        if sick_by(j, ego_cut) {
            if vacc.is_vaccinated(j) {
                s.l_e += 1;
            } else {
                s.u_e += 1;
            }
        }
    }
    // Both lists are sorted; walk the intersection.
    let (mut x, mut y) = (0, 0);
    while x < alter_contacts.len() && y < ego_contacts.len() {
        match alter_contacts[x].cmp(&ego_contacts[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                let j = alter_contacts[x];
                if sick_by(j, alter_cut) {
                    if vacc.is_vaccinated(j) {
                        s.m_v += 1;
                    } else {
                        s.m_u += 1;
                    }
                }
                x += 1;
                y += 1;
            }
        }
    }
    s
}

pub fn group_record(
    net: &Network,
    traj: &Trajectory,
    vacc: &VaccinationAssignment,
    pair: &AlterEgoPair,
    params: &DiseaseParams,
    opts: SummaryOptions,
) -> GroupRecord {
    let b = params.incubation;
    let f = params.infectious_period;
    let t = first_infection_time(traj, pair.alter, pair.ego, params.follow_up);
    let y_a = mediator(traj, pair.alter, pair.ego, t, params.follow_up);
    let y_e_raw = outcome(traj, pair.ego, t, b, f);
    debug_assert!(b == 0 || y_a == 1 || y_e_raw == 0);
    let y_e = if y_a == 1 { y_e_raw } else { 0 };
    let s = contact_summaries(net, traj, vacc, pair, t, b, f, opts);
    GroupRecord {
        pair_id: pair.pair_id,
        v_a: u8::from(vacc.is_vaccinated(pair.alter)),
        v_e: u8::from(vacc.is_vaccinated(pair.ego)),
        t,
        y_a,
        y_e,
        u_a: s.u_a,
        l_a: s.l_a,
        u_e: s.u_e,
        l_e: s.l_e,
        m_u: s.m_u,
        m_v: s.m_v,
    }
}

/// One record per extracted pair of a single network epidemic.
pub fn build_records(
    net: &Network,
    traj: &Trajectory,
    vacc: &VaccinationAssignment,
    pairs: &[AlterEgoPair],
    params: &DiseaseParams,
    opts: SummaryOptions,
) -> Vec<GroupRecord> {
    pairs
        .iter()
        .map(|pair| group_record(net, traj, vacc, pair, params, opts))
        .collect()
}

/// One record per independently simulated group (alter node 0, ego node 1).
pub fn build_group_records(
    groups: &[GroupSimulation],
    params: &DiseaseParams,
    opts: SummaryOptions,
) -> Vec<GroupRecord> {
    groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let pair = AlterEgoPair {
                pair_id: k,
                alter: GROUP_ALTER,
                ego: GROUP_EGO,
            };
            group_record(&g.network, &g.trajectory, &g.vaccination, &pair, params, opts)
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error("records line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("records line {line}: Y_eTs = 1 with Y_aT = 0")]
    Restriction { line: u64 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn write_records_csv<W: Write>(w: W, records: &[GroupRecord]) -> Result<(), RecordsError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<GroupRecord>, RecordsError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize::<GroupRecord>() {
        let rec = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            RecordsError::Parse {
                line,
                msg: e.to_string(),
            }
        })?;
        let line = out.len() as u64 + 2;
        for (name, v) in [("V_a", rec.v_a), ("V_e", rec.v_e), ("Y_aT", rec.y_a), ("Y_eTs", rec.y_e)] {
            if v > 1 {
                return Err(RecordsError::Parse {
                    line,
                    msg: format!("{name} must be 0 or 1, got {v}"),
                });
            }
        }
        if rec.y_e == 1 && rec.y_a == 0 {
            return Err(RecordsError::Restriction { line });
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epidemic::OutsideMode;

    fn traj(onsets: &[Option<u32>]) -> Trajectory {
        Trajectory {
            infected_day: onsets.iter().map(|o| o.map(|d| d - 1)).collect(),
            onset_day: onsets.to_vec(),
        }
    }

    fn flu() -> DiseaseParams {
        DiseaseParams {
            p_outside: 0.01,
            p_unvaccinated: 0.4,
            p_vaccinated: 0.4,
            delta: 1.0,
            incubation: 1,
            infectious_period: 3,
            follow_up: 100,
            outside_mode: OutsideMode::EveryDay,
        }
    }

    #[test]
    fn first_infection_time_examples() {
        assert_eq!(first_infection_time(&traj(&[Some(5), Some(9)]), 0, 1, 100), 5);
        assert_eq!(first_infection_time(&traj(&[None, None]), 0, 1, 100), 100);
        assert_eq!(first_infection_time(&traj(&[Some(7), Some(7)]), 0, 1, 100), 7);
        assert_eq!(first_infection_time(&traj(&[None, Some(4)]), 0, 1, 100), 4);
    }

    #[test]
    fn mediator_examples() {
        assert_eq!(mediator(&traj(&[Some(5), Some(9)]), 0, 1, 5, 100), 1);
        assert_eq!(mediator(&traj(&[Some(7), Some(7)]), 0, 1, 7, 100), 0);
        assert_eq!(mediator(&traj(&[None, None]), 0, 1, 100, 100), 0);
        assert_eq!(mediator(&traj(&[Some(9), Some(5)]), 0, 1, 5, 100), 0);
        assert_eq!(mediator(&traj(&[Some(5), None]), 0, 1, 5, 100), 1);
    }

    #[test]
    fn outcome_window_boundaries() {
        // window [T + b, T + b + f] = [6, 9]
        assert_eq!(outcome(&traj(&[Some(5), Some(6)]), 1, 5, 1, 3), 1);
        assert_eq!(outcome(&traj(&[Some(5), Some(9)]), 1, 5, 1, 3), 1);
        assert_eq!(outcome(&traj(&[Some(5), Some(10)]), 1, 5, 1, 3), 0);
        assert_eq!(outcome(&traj(&[Some(5), Some(5)]), 1, 5, 1, 3), 0);
        assert_eq!(outcome(&traj(&[Some(5), None]), 1, 5, 1, 3), 0);
    }

    fn star() -> (Network, AlterEgoPair) {
        // alter 0, ego 1; 2 tied to alter only, 3 to ego only, 4 mutual
        let net = Network::from_ties(5, [(0, 1), (0, 2), (1, 3), (0, 4), (1, 4)]).unwrap();
        let pair = AlterEgoPair {
            pair_id: 0,
            alter: 0,
            ego: 1,
        };
        (net, pair)
    }

    #[test]
    fn summaries_all_zero_without_cases() {
        let (net, pair) = star();
        let vacc = VaccinationAssignment {
            vaccinated: vec![false; 5],
        };
        let s = contact_summaries(&net, &traj(&[None; 5]), &vacc, &pair, 100, 1, 3, SummaryOptions::default());
        assert_eq!(s, ContactSummaries::default());
    }

    #[test]
    fn summaries_cutoffs_are_inclusive() {
        let (net, pair) = star();
        let vacc = VaccinationAssignment {
            vaccinated: vec![false; 5],
        };
        // T = 10, b = 1: alter-contact 2 with onset 9 = T - b counts.
        let tr = traj(&[Some(10), None, Some(9), None, None]);
        let s = contact_summaries(&net, &tr, &vacc, &pair, 10, 1, 3, SummaryOptions::default());
        assert_eq!(s.u_a, 1);
        // onset 10 > T - b does not.
        let tr = traj(&[Some(10), None, Some(10), None, None]);
        let s = contact_summaries(&net, &tr, &vacc, &pair, 10, 1, 3, SummaryOptions::default());
        assert_eq!(s.u_a, 0);
        // ego's only sick contact at T + f + 1 = 14 is outside the window.
        let tr = traj(&[Some(10), None, None, Some(14), None]);
        let s = contact_summaries(&net, &tr, &vacc, &pair, 10, 1, 3, SummaryOptions::default());
        assert_eq!((s.u_e, s.l_e), (0, 0));
        let tr = traj(&[Some(10), None, None, Some(13), None]);
        let s = contact_summaries(&net, &tr, &vacc, &pair, 10, 1, 3, SummaryOptions::default());
        assert_eq!((s.u_e, s.l_e), (1, 0));
    }

    #[test]
    fn partner_exclusion_switch() {
        let (net, pair) = star();
        let vacc = VaccinationAssignment {
            vaccinated: vec![true; 5],
        };
        // ego is a case at 3 <= T + f; alter a case at 2 <= T - b... T is 2.
        let tr = traj(&[Some(2), Some(3), None, None, None]);
        let lit = SummaryOptions {
            exclude_partner: false,
            ..SummaryOptions::default()
        };
        let s = contact_summaries(&net, &tr, &vacc, &pair, 2, 1, 3, lit);
        // alter (onset 2) counted among the ego's contacts by T + f = 5
        assert_eq!(s.l_e, 1);
        let s = contact_summaries(&net, &tr, &vacc, &pair, 2, 1, 3, SummaryOptions::default());
        assert_eq!(s.l_e, 0);
    }

    #[test]
    fn hand_built_five_node_record() {
        // Manual trace with b = 1, f = 3:
        //   onsets: alter 6, ego 8, node 2 (alter-only, vaccinated) 4,
        //           node 3 (ego-only, unvaccinated) 9, node 4 (mutual, unvaccinated) 5.
        //   T = 6; Y_aT = 1 (ego healthy at 6); outcome window [7, 10] holds 8 -> 1.
        //   alter contacts by T - b = 5, excluding ego: node 2 (vacc), node 4 (unvacc) -> U_a 1, L_a 1
        //   ego contacts by T + f = 9, excluding alter: node 3, node 4 -> U_e 2, L_e 0
        //   mutual by 5: node 4 -> M_u 1, M_v 0
        let (net, pair) = star();
        let vacc = VaccinationAssignment {
            vaccinated: vec![true, false, true, false, false],
        };
        let tr = traj(&[Some(6), Some(8), Some(4), Some(9), Some(5)]);
        let rec = group_record(&net, &tr, &vacc, &pair, &flu(), SummaryOptions::default());
        assert_eq!(
            rec,
            GroupRecord {
                pair_id: 0,
                v_a: 1,
                v_e: 0,
                t: 6,
                y_a: 1,
                y_e: 1,
                u_a: 1,
                l_a: 1,
                u_e: 2,
                l_e: 0,
                m_u: 1,
                m_v: 0,
            }
        );
    }

    #[test]
    fn two_node_group_neither_sick() {
        let sim = GroupSimulation {
            network: Network::complete(2),
            vaccination: VaccinationAssignment {
                vaccinated: vec![false, true],
            },
            trajectory: traj(&[None, None]),
        };
        let recs = build_group_records(&[sim], &flu(), SummaryOptions::default());
        let r = recs[0];
        assert_eq!((r.t, r.y_a, r.y_e), (100, 0, 0));
        assert_eq!((r.u_a, r.l_a, r.u_e, r.l_e, r.m_u, r.m_v), (0, 0, 0, 0, 0, 0));
        assert_eq!((r.v_a, r.v_e), (0, 1));
    }

    #[test]
    fn records_csv_round_trip_and_errors() {
        let (net, pair) = star();
        let vacc = VaccinationAssignment {
            vaccinated: vec![true, false, true, false, false],
        };
        let tr = traj(&[Some(6), Some(8), Some(4), Some(9), Some(5)]);
        let recs = build_records(&net, &tr, &vacc, &[pair], &flu(), SummaryOptions::default());
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("pair_id,V_a,V_e,T,Y_aT,Y_eTs,U_a,L_a,U_e,L_e,M_u,M_v\n"));
        assert_eq!(read_records_csv(text.as_bytes()).unwrap(), recs);

        let bad = "pair_id,V_a,V_e,T,Y_aT,Y_eTs,U_a,L_a,U_e,L_e,M_u,M_v\n0,1,0,5,1,0,0,0,0,0,0,0\n1,x,0,5,1,0,0,0,0,0,0,0\n";
        match read_records_csv(bad.as_bytes()) {
            Err(RecordsError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let restricted = "pair_id,V_a,V_e,T,Y_aT,Y_eTs,U_a,L_a,U_e,L_e,M_u,M_v\n0,1,0,5,0,1,0,0,0,0,0,0\n";
        assert!(matches!(
            read_records_csv(restricted.as_bytes()),
            Err(RecordsError::Restriction { line: 2 })
        ));
    }
}
