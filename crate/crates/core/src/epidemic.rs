//! Discrete-time stochastic epidemic with vaccination on a contact network.
//!
//! Day loop `t = 1..=t_f`. A node infected on day `t` becomes infectious on
//! day `t + b` (its onset) and stays infectious through day `t + b + f`,
//! after which it is removed. On each day every susceptible node faces
//! independent sources: the outside world and each contact that is
//! infectious that day. Vaccinated susceptibles have every source
//! probability multiplied by `delta`.
//!
//! Draw order: for each day, nodes with a positive infection hazard are
//! visited in index order and consume exactly one uniform each. The hazard
//! is the complement-product of the per-source probabilities, which is the
//! same event as "at least one independent source succeeds".

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::netgraph::Network;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("{name} = {value} is not a probability")]
    Probability { name: &'static str, value: f64 },
    #[error("delta = {0} must lie in (0, 1]")]
    Delta(f64),
    #[error("follow-up must be at least one day")]
    FollowUp,
    #[error("vaccination vector has {got} entries for {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
    #[error("poisson mean {0} must be positive and finite")]
    PoissonMean(f64),
}

/// When the outside world acts as an infection source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutsideMode {
    EveryDay,
    FirstDayOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiseaseParams {
    /// Daily probability of infection from outside the network.
    pub p_outside: f64,
    /// Daily probability of infection from one infectious unvaccinated contact.
    pub p_unvaccinated: f64,
    /// Daily probability of infection from one infectious vaccinated contact.
    pub p_vaccinated: f64,
    /// Multiplier on every source probability for a vaccinated susceptible.
    pub delta: f64,
    /// Incubation period `b` in days.
    pub incubation: u32,
    /// Infectious period `f` in days.
    pub infectious_period: u32,
    /// Follow-up length `t_f` in days.
    pub follow_up: u32,
    pub outside_mode: OutsideMode,
}

impl DiseaseParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("p_o", self.p_outside),
            ("p_u", self.p_unvaccinated),
            ("p_v", self.p_vaccinated),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ParamError::Probability { name, value });
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(ParamError::Delta(self.delta));
        }
        if self.follow_up < 1 {
            return Err(ParamError::FollowUp);
        }
        Ok(())
    }

    /// `s = f + b`, the length of the outcome window after the first case.
    pub fn s(&self) -> u32 {
        self.infectious_period + self.incubation
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaccinationAssignment {
    pub vaccinated: Vec<bool>,
}

impl VaccinationAssignment {
    pub fn len(&self) -> usize {
        self.vaccinated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vaccinated.is_empty()
    }

    #[inline]
    pub fn is_vaccinated(&self, i: usize) -> bool {
        self.vaccinated[i]
    }
}

/// Per-node infection and onset days of one simulated epidemic.
///
/// `onset_day` holds `infected_day + b` when that falls within follow-up and
/// is `None` otherwise; a node is a case from its onset on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub infected_day: Vec<Option<u32>>,
    pub onset_day: Vec<Option<u32>>,
}

impl Trajectory {
    #[inline]
    pub fn onset(&self, i: usize) -> Option<u32> {
        self.onset_day[i]
    }

    /// Fraction of nodes infected during follow-up.
    pub fn attack_rate(&self) -> f64 {
        if self.infected_day.is_empty() {
            return 0.0;
        }
        self.infected_day.iter().filter(|d| d.is_some()).count() as f64
            / self.infected_day.len() as f64
    }
}

pub fn assign_vaccination<R: Rng + ?Sized>(
    node_count: usize,
    prob: f64,
    rng: &mut R,
) -> Result<VaccinationAssignment, ParamError> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(ParamError::Probability {
            name: "vacc_prob",
            value: prob,
        });
    }
    Ok(VaccinationAssignment {
        vaccinated: (0..node_count).map(|_| rng.random_bool(prob)).collect(),
    })
}

pub fn simulate_epidemic<R: Rng + ?Sized>(
    net: &Network,
    vacc: &VaccinationAssignment,
    params: &DiseaseParams,
    rng: &mut R,
) -> Result<Trajectory, ParamError> {
    simulate_epidemic_seeded(net, vacc, params, &[], rng)
}

/// As [`simulate_epidemic`], with the `seeded` nodes infected on day 1
/// before any draws are made.
pub fn simulate_epidemic_seeded<R: Rng + ?Sized>(
    net: &Network,
    vacc: &VaccinationAssignment,
    params: &DiseaseParams,
    seeded: &[usize],
    rng: &mut R,
) -> Result<Trajectory, ParamError> {
    params.validate()?;
    let n = net.node_count();
    if vacc.len() != n {
        return Err(ParamError::SizeMismatch {
            expected: n,
            got: vacc.len(),
        });
    }
    let b = params.incubation;
    let f = params.infectious_period;
    let mut infected_day: Vec<Option<u32>> = vec![None; n];

    // Infection log in day order; infectious window slides over it.
    let mut log: Vec<(u32, usize)> = Vec::new();
    let mut window_start = 0;

    let mut pressure_u = vec![0u32; n];
    let mut pressure_v = vec![0u32; n];
    let mut at_risk: Vec<usize> = Vec::new();
    let mut seen = vec![false; n];
    let mut new_cases: Vec<usize> = Vec::new();

    // Per-source probabilities for unvaccinated / vaccinated susceptibles.
    let scale = [1.0, params.delta];
    let log_escape = |p: f64| (1.0 - p).ln();
    let esc_u = scale.map(|m| log_escape(m * params.p_unvaccinated));
    let esc_v = scale.map(|m| log_escape(m * params.p_vaccinated));

    let mut seeded: Vec<usize> = seeded.to_vec();
    seeded.sort_unstable();
    seeded.dedup();

    for day in 1..=params.follow_up {
        if day == 1 {
            for &i in &seeded {
                infected_day[i] = Some(1);
                log.push((1, i));
            }
        }
        // Infectious today: infected on a day in [day - b - f, day - b].
        while window_start < log.len() && log[window_start].0 + b + f < day {
            window_start += 1;
        }
        at_risk.clear();
        for &(inf_day, j) in &log[window_start..] {
            if inf_day + b > day {
                break;
            }
            let src_vacc = vacc.is_vaccinated(j);
            for &i in net.neighbors(j) {
                if infected_day[i].is_some() {
                    continue;
                }
                if src_vacc {
                    pressure_v[i] += 1;
                } else {
                    pressure_u[i] += 1;
                }
                if !seen[i] {
                    seen[i] = true;
                    at_risk.push(i);
                }
            }
        }
        let outside = match params.outside_mode {
            OutsideMode::EveryDay => params.p_outside,
            OutsideMode::FirstDayOnly if day == 1 => params.p_outside,
            OutsideMode::FirstDayOnly => 0.0,
        };

        new_cases.clear();
        let mut visit = |i: usize, rng: &mut R| {
            let v = usize::from(vacc.is_vaccinated(i));
            let mut log_esc = 0.0;
            if pressure_u[i] > 0 {
                log_esc += f64::from(pressure_u[i]) * esc_u[v];
            }
            if pressure_v[i] > 0 {
                log_esc += f64::from(pressure_v[i]) * esc_v[v];
            }
            if outside > 0.0 {
                log_esc += log_escape(scale[v] * outside);
            }
            let hazard = -log_esc.exp_m1();
            if hazard > 0.0 && rng.random::<f64>() < hazard {
                new_cases.push(i);
            }
        };
        if outside > 0.0 {
            for i in 0..n {
                if infected_day[i].is_none() {
                    visit(i, rng);
                }
            }
        } else {
            at_risk.sort_unstable();
            for &i in &at_risk {
                visit(i, rng);
            }
        }
        for &i in &at_risk {
            pressure_u[i] = 0;
            pressure_v[i] = 0;
            seen[i] = false;
        }
        for &i in &new_cases {
            infected_day[i] = Some(day);
            log.push((day, i));
        }
    }

    let onset_day = infected_day
        .iter()
        .map(|d| d.map(|d| d + b).filter(|&o| o <= params.follow_up))
        .collect();
    Ok(Trajectory {
        infected_day,
        onset_day,
    })
}

/// One independently simulated group: alter is node 0, ego is node 1 and
/// the remaining nodes are their mutual contacts.
#[derive(Debug, Clone)]
pub struct GroupSimulation {
    pub network: Network,
    pub vaccination: VaccinationAssignment,
    pub trajectory: Trajectory,
}

pub const GROUP_ALTER: usize = 0;
pub const GROUP_EGO: usize = 1;

/// Draws `count` mutual-contact counts from Poisson(`mean`).
pub fn draw_contact_counts<R: Rng + ?Sized>(
    count: usize,
    mean: f64,
    rng: &mut R,
) -> Result<Vec<usize>, ParamError> {
    let pois = Poisson::new(mean).map_err(|_| ParamError::PoissonMean(mean))?;
    Ok((0..count).map(|_| pois.sample(rng) as usize).collect())
}

/// Simulates each group as a complete graph on `2 + contacts[k]` nodes.
pub fn simulate_independent_groups<R: Rng + ?Sized>(
    contacts: &[usize],
    vacc_prob: f64,
    params: &DiseaseParams,
    rng: &mut R,
) -> Result<Vec<GroupSimulation>, ParamError> {
    params.validate()?;
    contacts
        .iter()
        .map(|&n_k| {
            let network = Network::complete(2 + n_k);
            let vaccination = assign_vaccination(network.node_count(), vacc_prob, rng)?;
            let trajectory = simulate_epidemic(&network, &vaccination, params, rng)?;
            Ok(GroupSimulation {
                network,
                vaccination,
                trajectory,
            })
        })
        .collect()
}

/// CSV dump with columns `node,vaccinated,infected_day,onset_day`; an empty
/// field means the event never happened.
pub fn write_trajectory_csv<W: Write>(
    w: &mut W,
    vacc: &VaccinationAssignment,
    traj: &Trajectory,
) -> io::Result<()> {
    writeln!(w, "node,vaccinated,infected_day,onset_day")?;
    let show = |d: Option<u32>| d.map(|d| d.to_string()).unwrap_or_default();
    for i in 0..traj.infected_day.len() {
        writeln!(
            w,
            "{},{},{},{}",
            i,
            u8::from(vacc.vaccinated[i]),
            show(traj.infected_day[i]),
            show(traj.onset_day[i])
        )?;
    }
    Ok(())
}

/// Trajectories of independently simulated groups, with a leading `group`
/// column; nodes are numbered within their group.
pub fn write_group_trajectories_csv<W: Write>(w: &mut W, groups: &[GroupSimulation]) -> io::Result<()> {
    writeln!(w, "group,node,vaccinated,infected_day,onset_day")?;
    let show = |d: Option<u32>| d.map(|d| d.to_string()).unwrap_or_default();
    for (k, g) in groups.iter().enumerate() {
        for i in 0..g.trajectory.infected_day.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                k,
                i,
                u8::from(g.vaccination.vaccinated[i]),
                show(g.trajectory.infected_day[i]),
                show(g.trajectory.onset_day[i])
            )?;
        }
    }
    Ok(())
}
