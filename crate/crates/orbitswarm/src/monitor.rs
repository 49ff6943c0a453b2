//! Runtime monitors: streaming aggregation of step records into a run
//! summary covering safety, feasibility accounting, path-following errors,
//! and per-pair overtake episodes.
//!
//! An episode is a maximal span during which one ordered pair's safety
//! residual stays negative, beginning at a step where the overtaking rule
//! activated. The channel gain is tracked through the whole span, including
//! any steps where membership lapses, so a gain sign change during an
//! otherwise active residual is visible rather than masked by the rule
//! turning itself off.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::config::Scenario;
use crate::coordination::OvertakeStage;
use crate::safety::SINGULARITY_EPS;
use crate::sim::{PairStepRecord, StepRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonitorError {
    #[error("cannot summarize an empty record stream")]
    EmptyStream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventTotals {
    pub saturations: u64,
    pub singularities: u64,
    pub inside_virtual_zone: u64,
    pub collisions: u64,
    pub speed_violations: u64,
}

/// Per-robot summary over the run. Tail statistics cover the final quarter
/// of the planned horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotSummary {
    pub id: u32,
    pub swarm: u32,
    pub speed: f64,
    pub final_error: f64,
    pub mean_abs_error: f64,
    pub tail_min_abs_error: Option<f64>,
    pub tail_max_abs_error: Option<f64>,
}

/// One overtake episode of an ordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub i: u32,
    pub j: u32,
    pub t_start: f64,
    pub t_end: f64,
    pub steps: u64,
    /// Lemma preconditions held at activation.
    pub preconditions_met: bool,
    pub error_gap: f64,
    pub alignment_gap: f64,
    /// Minimum outward channel gain over the episode.
    pub min_outward_gain: f64,
    pub t_min_gain: f64,
    pub first_outward_gain: f64,
    pub last_outward_gain: f64,
    /// Steps inside the episode where the gain fell to or below the
    /// divisibility threshold (membership lapsed while the residual stayed
    /// negative).
    pub membership_lapses: u64,
    /// Steps inside the episode where the outward-facing geometry check
    /// failed.
    pub assumption1_violations: u64,
    pub reached_stage2: bool,
    /// Stage changes as `(t, stage)` pairs, starting at activation.
    pub stage_timeline: Vec<(f64, OvertakeStage)>,
}

impl EpisodeSummary {
    /// The gain minimum lies strictly inside the episode and below both
    /// endpoint values.
    pub fn has_interior_minimum(&self) -> bool {
        self.t_min_gain > self.t_start
            && self.t_min_gain < self.t_end
            && self.min_outward_gain < self.first_outward_gain
            && self.min_outward_gain < self.last_outward_gain
    }
}

/// Aggregated result of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub t_end: f64,
    pub halted_on_collision: bool,
    pub min_pair_distance: Option<f64>,
    pub min_pair_distance_t: Option<f64>,
    pub max_abs_omega: Option<f64>,
    pub totals: EventTotals,
    pub first_collision_t: Option<f64>,
    pub robots: Vec<RobotSummary>,
    /// Time-mean of `|e|` per swarm over the whole run.
    pub swarm_mean_abs_error: Vec<(u32, f64)>,
    pub episodes: Vec<EpisodeSummary>,
    /// Ordered pairs whose barrier value never went negative while their
    /// observed distance still dipped to the collision radius. Always empty
    /// when the safe set is respected.
    pub safe_set_violations: Vec<(u32, u32)>,
}

impl RunSummary {
    pub fn episodes_with_preconditions(&self) -> impl Iterator<Item = &EpisodeSummary> {
        self.episodes.iter().filter(|e| e.preconditions_met)
    }

    /// Multi-line human-readable report.
    pub fn render_text(&self, collision_radius: f64) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "steps: {}  t_end: {:.3}s", self.steps, self.t_end);
        match self.min_pair_distance {
            Some(d) => {
                let _ = writeln!(
                    out,
                    "min pairwise distance: {:.6} (r = {}) at t = {:.3}s  [{}]",
                    d,
                    collision_radius,
                    self.min_pair_distance_t.unwrap_or(0.0),
                    if d > collision_radius { "safe" } else { "VIOLATED" }
                );
            }
            None => {
                let _ = writeln!(out, "min pairwise distance: n/a (fewer than two active robots)");
            }
        }
        if let Some(w) = self.max_abs_omega {
            let _ = writeln!(out, "max |omega|: {:.4}", w);
        }
        let _ = writeln!(
            out,
            "events: collisions={} saturations={} singularities={} inside_virtual_zone={} speed_violations={}",
            self.totals.collisions,
            self.totals.saturations,
            self.totals.singularities,
            self.totals.inside_virtual_zone,
            self.totals.speed_violations,
        );
        if self.halted_on_collision {
            let _ = writeln!(out, "run halted at first collision");
        }
        let with_pre = self.episodes.iter().filter(|e| e.preconditions_met).count();
        let _ = writeln!(
            out,
            "overtake episodes: {} total, {} with activation preconditions met",
            self.episodes.len(),
            with_pre
        );
        if let Some(min_gain) = self
            .episodes_with_preconditions()
            .map(|e| e.min_outward_gain)
            .fold(None::<f64>, |acc, g| Some(acc.map_or(g, |m| m.min(g))))
        {
            let _ = writeln!(out, "min channel gain over conditioned episodes: {:.6}", min_gain);
        }
        for (swarm, mean) in &self.swarm_mean_abs_error {
            let _ = writeln!(out, "swarm {swarm}: mean |e| = {mean:.6}");
        }
        if !self.safe_set_violations.is_empty() {
            let _ = writeln!(out, "SAFE-SET VIOLATIONS: {:?}", self.safe_set_violations);
        }
        out
    }
}

#[derive(Debug, Clone)]
struct RobotAccum {
    swarm: u32,
    speed: f64,
    final_error: f64,
    sum_abs_error: f64,
    samples: u64,
    tail_min_abs_error: Option<f64>,
    tail_max_abs_error: Option<f64>,
}

#[derive(Debug, Clone)]
struct EpisodeAccum {
    t_start: f64,
    preconditions_met: bool,
    error_gap: f64,
    alignment_gap: f64,
    min_outward_gain: f64,
    t_min_gain: f64,
    first_outward_gain: f64,
    last_outward_gain: f64,
    last_t: f64,
    steps: u64,
    membership_lapses: u64,
    assumption1_violations: u64,
    reached_stage2: bool,
    stage_timeline: Vec<(f64, OvertakeStage)>,
}

impl EpisodeAccum {
    fn open(t: f64, pr: &PairStepRecord) -> Self {
        let activation = pr.activation.expect("episodes open on activation records");
        EpisodeAccum {
            t_start: t,
            preconditions_met: activation.preconditions_met,
            error_gap: activation.error_gap,
            alignment_gap: activation.alignment_gap,
            min_outward_gain: pr.outward_gain,
            t_min_gain: t,
            first_outward_gain: pr.outward_gain,
            last_outward_gain: pr.outward_gain,
            last_t: t,
            steps: 1,
            membership_lapses: 0,
            assumption1_violations: if pr.assumption1_ok { 0 } else { 1 },
            reached_stage2: pr.stage == OvertakeStage::Stage2,
            stage_timeline: vec![(t, pr.stage)],
        }
    }

    fn extend(&mut self, t: f64, pr: &PairStepRecord) {
        if pr.outward_gain < self.min_outward_gain {
            self.min_outward_gain = pr.outward_gain;
            self.t_min_gain = t;
        }
        self.last_outward_gain = pr.outward_gain;
        self.last_t = t;
        self.steps += 1;
        if pr.outward_gain <= SINGULARITY_EPS {
            self.membership_lapses += 1;
        }
        if !pr.assumption1_ok {
            self.assumption1_violations += 1;
        }
        if pr.stage == OvertakeStage::Stage2 {
            self.reached_stage2 = true;
        }
        if self
            .stage_timeline
            .last()
            .map(|&(_, s)| s != pr.stage)
            .unwrap_or(true)
        {
            self.stage_timeline.push((t, pr.stage));
        }
    }

    fn close(self, i: u32, j: u32) -> EpisodeSummary {
        EpisodeSummary {
            i,
            j,
            t_start: self.t_start,
            t_end: self.last_t,
            steps: self.steps,
            preconditions_met: self.preconditions_met,
            error_gap: self.error_gap,
            alignment_gap: self.alignment_gap,
            min_outward_gain: self.min_outward_gain,
            t_min_gain: self.t_min_gain,
            first_outward_gain: self.first_outward_gain,
            last_outward_gain: self.last_outward_gain,
            membership_lapses: self.membership_lapses,
            assumption1_violations: self.assumption1_violations,
            reached_stage2: self.reached_stage2,
            stage_timeline: self.stage_timeline,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PairExtremes {
    min_h: f64,
    min_distance: f64,
}

/// Streaming monitor; feed every step record in order, then finalize.
#[derive(Debug)]
pub struct MonitorAccumulator {
    collision_radius: f64,
    tail_start_step: u64,
    steps_seen: u64,
    t_last: f64,
    min_pair_distance: Option<(f64, f64)>,
    max_abs_omega: Option<f64>,
    totals: EventTotals,
    first_collision_t: Option<f64>,
    robots: BTreeMap<u32, RobotAccum>,
    open_episodes: BTreeMap<(u32, u32), EpisodeAccum>,
    episodes: Vec<EpisodeSummary>,
    pair_extremes: BTreeMap<(u32, u32), PairExtremes>,
}

impl MonitorAccumulator {
    pub fn new(sc: &Scenario) -> Self {
        let expected_steps = sc.step_count();
        MonitorAccumulator {
            collision_radius: sc.safety.r,
            tail_start_step: expected_steps - expected_steps / 4,
            steps_seen: 0,
            t_last: 0.0,
            min_pair_distance: None,
            max_abs_omega: None,
            totals: EventTotals::default(),
            first_collision_t: None,
            robots: BTreeMap::new(),
            open_episodes: BTreeMap::new(),
            episodes: Vec::new(),
            pair_extremes: BTreeMap::new(),
        }
    }

    pub fn observe(&mut self, record: &StepRecord) {
        self.steps_seen += 1;
        self.t_last = record.t;

        let agg = &record.aggregates;
        if let Some(d) = agg.min_pairwise_distance {
            if self.min_pair_distance.map_or(true, |(best, _)| d < best) {
                self.min_pair_distance = Some((d, record.t));
            }
        }
        if let Some(w) = agg.max_abs_omega {
            self.max_abs_omega = Some(self.max_abs_omega.map_or(w, |m| m.max(w)));
        }
        self.totals.saturations += agg.saturations as u64;
        self.totals.singularities += agg.singularities as u64;
        self.totals.inside_virtual_zone += agg.inside_virtual_zone as u64;
        self.totals.collisions += agg.collisions as u64;
        self.totals.speed_violations += agg.speed_violations as u64;
        if agg.collisions > 0 && self.first_collision_t.is_none() {
            self.first_collision_t = Some(record.t);
        }

        let in_tail = record.step >= self.tail_start_step;
        for robot in &record.robots {
            let acc = self.robots.entry(robot.id).or_insert_with(|| RobotAccum {
                swarm: robot.swarm,
                speed: robot.speed,
                final_error: robot.path_error,
                sum_abs_error: 0.0,
                samples: 0,
                tail_min_abs_error: None,
                tail_max_abs_error: None,
            });
            acc.final_error = robot.path_error;
            acc.sum_abs_error += robot.path_error.abs();
            acc.samples += 1;
            if in_tail {
                let e = robot.path_error.abs();
                acc.tail_min_abs_error = Some(acc.tail_min_abs_error.map_or(e, |m| m.min(e)));
                acc.tail_max_abs_error = Some(acc.tail_max_abs_error.map_or(e, |m| m.max(e)));
            }
        }

        let mut seen: Vec<(u32, u32)> = Vec::with_capacity(record.pairs.len());
        for pr in &record.pairs {
            let key = (pr.i, pr.j);
            seen.push(key);

            let ext = self.pair_extremes.entry(key).or_insert(PairExtremes {
                min_h: f64::INFINITY,
                min_distance: f64::INFINITY,
            });
            ext.min_h = ext.min_h.min(pr.h);
            ext.min_distance = ext.min_distance.min(pr.distance);

            match self.open_episodes.get_mut(&key) {
                Some(ep) => {
                    if pr.psi < 0.0 {
                        ep.extend(record.t, pr);
                    } else {
                        let ep = self.open_episodes.remove(&key).expect("present");
                        self.episodes.push(ep.close(pr.i, pr.j));
                    }
                }
                None => {
                    if pr.rule_active && pr.activation.is_some() {
                        self.open_episodes.insert(key, EpisodeAccum::open(record.t, pr));
                    }
                }
            }
        }
        // Pairs that left sensing scope end their episodes.
        seen.sort_unstable();
        let absent: Vec<(u32, u32)> = self
            .open_episodes
            .keys()
            .filter(|k| seen.binary_search(k).is_err())
            .copied()
            .collect();
        for key in absent {
            let ep = self.open_episodes.remove(&key).expect("present");
            self.episodes.push(ep.close(key.0, key.1));
        }
    }

    pub fn finalize(mut self, halted_on_collision: bool) -> RunSummary {
        let open: Vec<((u32, u32), EpisodeAccum)> = std::mem::take(&mut self.open_episodes)
            .into_iter()
            .collect();
        for ((i, j), ep) in open {
            self.episodes.push(ep.close(i, j));
        }

        let mut swarm_sums: BTreeMap<u32, (f64, u64)> = BTreeMap::new();
        for acc in self.robots.values() {
            let entry = swarm_sums.entry(acc.swarm).or_insert((0.0, 0));
            entry.0 += acc.sum_abs_error;
            entry.1 += acc.samples;
        }
        let swarm_mean_abs_error = swarm_sums
            .into_iter()
            .map(|(swarm, (sum, n))| (swarm, if n > 0 { sum / n as f64 } else { 0.0 }))
            .collect();

        let safe_set_violations = self
            .pair_extremes
            .iter()
            .filter(|(_, ext)| ext.min_h >= 0.0 && ext.min_distance <= self.collision_radius)
            .map(|(&key, _)| key)
            .collect();

        let robots = self
            .robots
            .iter()
            .map(|(&id, acc)| RobotSummary {
                id,
                swarm: acc.swarm,
                speed: acc.speed,
                final_error: acc.final_error,
                mean_abs_error: if acc.samples > 0 {
                    acc.sum_abs_error / acc.samples as f64
                } else {
                    0.0
                },
                tail_min_abs_error: acc.tail_min_abs_error,
                tail_max_abs_error: acc.tail_max_abs_error,
            })
            .collect();

        RunSummary {
            steps: self.steps_seen,
            t_end: self.t_last,
            halted_on_collision,
            min_pair_distance: self.min_pair_distance.map(|(d, _)| d),
            min_pair_distance_t: self.min_pair_distance.map(|(_, t)| t),
            max_abs_omega: self.max_abs_omega,
            totals: self.totals,
            first_collision_t: self.first_collision_t,
            robots,
            swarm_mean_abs_error,
            episodes: self.episodes,
            safe_set_violations,
        }
    }
}

/// Aggregates a full record stream into a run summary.
pub fn monitor_report(sc: &Scenario, records: &[StepRecord]) -> Result<RunSummary, MonitorError> {
    if records.is_empty() {
        return Err(MonitorError::EmptyStream);
    }
    let mut acc = MonitorAccumulator::new(sc);
    for record in records {
        acc.observe(record);
    }
    let halted = sc.run.halt_on_collision && (acc.steps_seen < sc.step_count());
    Ok(acc.finalize(halted))
}
