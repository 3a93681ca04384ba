//! Time-scripted gait finite-state machine: two swing phases and two brief
//! dual-support phases per cycle, with four transition phases that ramp the
//! normal-force bounds for smooth contact changes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitPhase {
    DualSupportOne,
    LiftFirst,
    SwingFirst,
    LandFirst,
    DualSupportTwo,
    LiftSecond,
    SwingSecond,
    LandSecond,
}

/// Disturbance timing tags: dual-support midpoints (T1, T3) and swing
/// midpoints (T2 = right swing, T4 = left swing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimingTag {
    T1,
    T2,
    T3,
    T4,
}

impl TimingTag {
    pub fn all() -> [TimingTag; 4] {
        [TimingTag::T1, TimingTag::T2, TimingTag::T3, TimingTag::T4]
    }
    pub fn parse(s: &str) -> Option<TimingTag> {
        match s.trim().to_ascii_uppercase().as_str() {
            "T1" => Some(TimingTag::T1),
            "T2" => Some(TimingTag::T2),
            "T3" => Some(TimingTag::T3),
            "T4" => Some(TimingTag::T4),
            _ => None,
        }
    }
    pub fn name(&self) -> &'static str {
        match self {
            TimingTag::T1 => "T1",
            TimingTag::T2 => "T2",
            TimingTag::T3 => "T3",
            TimingTag::T4 => "T4",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaitConfig {
    /// Full cycle duration, s.
    pub cycle: f64,
    /// Each dual-support phase, s.
    pub dual_support: f64,
    /// Each of the four transition phases, s.
    pub transition: f64,
    /// Which foot swings first after the opening dual support.
    pub first_swing: Side,
    /// `false` runs a standing gait: permanent dual support.
    pub stepping: bool,
}

impl Default for GaitConfig {
    fn default() -> Self {
        GaitConfig {
            cycle: 0.6,
            dual_support: 0.024,
            transition: 0.03,
            first_swing: Side::Right,
            stepping: true,
        }
    }
}

impl GaitConfig {
    /// Swing duration implied by the cycle split.
    pub fn swing(&self) -> f64 {
        (self.cycle - 2.0 * self.dual_support - 4.0 * self.transition) / 2.0
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("cycle", self.cycle),
            ("dual_support", self.dual_support),
            ("transition", self.transition),
        ] {
            if !(v > 0.0) {
                return Err(format!("gait {name} must be > 0, got {v}"));
            }
        }
        if !(self.swing() > 0.0) {
            return Err(format!(
                "gait cycle {} too short for dual support and transitions",
                self.cycle
            ));
        }
        Ok(())
    }

    fn phase_order(&self) -> [(GaitPhase, f64); 8] {
        let sw = self.swing();
        [
            (GaitPhase::DualSupportOne, self.dual_support),
            (GaitPhase::LiftFirst, self.transition),
            (GaitPhase::SwingFirst, sw),
            (GaitPhase::LandFirst, self.transition),
            (GaitPhase::DualSupportTwo, self.dual_support),
            (GaitPhase::LiftSecond, self.transition),
            (GaitPhase::SwingSecond, sw),
            (GaitPhase::LandSecond, self.transition),
        ]
    }

    /// Swing side of a phase, if any.
    pub fn swing_side(&self, phase: GaitPhase) -> Option<Side> {
        match phase {
            GaitPhase::SwingFirst => Some(self.first_swing),
            GaitPhase::SwingSecond => Some(self.first_swing.other()),
            _ => None,
        }
    }

    /// Time within the cycle at which a disturbance tag fires.
    pub fn tag_time(&self, tag: TimingTag) -> f64 {
        let order = self.phase_order();
        let mid_of = |target: GaitPhase| {
            let mut t = 0.0;
            for (phase, dur) in order {
                if phase == target {
                    return t + 0.5 * dur;
                }
                t += dur;
            }
            unreachable!("phase present in order");
        };
        match tag {
            TimingTag::T1 => mid_of(GaitPhase::DualSupportOne),
            TimingTag::T3 => mid_of(GaitPhase::DualSupportTwo),
            TimingTag::T2 => {
                if self.first_swing == Side::Right {
                    mid_of(GaitPhase::SwingFirst)
                } else {
                    mid_of(GaitPhase::SwingSecond)
                }
            }
            TimingTag::T4 => {
                if self.first_swing == Side::Left {
                    mid_of(GaitPhase::SwingFirst)
                } else {
                    mid_of(GaitPhase::SwingSecond)
                }
            }
        }
    }
}

/// Swing-phase progress handed to the swing-trajectory logic.
#[derive(Debug, Clone, Copy)]
pub struct SwingInfo {
    pub side: Side,
    /// Seconds since lift-off.
    pub elapsed: f64,
    pub duration: f64,
}

/// Per-tick FSM output.
#[derive(Debug, Clone)]
pub struct GaitStatus {
    pub phase: GaitPhase,
    /// Time within the cycle, s.
    pub cycle_clock: f64,
    /// Feet currently in contact.
    pub contacts: Vec<Side>,
    /// Normal-force ramp scalar per foot, indexed by `Side::index`.
    pub ramp: [f64; 2],
    pub swing: Option<SwingInfo>,
}

/// Phase clock; `step` advances it and reports the schedule.
#[derive(Debug, Clone)]
pub struct GaitSchedule {
    config: GaitConfig,
    clock: f64,
}

impl GaitSchedule {
    pub fn new(config: GaitConfig) -> GaitSchedule {
        GaitSchedule { config, clock: 0.0 }
    }

    pub fn config(&self) -> &GaitConfig {
        &self.config
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Schedule at the current clock without advancing.
    pub fn status(&self) -> GaitStatus {
        if !self.config.stepping {
            return GaitStatus {
                phase: GaitPhase::DualSupportOne,
                cycle_clock: self.clock,
                contacts: vec![Side::Left, Side::Right],
                ramp: [1.0, 1.0],
                swing: None,
            };
        }
        let t = self.clock.rem_euclid(self.config.cycle);
        let mut acc = 0.0;
        let order = self.config.phase_order();
        let mut phase = order[order.len() - 1].0;
        let mut elapsed = 0.0;
        let mut duration = order[order.len() - 1].1;
        for (p, dur) in order {
            if t < acc + dur || (p == GaitPhase::LandSecond && t >= acc) {
                phase = p;
                elapsed = t - acc;
                duration = dur;
                break;
            }
            acc += dur;
        }

        let first = self.config.first_swing;
        let second = first.other();
        let mut ramp = [1.0, 1.0];
        let mut contacts = vec![Side::Left, Side::Right];
        let mut swing = None;
        let frac = (elapsed / duration).clamp(0.0, 1.0);
        match phase {
            GaitPhase::DualSupportOne | GaitPhase::DualSupportTwo => {}
            GaitPhase::LiftFirst => ramp[first.index()] = 1.0 - frac,
            GaitPhase::LandFirst => ramp[first.index()] = frac,
            GaitPhase::LiftSecond => ramp[second.index()] = 1.0 - frac,
            GaitPhase::LandSecond => ramp[second.index()] = frac,
            GaitPhase::SwingFirst => {
                ramp[first.index()] = 0.0;
                contacts = vec![second];
                swing = Some(SwingInfo {
                    side: first,
                    elapsed,
                    duration,
                });
            }
            GaitPhase::SwingSecond => {
                ramp[second.index()] = 0.0;
                contacts = vec![first];
                swing = Some(SwingInfo {
                    side: second,
                    elapsed,
                    duration,
                });
            }
        }
        contacts.sort_by_key(|s| s.index());

        GaitStatus {
            phase,
            cycle_clock: t,
            contacts,
            ramp,
            swing,
        }
    }

    /// Advance the clock by `dt` and return the schedule at the new time.
    pub fn step(&mut self, dt: f64) -> GaitStatus {
        debug_assert!(dt > 0.0);
        self.clock += dt;
        self.status()
    }

    /// Stance feet and ramps at an arbitrary future clock value, for the
    /// reaction-force planner.
    pub fn status_at(&self, clock: f64) -> GaitStatus {
        GaitSchedule {
            config: self.config.clone(),
            clock,
        }
        .status()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_starts_in_dual_support_with_both_feet() {
        let sched = GaitSchedule::new(GaitConfig::default());
        let s = sched.status();
        assert_eq!(s.phase, GaitPhase::DualSupportOne);
        assert_eq!(s.contacts, vec![Side::Left, Side::Right]);
        assert_eq!(s.ramp, [1.0, 1.0]);
    }

    #[test]
    fn mid_right_swing_has_left_contact_only() {
        let cfg = GaitConfig::default();
        let t2 = cfg.tag_time(TimingTag::T2);
        let sched = GaitSchedule::new(cfg);
        let s = sched.status_at(t2);
        assert_eq!(s.phase, GaitPhase::SwingFirst);
        assert_eq!(s.contacts, vec![Side::Left]);
        assert_eq!(s.swing.unwrap().side, Side::Right);
        assert_eq!(s.ramp[Side::Right.index()], 0.0);
    }

    #[test]
    fn full_cycle_returns_to_start_after_600_ms() {
        let mut sched = GaitSchedule::new(GaitConfig::default());
        let dt = 1e-3;
        let mut last = sched.status().phase;
        let mut changes = 0;
        for _ in 0..600 {
            let s = sched.step(dt);
            if s.phase != last {
                changes += 1;
                last = s.phase;
            }
        }
        // 8 phases: 7 boundary crossings plus the wrap back to the first.
        assert_eq!(changes, 8);
        assert_eq!(sched.status().phase, GaitPhase::DualSupportOne);
        assert!((sched.clock() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn durations_sum_to_cycle_and_contacts_never_empty() {
        let cfg = GaitConfig::default();
        cfg.validate().unwrap();
        let total: f64 = cfg.phase_order().iter().map(|(_, d)| d).sum();
        assert!((total - cfg.cycle).abs() < 1e-12);
        let sched = GaitSchedule::new(cfg);
        for i in 0..600 {
            let s = sched.status_at(i as f64 * 1e-3);
            assert!(!s.contacts.is_empty());
        }
    }

    #[test]
    fn transition_ramps_are_monotone_and_bounded() {
        let cfg = GaitConfig::default();
        let sched = GaitSchedule::new(cfg.clone());
        let lift_start = cfg.dual_support;
        let mut prev = 1.0;
        for i in 0..=30 {
            let t = lift_start + i as f64 * 1e-3;
            let s = sched.status_at(t);
            let r = s.ramp[Side::Right.index()];
            assert!((0.0..=1.0).contains(&r));
            assert!(r <= prev + 1e-12);
            prev = r;
        }
    }

    #[test]
    fn timing_tags_land_in_their_phases() {
        let cfg = GaitConfig::default();
        let sched = GaitSchedule::new(cfg.clone());
        assert_eq!(
            sched.status_at(cfg.tag_time(TimingTag::T1)).phase,
            GaitPhase::DualSupportOne
        );
        assert_eq!(
            sched.status_at(cfg.tag_time(TimingTag::T3)).phase,
            GaitPhase::DualSupportTwo
        );
        let t2 = sched.status_at(cfg.tag_time(TimingTag::T2));
        assert_eq!(t2.swing.unwrap().side, Side::Right);
        let t4 = sched.status_at(cfg.tag_time(TimingTag::T4));
        assert_eq!(t4.swing.unwrap().side, Side::Left);

        // Tags track the swing side when the gait leads with the left foot.
        let mirrored = GaitConfig {
            first_swing: Side::Left,
            ..cfg
        };
        let msched = GaitSchedule::new(mirrored.clone());
        assert_eq!(
            msched
                .status_at(mirrored.tag_time(TimingTag::T2))
                .swing
                .unwrap()
                .side,
            Side::Right
        );
        assert_eq!(
            msched
                .status_at(mirrored.tag_time(TimingTag::T4))
                .swing
                .unwrap()
                .side,
            Side::Left
        );
    }

    #[test]
    fn standing_gait_never_swings() {
        let cfg = GaitConfig {
            stepping: false,
            ..GaitConfig::default()
        };
        let mut sched = GaitSchedule::new(cfg);
        for _ in 0..1000 {
            let s = sched.step(1e-3);
            assert_eq!(s.contacts.len(), 2);
            assert!(s.swing.is_none());
        }
    }
}
