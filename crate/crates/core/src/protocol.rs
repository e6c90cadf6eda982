//! Discrete-time simulation of the interface controller: two pneumatic pump
//! groups (one per side) driving the breathing pouches, side alternation with
//! full deflation before each switch, a bang-bang heating pad, and the
//! pump-on-time fail-safe.
//!
//! Time advances in integer ticks. The state at tick `n` holds the pressures
//! and temperature at `t = n * tick` together with the actuator commands for
//! the interval `[t, t + tick)`.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arena::Side;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("invalid protocol configuration: {0}")]
    InvalidConfig(String),
    #[error("command script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("malformed session log line {line}: {message}")]
    Log { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Breathing cycle period (s).
    pub cycle_period: f64,
    /// Pressure floor of the breathing cycle (psi).
    pub p_min: f64,
    /// Pressure ceiling and inflation source pressure (psi).
    pub p_max: f64,
    /// Length of each side's active window (s).
    pub side_period: f64,
    pub session_len: f64,
    /// Longest continuous pump run before the fail-safe cuts it (s).
    pub max_pump_on: f64,
    pub heat_setpoint: f64,
    /// Width of the bang-bang hysteresis band centred on the setpoint (°C).
    pub heat_tolerance: f64,
    pub heat_cap: f64,
    pub tick: f64,
    pub start_side: Side,
    /// Pressure below which a group counts as fully deflated (psi).
    pub deflated_below: f64,
    /// Pneumatic time constant (s).
    pub pressure_tau: f64,
    pub ambient_temp: f64,
    pub thermal_tau: f64,
    /// Equilibrium surface temperature with the heater permanently on (°C).
    pub heater_equilibrium: f64,
    /// The heater is cut whenever the next tick would come this close to `heat_cap`.
    pub heat_cap_margin: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            cycle_period: 1.5,
            p_min: 0.1,
            p_max: 0.5,
            side_period: 300.0,
            session_len: 1800.0,
            max_pump_on: 3.0,
            heat_setpoint: 33.0,
            heat_tolerance: 1.0,
            heat_cap: 35.0,
            tick: 0.05,
            start_side: Side::Left,
            deflated_below: 0.01,
            pressure_tau: 0.2,
            ambient_temp: 28.5,
            thermal_tau: 60.0,
            heater_equilibrium: 38.0,
            heat_cap_margin: 0.5,
        }
    }
}

fn ticks_in(span: f64, tick: f64) -> Option<u64> {
    let r = span / tick;
    let n = r.round();
    ((r - n).abs() < 1e-9 * r.max(1.0) && n >= 1.0).then_some(n as u64)
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: &str| Err(ProtocolError::InvalidConfig(m.to_string()));
        let all = [
            self.cycle_period,
            self.p_min,
            self.p_max,
            self.side_period,
            self.session_len,
            self.max_pump_on,
            self.heat_setpoint,
            self.heat_tolerance,
            self.heat_cap,
            self.tick,
            self.deflated_below,
            self.pressure_tau,
            self.ambient_temp,
            self.thermal_tau,
            self.heater_equilibrium,
            self.heat_cap_margin,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all values must be finite");
        }
        if !(self.tick > 0.0) {
            return bad("tick must be positive");
        }
        if !(0.0 < self.p_min && self.p_min < self.p_max) {
            return bad("need 0 < p_min < p_max");
        }
        if !(self.deflated_below > 0.0 && self.deflated_below < self.p_min) {
            return bad("deflation threshold must lie in (0, p_min)");
        }
        if self.heat_setpoint + self.heat_tolerance > self.heat_cap {
            return bad("heat_setpoint + heat_tolerance exceeds heat_cap");
        }
        if !(self.heat_tolerance > 0.0) || self.heat_cap_margin < 0.0 {
            return bad("heat_tolerance must be positive and heat_cap_margin non-negative");
        }
        match ticks_in(self.cycle_period, self.tick) {
            Some(n) if n % 2 == 0 => {}
            _ => return bad("cycle_period must be an even number of ticks"),
        }
        if ticks_in(self.side_period, self.tick).is_none() {
            return bad("side_period must be a whole number of ticks");
        }
        if !(self.session_len > 0.0 && self.max_pump_on > 0.0 && self.pressure_tau > 0.0 && self.thermal_tau > 0.0) {
            return bad("session_len, max_pump_on and time constants must be positive");
        }
        if self.heater_equilibrium <= self.heat_setpoint + self.heat_tolerance / 2.0 {
            return bad("heater cannot reach the top of the hysteresis band");
        }
        if self.ambient_temp >= self.heat_setpoint - self.heat_tolerance / 2.0 {
            return bad("ambient temperature must lie below the hysteresis band");
        }
        Ok(())
    }

    fn half_cycle_ticks(&self) -> u64 {
        ticks_in(self.cycle_period, self.tick).unwrap_or(2) / 2
    }

    fn side_ticks(&self) -> u64 {
        ticks_in(self.side_period, self.tick).unwrap_or(1)
    }

    pub fn session_ticks(&self) -> u64 {
        (self.session_len / self.tick - 1e-9).ceil() as u64
    }

    /// Breathing frequency in Hz.
    pub fn cycle_frequency(&self) -> f64 {
        1.0 / self.cycle_period
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Inflating,
    Deflating,
    /// Venting the outgoing group before the other side may inflate.
    SwitchDeflate,
    /// Actuation stopped by command; any residual pressure is vented.
    Idle,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Inflating => "inflating",
            Phase::Deflating => "deflating",
            Phase::SwitchDeflate => "switch_deflate",
            Phase::Idle => "idle",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "inflating" => Ok(Phase::Inflating),
            "deflating" => Ok(Phase::Deflating),
            "switch_deflate" => Ok(Phase::SwitchDeflate),
            "idle" => Ok(Phase::Idle),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpKind {
    In,
    Out,
}

impl PumpKind {
    fn index(self) -> usize {
        match self {
            PumpKind::In => 0,
            PumpKind::Out => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PumpId {
    pub group: Side,
    pub kind: PumpKind,
}

impl fmt::Display for PumpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            PumpKind::In => "in",
            PumpKind::Out => "out",
        };
        write!(f, "{k}_{}", self.group)
    }
}

const PUMPS: [PumpId; 4] = [
    PumpId { group: Side::Left, kind: PumpKind::In },
    PumpId { group: Side::Left, kind: PumpKind::Out },
    PumpId { group: Side::Right, kind: PumpKind::In },
    PumpId { group: Side::Right, kind: PumpKind::Out },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub t: f64,
    pub pump: PumpId,
    /// Continuous on-time at the moment the pump was cut (s).
    pub on_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommandKind {
    Start,
    Stop,
    SideOverride(Side),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub t: f64,
    pub kind: CommandKind,
}

/// Parses a command-injection script: one `<seconds> <command>` per line,
/// where the command is `start`, `stop` or `side-override left|right`.
/// Blank lines and `#` comments are ignored. Commands are returned sorted by
/// time (stable for equal times).
pub fn parse_command_script(text: &str) -> Result<Vec<Command>, ProtocolError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ProtocolError::Script { line: i + 1, message };
        let mut parts = line.split_whitespace();
        let t_str = parts.next().unwrap_or("");
        let t: f64 = t_str.parse().map_err(|_| err(format!("bad time {t_str:?}")))?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(err(format!("time must be finite and non-negative, got {t_str}")));
        }
        let kind = match (parts.next(), parts.next()) {
            (Some("start"), None) => CommandKind::Start,
            (Some("stop"), None) => CommandKind::Stop,
            (Some("side-override"), Some(side)) => {
                CommandKind::SideOverride(side.parse().map_err(|_| err(format!("bad side {side:?}")))?)
            }
            (Some(c), _) => return Err(err(format!("unknown command {c:?}"))),
            (None, _) => return Err(err("missing command".into())),
        };
        if parts.next().is_some() {
            return Err(err("trailing tokens".into()));
        }
        out.push(Command { t, kind });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerState {
    /// Tick counter; `t = tick_index * cfg.tick`.
    pub tick_index: u64,
    pub t: f64,
    /// Side whose window is current. Changes exactly at window boundaries,
    /// even while the previous side is still venting.
    pub active_side: Side,
    /// Group being vented before the active side may inflate.
    pub outgoing: Option<Side>,
    pub phase: Phase,
    /// `[group][in, out]`, groups indexed left then right.
    pub pump_on: [[bool; 2]; 2],
    pub pressure: [f64; 2],
    pub pump_on_elapsed: [[f64; 2]; 2],
    pub surface_temp: f64,
    pub heater_on: bool,
    pub faults: Vec<Fault>,
    pub running: bool,
    /// Ticks since the active side began its current breathing cycle train.
    pub cycle_tick: u64,
    /// Whether a side override has inverted the schedule.
    pub side_flipped: bool,
    /// Fail-safe latch: tick index until which the pump stays off.
    latched_until: [[Option<u64>; 2]; 2],
}

impl ControllerState {
    /// State at t = 0 for the configuration, with commands for the first tick.
    pub fn initial(cfg: &ProtocolConfig) -> ControllerState {
        let mut s = ControllerState {
            tick_index: 0,
            t: 0.0,
            active_side: cfg.start_side,
            outgoing: None,
            phase: Phase::Inflating,
            pump_on: [[false; 2]; 2],
            pressure: [0.0; 2],
            pump_on_elapsed: [[0.0; 2]; 2],
            surface_temp: cfg.heat_setpoint,
            heater_on: false,
            faults: Vec::new(),
            running: true,
            cycle_tick: 0,
            side_flipped: false,
            latched_until: [[None; 2]; 2],
        };
        s.decide(cfg);
        s
    }

    fn scheduled_side(&self, cfg: &ProtocolConfig) -> Side {
        let window = self.tick_index / cfg.side_ticks();
        let base = if window % 2 == 0 { cfg.start_side } else { cfg.start_side.other() };
        if self.side_flipped {
            base.other()
        } else {
            base
        }
    }

    fn apply_command(&mut self, cmd: CommandKind, cfg: &ProtocolConfig) {
        match cmd {
            CommandKind::Stop => self.running = false,
            CommandKind::Start => {
                if !self.running {
                    self.running = true;
                    self.cycle_tick = 0;
                }
            }
            CommandKind::SideOverride(side) => {
                let unflipped = {
                    let mut probe = self.clone();
                    probe.side_flipped = false;
                    probe.scheduled_side(cfg)
                };
                self.side_flipped = side != unflipped;
                if side != self.active_side {
                    self.cycle_tick = 0;
                }
            }
        }
    }

    /// Chooses phase, pump and heater commands for the coming tick from the
    /// current pressures and temperature.
    fn decide(&mut self, cfg: &ProtocolConfig) {
        let prev_phase = self.phase;
        let active = self.active_side;
        let other = active.other();

        self.phase = if !self.running {
            Phase::Idle
        } else if self.pressure[other.index()] >= cfg.deflated_below {
            self.outgoing = Some(other);
            Phase::SwitchDeflate
        } else {
            if self.outgoing.take().is_some() {
                self.cycle_tick = 0;
            }
            if (self.cycle_tick / cfg.half_cycle_ticks()) % 2 == 0 {
                Phase::Inflating
            } else {
                Phase::Deflating
            }
        };
        if self.phase != Phase::SwitchDeflate {
            self.outgoing = None;
        }
        if self.phase != prev_phase {
            self.latched_until = [[None; 2]; 2];
        }

        let mut want = [[false; 2]; 2];
        match self.phase {
            Phase::Inflating => want[active.index()][0] = true,
            Phase::Deflating => want[active.index()][1] = self.pressure[active.index()] > cfg.p_min,
            Phase::SwitchDeflate => want[other.index()][1] = true,
            Phase::Idle => {
                for (w, p) in want.iter_mut().zip(self.pressure) {
                    w[1] = p >= cfg.deflated_below;
                }
            }
        }

        for pump in PUMPS {
            let (g, k) = (pump.group.index(), pump.kind.index());
            if let Some(until) = self.latched_until[g][k] {
                if self.tick_index < until {
                    want[g][k] = false;
                } else {
                    self.latched_until[g][k] = None;
                }
            }
            if want[g][k] && self.pump_on_elapsed[g][k] + cfg.tick > cfg.max_pump_on + 1e-9 {
                self.faults.push(Fault {
                    t: self.t,
                    pump,
                    on_time: self.pump_on_elapsed[g][k],
                });
                let cooldown = ticks_in(cfg.max_pump_on, cfg.tick).unwrap_or(1).max(1);
                self.latched_until[g][k] = Some(self.tick_index + cooldown);
                want[g][k] = false;
            }
        }
        self.pump_on = want;

        let lo = cfg.heat_setpoint - cfg.heat_tolerance / 2.0;
        let hi = cfg.heat_setpoint + cfg.heat_tolerance / 2.0;
        if self.surface_temp < lo {
            self.heater_on = true;
        } else if self.surface_temp > hi {
            self.heater_on = false;
        }
        if self.heater_on && next_temp(self.surface_temp, true, cfg) >= cfg.heat_cap - cfg.heat_cap_margin {
            self.heater_on = false;
        }
    }
}

fn next_temp(temp: f64, heater_on: bool, cfg: &ProtocolConfig) -> f64 {
    let target = if heater_on { cfg.heater_equilibrium } else { cfg.ambient_temp };
    target + (temp - target) * (-cfg.tick / cfg.thermal_tau).exp()
}

/// Advances the controller by one tick, applying `commands` that fall due
/// at the new time.
pub fn step_with(state: &ControllerState, cfg: &ProtocolConfig, commands: &[CommandKind]) -> ControllerState {
    let mut s = state.clone();
    let decay = (-cfg.tick / cfg.pressure_tau).exp();
    for g in 0..2 {
        let [inp, outp] = s.pump_on[g];
        let p = s.pressure[g];
        s.pressure[g] = if inp {
            (cfg.p_max + (p - cfg.p_max) * decay).min(cfg.p_max)
        } else if outp {
            let floor = if s.phase == Phase::Deflating && s.active_side.index() == g { cfg.p_min } else { 0.0 };
            (p * decay).max(floor)
        } else {
            p
        };
        for k in 0..2 {
            s.pump_on_elapsed[g][k] = if s.pump_on[g][k] { s.pump_on_elapsed[g][k] + cfg.tick } else { 0.0 };
        }
    }
    s.surface_temp = next_temp(s.surface_temp, s.heater_on, cfg).min(cfg.heat_cap);

    s.tick_index += 1;
    s.t = s.tick_index as f64 * cfg.tick;
    s.cycle_tick += 1;
    for c in commands {
        s.apply_command(*c, cfg);
    }
    let side = s.scheduled_side(cfg);
    if side != s.active_side {
        s.active_side = side;
        s.cycle_tick = 0;
    }
    s.decide(cfg);
    s
}

/// Advances the controller by one tick with no injected commands.
pub fn step(state: &ControllerState, cfg: &ProtocolConfig) -> ControllerState {
    step_with(state, cfg, &[])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub side: Side,
    pub phase: Phase,
    pub pressure: [f64; 2],
    pub pump_on: [[bool; 2]; 2],
    pub heater: bool,
    pub temp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub tick: f64,
    pub rows: Vec<LogRow>,
    pub faults: Vec<Fault>,
    pub commands: Vec<Command>,
}

pub const LOG_CSV_HEADER: &str = "t,side,phase,p_left,p_right,in_left,out_left,in_right,out_right,heater,temp";

impl SessionLog {
    /// Active side at time `t`, read from the row covering it.
    pub fn active_side_at(&self, t: f64) -> Option<Side> {
        let i = (t / self.tick + 1e-9).floor();
        (i >= 0.0).then(|| self.rows.get(i as usize).map(|r| r.side)).flatten()
    }

    /// Times at which the active side changed.
    pub fn side_changes(&self) -> Vec<f64> {
        self.rows.windows(2).filter(|w| w[0].side != w[1].side).map(|w| w[1].t).collect()
    }

    /// Times at which a switch deflation completed (first row after a
    /// `switch_deflate` run that is not itself `switch_deflate`).
    pub fn switch_completions(&self) -> Vec<usize> {
        self.rows
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0].phase == Phase::SwitchDeflate && w[1].phase != Phase::SwitchDeflate)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Peak pressure of `group` in each inflation phase that completed.
    pub fn inflation_peaks(&self, group: Side) -> Vec<(f64, f64)> {
        let g = group.index();
        let mut peaks = Vec::new();
        let mut current: Option<f64> = None;
        for r in &self.rows {
            let inflating = r.phase == Phase::Inflating && r.side == group;
            match (inflating, current) {
                (true, _) => current = Some(current.unwrap_or(0.0).max(r.pressure[g])),
                (false, Some(_)) => {
                    peaks.push((r.t, r.pressure[g].max(current.unwrap_or(0.0))));
                    current = None;
                }
                (false, None) => {}
            }
        }
        peaks
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 64);
        s.push_str(LOG_CSV_HEADER);
        s.push('\n');
        let b = |v: bool| if v { 1 } else { 0 };
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.2},{},{},{:.6},{:.6},{},{},{},{},{},{:.4}",
                r.t,
                r.side,
                r.phase,
                r.pressure[0],
                r.pressure[1],
                b(r.pump_on[0][0]),
                b(r.pump_on[0][1]),
                b(r.pump_on[1][0]),
                b(r.pump_on[1][1]),
                b(r.heater),
                r.temp
            );
        }
        s
    }

    /// Reads a log written by [`SessionLog::to_csv_string`]. The tick is
    /// taken from the first two rows (or `default_tick` for shorter logs).
    pub fn from_csv_str(text: &str, default_tick: f64) -> Result<SessionLog, ProtocolError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == LOG_CSV_HEADER => {}
            _ => {
                return Err(ProtocolError::Log {
                    line: 1,
                    message: format!("expected header {LOG_CSV_HEADER:?}"),
                })
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| ProtocolError::Log { line: i + 1, message };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 11 {
                return Err(err(format!("expected 11 fields, got {}", f.len())));
            }
            let num = |k: usize| -> Result<f64, ProtocolError> {
                f[k].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad number {:?}", f[k])))
            };
            let flag = |k: usize| -> Result<bool, ProtocolError> {
                match f[k] {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(err(format!("bad flag {other:?}"))),
                }
            };
            rows.push(LogRow {
                t: num(0)?,
                side: f[1].parse().map_err(|_| err(format!("bad side {:?}", f[1])))?,
                phase: f[2].parse().map_err(err)?,
                pressure: [num(3)?, num(4)?],
                pump_on: [[flag(5)?, flag(6)?], [flag(7)?, flag(8)?]],
                heater: flag(9)?,
                temp: num(10)?,
            });
        }
        let tick = match rows.as_slice() {
            [a, b, ..] if b.t > a.t => b.t - a.t,
            _ => default_tick,
        };
        Ok(SessionLog {
            tick,
            rows,
            faults: Vec::new(),
            commands: Vec::new(),
        })
    }
}

/// Simulates a full session.
pub fn run_session(cfg: &ProtocolConfig) -> Result<SessionLog, ProtocolError> {
    run_session_with(cfg, &[])
}

/// Simulates a full session with injected commands. A command at time `c`
/// takes effect at the first tick boundary at or after `c`.
pub fn run_session_with(cfg: &ProtocolConfig, commands: &[Command]) -> Result<SessionLog, ProtocolError> {
    cfg.validate()?;
    let n = cfg.session_ticks();
    let mut sorted = commands.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let due_tick = |c: &Command| (c.t / cfg.tick - 1e-9).ceil().max(0.0) as u64;

    let mut state = ControllerState::initial(cfg);
    let mut next_cmd = 0;
    // commands due at tick 0
    let mut at_zero = Vec::new();
    while next_cmd < sorted.len() && due_tick(&sorted[next_cmd]) == 0 {
        at_zero.push(sorted[next_cmd].kind);
        next_cmd += 1;
    }
    for c in at_zero {
        state.apply_command(c, cfg);
    }
    let side = state.scheduled_side(cfg);
    state.active_side = side;
    state.decide(cfg);

    let mut rows = Vec::with_capacity(n as usize);
    for i in 0..n {
        rows.push(LogRow {
            t: state.t,
            side: state.active_side,
            phase: state.phase,
            pressure: state.pressure,
            pump_on: state.pump_on,
            heater: state.heater_on,
            temp: state.surface_temp,
        });
        if i + 1 == n {
            break;
        }
        let mut due = Vec::new();
        while next_cmd < sorted.len() && due_tick(&sorted[next_cmd]) <= i + 1 {
            due.push(sorted[next_cmd].kind);
            next_cmd += 1;
        }
        state = step_with(&state, cfg, &due);
    }
    Ok(SessionLog {
        tick: cfg.tick,
        rows,
        faults: state.faults,
        commands: sorted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    PressureOutOfRange { t: f64, group: Side, pressure: f64 },
    CoActivation { t: f64, group: Side },
    /// A group inflated while the other still held pressure.
    InflateBeforeDeflate { t: f64, group: Side, other_pressure: f64 },
    PumpOnTooLong { t: f64, pump: PumpId, on_time: f64 },
    OverTemperature { t: f64, temp: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PressureOutOfRange { t, group, pressure } => {
                write!(f, "t={t:.2}: {group} pressure {pressure} psi out of range")
            }
            Violation::CoActivation { t, group } => write!(f, "t={t:.2}: {group} in- and out-pump both on"),
            Violation::InflateBeforeDeflate { t, group, other_pressure } => write!(
                f,
                "t={t:.2}: {group} inflating while the other group holds {other_pressure} psi"
            ),
            Violation::PumpOnTooLong { t, pump, on_time } => write!(f, "t={t:.2}: {pump} on for {on_time:.2} s"),
            Violation::OverTemperature { t, temp } => write!(f, "t={t:.2}: surface temperature {temp} °C"),
        }
    }
}

/// Checks every logged tick against the safety invariants.
pub fn check_safety(log: &SessionLog, cfg: &ProtocolConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut run = [[0.0f64; 2]; 2];
    let mut reported = [[false; 2]; 2];
    for r in &log.rows {
        for side in [Side::Left, Side::Right] {
            let g = side.index();
            let p = r.pressure[g];
            if !(-1e-12..=cfg.p_max + 1e-9).contains(&p) {
                out.push(Violation::PressureOutOfRange { t: r.t, group: side, pressure: p });
            }
            if r.pump_on[g][0] && r.pump_on[g][1] {
                out.push(Violation::CoActivation { t: r.t, group: side });
            }
            let other = r.pressure[side.other().index()];
            if r.pump_on[g][0] && other >= cfg.deflated_below {
                out.push(Violation::InflateBeforeDeflate { t: r.t, group: side, other_pressure: other });
            }
            for k in 0..2 {
                if r.pump_on[g][k] {
                    run[g][k] += log.tick;
                    if run[g][k] > cfg.max_pump_on + 1e-9 && !reported[g][k] {
                        reported[g][k] = true;
                        out.push(Violation::PumpOnTooLong {
                            t: r.t,
                            pump: PUMPS[2 * g + k],
                            on_time: run[g][k],
                        });
                    }
                } else {
                    run[g][k] = 0.0;
                    reported[g][k] = false;
                }
            }
        }
        if r.temp > cfg.heat_cap {
            out.push(Violation::OverTemperature { t: r.t, temp: r.temp });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(session_len: f64) -> ProtocolConfig {
        ProtocolConfig {
            session_len,
            ..ProtocolConfig::default()
        }
    }

    #[test]
    fn default_config_is_valid_and_in_band() {
        let cfg = ProtocolConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.half_cycle_ticks(), 15);
        assert_eq!(cfg.session_ticks(), 36000);
        assert!((0.5..=1.5).contains(&cfg.cycle_frequency()));
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ProtocolConfig { p_min: 0.6, ..Default::default() },
            ProtocolConfig { cycle_period: 1.525, ..Default::default() },
            ProtocolConfig { cycle_period: 1.55, ..Default::default() },
            ProtocolConfig { heat_cap: 33.5, ..Default::default() },
            ProtocolConfig { tick: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(run_session(&cfg), Err(ProtocolError::InvalidConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn first_cycle_follows_first_order_plant() {
        let log = run_session(&short(3.0)).unwrap();
        // first inflation from 0 for 0.75 s
        let expected = 0.5 * (1.0 - (-0.75f64 / 0.2).exp());
        assert!((log.rows[15].pressure[0] - expected).abs() < 1e-12);
        assert_eq!(log.rows[15].phase, Phase::Deflating);
        // deflation stops at p_min and holds
        assert!((log.rows[29].pressure[0] - 0.1).abs() < 1e-12);
        assert_eq!(log.rows[29].pump_on[0], [false, false]);
        assert_eq!(log.rows[30].phase, Phase::Inflating);
        assert_eq!(log.rows[40].pressure[1], 0.0);
    }

    #[test]
    fn switch_waits_for_full_deflation() {
        let cfg = ProtocolConfig {
            side_period: 3.0,
            session_len: 6.0,
            ..Default::default()
        };
        let log = run_session(&cfg).unwrap();
        let r = &log.rows[60];
        assert_eq!(r.side, Side::Right);
        assert_eq!(r.phase, Phase::SwitchDeflate);
        assert!(r.pressure[0] > 0.01);
        assert!(r.pump_on[0][1] && !r.pump_on[1][0]);
        let done = log.switch_completions();
        assert_eq!(done.len(), 1);
        let row = &log.rows[done[0]];
        assert!(row.pressure[0] < 0.01 && row.pressure[1] < 0.01);
        assert_eq!(row.phase, Phase::Inflating);
        assert!(check_safety(&log, &cfg).is_empty());
    }

    #[test]
    fn long_inflation_trips_fail_safe() {
        let cfg = ProtocolConfig {
            cycle_period: 10.0,
            session_len: 20.0,
            ..Default::default()
        };
        let log = run_session(&cfg).unwrap();
        assert!(!log.faults.is_empty());
        let f = &log.faults[0];
        assert_eq!(f.pump, PumpId { group: Side::Left, kind: PumpKind::In });
        assert!((f.t - 3.0).abs() < 1e-9, "{f:?}");
        let row = log.rows.iter().find(|r| (r.t - 3.5).abs() < 1e-9).unwrap();
        assert!(!row.pump_on[0][0]);
        assert!(check_safety(&log, &cfg).is_empty());
    }

    #[test]
    fn script_parsing() {
        let cmds = parse_command_script("# scenario\n10 stop\n 12.5 start  # resume\n\n5 side-override right\n").unwrap();
        assert_eq!(
            cmds,
            vec![
                Command { t: 5.0, kind: CommandKind::SideOverride(Side::Right) },
                Command { t: 10.0, kind: CommandKind::Stop },
                Command { t: 12.5, kind: CommandKind::Start },
            ]
        );
        for bad in ["x stop", "-1 stop", "1 jump", "1 side-override up", "1 stop now", "inf start", "3"] {
            assert!(parse_command_script(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn stop_vents_and_start_resumes() {
        let cmds = parse_command_script("2 stop\n5 start\n").unwrap();
        let cfg = short(8.0);
        let log = run_session_with(&cfg, &cmds).unwrap();
        let at = |t: f64| log.rows.iter().find(|r| (r.t - t).abs() < 1e-9).unwrap().clone();
        assert_eq!(at(3.0).phase, Phase::Idle);
        assert!(at(4.9).pressure[0] < 0.01);
        assert_eq!(at(5.0).phase, Phase::Inflating);
        assert!(check_safety(&log, &cfg).is_empty());
    }

    #[test]
    fn side_override_deflates_first() {
        let cmds = parse_command_script("1.6 side-override right").unwrap();
        let cfg = short(5.0);
        let log = run_session_with(&cfg, &cmds).unwrap();
        assert_eq!(log.side_changes().len(), 1);
        assert!(check_safety(&log, &cfg).is_empty());
        assert!(log.rows.iter().any(|r| r.phase == Phase::SwitchDeflate));
    }

    #[test]
    fn thermal_loop_holds_band() {
        let log = run_session(&short(600.0)).unwrap();
        let (lo, hi) = log
            .rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.temp), b.max(r.temp)));
        assert!(lo >= 32.0 && hi <= 34.0, "{lo} {hi}");
        assert!(log.rows.iter().any(|r| r.heater) && log.rows.iter().any(|r| !r.heater));
    }

    #[test]
    fn csv_round_trip_and_hand_edits() {
        let cfg = short(4.0);
        let log = run_session(&cfg).unwrap();
        let text = log.to_csv_string();
        let back = SessionLog::from_csv_str(&text, cfg.tick).unwrap();
        assert_eq!(back.rows.len(), log.rows.len());
        assert!((back.tick - 0.05).abs() < 1e-12);
        assert!(check_safety(&back, &cfg).is_empty());

        let mut edited = back.clone();
        edited.rows[3].pump_on[0] = [true, true];
        let v = check_safety(&edited, &cfg);
        assert_eq!(v, vec![Violation::CoActivation { t: edited.rows[3].t, group: Side::Left }]);

        let mut hot = back.clone();
        hot.rows[7].temp = 35.2;
        assert_eq!(check_safety(&hot, &cfg).len(), 1);

        assert!(SessionLog::from_csv_str("t,side\n", 0.05).is_err());
        let bad_row = format!("{LOG_CSV_HEADER}\n0.00,left,inflating,0,0,1,0,0,0,0,nan\n");
        assert!(SessionLog::from_csv_str(&bad_row, 0.05).is_err());
    }
}
