//! Flight-log CSV files and the replay consistency checker.
//!
//! The first line is a schema comment (`# proxfly-flightlog v1 ...`), the
//! second the column header. Columns, in order:
//!
//! | group | columns |
//! |---|---|
//! | time | `t` |
//! | truth state (13) | `px py pz vx vy vz qw qx qy qz wx wy wz` |
//! | basic command (4) | `ucas_c ucas_wx ucas_wy ucas_wz` |
//! | residual (4) | `ares_c ares_wx ares_wy ares_wz` |
//! | overall command (4) | `cmd_c cmd_wx cmd_wy cmd_wz` |
//! | external wrench (6) | `fx fy fz tx ty tz` (force world frame, torque body frame) |
//! | efficiency (1) | `efficiency` |
//! | reward terms (5) | `r_epos r_eatt r_pthrust r_prates r_survive` |
//! | desired state (7) | `des_px des_py des_pz des_vx des_vy des_vz des_yaw` |
//! | commanded attitude (4) | `att_qw att_qx att_qy att_qz` |
//! | estimated state (13) | `est_px ... est_wz` |
//!
//! Numbers are written in shortest round-trip form, so parsing a log gives
//! back bit-identical values.

use std::io::{BufRead, BufReader, Read, Write};

use proxfly_core::math::{Quat, Vec3};
use proxfly_core::policy::{superpose, ResidualAction};
use proxfly_core::ppo::{compute_reward, RewardBreakdown};
use proxfly_core::scenario::{FlightLog, LogRecord};
use proxfly_core::{DesiredState, ExternalWrench, HighLevelCommand, VehicleState, CONTROL_DT};
use nalgebra::{Quaternion, UnitQuaternion};

pub const SCHEMA: &str = "proxfly-flightlog v1";

const STATE: [&str; 13] = ["px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz", "wx", "wy", "wz"];

/// Full ordered column list.
pub fn columns() -> Vec<String> {
    let mut c = vec!["t".to_string()];
    c.extend(STATE.iter().map(|s| s.to_string()));
    for p in ["ucas", "ares", "cmd"] {
        c.extend(["c", "wx", "wy", "wz"].iter().map(|s| format!("{p}_{s}")));
    }
    c.extend(["fx", "fy", "fz", "tx", "ty", "tz", "efficiency"].iter().map(|s| s.to_string()));
    c.extend(["r_epos", "r_eatt", "r_pthrust", "r_prates", "r_survive"].iter().map(|s| s.to_string()));
    c.extend(["des_px", "des_py", "des_pz", "des_vx", "des_vy", "des_vz", "des_yaw"].iter().map(|s| s.to_string()));
    c.extend(["att_qw", "att_qx", "att_qy", "att_qz"].iter().map(|s| s.to_string()));
    c.extend(STATE.iter().map(|s| format!("est_{s}")));
    c
}

fn push_state(out: &mut Vec<f64>, s: &VehicleState) {
    let q = s.attitude.quaternion();
    out.extend_from_slice(s.position.as_slice());
    out.extend_from_slice(s.velocity.as_slice());
    out.extend_from_slice(&[q.w, q.i, q.j, q.k]);
    out.extend_from_slice(s.body_rates.as_slice());
}

fn push_cmd(out: &mut Vec<f64>, thrust: f64, rates: &Vec3) {
    out.push(thrust);
    out.extend_from_slice(rates.as_slice());
}

/// One log record as a row of numbers in column order.
pub fn record_row(r: &LogRecord) -> Vec<f64> {
    let mut v = Vec::with_capacity(64);
    v.push(r.t);
    push_state(&mut v, &r.truth);
    push_cmd(&mut v, r.u_cas.thrust, &r.u_cas.body_rates);
    push_cmd(&mut v, r.residual.thrust, &r.residual.body_rates);
    push_cmd(&mut v, r.overall.thrust, &r.overall.body_rates);
    v.extend_from_slice(r.wrench.force.as_slice());
    v.extend_from_slice(r.wrench.torque.as_slice());
    v.push(r.efficiency);
    v.extend_from_slice(&r.reward.terms());
    v.extend_from_slice(r.desired.position.as_slice());
    v.extend_from_slice(r.desired.velocity.as_slice());
    v.push(r.desired.yaw);
    let q = r.desired_attitude.quaternion();
    v.extend_from_slice(&[q.w, q.i, q.j, q.k]);
    push_state(&mut v, &r.estimate);
    v
}

fn state_from(x: &[f64]) -> VehicleState {
    VehicleState {
        position: Vec3::new(x[0], x[1], x[2]),
        velocity: Vec3::new(x[3], x[4], x[5]),
        attitude: quat(&x[6..10]),
        body_rates: Vec3::new(x[10], x[11], x[12]),
        motor_speeds: [0.0; 4],
    }
}

fn quat(x: &[f64]) -> Quat {
    UnitQuaternion::new_unchecked(Quaternion::new(x[0], x[1], x[2], x[3]))
}

/// Inverse of [`record_row`]; motor speeds are not logged and come back zero.
pub fn row_record(x: &[f64]) -> LogRecord {
    let terms = [x[33], x[34], x[35], x[36], x[37]];
    LogRecord {
        t: x[0],
        truth: state_from(&x[1..14]),
        u_cas: HighLevelCommand::new(x[14], Vec3::new(x[15], x[16], x[17])),
        residual: ResidualAction { thrust: x[18], body_rates: Vec3::new(x[19], x[20], x[21]) },
        overall: HighLevelCommand::new(x[22], Vec3::new(x[23], x[24], x[25])),
        wrench: ExternalWrench { force: Vec3::new(x[26], x[27], x[28]), torque: Vec3::new(x[29], x[30], x[31]) },
        efficiency: x[32],
        reward: RewardBreakdown {
            e_pos: terms[0],
            e_att: terms[1],
            p_thrust: terms[2],
            p_rates: terms[3],
            survive: terms[4],
            total: terms.iter().zip(proxfly_core::ppo::REWARD_WEIGHTS).map(|(t, w)| t * w).sum(),
        },
        desired: DesiredState { position: Vec3::new(x[38], x[39], x[40]), velocity: Vec3::new(x[41], x[42], x[43]), yaw: x[44] },
        desired_attitude: quat(&x[45..49]),
        estimate: state_from(&x[49..62]),
    }
}

pub fn write_log<W: Write>(mut out: W, log: &FlightLog, context: &str) -> std::io::Result<()> {
    writeln!(out, "# {SCHEMA} vehicle={} {context}", log.vehicle)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(columns())?;
    for r in &log.records {
        w.write_record(record_row(r).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LogError {
    #[error("flight log is empty")]
    Empty,
    #[error("missing or unsupported schema line; expected `# {SCHEMA}`")]
    Schema,
    #[error("column {index} should be `{expected}` but is `{found}`")]
    Column { index: usize, expected: String, found: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Value { row: usize, column: String, value: String },
    #[error("row {row} has {found} fields, expected {expected}")]
    Width { row: usize, found: usize, expected: usize },
    #[error("{0}")]
    Io(String),
}

/// Parse a flight log. Rows are numbered from 1 (the first data row).
pub fn read_log<R: Read>(input: R) -> Result<FlightLog, LogError> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| LogError::Io(e.to_string()))?;
    if first.trim().is_empty() {
        return Err(LogError::Empty);
    }
    let rest = first.trim().strip_prefix('#').map(str::trim).ok_or(LogError::Schema)?;
    let rest = rest.strip_prefix(SCHEMA).ok_or(LogError::Schema)?;
    let vehicle = rest.split_whitespace().find_map(|kv| kv.strip_prefix("vehicle=")).unwrap_or("").to_string();

    let mut csv = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let expected = columns();
    let header = csv.headers().map_err(|e| LogError::Io(e.to_string()))?.clone();
    if header.is_empty() {
        return Err(LogError::Empty);
    }
    for (i, name) in expected.iter().enumerate() {
        let found = header.get(i).unwrap_or("");
        if found != name {
            return Err(LogError::Column { index: i, expected: name.clone(), found: found.to_string() });
        }
    }
    if header.len() > expected.len() {
        return Err(LogError::Column { index: expected.len(), expected: String::new(), found: header[expected.len()].to_string() });
    }
    let mut records = Vec::new();
    for (i, rec) in csv.records().enumerate() {
        let rec = rec.map_err(|e| LogError::Io(e.to_string()))?;
        if rec.len() != expected.len() {
            return Err(LogError::Width { row: i + 1, found: rec.len(), expected: expected.len() });
        }
        let mut row = Vec::with_capacity(expected.len());
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| LogError::Value { row: i + 1, column: expected[j].clone(), value: cell.to_string() })?;
            row.push(v);
        }
        records.push(row_record(&row));
    }
    if records.is_empty() {
        return Err(LogError::Empty);
    }
    Ok(FlightLog { vehicle, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// 1-based data row.
    pub row: usize,
    pub column: &'static str,
    pub expected: f64,
    pub found: f64,
}

const TOL: f64 = 1e-9;

fn check(out: &mut Vec<Violation>, row: usize, column: &'static str, expected: f64, found: f64) {
    if !((expected - found).abs() <= TOL * expected.abs().max(1.0)) {
        out.push(Violation { row, column, expected, found });
    }
}

/// Verify every internal identity of a log: superposition with the thrust
/// floor, the reward terms, and a strictly increasing 50 Hz clock (gaps
/// are allowed: a docked vehicle is not logged).
pub fn consistency_violations(log: &FlightLog) -> Vec<Violation> {
    let mut v = Vec::new();
    let Some(first) = log.records.first() else {
        return v;
    };
    let t0 = first.t;
    for (i, r) in log.records.iter().enumerate() {
        let row = i + 1;
        let steps = ((r.t - t0) / CONTROL_DT).round();
        let on_grid = if i == 0 || steps > ((log.records[i - 1].t - t0) / CONTROL_DT).round() { t0 + steps * CONTROL_DT } else { f64::NAN };
        check(&mut v, row, "t", on_grid, r.t);
        let sum = superpose(&r.u_cas, &r.residual);
        check(&mut v, row, "cmd_c", sum.thrust, r.overall.thrust);
        for (k, col) in ["cmd_wx", "cmd_wy", "cmd_wz"].into_iter().enumerate() {
            check(&mut v, row, col, sum.body_rates[k], r.overall.body_rates[k]);
        }
        let prev = if i == 0 { r.overall } else { log.records[i - 1].overall };
        let reward = compute_reward(&prev, &r.overall, &r.estimate, &r.desired);
        for (k, col) in ["r_epos", "r_eatt", "r_pthrust", "r_prates", "r_survive"].into_iter().enumerate() {
            check(&mut v, row, col, reward.terms()[k], r.reward.terms()[k]);
        }
    }
    v
}
