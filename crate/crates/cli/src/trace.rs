//! Trajectory persistence: CSV with one row per executed step and full
//! double precision (17 significant digits), so a reloaded trace carries
//! bit-identical values.
//!
//! Columns, in order: `t, x0.., u0.., theta0.., eta0.., loss, regret_cum`.
//! Rows cover t = 0..=T; the trailing state `x_{T+1}` is reconstructed on
//! load by replaying the plant one step, which reproduces the rollout's own
//! computation exactly.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DVector;

use reglab_core::rollout::Trajectory;
use reglab_core::schedule::CostSchedule;
use reglab_core::system::SystemModel;

fn push_f64(out: &mut String, v: f64) {
    // 17 significant digits round-trip f64 exactly
    write!(out, ",{:.16e}", v).expect("string write");
}

/// Renders the trace as CSV.
pub fn to_csv(traj: &Trajectory, schedule: &CostSchedule) -> String {
    let horizon = traj.horizon();
    let n = traj.x[0].len();
    let m = traj.u[0].len();
    let mut out = String::new();
    out.push('t');
    for i in 0..n {
        write!(out, ",x{i}").unwrap();
    }
    for i in 0..m {
        write!(out, ",u{i}").unwrap();
    }
    for i in 0..n {
        write!(out, ",theta{i}").unwrap();
    }
    for i in 0..m {
        write!(out, ",eta{i}").unwrap();
    }
    out.push_str(",loss,regret_cum\n");

    for t in 0..=horizon {
        write!(out, "{t}").unwrap();
        let steady = &schedule.segment_at(t).steady;
        for i in 0..n {
            push_f64(&mut out, traj.x[t][i]);
        }
        for i in 0..m {
            push_f64(&mut out, traj.u[t][i]);
        }
        for i in 0..n {
            push_f64(&mut out, steady.theta[i]);
        }
        for i in 0..m {
            push_f64(&mut out, steady.eta[i]);
        }
        push_f64(&mut out, traj.loss[t]);
        push_f64(&mut out, traj.regret_cum[t]);
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, traj: &Trajectory, schedule: &CostSchedule) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    std::fs::write(path, to_csv(traj, schedule))
        .with_context(|| format!("writing trace {}", path.display()))
}

/// Parses a persisted trace back into a trajectory. The plant is needed to
/// reconstruct the trailing state `x_{T+1}`.
pub fn from_csv(content: &str, system: &SystemModel) -> Result<Trajectory> {
    let n = system.state_dim();
    let m = system.input_dim();
    let expected_cols = 1 + 2 * n + 2 * m + 2;
    let mut lines = content.lines();
    let header = lines.next().context("empty trace")?;
    if header.split(',').count() != expected_cols {
        bail!(
            "trace header has {} columns, expected {expected_cols}",
            header.split(',').count()
        );
    }

    let mut x = Vec::new();
    let mut u = Vec::new();
    let mut loss = Vec::new();
    let mut regret_cum = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected_cols {
            bail!(
                "row {row}: {} columns, expected {expected_cols}",
                fields.len()
            );
        }
        let t: usize = fields[0].parse().with_context(|| format!("row {row}: t"))?;
        if t != row {
            bail!("row {row}: unexpected time index {t}");
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("row {row}: bad float {s:?}"))
        };
        let xs: Vec<f64> = fields[1..1 + n]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_>>()?;
        let us: Vec<f64> = fields[1 + n..1 + n + m]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_>>()?;
        x.push(DVector::from_vec(xs));
        u.push(DVector::from_vec(us));
        loss.push(parse(fields[expected_cols - 2])?);
        regret_cum.push(parse(fields[expected_cols - 1])?);
    }
    if x.is_empty() {
        bail!("trace has no rows");
    }
    let last_x = x.last().expect("nonempty").clone();
    let last_u = u.last().expect("nonempty");
    x.push(system.step(&last_x, last_u)?);
    Ok(Trajectory {
        x,
        u,
        loss,
        regret_cum,
    })
}
