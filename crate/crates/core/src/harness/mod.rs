//! Command execution: parameter sweeps, counterexample generation and replay,
//! 1D wave runs, with CSV and SVG output.

pub mod config;
pub mod report;
pub mod svg;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gcc::{
    check_tgcc, check_tgcc_boundary, estimate_t0, RayFamily, SampledRay, Status, TgccVerdict,
};
use crate::geometry::DomainKind;
use crate::obsdomain::{boundary_shell, Mode, MovingDomainSpec, Region, ShellSpec};
use crate::paperlib::{
    make_counterexample, replay_with, sharpness_check, Counterexample, Obstruction,
};
use crate::rayflow::trace_trajectory;
use crate::wave1d::{
    damped_decay_rate, default_family, energy_density_grid, observed_energy, DampedConfig,
    InitialData1D, Window1D,
};

pub use config::{CommandKind, GridPoint, Param, Range, RawConfig, SweepConfig};
pub use report::{read_rows, rows_to_string, write_rows, ResultRow};

/// Exit code, files written, and lines for the console.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl RunOutput {
    fn say(&mut self, s: impl Into<String>) {
        self.messages.push(s.into());
    }
}

fn write_file(out: &mut RunOutput, path: PathBuf, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&path, contents)?;
    out.files.push(path);
    Ok(())
}

fn base_row(cfg: &SweepConfig, spec: &MovingDomainSpec, p: &GridPoint) -> ResultRow {
    ResultRow {
        geometry: cfg.geometry.name().to_string(),
        mode: spec.mode.name().to_string(),
        v: p.v,
        a: p.a,
        eps: p.eps,
        delta: p.delta,
        t: p.t,
        t0_estimate: None,
        status: None,
        worst_ray: None,
        wall_ms: None,
    }
}

fn fill_row(row: &mut ResultRow, v: &TgccVerdict, started: Instant, timing: bool) {
    row.t0_estimate = Some(v.t0_estimate).filter(|x| x.is_finite());
    row.status = Some(v.status());
    row.worst_ray = v.worst_ray.as_ref().map(|r| r.to_string());
    if timing {
        row.wall_ms = Some(started.elapsed().as_millis() as u64);
    }
}

/// Executes a configured command.
pub fn run(cfg: &SweepConfig) -> Result<RunOutput> {
    let mut out = RunOutput::default();
    match cfg.command {
        CommandKind::T0 | CommandKind::Sweep => run_t0(cfg, &mut out)?,
        CommandKind::Check => run_check(cfg, &mut out)?,
        CommandKind::Trace => run_trace(cfg, &mut out)?,
        CommandKind::Counterexample => run_counterexample(cfg, &mut out)?,
        CommandKind::Replay => run_replay(cfg, &mut out)?,
        CommandKind::Wave1d => run_wave1d(cfg, &mut out)?,
        CommandKind::Shell => run_shell(cfg, &mut out)?,
    }
    if !out.rows.is_empty() {
        let text = rows_to_string(&out.rows)?;
        write_file(&mut out, cfg.out_dir.join(&cfg.csv), text.as_bytes())?;
    }
    Ok(out)
}

fn run_t0(cfg: &SweepConfig, out: &mut RunOutput) -> Result<()> {
    let points = cfg.grid_points();
    let rows = points
        .par_iter()
        .map(|p| {
            let started = Instant::now();
            let spec = cfg.spec_at(p)?;
            let region = Region::Moving(spec.clone());
            let verdict = estimate_t0(&region, &cfg.sampling, p.t.unwrap_or(cfg.horizon))?;
            let mut row = base_row(cfg, &spec, p);
            fill_row(&mut row, &verdict, started, cfg.timing);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    for r in &rows {
        let est = r
            .t0_estimate
            .map(|x| format!("{x}"))
            .unwrap_or_else(|| "none".into());
        out.say(format!(
            "v={} a={} t0_estimate={est} status={}",
            r.v,
            r.a,
            r.status.map(|s| s.name()).unwrap_or("")
        ));
    }
    out.rows = rows;
    if cfg.svg {
        if let Some(p) = points.first() {
            let spec = cfg.spec_at(p)?;
            let ray = out.rows[0]
                .worst_ray
                .as_deref()
                .map(SampledRay::parse)
                .transpose()?;
            let horizon = out.rows[0].t0_estimate.unwrap_or(cfg.horizon).max(1e-3) * 1.25;
            emit_trajectory_svg(cfg, out, &spec, ray.as_ref(), horizon, "t0")?;
        }
    }
    Ok(())
}

fn run_check(cfg: &SweepConfig, out: &mut RunOutput) -> Result<()> {
    let points = cfg.grid_points();
    let results = points
        .par_iter()
        .map(|p| {
            let started = Instant::now();
            let spec = cfg.spec_at(p)?;
            let t = p.t.expect("check needs T");
            let region = Region::Moving(spec.clone());
            let verdict = if spec.mode == Mode::Boundary {
                check_tgcc_boundary(&region, t, &cfg.sampling)?
            } else {
                check_tgcc(&region, t, &cfg.sampling)?
            };
            let mut row = base_row(cfg, &spec, p);
            fill_row(&mut row, &verdict, started, cfg.timing);
            Ok((row, verdict))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut violated = false;
    for (row, v) in &results {
        let word = if v.satisfied { "satisfied" } else { "violated" };
        violated |= !v.satisfied;
        out.say(format!(
            "v={} a={} T={} {word} (rays={}, miss={}, indeterminate={})",
            row.v,
            row.a,
            row.t.unwrap_or(f64::NAN),
            v.n_rays,
            v.n_miss,
            v.n_indeterminate
        ));
    }
    out.rows = results.into_iter().map(|r| r.0).collect();
    out.exit_code = i32::from(violated);
    Ok(())
}

fn trace_path(ray: &SampledRay, horizon: f64) -> Result<crate::rayflow::Trace> {
    trace_trajectory(&ray.trajectory()?, 0.0, horizon)
}

fn emit_trajectory_svg(
    cfg: &SweepConfig,
    out: &mut RunOutput,
    spec: &MovingDomainSpec,
    ray: Option<&SampledRay>,
    horizon: f64,
    stem: &str,
) -> Result<()> {
    let path = match ray {
        Some(r) => trace_path(r, horizon)?.path,
        None => Vec::new(),
    };
    let times = [0.0, horizon / 2.0, horizon];
    let title = format!(
        "{} {} v={} a={}",
        spec.kind.name(),
        spec.mode.name(),
        spec.law.max_speed(),
        spec.a
    );
    let doc = svg::trajectory(spec.kind, Some(spec), &times, &path, &title);
    write_file(out, cfg.out_dir.join(format!("{stem}.svg")), doc.as_bytes())
}

fn run_trace(cfg: &SweepConfig, out: &mut RunOutput) -> Result<()> {
    let ray = SampledRay::parse(cfg.ray.as_deref().unwrap_or_default())?;
    if ray.family.kind() != cfg.geometry {
        return Err(Error::Config(format!(
            "ray {} does not live on {}",
            ray,
            cfg.geometry.name()
        )));
    }
    let horizon = cfg.t.and_then(|t| t.single()).unwrap_or(cfg.horizon);
    let tr = trace_path(&ray, horizon)?;
    let mut rows = Vec::new();
    let coords = |p: &crate::geometry::Point| -> [String; 3] {
        use crate::geometry::Point;
        match p {
            Point::Line(x) => [report::num(*x), String::new(), String::new()],
            Point::Plane(q) => [report::num(q.x), report::num(q.y), String::new()],
            Point::Sphere(s) => [report::num(s.x), report::num(s.y), report::num(s.z)],
        }
    };
    for (t, p) in &tr.path {
        let c = coords(p);
        rows.push(vec![
            report::num(*t),
            c[0].clone(),
            c[1].clone(),
            c[2].clone(),
            "path".into(),
        ]);
    }
    for ev in &tr.events {
        let c = coords(&ev.point);
        let kind = if ev.transversal { "bounce" } else { "graze" };
        rows.push(vec![
            report::num(ev.t),
            c[0].clone(),
            c[1].clone(),
            c[2].clone(),
            kind.into(),
        ]);
    }
    let mut buf = Vec::new();
    report::write_table(&mut buf, &["t", "x", "y", "z", "kind"], &rows)?;
    write_file(out, cfg.out_dir.join("trace.csv"), &buf)?;
    out.say(format!(
        "{} bounces over [0, {horizon}]{}",
        tr.events.len(),
        if tr.gliding { " (gliding)" } else { "" }
    ));
    if cfg.svg {
        let spec = cfg
            .grid_points()
            .first()
            .and_then(|p| cfg.spec_at(p).ok())
            .filter(|s| s.validate().is_ok());
        let title = format!("trace {ray}");
        let doc = svg::trajectory(
            cfg.geometry,
            spec.as_ref(),
            &[0.0, horizon],
            &tr.path,
            &title,
        );
        write_file(out, cfg.out_dir.join("trace.svg"), doc.as_bytes())?;
    }
    Ok(())
}

/// Obstruction named in the config.
pub fn obstruction_from(cfg: &SweepConfig) -> Result<Obstruction> {
    let name = cfg.obstruction.as_deref().unwrap_or_default();
    let need =
        |k: &str, x: Option<u64>| x.ok_or_else(|| Error::Config(format!("{name} needs `{k}`")));
    let v = || {
        cfg.v
            .single()
            .ok_or_else(|| Error::Config(format!("{name} needs a single `v`")))
    };
    Ok(match name {
        "sphere_equatorial" => Obstruction::SphereEquatorial,
        "sphere_transversal" => Obstruction::SphereTransversal {
            p: need("p", cfg.p)?,
            q: need("q", cfg.q)?,
        },
        "disk_polygon" => Obstruction::DiskPolygon {
            n: need("n", cfg.n)?,
            p: need("p", cfg.p)?,
            q: need("q", cfg.q)?,
        },
        "disk_precession" => Obstruction::DiskPrecession { v: v()? },
        "disk_clockwise" => Obstruction::DiskClockwise { v: v()? },
        "square" => {
            let (r_num, r_den) = cfg
                .r
                .ok_or_else(|| Error::Config("square needs `r`".into()))?;
            Obstruction::Square {
                p: need("p", cfg.p)?,
                q: need("q", cfg.q)?,
                r_num,
                r_den,
            }
        }
        other => return Err(Error::Config(format!("unknown obstruction `{other}`"))),
    })
}

/// Replay file content: a config that reproduces the counterexample.
pub fn counterexample_ini(c: &Counterexample) -> String {
    let s = &c.spec;
    let mut text = String::new();
    text.push_str("[domain]\n");
    text.push_str(&format!(
        "geometry={}\nmode={}\nlaw=constant\n",
        s.kind.name(),
        s.mode.name()
    ));
    text.push_str(&format!("v={}\na={}\n", c.v, s.a));
    if let Some(e) = s.eps {
        text.push_str(&format!("eps={e}\n"));
    }
    text.push_str(&format!("offset={}\n", s.offset));
    text.push_str("[command]\nname=replay\n");
    text.push_str(&format!("ray={}\nhorizon={}\n", c.ray, c.horizon));
    text.push_str(&format!(
        "obstruction={}\nclearance={}\nvalid_a0={}\n",
        c.obstruction.name(),
        c.clearance,
        c.valid_a0
    ));
    if let Some(e) = c.valid_eps0 {
        text.push_str(&format!("valid_eps0={e}\n"));
    }
    text
}

fn run_counterexample(cfg: &SweepConfig, out: &mut RunOutput) -> Result<()> {
    let ob = obstruction_from(cfg)?;
    if ob.kind() != cfg.geometry {
        return Err(Error::Config(format!(
            "{} is not an obstruction on {}",
            ob.name(),
            cfg.geometry.name()
        )));
    }
    let a = cfg.a.single().filter(|a| *a > 0.0);
    let eps = cfg.eps.and_then(|e| e.single());
    let c = match make_counterexample(ob, a, eps) {
        Ok(c) => c,
        Err(Error::ObstructionFails(msg)) => {
            out.say(format!("obstruction fails: {msg}"));
            out.exit_code = 1;
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    out.say(format!("ray {}", c.ray));
    out.say(format!(
        "v = {} a = {} (a0 = {})",
        c.v, c.spec.a, c.valid_a0
    ));
    if let Some(e) = c.valid_eps0 {
        out.say(format!("eps = {} (eps0 = {e})", c.spec.eps.unwrap_or(e)));
    }
    out.say(format!("minimum clearance = {}", c.clearance));
    out.say(format!("no hit over horizon {}", c.horizon));
    match sharpness_check(&c)? {
        Some(t) => out.say(format!("enlarged window a = {} hits at t = {t}", c.sharp_a)),
        None => out.say(format!("enlarged window a = {} still misses", c.sharp_a)),
    }
    write_file(
        out,
        cfg.out_dir.join("counterexample.ini"),
        counterexample_ini(&c).as_bytes(),
    )?;
    out.rows.push(ResultRow {
        geometry: c.spec.kind.name().to_string(),
        mode: c.spec.mode.name().to_string(),
        v: c.v,
        a: c.spec.a,
        eps: c.spec.eps,
        delta: None,
        t: Some(c.horizon),
        t0_estimate: None,
        status: Some(Status::ExceededHorizon),
        worst_ray: Some(c.ray.to_string()),
        wall_ms: None,
    });
    if cfg.svg {
        emit_trajectory_svg(
            cfg,
            out,
            &c.spec,
            Some(&c.ray),
            c.horizon.min(20.0),
            "counterexample",
        )?;
    }
    Ok(())
}

fn run_replay(cfg: &SweepConfig, out: &mut RunOutput) -> Result<()> {
    let inner = match &cfg.file {
        Some(f) => load_replay(f)?,
        None => cfg.clone(),
    };
    let ray = SampledRay::parse(
        inner
            .ray
            .as_deref()
            .ok_or_else(|| Error::Config("replay file lacks `ray`".into()))?,
    )?;
    let p = inner.grid_points()[0];
    let spec = inner.spec_at(&p)?;
    spec.validate()
        .map_err(|e| Error::Config(format!("invalid domain in replay file: {e}")))?;
    let hit = replay_with(&spec, &ray, inner.horizon)?;
    let mut row = base_row(&inner, &spec, &p);
    row.t = Some(inner.horizon);
    row.worst_ray = Some(ray.to_string());
    match hit {
        None => {
            out.say(format!("no hit over horizon {}", inner.horizon));
            row.status = Some(Status::ExceededHorizon);
        }
        Some(t) => {
            out.say(format!("hit at t = {t}"));
            row.t0_estimate = Some(t);
            row.status = Some(Status::Finite);
            out.exit_code = 1;
        }
    }
    out.rows.push(row);
    if cfg.svg {
        emit_trajectory_svg(
            cfg,
            out,
            &spec,
            Some(&ray),
            inner.horizon.min(20.0),
            "replay",
        )?;
    }
    Ok(())
}

fn load_replay(path: &Path) -> Result<SweepConfig> {
    let raw = RawConfig::from_file(path)?;
    let c = raw.to_config()?;
    if c.command != CommandKind::Replay || c.file.is_some() {
        return Err(Error::Config(format!(
            "{} is not a counterexample file",
            path.display()
        )));
    }
    Ok(c)
}

fn interval_spec(cfg: &SweepConfig) -> Result<(MovingDomainSpec, GridPoint)> {
    if cfg.geometry != DomainKind::Interval01 {
        return Err(Error::Config(format!(
            "{} runs on the interval only",
            cfg.command.name()
        )));
    }
    let p = cfg.grid_points()[0];
    let spec = cfg.spec_at(&p)?;
    spec.validate()
        .map_err(|e| Error::Config(format!("invalid domain: {e}")))?;
    Ok((spec, p))
}

fn run_wave1d(cfg: &SweepConfig, out: &mut RunOutput) -> Result<()> {
    let (spec, p) = interval_spec(cfg)?;
    let window = Window1D::Moving(spec.clone());
    if cfg.task == "decay" {
        let dc = DampedConfig {
            n: cfg.grid.unwrap_or(DampedConfig::default().n),
            cfl: cfg.cfl,
            periods: cfg.periods.unwrap_or(DampedConfig::default().periods),
        };
        let data = InitialData1D::random_modes(cfg.data_seed, 16);
        let fit = damped_decay_rate(&window, &data, &dc)?;
        out.say(format!(
            "nu = {} mu = {} residual = {}",
            fit.nu, fit.mu, fit.residual
        ));
        let rows: Vec<Vec<String>> = fit
            .samples
            .iter()
            .map(|(t, e)| vec![report::num(*t), report::num(*e)])
            .collect();
        let mut buf = Vec::new();
        report::write_table(&mut buf, &["t", "energy"], &rows)?;
        write_file(out, cfg.out_dir.join("decay.csv"), &buf)?;
        let mut buf = Vec::new();
        report::write_table(
            &mut buf,
            &["v", "a", "delta", "grid", "periods", "mu", "nu", "residual"],
            &[vec![
                report::num(p.v),
                report::num(p.a),
                report::num(p.delta.unwrap_or(0.0)),
                dc.n.to_string(),
                dc.periods.to_string(),
                report::num(fit.mu),
                report::num(fit.nu),
                report::num(fit.residual),
            ]],
        )?;
        write_file(out, cfg.out_dir.join("decay_fit.csv"), &buf)?;
        return Ok(());
    }
    let t_max = cfg
        .t
        .and_then(|t| t.single())
        .ok_or_else(|| Error::Config("wave1d ratio needs a single `T`".into()))?;
    let family = default_family(&spec, &cfg.sampling)?;
    let reports = family
        .par_iter()
        .map(|d| observed_energy(d, &window, t_max))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut inf = f64::INFINITY;
    for (d, r) in family.iter().zip(&reports) {
        inf = inf.min(r.ratio);
        rows.push(vec![
            d.tag(),
            report::num(t_max),
            report::num(r.observed),
            report::num(r.total),
            report::num(r.ratio),
            report::num(r.error_estimate),
            r.flagged.to_string(),
        ]);
    }
    out.say(format!("ratio infimum over {} data = {inf}", family.len()));
    let mut buf = Vec::new();
    report::write_table(
        &mut buf,
        &[
            "data",
            "T",
            "observed",
            "total",
            "ratio",
            "error_estimate",
            "flagged",
        ],
        &rows,
    )?;
    write_file(out, cfg.out_dir.join("wave1d.csv"), &buf)?;
    if cfg.svg {
        let worst = family
            .iter()
            .zip(&reports)
            .min_by(|a, b| a.1.ratio.total_cmp(&b.1.ratio))
            .map(|x| x.0.clone())
            .unwrap_or_else(|| InitialData1D::eigenmode(1));
        let grid = energy_density_grid(&worst, t_max, 240, 120);
        let doc = svg::heatmap(
            &grid,
            t_max,
            &window,
            &format!("|u_t|^2 for {}", worst.tag()),
        );
        write_file(out, cfg.out_dir.join("wave1d.svg"), doc.as_bytes())?;
    }
    Ok(())
}

fn run_shell(cfg: &SweepConfig, out: &mut RunOutput) -> Result<()> {
    let (spec, p) = interval_spec(cfg)?;
    let t_base = p.t.expect("shell needs T");
    let shell = boundary_shell(&ShellSpec {
        base: spec.clone(),
        t_max: t_base,
        h: cfg.h.expect("shell needs h"),
    })?;
    let region = Region::Shell(shell.clone());
    let started = Instant::now();
    let verdict = estimate_t0(&region, &cfg.sampling, cfg.horizon)?;
    let mut row = base_row(cfg, &spec, &p);
    fill_row(&mut row, &verdict, started, cfg.timing);
    match row.t0_estimate {
        Some(t) => out.say(format!(
            "shell t0_estimate = {t} ({} segments)",
            shell.segments().len()
        )),
        None => out.say("shell misses some ray within the horizon"),
    }
    out.rows.push(row);
    if cfg.svg {
        let window = Window1D::Moving(spec);
        let rays: Vec<Vec<(f64, f64)>> = verdict
            .worst_ray
            .iter()
            .filter(|r| matches!(r.family, RayFamily::Interval { .. }))
            .filter_map(|r| trace_path(r, verdict.t0_estimate.min(cfg.horizon)).ok())
            .map(|tr| {
                tr.path
                    .iter()
                    .filter_map(|(t, q)| q.as_line().map(|x| (*t, x)))
                    .collect()
            })
            .collect();
        let t_show = verdict.t0_estimate.min(cfg.horizon).max(t_base);
        let doc = svg::spacetime_1d(&window, t_show, &rays, shell.segments(), "boundary shell");
        write_file(out, cfg.out_dir.join("shell.svg"), doc.as_bytes())?;
    }
    Ok(())
}
