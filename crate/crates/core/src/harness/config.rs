//! Sectioned key=value configuration and command-line overrides.

use std::path::{Path, PathBuf};

use ini::Ini;

use crate::error::{Error, Result};
use crate::gcc::RaySampling;
use crate::geometry::DomainKind;
use crate::obsdomain::{Mode, MotionLaw, MovingDomainSpec};

/// Accepted keys per section.
pub const SECTIONS: &[(&str, &[&str])] = &[
    (
        "domain",
        &[
            "geometry", "domain", "mode", "v", "a", "eps", "delta", "law", "t0", "offset",
        ],
    ),
    (
        "command",
        &[
            "name",
            "T",
            "horizon",
            "ray",
            "file",
            "obstruction",
            "n",
            "p",
            "q",
            "r",
            "h",
            "task",
            "grid",
            "periods",
            "cfl",
            "data_seed",
            "clearance",
            "valid_a0",
            "valid_eps0",
        ],
    ),
    (
        "sampling",
        &[
            "seed",
            "coarse",
            "refine",
            "jitter",
            "interval_positions",
            "positions",
            "directions",
            "square_positions",
            "sphere_nodes",
            "sphere_inclinations",
            "sphere_phases",
            "gliding_starts",
            "polygon_n_max",
            "rational_q_max",
        ],
    ),
    ("output", &["dir", "csv", "svg", "timing"]),
];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(s, _)| *s)
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Trace,
    Check,
    T0,
    Sweep,
    Counterexample,
    Replay,
    Wave1d,
    Shell,
}

impl CommandKind {
    pub const ALL: [CommandKind; 8] = [
        CommandKind::Trace,
        CommandKind::Check,
        CommandKind::T0,
        CommandKind::Sweep,
        CommandKind::Counterexample,
        CommandKind::Replay,
        CommandKind::Wave1d,
        CommandKind::Shell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Trace => "trace",
            CommandKind::Check => "check",
            CommandKind::T0 => "t0",
            CommandKind::Sweep => "sweep",
            CommandKind::Counterexample => "counterexample",
            CommandKind::Replay => "replay",
            CommandKind::Wave1d => "wave1d",
            CommandKind::Shell => "shell",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Inclusive grid start, start + step, ... ≤ stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

/// A single value or a start:stop:step range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Value(f64),
    Range(Range),
}

impl Param {
    pub fn parse(key: &str, s: &str) -> Result<Self> {
        let num = |x: &str| -> Result<f64> {
            let x = x.trim();
            let v = parse_real(x)
                .ok_or_else(|| config_err(format!("`{key}`: cannot parse `{x}` as a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(config_err(format!("`{key}`: value must be finite")))
            }
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.len() {
            1 => Ok(Param::Value(num(parts[0])?)),
            3 => {
                let r = Range {
                    start: num(parts[0])?,
                    stop: num(parts[1])?,
                    step: num(parts[2])?,
                };
                if !(r.step > 0.0) {
                    return Err(config_err(format!("`{key}`: range step must be positive")));
                }
                if r.stop < r.start {
                    return Err(config_err(format!("`{key}`: empty range {s}")));
                }
                Ok(Param::Range(r))
            }
            _ => Err(config_err(format!(
                "`{key}`: expected a number or start:stop:step, got `{s}`"
            ))),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Param::Value(v) => vec![*v],
            Param::Range(r) => r.values(),
        }
    }

    pub fn single(&self) -> Option<f64> {
        match self {
            Param::Value(v) => Some(*v),
            Param::Range(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub command: CommandKind,
    pub geometry: DomainKind,
    pub mode: Mode,
    /// "reflecting" (1D default), "constant" or "stop_and_go".
    pub law: String,
    pub law_t0: Option<f64>,
    pub offset: f64,
    pub v: Param,
    pub a: Param,
    pub eps: Option<Param>,
    pub delta: Option<Param>,
    pub t: Option<Param>,
    pub horizon: f64,
    pub ray: Option<String>,
    pub file: Option<PathBuf>,
    pub obstruction: Option<String>,
    pub n: Option<u64>,
    pub p: Option<u64>,
    pub q: Option<u64>,
    pub r: Option<(u64, u64)>,
    pub h: Option<f64>,
    pub task: String,
    pub grid: Option<usize>,
    pub periods: Option<usize>,
    pub cfl: f64,
    pub data_seed: u64,
    pub sampling: RaySampling,
    pub coarse: usize,
    pub out_dir: PathBuf,
    pub csv: String,
    pub svg: bool,
    pub timing: bool,
}

/// Raw (section, key, value) entries in the order given.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub entries: Vec<(String, String, String)>,
}

impl RawConfig {
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| config_err(format!("parse error: {e}")))?;
        let mut raw = RawConfig::default();
        for (sec, props) in ini.iter() {
            let sec = match sec {
                Some(s) => s.trim().to_string(),
                None if props.is_empty() => continue,
                None => return Err(config_err("keys must appear inside a [section]")),
            };
            let known = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k);
            let keys = known.ok_or_else(|| config_err(format!("unknown section [{sec}]")))?;
            for (k, v) in props.iter() {
                if !keys.contains(&k) {
                    return Err(config_err(format!("unknown key `{k}` in [{sec}]")));
                }
                raw.entries
                    .push((sec.clone(), k.to_string(), v.trim().to_string()));
            }
        }
        Ok(raw)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    /// Adds `key=value` pairs (flat keys, section inferred) after the file.
    pub fn push_args<S: AsRef<str>>(&mut self, args: &[S]) -> Result<()> {
        for a in args {
            let a = a.as_ref();
            let (k, v) = a
                .split_once('=')
                .ok_or_else(|| config_err(format!("expected key=value, got `{a}`")))?;
            let k = k.trim();
            let sec = section_of(k).ok_or_else(|| config_err(format!("unknown key `{k}`")))?;
            self.entries
                .push((sec.to_string(), k.to_string(), v.trim().to_string()));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.push_args(&[format!("{key}={value}")])
    }

    /// Last value given for a key.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.1 == key)
            .map(|e| e.2.as_str())
    }

    pub fn to_config(&self) -> Result<SweepConfig> {
        SweepConfig::from_raw(self)
    }
}

fn parse_bool(key: &str, s: &str) -> Result<bool> {
    match s {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(config_err(format!(
            "`{key}`: expected a boolean, got `{s}`"
        ))),
    }
}

/// A float, or a multiple of pi such as `pi`, `2pi`, `pi/2`, `3pi/4`, `tau`.
fn parse_real(s: &str) -> Option<f64> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().ok()?),
        None => (s, 1.0),
    };
    let v = if num == "tau" {
        std::f64::consts::TAU
    } else if let Some(c) = num.strip_suffix("pi") {
        let c = c.trim().trim_end_matches('*');
        let c = if c.is_empty() {
            1.0
        } else {
            c.parse::<f64>().ok()?
        };
        c * std::f64::consts::PI
    } else if den == 1.0 && !s.contains('/') {
        num.parse::<f64>().ok()?
    } else {
        return None;
    };
    Some(v / den)
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| config_err(format!("`{key}`: cannot parse `{s}`")))
}

fn parse_ratio(key: &str, s: &str) -> Result<(u64, u64)> {
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (
            parse_num::<u64>(key, n.trim())?,
            parse_num::<u64>(key, d.trim())?,
        ),
        None => (parse_num::<u64>(key, s)?, 1),
    };
    if n == 0 || d == 0 {
        return Err(config_err(format!(
            "`{key}`: expected a positive ratio p/q"
        )));
    }
    Ok((n, d))
}

impl SweepConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let get = |k: &str| raw.get(k);
        let name = get("name").ok_or_else(|| config_err("missing command name"))?;
        let command = CommandKind::from_name(name)
            .ok_or_else(|| config_err(format!("unknown command `{name}`")))?;
        // replay takes everything from its file
        let geometry_name = get("geometry").or(get("domain"));
        let geometry = match geometry_name {
            Some(g) => DomainKind::from_name(g)
                .ok_or_else(|| config_err(format!("unknown geometry `{g}`")))?,
            None if command == CommandKind::Replay => DomainKind::UnitDisk,
            None => return Err(config_err("missing `geometry`")),
        };
        let mode = match get("mode") {
            Some(m) => {
                Mode::from_name(m).ok_or_else(|| config_err(format!("unknown mode `{m}`")))?
            }
            None => Mode::Interior,
        };
        let param = |k: &str| get(k).map(|s| Param::parse(k, s)).transpose();
        let need = |k: &str| -> Result<Param> {
            param(k)?.ok_or_else(|| config_err(format!("missing `{k}` for {}", command.name())))
        };
        let (v, a) = match command {
            CommandKind::Replay => (
                param("v")?.unwrap_or(Param::Value(0.0)),
                param("a")?.unwrap_or(Param::Value(0.0)),
            ),
            CommandKind::Trace | CommandKind::Counterexample | CommandKind::Wave1d => (
                param("v")?.unwrap_or(Param::Value(0.0)),
                param("a")?.unwrap_or(Param::Value(0.0)),
            ),
            _ => (need("v")?, need("a")?),
        };
        let mut sampling = RaySampling::default();
        let mut coarse = 1;
        for (_, k, s) in raw.entries.iter().filter(|e| e.0 == "sampling") {
            let k = k.as_str();
            match k {
                "seed" => sampling.seed = parse_num(k, s)?,
                "coarse" => coarse = parse_num::<usize>(k, s)?.max(1),
                "refine" => sampling.refine = parse_bool(k, s)?,
                "jitter" => sampling.jitter = parse_bool(k, s)?,
                "interval_positions" => sampling.interval_positions = parse_num(k, s)?,
                "positions" => sampling.positions = parse_num(k, s)?,
                "directions" => sampling.directions = parse_num(k, s)?,
                "square_positions" => sampling.square_positions = parse_num(k, s)?,
                "sphere_nodes" => sampling.sphere_nodes = parse_num(k, s)?,
                "sphere_inclinations" => sampling.sphere_inclinations = parse_num(k, s)?,
                "sphere_phases" => sampling.sphere_phases = parse_num(k, s)?,
                "gliding_starts" => sampling.gliding_starts = parse_num(k, s)?,
                "polygon_n_max" => sampling.polygon_n_max = parse_num(k, s)?,
                "rational_q_max" => sampling.rational_q_max = parse_num(k, s)?,
                _ => unreachable!("key table covers sampling"),
            }
        }
        if coarse > 1 {
            sampling = sampling.coarse(coarse);
        }
        let opt = |k: &str| get(k).map(|s| parse_num::<u64>(k, s)).transpose();
        let fopt = |k: &str| get(k).map(|s| parse_num::<f64>(k, s)).transpose();
        let cfg = SweepConfig {
            command,
            geometry,
            mode,
            law: get("law")
                .unwrap_or(if geometry == DomainKind::Interval01 {
                    "reflecting"
                } else {
                    "constant"
                })
                .to_string(),
            law_t0: fopt("t0")?,
            offset: fopt("offset")?.unwrap_or(0.0),
            v,
            a,
            eps: param("eps")?,
            delta: param("delta")?,
            t: param("T")?,
            horizon: fopt("horizon")?.unwrap_or(50.0),
            ray: get("ray").map(str::to_string),
            file: get("file").map(PathBuf::from),
            obstruction: get("obstruction").map(str::to_string),
            n: opt("n")?,
            p: opt("p")?,
            q: opt("q")?,
            r: get("r").map(|s| parse_ratio("r", s)).transpose()?,
            h: fopt("h")?,
            task: get("task").unwrap_or("ratio").to_string(),
            grid: get("grid").map(|s| parse_num("grid", s)).transpose()?,
            periods: get("periods")
                .map(|s| parse_num("periods", s))
                .transpose()?,
            cfl: fopt("cfl")?.unwrap_or(0.5),
            data_seed: opt("data_seed")?.unwrap_or(1),
            sampling,
            coarse,
            out_dir: PathBuf::from(get("dir").unwrap_or(".")),
            csv: get("csv").unwrap_or("results.csv").to_string(),
            svg: get("svg")
                .map(|s| parse_bool("svg", s))
                .transpose()?
                .unwrap_or(false),
            timing: get("timing")
                .map(|s| parse_bool("timing", s))
                .transpose()?
                .unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !["reflecting", "constant", "stop_and_go"].contains(&self.law.as_str()) {
            return Err(config_err(format!("unknown law `{}`", self.law)));
        }
        if self.law == "stop_and_go" && self.law_t0.is_none() {
            return Err(config_err("law stop_and_go needs `t0`"));
        }
        if !(self.horizon > 0.0) {
            return Err(config_err("`horizon` must be positive"));
        }
        match self.command {
            CommandKind::Check if self.t.is_none() => return Err(config_err("check needs `T`")),
            CommandKind::Trace if self.ray.is_none() => {
                return Err(config_err("trace needs `ray`"))
            }
            CommandKind::Replay if self.file.is_none() && self.ray.is_none() => {
                return Err(config_err("replay needs `file`"))
            }
            CommandKind::Counterexample if self.obstruction.is_none() => {
                return Err(config_err("counterexample needs `obstruction`"))
            }
            CommandKind::Shell if self.h.is_none() || self.t.is_none() => {
                return Err(config_err("shell needs `h` and `T`"))
            }
            CommandKind::Wave1d if !["ratio", "decay"].contains(&self.task.as_str()) => {
                return Err(config_err(format!("unknown wave1d task `{}`", self.task)))
            }
            _ => {}
        }
        if let Some(t) = &self.t {
            if t.values().iter().any(|x| !(*x > 0.0)) {
                return Err(config_err("`T` must be positive"));
            }
        }
        if matches!(
            self.command,
            CommandKind::Check | CommandKind::T0 | CommandKind::Sweep | CommandKind::Shell
        ) {
            for p in self.grid_points() {
                self.spec_at(&p)?
                    .validate()
                    .map_err(|e| config_err(format!("invalid domain: {e}")))?;
            }
        }
        Ok(())
    }

    /// Grid points (v, a, eps, delta, T) in lexicographic order.
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let opt_vals = |p: &Option<Param>| -> Vec<Option<f64>> {
            match p {
                Some(p) => p.values().into_iter().map(Some).collect(),
                None => vec![None],
            }
        };
        let mut out = Vec::new();
        for v in self.v.values() {
            for a in self.a.values() {
                for eps in opt_vals(&self.eps) {
                    for delta in opt_vals(&self.delta) {
                        for t in opt_vals(&self.t) {
                            out.push(GridPoint {
                                v,
                                a,
                                eps,
                                delta,
                                t,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Region specification for one grid point.
    pub fn spec_at(&self, p: &GridPoint) -> Result<MovingDomainSpec> {
        let need_eps = || {
            p.eps
                .ok_or_else(|| config_err(format!("{} needs `eps`", self.geometry.name())))
        };
        let mut spec = if self.mode == Mode::Boundary {
            MovingDomainSpec::boundary(self.geometry, p.v, p.a)
        } else {
            match self.geometry {
                DomainKind::Interval01 => {
                    MovingDomainSpec::interval(p.v, p.a, p.delta.unwrap_or(0.0))
                }
                DomainKind::UnitDisk => MovingDomainSpec::disk(p.v, p.a, need_eps()?),
                DomainKind::UnitSphere => MovingDomainSpec::sphere(p.v, p.a, need_eps()?),
                DomainKind::UnitSquare => MovingDomainSpec::square(p.v, p.a),
            }
        };
        match self.law.as_str() {
            "constant" => spec = spec.with_law(MotionLaw::ConstantSpeed { v: p.v }),
            "stop_and_go" => {
                spec = spec.with_law(MotionLaw::StopAndGo {
                    v: p.v,
                    t0: self.law_t0.unwrap_or(0.0),
                })
            }
            _ => {
                if self.geometry == DomainKind::Interval01 {
                    spec = spec.with_law(MotionLaw::Reflecting1D {
                        v: p.v,
                        delta: p.delta.unwrap_or(0.0),
                    });
                }
            }
        }
        Ok(spec.with_offset(self.offset))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub v: f64,
    pub a: f64,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub t: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(cmd: &str, kv: &[&str]) -> Result<SweepConfig> {
        let mut raw = RawConfig::default();
        raw.set("name", cmd)?;
        raw.push_args(kv)?;
        raw.to_config()
    }

    #[test]
    fn ranges_are_inclusive() {
        let p = Param::parse("v", "0:1:0.25").unwrap();
        assert_eq!(p.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(Param::parse("v", "1:0:0.1").is_err());
        assert!(Param::parse("v", "0:1:0").is_err());
        assert!(Param::parse("v", "0:1").is_err());
        assert!(Param::parse("v", "nan").is_err());
    }

    #[test]
    fn multiples_of_pi() {
        use std::f64::consts::PI;
        for (s, want) in [
            ("pi", PI),
            ("2pi", 2.0 * PI),
            ("pi/2", PI / 2.0),
            ("3pi/4", 0.75 * PI),
            ("0.9*pi", 0.9 * PI),
        ] {
            assert_eq!(Param::parse("a", s).unwrap(), Param::Value(want), "{s}");
        }
        assert!(Param::parse("a", "1/2").is_err());
        assert!(Param::parse("a", "pi/0").is_err());
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = args("t0", &["domain=interval", "v=0.5", "a=0.25", "speed=3"]).unwrap_err();
        assert!(e.to_string().contains("speed"), "{e}");
        let e = RawConfig::from_ini_str("[domain]\ngeometry=disk\nwidth=2\n").unwrap_err();
        assert!(e.to_string().contains("width"), "{e}");
        let e = RawConfig::from_ini_str("[extras]\nx=1\n").unwrap_err();
        assert!(e.to_string().contains("extras"), "{e}");
    }

    #[test]
    fn ini_and_args_merge() {
        let mut raw = RawConfig::from_ini_str(
            "[domain]\ngeometry=interval\nv=0.5\na=0.25\n[command]\nname=t0\n",
        )
        .unwrap();
        raw.push_args(&["v=0.75"]).unwrap();
        let c = raw.to_config().unwrap();
        assert_eq!(c.command, CommandKind::T0);
        assert_eq!(c.v, Param::Value(0.75));
    }

    #[test]
    fn grid_is_lexicographic() {
        let c = args(
            "sweep",
            &[
                "domain=interval",
                "v=0.25:0.5:0.25",
                "a=0.1:0.2:0.1",
                "delta=0",
            ],
        )
        .unwrap();
        let pts: Vec<(f64, f64)> = c.grid_points().iter().map(|p| (p.v, p.a)).collect();
        assert_eq!(pts, vec![(0.25, 0.1), (0.25, 0.2), (0.5, 0.1), (0.5, 0.2)]);
    }

    #[test]
    fn invalid_domain_is_config_error() {
        assert!(matches!(
            args("t0", &["domain=interval", "v=0.5", "a=1.5"]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            args("check", &["domain=disk", "v=0", "a=1", "eps=0.2"]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            args("t0", &["domain=disk", "v=0", "a=1"]),
            Err(Error::Config(_))
        ));
    }
}
