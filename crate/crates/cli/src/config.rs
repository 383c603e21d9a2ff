//! `key = value` run configuration with a canonical printer.

use std::fmt;
use std::str::FromStr;

use magwell::parse_expr;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A value that can be read from and written to a config line.
pub trait ConfigValue: Sized {
    fn read(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

fn read_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

impl ConfigValue for f64 {
    fn read(s: &str) -> Result<Self, String> {
        read_f64(s)
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

macro_rules! integer_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn read(s: &str) -> Result<Self, String> {
                s.trim().parse().map_err(|_| format!("not a valid {}: {s:?}", stringify!($t)))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

integer_value!(usize, u32, i32, u64);

impl ConfigValue for bool {
    fn read(s: &str) -> Result<Self, String> {
        match s.trim() {
            "true" | "on" | "yes" => Ok(true),
            "false" | "off" | "no" => Ok(false),
            other => Err(format!("expected true or false, got {other:?}")),
        }
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for String {
    fn read(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.is_empty() {
            Err("empty value".into())
        } else {
            Ok(s.to_string())
        }
    }
    fn render(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for Vec<f64> {
    fn read(s: &str) -> Result<Self, String> {
        let v = s.split(',').map(read_f64).collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            Err("empty list".into())
        } else {
            Ok(v)
        }
    }
    fn render(&self) -> String {
        self.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
    }
}

impl ConfigValue for [f64; 3] {
    fn read(s: &str) -> Result<Self, String> {
        let v = Vec::<f64>::read(s)?;
        v.try_into().map_err(|v: Vec<f64>| format!("expected 3 components, got {}", v.len()))
    }
    fn render(&self) -> String {
        self.to_vec().render()
    }
}

/// Three expressions in `q1, q2, q3`, separated by `;`.
#[derive(Clone, Debug, PartialEq)]
pub struct Components(pub [String; 3]);

impl ConfigValue for Components {
    fn read(s: &str) -> Result<Self, String> {
        let parts: Vec<String> = s.split(';').map(|p| p.trim().to_string()).collect();
        let parts: [String; 3] = parts.try_into().map_err(|v: Vec<String>| format!("expected 3 components separated by ';', got {}", v.len()))?;
        for p in &parts {
            parse_expr(p).map_err(|e| format!("{p:?}: {e}"))?;
        }
        Ok(Components(parts))
    }
    fn render(&self) -> String {
        self.0.join("; ")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Figure1,
    Circle,
    Quadratic,
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "figure1" => Ok(Preset::Figure1),
            "circle" => Ok(Preset::Circle),
            "quadratic" => Ok(Preset::Quadratic),
            other => Err(format!("unknown preset {other:?} (figure1, circle, quadratic)")),
        }
    }
}

impl ConfigValue for Preset {
    fn read(s: &str) -> Result<Self, String> {
        s.parse()
    }
    fn render(&self) -> String {
        match self {
            Preset::Figure1 => "figure1",
            Preset::Circle => "circle",
            Preset::Quadratic => "quadratic",
        }
        .into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoxShape {
    Cube,
    Spheroid,
}

impl ConfigValue for BoxShape {
    fn read(s: &str) -> Result<Self, String> {
        match s.trim() {
            "cube" => Ok(BoxShape::Cube),
            "spheroid" => Ok(BoxShape::Spheroid),
            other => Err(format!("unknown box shape {other:?} (cube, spheroid)")),
        }
    }
    fn render(&self) -> String {
        match self {
            BoxShape::Cube => "cube",
            BoxShape::Spheroid => "spheroid",
        }
        .into()
    }
}

macro_rules! run_config {
    ($($(#[doc = $doc:literal])* $name:ident: $ty:ty,)*) => {
        /// Every key is optional; unset keys fall back to the preset, then to
        /// the command's default.
        #[derive(Clone, Debug, Default, PartialEq)]
        pub struct RunConfig {
            $($(#[doc = $doc])* pub $name: Option<$ty>,)*
        }

        impl RunConfig {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($name)),*];

            fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
                match key {
                    $(stringify!($name) => {
                        if self.$name.is_some() {
                            return Err(format!("duplicate key {key:?}"));
                        }
                        self.$name = Some(<$ty as ConfigValue>::read(value)?);
                    })*
                    _ => return Err(format!("unknown key {key:?}; valid keys: {}", Self::KEYS.join(", "))),
                }
                Ok(())
            }

            /// Canonical text: set keys in declaration order, one per line.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(if let Some(v) = &self.$name {
                    s.push_str(stringify!($name));
                    s.push_str(" = ");
                    s.push_str(&ConfigValue::render(v));
                    s.push('\n');
                })*
                s
            }

            /// Keys set in `over` replace those in `self`.
            pub fn overlay(mut self, over: &RunConfig) -> RunConfig {
                $(if over.$name.is_some() {
                    self.$name = over.$name.clone();
                })*
                self
            }
        }
    };
}

run_config! {
    preset: Preset,
    /// Vector potential `A`.
    potential: Components,
    /// Magnetic field `B`, gauged by a Poincare potential.
    field: Components,
    /// Start of the search for the minimum of `|B|`.
    seed_point: [f64; 3],
    hbar: Vec<f64>,
    /// Nodes per side of the fine grid.
    grid: usize,
    /// Coarse grid for Richardson extrapolation.
    grid_coarse: usize,
    eigenvalues: usize,
    box_shape: BoxShape,
    box_c: f64,
    box_ct: f64,
    box_cz: f64,
    box_center: [f64; 3],
    box_lengths: [f64; 3],
    /// Normal-form order `N`.
    order: u32,
    /// Jet degree cap `D`.
    degree: i32,
    twist: f64,
    /// Seed of every random start vector.
    seed: u64,
    /// `false` replaces the oracle by the model itself.
    oracle: bool,
    gauge_center: [f64; 3],
    gauge_half_width: f64,
    q0: [f64; 3],
    p0: [f64; 3],
    t_end: f64,
    dt: f64,
    record_every: usize,
    line_half_length: f64,
    line_step: f64,
    series: String,
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let mut c = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError(format!("line {}: expected key = value", n + 1)))?;
            c.set(key.trim(), value).map_err(|e| ConfigError(format!("line {}: {e}", n + 1)))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError(m));
        if self.potential.is_some() && self.field.is_some() {
            return bad("set either potential or field, not both".into());
        }
        if let Some(h) = &self.hbar {
            if h.iter().any(|&x| x <= 0.0) {
                return bad(format!("hbar values must be positive: {}", h.render()));
            }
        }
        for (key, v) in [("grid", self.grid), ("grid_coarse", self.grid_coarse)] {
            if matches!(v, Some(n) if n < 4) {
                return bad(format!("{key} must be at least 4"));
            }
        }
        if let (Some(c), Some(f)) = (self.grid_coarse, self.grid) {
            if c >= f {
                return bad(format!("grid_coarse {c} must be below grid {f}"));
            }
        }
        if self.eigenvalues == Some(0) {
            return bad("eigenvalues must be positive".into());
        }
        if self.box_center.is_some() != self.box_lengths.is_some() {
            return bad("box_center and box_lengths go together".into());
        }
        if matches!(self.box_lengths, Some(l) if l.iter().any(|&x| x <= 0.0)) {
            return bad("box_lengths must be positive".into());
        }
        if matches!(self.degree, Some(d) if d < 2) {
            return bad("degree must be at least 2".into());
        }
        Ok(())
    }

    /// The preset's defaults under the keys set here.
    pub fn resolved(&self) -> RunConfig {
        match self.preset {
            Some(p) => {
                let mut base = preset_defaults(p);
                // an explicit field replaces the preset's, whichever form it takes
                if self.potential.is_some() || self.field.is_some() {
                    base.potential = None;
                    base.field = None;
                }
                // the preset's coarse grid belongs to its fine grid
                if self.grid.is_some() {
                    base.grid_coarse = None;
                }
                base.overlay(self)
            }
            None => self.clone(),
        }
    }
}

fn components<S: ToString>(c: &[S; 3]) -> Components {
    Components(std::array::from_fn(|k| c[k].to_string()))
}

pub fn preset_defaults(p: Preset) -> RunConfig {
    use magwell::presets as ps;
    match p {
        Preset::Figure1 => RunConfig {
            preset: Some(p),
            field: Some(components(&ps::FIGURE1_B)),
            seed_point: Some([0.0; 3]),
            gauge_center: Some([0.0; 3]),
            gauge_half_width: Some(2.0),
            q0: Some(ps::FIGURE1_Q0),
            p0: Some(ps::FIGURE1_P0),
            t_end: Some(50.0),
            dt: Some(2e-4),
            record_every: Some(25),
            line_half_length: Some(3.0),
            line_step: Some(0.01),
            ..RunConfig::default()
        },
        Preset::Circle => RunConfig {
            preset: Some(p),
            potential: Some(components(&ps::CIRCLE_A)),
            q0: Some(ps::CIRCLE_Q0),
            p0: Some(ps::CIRCLE_P0),
            t_end: Some(std::f64::consts::PI),
            dt: Some(5e-4),
            record_every: Some(1),
            line_half_length: Some(1.0),
            line_step: Some(0.01),
            ..RunConfig::default()
        },
        Preset::Quadratic => RunConfig {
            preset: Some(p),
            potential: Some(components(&ps::quadratic_potential().components())),
            seed_point: Some([0.1, 0.1, 0.1]),
            hbar: Some(vec![0.5, 0.35, 0.25, 0.18]),
            grid: Some(48),
            grid_coarse: Some(36),
            box_shape: Some(BoxShape::Spheroid),
            ..RunConfig::default()
        },
    }
}
