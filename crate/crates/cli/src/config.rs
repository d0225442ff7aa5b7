//! One TOML file per invocation, sections for geometry, material, data,
//! forcing, time stepping, and per-subcommand options. Unknown keys are
//! rejected and every validation message names the offending section.key.
//! The resolved form (defaults applied, dt filled in where one was chosen)
//! is echoed next to the outputs; re-parsing the echo reproduces it.

use perifrac::dynamics::{BodyForce, CrackSegment, FieldPreset};
use perifrac::geom::{Rect, Segment, Vec2};
use perifrac::kernels::{InfluenceSpec, PotentialSpec};
use perifrac::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

fn one_usize() -> usize {
    1
}

fn ten() -> usize {
    10
}

fn default_n_dir() -> usize {
    perifrac::nucleation::DEFAULT_N_DIR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub domain: DomainSection,
    pub material: MaterialSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cracks: Vec<CrackSection>,
    #[serde(default)]
    pub forcing: ForcingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nucleate: Option<NucleateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wave: Option<WaveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSection>,
}

/// Domain rectangle plus the lattice scales. The bounds default to the unit
/// square; horizon and spacing are always explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    #[serde(default)]
    pub x0: f64,
    #[serde(default = "one")]
    pub x1: f64,
    #[serde(default)]
    pub y0: f64,
    #[serde(default = "one")]
    pub y1: f64,
    pub horizon: f64,
    pub spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub rho: f64,
    pub f_prime0: f64,
    pub f_inf: f64,
    #[serde(default)]
    pub influence: InfluenceChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfluenceChoice {
    #[default]
    Constant,
    LinearTaper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    #[default]
    Zero,
    Uniform,
    Mode,
}

/// One smooth field: `zero`, `uniform` (reads `value`), or `mode` (reads
/// `amplitude`, `kx`, `ky`). Keys not read by the chosen preset keep their
/// defaults and are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default)]
    pub preset: PresetKind,
    #[serde(default)]
    pub value: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one_u32")]
    pub kx: u32,
    #[serde(default = "one_u32")]
    pub ky: u32,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection {
            preset: PresetKind::Zero,
            value: 0.0,
            amplitude: 0.0,
            kx: 1,
            ky: 1,
        }
    }
}

impl FieldSection {
    pub fn to_preset(&self) -> FieldPreset {
        match self.preset {
            PresetKind::Zero => FieldPreset::Zero,
            PresetKind::Uniform => FieldPreset::Uniform { value: self.value },
            PresetKind::Mode => FieldPreset::Mode {
                amplitude: self.amplitude,
                kx: self.kx,
                ky: self.ky,
            },
        }
    }

    fn validate(&self, key: &str) -> Result<()> {
        if !self.value.is_finite() || !self.amplitude.is_finite() {
            return Err(Error::invalid(format!(
                "{key}.value and {key}.amplitude must be finite"
            )));
        }
        if self.preset == PresetKind::Mode && (self.kx == 0 || self.ky == 0) {
            return Err(Error::invalid(format!(
                "{key}.kx and {key}.ky must be at least 1 for the mode preset"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default)]
    pub u: FieldSection,
    #[serde(default)]
    pub v: FieldSection,
}

/// Straight crack from (ax, ay) to (bx, by) with the given jump height,
/// imposed on the initial displacement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrackSection {
    pub ax: f64,
    pub ay: f64,
    pub bx: f64,
    pub by: f64,
    pub jump: f64,
}

impl CrackSection {
    pub fn to_crack(&self) -> CrackSegment {
        CrackSegment {
            seg: Segment::new(
                Vec2::new(self.ax, self.ay),
                Vec2::new(self.bx, self.by),
            ),
            jump: self.jump,
        }
    }
}

/// Body force: `zero`, `uniform` (constant `amplitude`), or `mode`
/// (`amplitude`, `kx`, `ky` spatial shape times cos(`omega` t)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSection {
    #[serde(default)]
    pub preset: PresetKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one_u32")]
    pub kx: u32,
    #[serde(default = "one_u32")]
    pub ky: u32,
    #[serde(default)]
    pub omega: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        ForcingSection {
            preset: PresetKind::Zero,
            amplitude: 0.0,
            kx: 1,
            ky: 1,
            omega: 0.0,
        }
    }
}

impl ForcingSection {
    pub fn to_force(&self) -> BodyForce {
        match self.preset {
            PresetKind::Zero => BodyForce::Zero,
            PresetKind::Uniform => {
                BodyForce::Uniform { amplitude: self.amplitude }
            }
            PresetKind::Mode => BodyForce::Mode {
                amplitude: self.amplitude,
                kx: self.kx,
                ky: self.ky,
                omega: self.omega,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || !self.omega.is_finite() {
            return Err(Error::invalid(
                "forcing.amplitude and forcing.omega must be finite",
            ));
        }
        if self.preset == PresetKind::Mode && (self.kx == 0 || self.ky == 0) {
            return Err(Error::invalid(
                "forcing.kx and forcing.ky must be at least 1 for the mode \
                 preset",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: f64,
    /// Absent means half the measured stability limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Recording interval in steps; absent means about ten records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
}

/// Probe point for the direction scan, in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NucleateSection {
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_n_dir")]
    pub n_dir: usize,
}

/// Horizon sweep against the local wave reference. The horizon-to-spacing
/// ratio of [domain] fixes the lattice family; each listed horizon is run
/// at that ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub horizons: Vec<f64>,
    #[serde(default = "ten")]
    pub samples: usize,
    #[serde(default = "one_usize")]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveSection {
    /// Node spacing of the reference grid; must divide both side lengths.
    pub spacing: f64,
    #[serde(default = "ten")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaSection {
    pub horizons: Vec<f64>,
}

impl Config {
    pub fn bounds(&self) -> Rect {
        Rect::new(
            self.domain.x0,
            self.domain.x1,
            self.domain.y0,
            self.domain.y1,
        )
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        PotentialSpec::exponential(
            self.material.f_prime0,
            self.material.f_inf,
        )
    }

    pub fn influence(&self) -> InfluenceSpec {
        match self.material.influence {
            InfluenceChoice::Constant => InfluenceSpec::constant(),
            InfluenceChoice::LinearTaper => InfluenceSpec::linear_taper(),
        }
    }

    pub fn u0(&self) -> FieldPreset {
        self.initial.u.to_preset()
    }

    pub fn v0(&self) -> FieldPreset {
        self.initial.v.to_preset()
    }

    pub fn body_force(&self) -> BodyForce {
        self.forcing.to_force()
    }

    pub fn crack_segments(&self) -> Vec<CrackSegment> {
        self.cracks.iter().map(CrackSection::to_crack).collect()
    }

    fn validate(&self) -> Result<()> {
        let d = &self.domain;
        let finite =
            [d.x0, d.x1, d.y0, d.y1].iter().all(|v| v.is_finite());
        if !finite || d.x1 <= d.x0 || d.y1 <= d.y0 {
            return Err(Error::invalid(
                "domain.x0 < domain.x1 and domain.y0 < domain.y1 are \
                 required and must be finite",
            ));
        }
        if !(d.horizon.is_finite() && d.horizon > 0.0) {
            return Err(Error::invalid(format!(
                "domain.horizon must be finite and positive, got {}",
                d.horizon
            )));
        }
        if !(d.spacing.is_finite() && d.spacing > 0.0) {
            return Err(Error::invalid(format!(
                "domain.spacing must be finite and positive, got {}",
                d.spacing
            )));
        }
        if let Some(a) = d.collar {
            if !(a.is_finite() && a > d.horizon) {
                return Err(Error::invalid(format!(
                    "domain.collar = {a} must exceed domain.horizon = {}: \
                     displacements are held at zero on a collar strictly \
                     wider than the interaction radius so that every bond \
                     leaving the domain lands on constrained data",
                    d.horizon
                )));
            }
        }
        let m = &self.material;
        for (key, v) in [
            ("material.rho", m.rho),
            ("material.f_prime0", m.f_prime0),
            ("material.f_inf", m.f_inf),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "{key} must be finite and positive, got {v}"
                )));
            }
        }
        self.initial.u.validate("initial.u")?;
        self.initial.v.validate("initial.v")?;
        self.forcing.validate()?;
        for (i, c) in self.cracks.iter().enumerate() {
            let finite = [c.ax, c.ay, c.bx, c.by, c.jump]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(format!(
                    "cracks[{i}] coordinates and jump must be finite"
                )));
            }
        }
        if let Some(t) = &self.time {
            if !(t.t_final.is_finite() && t.t_final >= 0.0) {
                return Err(Error::invalid(format!(
                    "time.t_final must be finite and nonnegative, got {}",
                    t.t_final
                )));
            }
            if let Some(dt) = t.dt {
                if !(dt.is_finite() && dt > 0.0) {
                    return Err(Error::invalid(format!(
                        "time.dt must be finite and positive, got {dt}"
                    )));
                }
            }
            if t.stride == Some(0) {
                return Err(Error::invalid("time.stride must be at least 1"));
            }
        }
        if let Some(n) = &self.nucleate {
            if !n.x.is_finite() || !n.y.is_finite() {
                return Err(Error::invalid(
                    "nucleate.x and nucleate.y must be finite",
                ));
            }
            if n.n_dir < 8 {
                return Err(Error::invalid(format!(
                    "nucleate.n_dir must be at least 8, got {}",
                    n.n_dir
                )));
            }
        }
        if let Some(s) = &self.sweep {
            validate_horizons(&s.horizons, "sweep.horizons")?;
            if s.samples == 0 {
                return Err(Error::invalid(
                    "sweep.samples must be at least 1",
                ));
            }
            if s.threads == 0 {
                return Err(Error::invalid(
                    "sweep.threads must be at least 1",
                ));
            }
        }
        if let Some(w) = &self.wave {
            if !(w.spacing.is_finite() && w.spacing > 0.0) {
                return Err(Error::invalid(format!(
                    "wave.spacing must be finite and positive, got {}",
                    w.spacing
                )));
            }
            if w.samples == 0 {
                return Err(Error::invalid("wave.samples must be at least 1"));
            }
        }
        if let Some(g) = &self.gamma {
            validate_horizons(&g.horizons, "gamma.horizons")?;
        }
        Ok(())
    }
}

fn validate_horizons(hs: &[f64], key: &str) -> Result<()> {
    if hs.is_empty() {
        return Err(Error::invalid(format!("{key} must not be empty")));
    }
    if hs.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid(format!(
            "{key} must all be finite and positive"
        )));
    }
    Ok(())
}

/// Reads, parses, and validates a config file. Parse errors carry the toml
/// rendering, which names the unknown or missing key and its table.
pub fn parse_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::invalid(format!("cannot read config {}: {e}", path.display()))
    })?;
    let cfg: Config = toml::from_str(&text).map_err(|e| {
        Error::invalid(format!("config {}: {e}", path.display()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}
