//! Problem configuration: key=value config files and the resolved
//! `ProblemSpec` consumed by the preset drivers.

use crate::error::{Error, Result};
use crate::material::{MaterialParameters, PlaneKind};
use crate::post::CircuitMode;
use crate::refelem::ElemShape;
use std::path::{Path, PathBuf};

/// How the stabilization parameter is chosen, in resolution order
/// explicit > estimated > formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaMode {
    Formula { alpha: f64 },
    Estimate,
    Explicit(f64),
}

/// Which couplings are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Uncoupled,
    PiezoOnly,
    Full,
}

impl Coupling {
    pub fn apply(&self, params: &MaterialParameters) -> MaterialParameters {
        match self {
            Coupling::Uncoupled => params.without_piezo().without_flexo(),
            Coupling::PiezoOnly => params.without_flexo(),
            Coupling::Full => params.clone(),
        }
    }
}

/// Fully resolved problem description.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub preset: Option<String>,
    pub dim: usize,
    pub shape: ElemShape,
    pub degree: usize,
    pub domain_lo: [f64; 3],
    pub domain_hi: [f64; 3],
    pub divisions: [usize; 3],
    pub mesh_file: Option<PathBuf>,
    pub levels: usize,
    pub material: MaterialParameters,
    pub coupling: Coupling,
    pub beta_mode: BetaMode,
    pub beta_d: Option<f64>,
    pub deterministic: bool,
    pub out_dir: PathBuf,
    pub circuit: CircuitMode,
    pub a_prime: Vec<f64>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec {
            preset: None,
            dim: 2,
            shape: ElemShape::Triangle,
            degree: 4,
            domain_lo: [0.0; 3],
            domain_hi: [1.0, 1.0, 0.0],
            divisions: [4, 4, 0],
            mesh_file: None,
            levels: 4,
            material: default_material(),
            coupling: Coupling::Full,
            beta_mode: BetaMode::Formula { alpha: 100.0 },
            beta_d: None,
            deterministic: false,
            out_dir: PathBuf::from("out"),
            circuit: CircuitMode::Open,
            a_prime: vec![1.76, 2.0, 4.0, 8.0],
        }
    }
}

/// Scalar set of the 2D verification problems.
pub fn default_material() -> MaterialParameters {
    MaterialParameters {
        young: 2.5,
        nu: 0.25,
        l: 1.1,
        kappa: [1.21, 1.21, 1.21],
        e_l: 7.2,
        e_t: 1.33,
        e_s: 1.73,
        mu_l: 1.5,
        mu_t: 1.34,
        mu_s: 5.47,
        piezo_axis: 0,
        plane: PlaneKind::PlaneStrain,
    }
}

/// Parses a key=value config file ('#' starts a comment).
pub fn parse_config(path: &Path) -> Result<ProblemSpec> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ProblemSpec> {
    let mut spec = ProblemSpec::default();
    let mut engineering_units = false;
    let mut saw_beta_mode: Option<String> = None;
    let mut saw_beta: Option<f64> = None;
    let mut saw_alpha: Option<f64> = None;

    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ln = ln + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse_at(ln, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let fparse = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::parse_at(ln, format!("key `{key}`: bad number `{v}`")))
        };
        let uparse = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::parse_at(ln, format!("key `{key}`: bad integer `{v}`")))
        };
        match key {
            "preset" => spec.preset = Some(value.to_string()),
            "dim" => {
                spec.dim = uparse(value)?;
                if spec.dim != 2 && spec.dim != 3 {
                    return Err(Error::parse_at(ln, format!("dim must be 2 or 3, got {value}")));
                }
            }
            "shape" => {
                spec.shape = match value.to_ascii_lowercase().as_str() {
                    "tri" | "triangle" => ElemShape::Triangle,
                    "quad" | "quadrilateral" => ElemShape::Quad,
                    "hex" | "hexahedron" => ElemShape::Hex,
                    other => {
                        return Err(Error::parse_at(ln, format!("unknown shape `{other}`")))
                    }
                }
            }
            "degree" | "p" => spec.degree = uparse(value)?,
            "levels" => spec.levels = uparse(value)?,
            "domain" => {
                let vals: Vec<f64> = value
                    .split(',')
                    .map(|t| fparse(t.trim()))
                    .collect::<Result<_>>()?;
                if vals.len() != 4 && vals.len() != 6 {
                    return Err(Error::parse_at(
                        ln,
                        "domain needs 4 (2D) or 6 (3D) comma-separated bounds",
                    ));
                }
                for (k, pair) in vals.chunks(2).enumerate() {
                    spec.domain_lo[k] = pair[0];
                    spec.domain_hi[k] = pair[1];
                }
            }
            "divisions" => {
                let vals: Vec<usize> = value
                    .split(',')
                    .map(|t| uparse(t.trim()))
                    .collect::<Result<_>>()?;
                if vals.is_empty() || vals.len() > 3 {
                    return Err(Error::parse_at(ln, "divisions needs 1..3 integers"));
                }
                for (k, &v) in vals.iter().enumerate() {
                    spec.divisions[k] = v;
                }
                if vals.len() == 1 {
                    spec.divisions[1] = vals[0];
                    spec.divisions[2] = vals[0];
                }
            }
            "mesh_file" => spec.mesh_file = Some(PathBuf::from(value)),
            "units" => {
                engineering_units = match value {
                    "si" => false,
                    "engineering" => true,
                    other => {
                        return Err(Error::parse_at(
                            ln,
                            format!("units must be `si` or `engineering`, got `{other}`"),
                        ))
                    }
                }
            }
            "E" | "young" => spec.material.young = fparse(value)?,
            "nu" => spec.material.nu = fparse(value)?,
            "l" => spec.material.l = fparse(value)?,
            "kappa" => {
                let vals: Vec<f64> = value
                    .split(',')
                    .map(|t| fparse(t.trim()))
                    .collect::<Result<_>>()?;
                match vals.len() {
                    1 => spec.material.kappa = [vals[0]; 3],
                    2 => spec.material.kappa = [vals[0], vals[1], vals[1]],
                    3 => spec.material.kappa = [vals[0], vals[1], vals[2]],
                    _ => return Err(Error::parse_at(ln, "kappa needs 1..3 values")),
                }
            }
            "e_l" => spec.material.e_l = fparse(value)?,
            "e_t" => spec.material.e_t = fparse(value)?,
            "e_s" => spec.material.e_s = fparse(value)?,
            "mu_l" => spec.material.mu_l = fparse(value)?,
            "mu_t" => spec.material.mu_t = fparse(value)?,
            "mu_s" => spec.material.mu_s = fparse(value)?,
            "piezo_axis" => spec.material.piezo_axis = uparse(value)?,
            "plane" => {
                spec.material.plane = match value {
                    "strain" => PlaneKind::PlaneStrain,
                    "stress" => PlaneKind::PlaneStress,
                    other => {
                        return Err(Error::parse_at(ln, format!("unknown plane kind `{other}`")))
                    }
                }
            }
            "coupling" => {
                spec.coupling = match value {
                    "uncoupled" => Coupling::Uncoupled,
                    "piezo" | "piezo-only" => Coupling::PiezoOnly,
                    "full" | "flexo" => Coupling::Full,
                    other => {
                        return Err(Error::parse_at(ln, format!("unknown coupling `{other}`")))
                    }
                }
            }
            "beta_mode" => saw_beta_mode = Some(value.to_string()),
            "beta" => saw_beta = Some(fparse(value)?),
            "alpha" => saw_alpha = Some(fparse(value)?),
            "beta_d" => spec.beta_d = Some(fparse(value)?),
            "deterministic" => {
                spec.deterministic = value
                    .parse()
                    .map_err(|_| Error::parse_at(ln, "deterministic must be true/false"))?
            }
            "out_dir" => spec.out_dir = PathBuf::from(value),
            "circuit" => {
                spec.circuit = match value {
                    "open" => CircuitMode::Open,
                    "closed" => CircuitMode::Closed,
                    other => {
                        return Err(Error::parse_at(ln, format!("unknown circuit `{other}`")))
                    }
                }
            }
            "a_prime" => {
                spec.a_prime = value
                    .split(',')
                    .map(|t| fparse(t.trim()))
                    .collect::<Result<_>>()?
            }
            other => {
                return Err(Error::parse_at(ln, format!("unknown key `{other}`")));
            }
        }
    }

    // resolve beta mode: explicit > estimated > formula (default alpha 100)
    spec.beta_mode = match (saw_beta_mode.as_deref(), saw_beta, saw_alpha) {
        (Some("formula"), Some(_), _) => {
            return Err(Error::parse(
                "conflicting configuration: beta_mode=formula together with an explicit beta value",
            ));
        }
        (Some("estimate"), Some(_), _) => {
            return Err(Error::parse(
                "conflicting configuration: beta_mode=estimate together with an explicit beta value",
            ));
        }
        (Some("explicit"), Some(b), _) => BetaMode::Explicit(b),
        (Some("explicit"), None, _) => {
            return Err(Error::parse("beta_mode=explicit requires a beta value"));
        }
        (Some("formula"), None, alpha) => BetaMode::Formula {
            alpha: alpha.unwrap_or(100.0),
        },
        (Some("estimate"), None, _) => BetaMode::Estimate,
        (Some(other), _, _) => {
            return Err(Error::parse(format!("unknown beta_mode `{other}`")));
        }
        (None, Some(b), _) => BetaMode::Explicit(b),
        (None, None, alpha) => BetaMode::Formula {
            alpha: alpha.unwrap_or(100.0),
        },
    };

    if engineering_units {
        // GPa, nJ/V^2/m, J/V/m^2, uJ/V/m -> SI
        spec.material.young *= 1e9;
        for k in spec.material.kappa.iter_mut() {
            *k *= 1e-9;
        }
        spec.material.mu_l *= 1e-6;
        spec.material.mu_t *= 1e-6;
        spec.material.mu_s *= 1e-6;
    }

    if spec.levels == 0 {
        return Err(Error::parse("levels must be >= 1"));
    }
    if spec.dim == 3 && spec.shape != ElemShape::Hex {
        spec.shape = ElemShape::Hex;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn minimal_config_fills_defaults() {
        let spec = parse_config_str("preset = convergence2d\n").unwrap();
        assert_eq!(spec.preset.as_deref(), Some("convergence2d"));
        assert_eq!(spec.degree, 4);
        assert_eq!(spec.levels, 4);
        match spec.beta_mode {
            BetaMode::Formula { alpha } => assert_eq!(alpha, 100.0),
            other => panic!("expected formula default, got {other:?}"),
        }
    }

    #[test]
    fn beta_conflict_rejected() {
        let err = parse_config_str("beta_mode = formula\nbeta = 5\n").unwrap_err();
        assert!(format!("{err}").contains("conflict"), "{err}");
        // bare beta implies explicit mode
        let spec = parse_config_str("beta = 5\n").unwrap();
        assert_eq!(spec.beta_mode, BetaMode::Explicit(5.0));
    }

    #[test]
    fn unknown_key_named_in_error() {
        let err = parse_config_str("frobnicate = 3\n").unwrap_err();
        assert!(format!("{err}").contains("frobnicate"));
    }

    #[test]
    fn engineering_units_normalized() {
        let text = "units = engineering\nE = 100\nkappa = 11, 12.48\nmu_t = 1\ne_t = -4.4\n";
        let spec = parse_config_str(text).unwrap();
        assert_relative_eq!(spec.material.young, 100e9);
        assert_relative_eq!(spec.material.kappa[0], 11e-9);
        assert_relative_eq!(spec.material.kappa[1], 12.48e-9);
        assert_relative_eq!(spec.material.mu_t, 1e-6);
        assert_relative_eq!(spec.material.e_t, -4.4);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let spec = parse_config_str("# a comment\n\np = 3 # trailing\n").unwrap();
        assert_eq!(spec.degree, 3);
    }
}
