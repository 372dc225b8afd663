//! Parameterized linear-optical circuits and their JSON representation.
//!
//! Beam splitters follow the symmetric convention
//! `BS(η) = [[cos η, i·sin η], [i·sin η, cos η]]`, so a 50:50 splitter is
//! `η = π/4`. Phase shifters act as `exp(iθ n̂_k)`.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockState, UNITARY_TOL};

/// Angle of a phase shifter: either a named trainable parameter or a constant.
#[derive(Debug, Clone, PartialEq)]
pub enum Angle {
    Param(String),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    PhaseShifter {
        mode: usize,
        angle: Angle,
    },
    BeamSplitter {
        modes: (usize, usize),
        eta: f64,
    },
    Unitary {
        modes: Vec<usize>,
        matrix: DMatrix<Complex64>,
    },
}

impl Component {
    pub fn ps(mode: usize, param: impl Into<String>) -> Self {
        Component::PhaseShifter {
            mode,
            angle: Angle::Param(param.into()),
        }
    }

    pub fn ps_fixed(mode: usize, theta: f64) -> Self {
        Component::PhaseShifter {
            mode,
            angle: Angle::Fixed(theta),
        }
    }

    pub fn bs(j: usize, k: usize, eta: f64) -> Self {
        Component::BeamSplitter { modes: (j, k), eta }
    }

    /// 50:50 beam splitter.
    pub fn bs50(j: usize, k: usize) -> Self {
        Self::bs(j, k, std::f64::consts::FRAC_PI_4)
    }

    /// Modes the component couples or acts on.
    pub fn modes(&self) -> Vec<usize> {
        match self {
            Component::PhaseShifter { mode, .. } => vec![*mode],
            Component::BeamSplitter { modes, .. } => vec![modes.0, modes.1],
            Component::Unitary { modes, .. } => modes.clone(),
        }
    }

    pub fn param(&self) -> Option<&str> {
        match self {
            Component::PhaseShifter {
                angle: Angle::Param(name),
                ..
            } => Some(name),
            _ => None,
        }
    }

    fn validate(&self, modes: usize) -> Result<()> {
        let used = self.modes();
        if let Some(&bad) = used.iter().find(|&&k| k >= modes) {
            return Err(Error::ModeOutOfRange { mode: bad, modes });
        }
        let distinct: BTreeSet<_> = used.iter().collect();
        if distinct.len() != used.len() {
            return Err(Error::InvalidArgument(format!(
                "component acts twice on the same mode: {used:?}"
            )));
        }
        if let Component::Unitary { modes: sub, matrix } = self {
            if matrix.nrows() != sub.len() || matrix.ncols() != sub.len() {
                return Err(Error::Dimension(format!(
                    "{}x{} block on {} modes",
                    matrix.nrows(),
                    matrix.ncols(),
                    sub.len()
                )));
            }
            let deviation = unitarity_deviation(matrix);
            if deviation > UNITARY_TOL {
                return Err(Error::NotUnitary { deviation });
            }
        }
        Ok(())
    }
}

/// `max |U†U − I|` entrywise.
pub fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    let gram = u.adjoint() * u;
    let id = DMatrix::<Complex64>::identity(u.nrows(), u.ncols());
    (gram - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A component with every angle resolved to a number.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundComponent {
    PhaseShifter {
        mode: usize,
        theta: f64,
    },
    BeamSplitter {
        modes: (usize, usize),
        eta: f64,
    },
    Unitary {
        modes: Vec<usize>,
        matrix: DMatrix<Complex64>,
    },
}

impl BoundComponent {
    /// Left-multiplies `u` (an `m×m` mode matrix) by this component.
    pub(crate) fn apply_left(&self, u: &mut DMatrix<Complex64>) {
        match self {
            BoundComponent::PhaseShifter { mode, theta } => {
                let phase = Complex64::from_polar(1.0, *theta);
                u.row_mut(*mode).iter_mut().for_each(|z| *z *= phase);
            }
            BoundComponent::BeamSplitter { modes: (j, k), eta } => {
                let c = Complex64::new(eta.cos(), 0.0);
                let s = Complex64::new(0.0, eta.sin());
                for col in 0..u.ncols() {
                    let a = u[(*j, col)];
                    let b = u[(*k, col)];
                    u[(*j, col)] = c * a + s * b;
                    u[(*k, col)] = s * a + c * b;
                }
            }
            BoundComponent::Unitary { modes, matrix } => {
                for col in 0..u.ncols() {
                    let old: Vec<Complex64> = modes.iter().map(|&r| u[(r, col)]).collect();
                    for (i, &r) in modes.iter().enumerate() {
                        u[(r, col)] = (0..modes.len()).map(|l| matrix[(i, l)] * old[l]).sum();
                    }
                }
            }
        }
    }

    pub fn modes(&self) -> Vec<usize> {
        match self {
            BoundComponent::PhaseShifter { mode, .. } => vec![*mode],
            BoundComponent::BeamSplitter { modes, .. } => vec![modes.0, modes.1],
            BoundComponent::Unitary { modes, .. } => modes.clone(),
        }
    }
}

/// Ordered list of components on `m` modes with named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCircuit {
    modes: usize,
    components: Vec<Component>,
    parameters: Vec<String>,
}

impl ParamCircuit {
    /// Validates components; parameters are ordered by first appearance.
    pub fn new(modes: usize, components: Vec<Component>) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidArgument("circuit needs at least one mode".into()));
        }
        let mut parameters: Vec<String> = Vec::new();
        for c in &components {
            c.validate(modes)?;
            if let Some(name) = c.param() {
                if !parameters.iter().any(|p| p == name) {
                    parameters.push(name.to_string());
                }
            }
        }
        Ok(ParamCircuit {
            modes,
            components,
            parameters,
        })
    }

    pub fn empty(modes: usize) -> Result<Self> {
        Self::new(modes, Vec::new())
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn parameters(&self) -> &[String] {
        &self.parameters
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters.len()
    }

    pub fn parameter_index(&self, name: &str) -> Result<usize> {
        self.parameters
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    /// Component indices of every phase shifter tagged with `name`.
    pub fn occurrences(&self, name: &str) -> Result<Vec<usize>> {
        self.parameter_index(name)?;
        Ok(self
            .components
            .iter()
            .enumerate()
            .filter(|(_, c)| c.param() == Some(name))
            .map(|(i, _)| i)
            .collect())
    }

    /// Resolves every parameter from `theta` (indexed like [`Self::parameters`]).
    pub fn bind(&self, theta: &[f64]) -> Result<BoundCircuit> {
        if theta.len() != self.parameters.len() {
            return Err(Error::ParameterCount {
                expected: self.parameters.len(),
                got: theta.len(),
            });
        }
        let components = self
            .components
            .iter()
            .map(|c| match c {
                Component::PhaseShifter { mode, angle } => BoundComponent::PhaseShifter {
                    mode: *mode,
                    theta: match angle {
                        Angle::Fixed(t) => *t,
                        Angle::Param(name) => {
                            let idx = self.parameters.iter().position(|p| p == name).unwrap();
                            theta[idx]
                        }
                    },
                },
                Component::BeamSplitter { modes, eta } => BoundComponent::BeamSplitter {
                    modes: *modes,
                    eta: *eta,
                },
                Component::Unitary { modes, matrix } => BoundComponent::Unitary {
                    modes: modes.clone(),
                    matrix: matrix.clone(),
                },
            })
            .collect();
        Ok(BoundCircuit {
            modes: self.modes,
            components,
        })
    }

    /// Circuit JSON with an optional input state.
    pub fn to_json(&self, input: Option<&FockState>) -> serde_json::Value {
        let file = CircuitFile {
            modes: self.modes,
            components: self.components.iter().map(ComponentRepr::from).collect(),
            input: input.cloned(),
        };
        serde_json::to_value(file).expect("circuit serialization is infallible")
    }

    pub fn from_json_str(text: &str) -> Result<(Self, Option<FockState>)> {
        let file: CircuitFile =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("circuit JSON: {e}")))?;
        file.into_circuit()
    }

    pub fn load(path: &Path) -> Result<(Self, Option<FockState>)> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// A circuit with all angles fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCircuit {
    modes: usize,
    components: Vec<BoundComponent>,
}

impl BoundCircuit {
    pub fn new(modes: usize, components: Vec<BoundComponent>) -> Self {
        BoundCircuit { modes, components }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn components(&self) -> &[BoundComponent] {
        &self.components
    }

    /// Copy with the phase shifter at `component` advanced by `delta`.
    pub fn with_shift(&self, component: usize, delta: f64) -> BoundCircuit {
        let mut shifted = self.clone();
        if let Some(BoundComponent::PhaseShifter { theta, .. }) = shifted.components.get_mut(component) {
            *theta += delta;
        } else {
            panic!("component {component} is not a phase shifter");
        }
        shifted
    }

    /// Appends fixed components, e.g. a measurement-basis rotation.
    pub fn followed_by(&self, tail: &[BoundComponent]) -> BoundCircuit {
        let mut out = self.clone();
        out.components.extend_from_slice(tail);
        out
    }

    /// Splits into (before, after) around `component`, excluding it.
    pub fn split_at(&self, component: usize) -> (BoundCircuit, BoundCircuit) {
        (
            BoundCircuit::new(self.modes, self.components[..component].to_vec()),
            BoundCircuit::new(self.modes, self.components[component + 1..].to_vec()),
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitFile {
    modes: usize,
    components: Vec<ComponentRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<FockState>,
}

impl CircuitFile {
    fn into_circuit(self) -> Result<(ParamCircuit, Option<FockState>)> {
        let components = self
            .components
            .into_iter()
            .map(Component::try_from)
            .collect::<Result<Vec<_>>>()?;
        let circuit = ParamCircuit::new(self.modes, components)?;
        if let Some(input) = &self.input {
            if input.modes() != self.modes {
                return Err(Error::ModeMismatch {
                    expected: self.modes,
                    got: input.modes(),
                });
            }
        }
        Ok((circuit, self.input))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ComponentRepr {
    Ps {
        mode: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        param: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle: Option<f64>,
    },
    Bs {
        modes: [usize; 2],
        eta: f64,
    },
    Unitary {
        modes: Vec<usize>,
        matrix: Vec<[f64; 2]>,
    },
}

impl From<&Component> for ComponentRepr {
    fn from(c: &Component) -> Self {
        match c {
            Component::PhaseShifter { mode, angle } => match angle {
                Angle::Param(name) => ComponentRepr::Ps {
                    mode: *mode,
                    param: Some(name.clone()),
                    angle: None,
                },
                Angle::Fixed(t) => ComponentRepr::Ps {
                    mode: *mode,
                    param: None,
                    angle: Some(*t),
                },
            },
            Component::BeamSplitter { modes, eta } => ComponentRepr::Bs {
                modes: [modes.0, modes.1],
                eta: *eta,
            },
            Component::Unitary { modes, matrix } => {
                let d = modes.len();
                let mut flat = Vec::with_capacity(d * d);
                for r in 0..d {
                    for c in 0..d {
                        flat.push([matrix[(r, c)].re, matrix[(r, c)].im]);
                    }
                }
                ComponentRepr::Unitary {
                    modes: modes.clone(),
                    matrix: flat,
                }
            }
        }
    }
}

impl TryFrom<ComponentRepr> for Component {
    type Error = Error;

    fn try_from(repr: ComponentRepr) -> Result<Self> {
        match repr {
            ComponentRepr::Ps { mode, param, angle } => match (param, angle) {
                (Some(name), None) => Ok(Component::ps(mode, name)),
                (None, Some(t)) => Ok(Component::ps_fixed(mode, t)),
                _ => Err(Error::InvalidArgument(
                    "phase shifter needs exactly one of `param` or `angle`".into(),
                )),
            },
            ComponentRepr::Bs { modes, eta } => Ok(Component::bs(modes[0], modes[1], eta)),
            ComponentRepr::Unitary { modes, matrix } => {
                let d = modes.len();
                if matrix.len() != d * d {
                    return Err(Error::Dimension(format!(
                        "unitary on {d} modes needs {} entries, got {}",
                        d * d,
                        matrix.len()
                    )));
                }
                let m = DMatrix::from_fn(d, d, |r, c| {
                    let [re, im] = matrix[r * d + c];
                    Complex64::new(re, im)
                });
                Ok(Component::Unitary { modes, matrix: m })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters_in_order_of_first_use() {
        let c = ParamCircuit::new(
            3,
            vec![
                Component::ps(1, "b"),
                Component::bs50(0, 1),
                Component::ps(0, "a"),
                Component::ps(2, "b"),
            ],
        )
        .unwrap();
        assert_eq!(c.parameters(), &["b".to_string(), "a".to_string()]);
        assert_eq!(c.occurrences("b").unwrap(), vec![0, 3]);
        assert!(matches!(c.occurrences("z"), Err(Error::UnknownParameter(_))));
        assert!(matches!(
            c.bind(&[1.0]),
            Err(Error::ParameterCount { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn rejects_invalid_components() {
        assert!(matches!(
            ParamCircuit::new(2, vec![Component::bs50(0, 2)]),
            Err(Error::ModeOutOfRange { mode: 2, modes: 2 })
        ));
        assert!(ParamCircuit::new(2, vec![Component::bs50(1, 1)]).is_err());
        let not_unitary = Component::Unitary {
            modes: vec![0, 1],
            matrix: DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0)),
        };
        assert!(matches!(
            ParamCircuit::new(2, vec![not_unitary]),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"modes": 4, "components": [
            {"type": "ps", "mode": 0, "param": "theta_0"},
            {"type": "bs", "modes": [0, 1], "eta": 0.785398},
            {"type": "ps", "mode": 2, "angle": 0.5},
            {"type": "unitary", "modes": [2, 3], "matrix": [[0,0],[1,0],[1,0],[0,0]]}
        ], "input": [1,0,1,0]}"#;
        let (circuit, input) = ParamCircuit::from_json_str(text).unwrap();
        assert_eq!(circuit.modes(), 4);
        assert_eq!(circuit.parameters(), &["theta_0".to_string()]);
        assert_eq!(input, Some(FockState::new(vec![1, 0, 1, 0])));
        let json = circuit.to_json(input.as_ref());
        let (again, input2) = ParamCircuit::from_json_str(&json.to_string()).unwrap();
        assert_eq!(again, circuit);
        assert_eq!(input2, input);
    }

    #[test]
    fn json_errors() {
        assert!(ParamCircuit::from_json_str(r#"{"modes": 2, "components": [{"type": "ps", "mode": 0}]}"#).is_err());
        assert!(ParamCircuit::from_json_str(r#"{"modes": 2, "components": [], "input": [1]}"#).is_err());
        assert!(ParamCircuit::from_json_str(r#"{"modes": 2, "components": [{"type": "xx"}]}"#).is_err());
    }
}
