//! Photon bounds for individual phase shifters from causal reachability.
//!
//! Each component couples all of its modes in both directions; phase shifters
//! couple nothing. A photon entering on mode `j` can only occupy modes reachable
//! from `j` through the components placed before a shifter, so the shifter sees
//! at most the photons whose reachable set contains its mode. Along that
//! shifter's angle, any expectation value is then a trigonometric polynomial of
//! degree at most that bound.

use super::circuit::{Component, ParamCircuit};
use crate::error::{Error, Result};
use crate::fock::FockState;

/// Bound for the phase shifter at `component` (an index into the circuit).
pub fn photon_bound_at(circuit: &ParamCircuit, input: &FockState, component: usize) -> Result<usize> {
    let comps = circuit.components();
    let target = match comps.get(component) {
        Some(Component::PhaseShifter { mode, .. }) => *mode,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "component {component} is not a phase shifter"
            )))
        }
    };
    if input.modes() != circuit.modes() {
        return Err(Error::ModeMismatch {
            expected: circuit.modes(),
            got: input.modes(),
        });
    }
    let mut bound = 0;
    for (source, &count) in input.occupations().iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mut reach = vec![false; circuit.modes()];
        reach[source] = true;
        for c in &comps[..component] {
            if matches!(c, Component::PhaseShifter { .. }) {
                continue;
            }
            let modes = c.modes();
            if modes.iter().any(|&k| reach[k]) {
                modes.iter().for_each(|&k| reach[k] = true);
            }
        }
        if reach[target] {
            bound += count;
        }
    }
    Ok(bound.min(input.photons()))
}

/// Bound for a parameter that tags exactly one phase shifter.
pub fn light_cone_photon_bound(circuit: &ParamCircuit, input: &FockState, parameter: &str) -> Result<usize> {
    let sites = circuit.occurrences(parameter)?;
    if sites.len() != 1 {
        return Err(Error::AmbiguousParameter {
            name: parameter.to_string(),
            count: sites.len(),
        });
    }
    photon_bound_at(circuit, input, sites[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::causal_cone_example;

    #[test]
    fn causal_cone_example_needs_one_photon() {
        let (circuit, input) = causal_cone_example();
        assert_eq!(input.photons(), 2);
        assert_eq!(light_cone_photon_bound(&circuit, &input, "phi").unwrap(), 1);
    }

    #[test]
    fn first_column_shifter_sees_its_own_mode() {
        let circuit = ParamCircuit::new(
            4,
            vec![Component::ps(1, "a"), Component::bs50(0, 1), Component::bs50(1, 2)],
        )
        .unwrap();
        let input = FockState::new(vec![1, 2, 0, 1]);
        assert_eq!(light_cone_photon_bound(&circuit, &input, "a").unwrap(), 2);
    }

    #[test]
    fn fully_connected_mesh_sees_everything() {
        let mut comps = Vec::new();
        for _ in 0..3 {
            for k in 0..3 {
                comps.push(Component::bs50(k, k + 1));
            }
        }
        comps.push(Component::ps(0, "x"));
        let circuit = ParamCircuit::new(4, comps).unwrap();
        let input = FockState::new(vec![0, 1, 1, 1]);
        assert_eq!(light_cone_photon_bound(&circuit, &input, "x").unwrap(), 3);
    }

    #[test]
    fn unoccupied_and_errors() {
        let circuit = ParamCircuit::new(
            3,
            vec![Component::ps(2, "x"), Component::ps(0, "y"), Component::ps(1, "y")],
        )
        .unwrap();
        let input = FockState::new(vec![1, 0, 0]);
        assert_eq!(light_cone_photon_bound(&circuit, &input, "x").unwrap(), 0);
        assert!(matches!(
            light_cone_photon_bound(&circuit, &input, "y"),
            Err(Error::AmbiguousParameter { count: 2, .. })
        ));
        assert!(matches!(
            light_cone_photon_bound(&circuit, &input, "nope"),
            Err(Error::UnknownParameter(_))
        ));
        assert_eq!(photon_bound_at(&circuit, &input, 1).unwrap(), 1);
    }
}
