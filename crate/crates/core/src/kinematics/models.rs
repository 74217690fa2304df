//! Built-in arms.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Rotation3, Vector3};

use super::{BasePose, DhRow, SerialManipulator};

pub const BUILTIN_MODEL_NAMES: [&str; 4] = ["planar2_horizontal", "planar2_vertical", "panda7", "surrogate7_teacher"];

fn rot_x(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::x_axis(), angle).matrix()
}

fn planar2_horizontal() -> SerialManipulator {
    let rows = vec![DhRow::new(1.0, 0.0, 0.0, 0.0), DhRow::new(1.0, 0.0, 0.0, 0.0)];
    SerialManipulator::new("planar2_horizontal", rows, vec![(-PI, PI); 2], BasePose::default()).expect("valid model")
}

/// Same arm standing in the x-z plane.
fn planar2_vertical() -> SerialManipulator {
    planar2_horizontal()
        .with_base_rotation("planar2_vertical", rot_x(FRAC_PI_2))
        .expect("valid model")
}

/// Franka Emika Panda, flange frame, converted from the manufacturer's
/// modified-DH table to standard DH.
fn panda7() -> SerialManipulator {
    let rows = vec![
        DhRow::new(0.0, 0.333, -FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.0, FRAC_PI_2, 0.0),
        DhRow::new(0.0825, 0.316, FRAC_PI_2, 0.0),
        DhRow::new(-0.0825, 0.0, -FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.384, FRAC_PI_2, 0.0),
        DhRow::new(0.088, 0.0, FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.107, 0.0, 0.0),
    ];
    let limits = vec![
        (-2.8973, 2.8973),
        (-1.7628, 1.7628),
        (-2.8973, 2.8973),
        (-3.0718, -0.0698),
        (-2.8973, 2.8973),
        (-0.0175, 3.7525),
        (-2.8973, 2.8973),
    ];
    SerialManipulator::new("panda7", rows, limits, BasePose::default()).expect("valid model")
}

/// Synthetic 7-DoF human-arm stand-in: spherical shoulder, elbow, spherical
/// wrist; upper arm 0.30 m, forearm 0.25 m, hand 0.25 m; hanging down at
/// `q = 0`.
fn surrogate7_teacher() -> SerialManipulator {
    let rows = vec![
        DhRow::new(0.0, 0.0, -FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.0, FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.30, -FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.0, FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.25, -FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.0, FRAC_PI_2, 0.0),
        DhRow::new(0.0, 0.25, 0.0, 0.0),
    ];
    let limits = vec![
        (-1.57, 3.14),  // shoulder plane of elevation
        (-3.05, 0.35),  // shoulder elevation
        (-1.57, 1.57),  // humeral rotation
        (0.0, 2.53),    // elbow flexion
        (-1.40, 1.40),  // pronation / supination
        (-1.22, 1.22),  // wrist flexion
        (-0.35, 0.52),  // wrist deviation
    ];
    let base = BasePose {
        rotation: rot_x(PI),
        translation: Vector3::zeros(),
    };
    SerialManipulator::new("surrogate7_teacher", rows, limits, base).expect("valid model")
}

pub fn builtin_model(name: &str) -> Option<SerialManipulator> {
    match name {
        "planar2_horizontal" => Some(planar2_horizontal()),
        "planar2_vertical" => Some(planar2_vertical()),
        "panda7" => Some(panda7()),
        "surrogate7_teacher" => Some(surrogate7_teacher()),
        _ => None,
    }
}

pub fn builtin_models() -> Vec<SerialManipulator> {
    BUILTIN_MODEL_NAMES.iter().map(|n| builtin_model(n).expect("listed model exists")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn joint_counts() {
        let counts: Vec<_> = builtin_models().iter().map(|m| m.dof()).collect();
        assert_eq!(counts, vec![2, 2, 7, 7]);
        assert!(builtin_model("nope").is_none());
    }

    #[test]
    fn surrogate_reach_and_orientation() {
        let m = builtin_model("surrogate7_teacher").unwrap();
        let p = m.forward_kinematics(&[0.0; 7]).unwrap().end_effector;
        assert!((p - Vector3::new(0.0, 0.0, -0.8)).norm() < 1e-12);
    }

    #[test]
    fn panda_zero_pose() {
        // Flange height of the zero pose: 0.333 + 0.316 + 0.384 − 0.107, reaching 0.088 forward.
        let m = builtin_model("panda7").unwrap();
        let p = m.forward_kinematics(&[0.0; 7]).unwrap().end_effector;
        assert!((p - Vector3::new(0.088, 0.0, 0.926)).norm() < 1e-12, "{p}");
    }

    #[test]
    fn planar_pair_differs_by_base_rotation() {
        let h = builtin_model("planar2_horizontal").unwrap();
        let v = builtin_model("planar2_vertical").unwrap();
        let r = DMatrix::from_iterator(3, 3, rot_x(FRAC_PI_2).iter().copied());
        for q in [[0.3, 1.1], [-2.0, 0.4], [1.0, -2.5]] {
            let mh = h.manipulability(&q, 1e-4).unwrap();
            let mv = v.manipulability(&q, 1e-4).unwrap();
            assert!((mh.congruence(&r).matrix() - mv.matrix()).norm() < 1e-14);
        }
    }
}
