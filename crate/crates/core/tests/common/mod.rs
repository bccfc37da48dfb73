#![allow(dead_code)]

use vfm_core::{ContactParams, ErmParams, ObjectGeometry, PlantParams};

pub const R_C: f64 = 7.75e-3;

pub fn hz(f: f64) -> f64 {
    std::f64::consts::TAU * f
}

/// The bundled disk: R = 100 mm, 50 g, driven at 240 Hz.
pub fn disk() -> PlantParams<f64> {
    PlantParams {
        object: ObjectGeometry::disk(0.1, 0.05, 0.002).unwrap(),
        erm: ErmParams::from_hz(5e-4, 2.2865e-3, 240.0).unwrap(),
        contact: ContactParams::new(1.0, 0.9, 1.0, 0.05).unwrap(),
    }
}

pub fn disk_at(f: f64) -> PlantParams<f64> {
    let mut p = disk();
    p.erm = p.erm.with_frequency(hz(f));
    p
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
