#![allow(dead_code)]

use oam_channel::beam::{BeamGeometry, TruncationSpec};
use oam_channel::superop::{assemble_superop, AssemblyOptions, SuperopMatrix};
use oam_channel::turbulence::TurbulenceParams;

pub const W0: f64 = 0.01;
pub const LAMBDA: f64 = 1e-6;
pub const CN2: f64 = 1e-14;

pub fn geom() -> BeamGeometry<f64> {
    BeamGeometry::new(W0, LAMBDA).unwrap()
}

pub fn turb() -> TurbulenceParams<f64> {
    TurbulenceParams::kolmogorov(CN2).unwrap()
}

pub fn assemble(max_in: u32, max_out: u32, z: f64) -> SuperopMatrix<f64> {
    let trunc = TruncationSpec::new(max_in, max_out).unwrap();
    assemble_superop(trunc, &geom(), &turb(), z, &AssemblyOptions::default()).unwrap()
}

pub fn max_norm(m: &nalgebra::DMatrix<nalgebra::Complex<f64>>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
