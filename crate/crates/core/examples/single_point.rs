//! Channel fidelity of the OAM qubit code at one distance and truncation.
//!
//! `cargo run --release --example single_point -- 500 1 3`

use oam_channel::aqec::{build_code, channel_fidelity};
use oam_channel::beam::{BeamGeometry, TruncationSpec};
use oam_channel::kraus::{completeness_deficiency, kraus_decompose, rearrange};
use oam_channel::superop::{assemble_superop, AssemblyOptions};
use oam_channel::turbulence::TurbulenceParams;

fn main() -> oam_channel::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let z: f64 = arg(0, "500").parse().expect("z in meters");
    let max_in: u32 = arg(1, "1").parse().expect("max_in");
    let max_out: u32 = arg(2, "3").parse().expect("max_out");

    let geom = BeamGeometry::new(0.01, 1e-6)?;
    let turb = TurbulenceParams::kolmogorov(1e-14)?;
    let trunc = TruncationSpec::new(max_in, max_out)?;

    let t = assemble_superop(trunc, &geom, &turb, z, &AssemblyOptions::default())?;
    let kraus = kraus_decompose(&rearrange(&t), 1e-12)?;
    let code = build_code(&trunc)?;
    let fidelity = channel_fidelity(&kraus, &code, 1e-10)?;
    let (_, deficiency) = completeness_deficiency(&kraus);

    println!("z = {z} m, max_in = {max_in}, max_out = {max_out}");
    println!("{} elements, {} Kraus operators", t.len(), kraus.len());
    println!("channel fidelity {fidelity:.4}, completeness deficiency {deficiency:.3e}");
    Ok(())
}
