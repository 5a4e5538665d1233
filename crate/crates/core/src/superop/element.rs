use super::{AssemblyOptions, SuperopIndex};
use crate::beam::{radial_mode, BeamGeometry};
use crate::error::{Error, Result};
use crate::quadrature::integrate_3d;
use crate::scalar::{c_zero, Complex, Real};
use crate::turbulence::TurbulenceParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementValue<S> {
    pub value: Complex<S>,
    pub error_estimate: S,
    /// Integrand evaluations spent; zero when the selection rule short-circuits.
    pub evaluations: usize,
}

/// One superoperator element by adaptive 3-D cubature over `(r, r', μ)`.
///
/// The azimuthal difference integral is folded onto `[0, π]` as
/// `2∫₀^π cos(μ(l-l̃))·(…) dμ`, since the structure function depends on `μ`
/// only through `cos μ`. Radial axes are truncated at `radial_cutoff·w(z)`.
pub fn superop_element<S: Real>(
    index: SuperopIndex,
    geom: &BeamGeometry<S>,
    turb: &TurbulenceParams<S>,
    z: S,
    opts: &AssemblyOptions<S>,
) -> Result<ElementValue<S>> {
    if !index.satisfies_selection_rule() {
        return Ok(ElementValue {
            value: c_zero(),
            error_estimate: S::zero(),
            evaluations: 0,
        });
    }
    let sf = turb.structure_function(geom.wavelength(), z)?;
    let shift = S::lit((index.in_ket.l - index.out_ket.l) as f64);
    let r_max = opts.radial_cutoff * geom.beam_width(z);
    let half = S::lit(0.5);
    let prefactor = S::one() / S::pi();

    let integrand = |x: &[S; 3]| {
        let (r, rp, mu) = (x[0], x[1], x[2]);
        let left = radial_mode(geom, index.out_ket, r, z).conj() * radial_mode(geom, index.in_ket, r, z);
        let right = radial_mode(geom, index.out_bra, rp, z) * radial_mode(geom, index.in_bra, rp, z).conj();
        let sep2 = (r * r + rp * rp - S::lit(2.0) * r * rp * mu.cos()).max(S::zero());
        let damping = (-half * sf.phase_variance(sep2.sqrt())).exp();
        left * right * (r * rp * (shift * mu).cos() * damping * prefactor)
    };

    let res = integrate_3d(
        integrand,
        [S::zero(), S::zero(), S::zero()],
        [r_max, r_max, S::pi()],
        opts.tolerance,
    );
    if !res.converged {
        return Err(Error::ElementNotConverged {
            index,
            value_re: res.value.re.as_f64(),
            value_im: res.value.im.as_f64(),
            error_estimate: res.error_estimate.as_f64(),
        });
    }
    Ok(ElementValue {
        value: res.value,
        error_estimate: res.error_estimate,
        evaluations: res.evaluations,
    })
}
