//! Shear rate, power-law viscosity with Arrhenius temperature shift, and
//! viscous heating. Velocity gradients use `G[(i, j)] = ∂u_i/∂x_j`.

use crate::error::{Error, Result};
use crate::Mat3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProps {
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
    /// W/(m·K)
    pub conductivity: f64,
}

impl MaterialProps {
    pub fn new(density: f64, specific_heat: f64, conductivity: f64) -> Result<Self> {
        for (name, v) in [("density", density), ("specific heat", specific_heat), ("conductivity", conductivity)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(MaterialProps { density, specific_heat, conductivity })
    }

    pub fn kinematic_viscosity(&self, mu: f64) -> f64 {
        mu / self.density
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawModel {
    /// Pa·sⁿ
    pub consistency: f64,
    pub exponent: f64,
    /// 1/s
    pub shear_rate_floor: f64,
    /// Pa·s
    pub viscosity_min: f64,
    pub viscosity_max: f64,
}

impl PowerLawModel {
    pub const DEFAULT_FLOOR: f64 = 1e-6;
    pub const DEFAULT_MIN: f64 = 1e-3;
    pub const DEFAULT_MAX: f64 = 1e7;

    pub fn new(consistency: f64, exponent: f64) -> Result<Self> {
        let m = PowerLawModel {
            consistency,
            exponent,
            shear_rate_floor: Self::DEFAULT_FLOOR,
            viscosity_min: Self::DEFAULT_MIN,
            viscosity_max: Self::DEFAULT_MAX,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn newtonian(mu: f64) -> Result<Self> {
        Self::new(mu, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.consistency > 0.0) {
            return Err(Error::InvalidInput("consistency must be positive".into()));
        }
        if !(self.exponent > 0.0 && self.exponent <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "power-law exponent must lie in (0, 1], got {}",
                self.exponent
            )));
        }
        if !(self.shear_rate_floor > 0.0) {
            return Err(Error::InvalidInput("shear-rate floor must be positive".into()));
        }
        if !(self.viscosity_min > 0.0 && self.viscosity_min <= self.viscosity_max) {
            return Err(Error::InvalidInput("viscosity bounds must satisfy 0 < min <= max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrheniusShift {
    /// K
    pub activation_temperature: f64,
    /// K
    pub reference_temperature: f64,
}

impl ArrheniusShift {
    pub fn new(activation_temperature: f64, reference_temperature: f64) -> Result<Self> {
        if !(reference_temperature > 0.0) {
            return Err(Error::InvalidInput("reference temperature must be positive".into()));
        }
        Ok(ArrheniusShift { activation_temperature, reference_temperature })
    }

    /// No temperature dependence.
    pub fn none() -> Self {
        ArrheniusShift { activation_temperature: 0.0, reference_temperature: 1.0 }
    }
}

/// Symmetric part of the velocity gradient.
pub fn strain_rate(grad: &Mat3) -> Mat3 {
    (grad + grad.transpose()) * 0.5
}

/// `sqrt(2 D:D)`.
pub fn shear_rate(grad: &Mat3) -> f64 {
    let d = strain_rate(grad);
    (2.0 * d.component_mul(&d).sum()).sqrt()
}

/// `H(T) = exp(α (1/T − 1/T_r))`.
pub fn shift_factor(shift: &ArrheniusShift, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidInput(format!("temperature must be positive, got {temperature}")));
    }
    if shift.activation_temperature == 0.0 {
        return Ok(1.0);
    }
    Ok((shift.activation_temperature * (1.0 / temperature - 1.0 / shift.reference_temperature)).exp())
}

/// `clamp(H(T) K max(γ̇, γ̇_min)^(n−1), μ_min, μ_max)`.
pub fn viscosity(model: &PowerLawModel, shift: &ArrheniusShift, shear_rate: f64, temperature: f64) -> Result<f64> {
    let h = shift_factor(shift, temperature)?;
    let g = shear_rate.max(model.shear_rate_floor);
    let mu = if model.exponent == 1.0 {
        h * model.consistency
    } else {
        h * model.consistency * g.powf(model.exponent - 1.0)
    };
    Ok(mu.clamp(model.viscosity_min, model.viscosity_max))
}

/// Dissipated power per unit volume, `2 μ D:D`.
pub fn viscous_heating(mu: f64, grad: &Mat3) -> f64 {
    let d = strain_rate(grad);
    2.0 * mu * d.component_mul(&d).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rot(a: f64, b: f64, c: f64) -> Mat3 {
        *nalgebra::Rotation3::from_euler_angles(a, b, c).matrix()
    }

    #[test]
    fn shear_rate_examples() {
        let mut g = Mat3::zeros();
        g[(0, 1)] = 3.0;
        assert!((shear_rate(&g) - 3.0).abs() < 1e-15);
        assert!((viscous_heating(2.0, &g) - 18.0).abs() < 1e-12);
        let w = Mat3::new(0.0, -1.0, 0.5, 1.0, 0.0, -2.0, -0.5, 2.0, 0.0);
        assert_eq!(shear_rate(&w), 0.0);
        assert_eq!(viscous_heating(5.0, &w), 0.0);
    }

    #[test]
    fn shift_examples() {
        let s = ArrheniusShift::new(1000.0, 400.0).unwrap();
        assert_eq!(shift_factor(&s, 400.0).unwrap(), 1.0);
        let h = shift_factor(&s, 500.0).unwrap();
        assert!((h - (-0.5f64).exp()).abs() <= 1e-12 * h);
        assert!((h - 0.606531).abs() < 1e-6);
        assert_eq!(shift_factor(&ArrheniusShift::none(), 123.0).unwrap(), 1.0);
        assert!(shift_factor(&s, 0.0).is_err());
        assert!(shift_factor(&s, -3.0).is_err());
    }

    #[test]
    fn viscosity_examples() {
        let none = ArrheniusShift::none();
        let m = PowerLawModel::new(1000.0, 0.5).unwrap();
        assert!((viscosity(&m, &none, 4.0, 300.0).unwrap() - 500.0).abs() <= 1e-12 * 500.0);
        let newt = PowerLawModel::newtonian(7.0).unwrap();
        assert_eq!(viscosity(&newt, &none, 0.0, 300.0).unwrap(), 7.0);
        assert_eq!(viscosity(&newt, &none, 1e5, 300.0).unwrap(), 7.0);
        let floor = viscosity(&m, &none, m.shear_rate_floor, 1.0).unwrap();
        assert_eq!(viscosity(&m, &none, 0.0, 1.0).unwrap(), floor);
        assert!(PowerLawModel::new(1.0, 1.5).is_err());
        assert!(PowerLawModel::new(0.0, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn frame_invariance(v in proptest::collection::vec(-10.0f64..10.0, 9), a in 0.0f64..6.3, b in -1.5f64..1.5, c in 0.0f64..6.3) {
            let g = Mat3::from_row_slice(&v);
            let r = rot(a, b, c);
            let gr = r * g * r.transpose();
            prop_assert!((shear_rate(&g) - shear_rate(&gr)).abs() <= 1e-12 * (1.0 + shear_rate(&g)));
            prop_assert!((viscous_heating(1.3, &g) - viscous_heating(1.3, &gr)).abs() <= 1e-12 * (1.0 + viscous_heating(1.3, &g)));
            prop_assert!(viscous_heating(1.3, &g) >= 0.0);
        }

        #[test]
        fn shear_thinning_is_monotone(g1 in 1e-3f64..1e3, f in 1.01f64..10.0, n in 0.1f64..0.99) {
            let m = PowerLawModel { viscosity_min: 1e-300, viscosity_max: 1e300, ..PowerLawModel::new(10.0, n).unwrap() };
            let none = ArrheniusShift::none();
            prop_assert!(viscosity(&m, &none, g1 * f, 300.0).unwrap() < viscosity(&m, &none, g1, 300.0).unwrap());
        }

        #[test]
        fn viscosity_stays_in_bounds(g in 0.0f64..1e9, t in 1.0f64..2000.0, n in 0.05f64..1.0) {
            let m = PowerLawModel::new(100.0, n).unwrap();
            let s = ArrheniusShift::new(5000.0, 450.0).unwrap();
            let mu = viscosity(&m, &s, g, t).unwrap();
            prop_assert!(mu >= m.viscosity_min && mu <= m.viscosity_max);
        }
    }
}
