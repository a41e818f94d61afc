//! Briggs plume-rise parameterization for combined momentum and buoyancy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BriggsError {
    #[error("negative buoyancy flux {0} m^4/s^3: the rise formula only covers buoyant plumes")]
    NegativeBuoyancy(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, BriggsError>;

pub const DEFAULT_GRAVITY: f64 = 9.81;
pub const DEFAULT_ENTRAINMENT: f64 = 0.6;

/// One smokestack, as listed in a stack roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub id: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub height_m: f64,
    pub diameter_m: f64,
    pub exit_velocity_mps: f64,
    pub exit_temp_k: f64,
}

impl StackSpec {
    pub fn radius_m(&self) -> f64 {
        self.diameter_m / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diameter_m > 0.0) {
            return Err(BriggsError::InvalidInput(format!("stack {}: diameter must be positive", self.id)));
        }
        if !(self.exit_velocity_mps >= 0.0) {
            return Err(BriggsError::InvalidInput(format!(
                "stack {}: exit velocity must be nonnegative",
                self.id
            )));
        }
        if !(self.exit_temp_k > 0.0) {
            return Err(BriggsError::InvalidInput(format!(
                "stack {}: exit temperature must be positive",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmbientConditions {
    pub air_temp_k: f64,
    pub mean_wind_mps: f64,
    /// Effluent-to-air density ratio. Derived from temperatures when absent.
    #[serde(default)]
    pub density_ratio: Option<f64>,
    #[serde(default = "default_gravity")]
    pub gravity_mps2: f64,
    #[serde(default = "default_entrainment")]
    pub entrainment: f64,
}

fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}

fn default_entrainment() -> f64 {
    DEFAULT_ENTRAINMENT
}

impl AmbientConditions {
    pub fn new(air_temp_k: f64, mean_wind_mps: f64) -> Self {
        Self {
            air_temp_k,
            mean_wind_mps,
            density_ratio: None,
            gravity_mps2: DEFAULT_GRAVITY,
            entrainment: DEFAULT_ENTRAINMENT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.air_temp_k > 0.0) {
            return Err(BriggsError::InvalidInput("air temperature must be positive".into()));
        }
        if !(self.mean_wind_mps > 0.0) {
            return Err(BriggsError::InvalidInput("mean wind speed must be positive".into()));
        }
        if !(self.entrainment > 0.0 && self.entrainment <= 1.0) {
            return Err(BriggsError::InvalidInput("entrainment must lie in (0, 1]".into()));
        }
        if let Some(r) = self.density_ratio {
            if !(r > 0.0 && r < 2.0) {
                return Err(BriggsError::InvalidInput("density ratio must lie in (0, 2)".into()));
            }
        }
        Ok(())
    }
}

/// Which form of the buoyancy flux to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuoyancyForm {
    /// `(1 − ρs/ρ)·g·rs²·ws`, dimensionally consistent with the rise formula.
    #[default]
    Standard,
    /// Squared exit velocity, kept for side-by-side comparison only.
    VelocitySquared,
}

/// ρs/ρ, taken from the override or from T/Ts (ideal gas at equal pressure).
pub fn density_ratio(stack: &StackSpec, amb: &AmbientConditions) -> f64 {
    amb.density_ratio.unwrap_or(amb.air_temp_k / stack.exit_temp_k)
}

/// Momentum flux F_m in m⁴/s².
pub fn momentum_flux(stack: &StackSpec, amb: &AmbientConditions) -> f64 {
    momentum_flux_from(density_ratio(stack, amb), stack.radius_m(), stack.exit_velocity_mps)
}

pub fn momentum_flux_from(ratio: f64, radius_m: f64, exit_velocity_mps: f64) -> f64 {
    ratio * radius_m * radius_m * exit_velocity_mps * exit_velocity_mps
}

/// Buoyancy flux F_b in m⁴/s³ (standard form).
pub fn buoyancy_flux(stack: &StackSpec, amb: &AmbientConditions, form: BuoyancyForm) -> f64 {
    buoyancy_flux_from(
        density_ratio(stack, amb),
        amb.gravity_mps2,
        stack.radius_m(),
        stack.exit_velocity_mps,
        form,
    )
}

pub fn buoyancy_flux_from(ratio: f64, gravity: f64, radius_m: f64, exit_velocity_mps: f64, form: BuoyancyForm) -> f64 {
    let w = match form {
        BuoyancyForm::Standard => exit_velocity_mps,
        BuoyancyForm::VelocitySquared => exit_velocity_mps * exit_velocity_mps,
    };
    (1.0 - ratio) * gravity * radius_m * radius_m * w
}

/// Plume rise Δz at horizontal distance `x_m` downwind.
pub fn rise_at_distance(f_m: f64, f_b: f64, u_bar: f64, x_m: f64, entrainment: f64) -> Result<f64> {
    if f_b < 0.0 {
        return Err(BriggsError::NegativeBuoyancy(f_b));
    }
    if !(u_bar > 0.0) {
        return Err(BriggsError::InvalidInput(format!("wind speed must be positive, got {u_bar}")));
    }
    if !(x_m >= 0.0) {
        return Err(BriggsError::InvalidInput(format!("distance must be nonnegative, got {x_m}")));
    }
    if !(entrainment > 0.0) {
        return Err(BriggsError::InvalidInput("entrainment must be positive".into()));
    }
    let b2 = entrainment * entrainment;
    let momentum = 3.0 * f_m * x_m / (b2 * u_bar * u_bar);
    let buoyancy = 3.0 * f_b * x_m * x_m / (2.0 * b2 * u_bar * u_bar * u_bar);
    Ok((momentum + buoyancy).cbrt())
}

/// Convenience wrapper evaluating the rise for a stack under given conditions.
pub fn stack_rise(stack: &StackSpec, amb: &AmbientConditions, x_m: f64, form: BuoyancyForm) -> Result<f64> {
    stack.validate()?;
    amb.validate()?;
    rise_at_distance(
        momentum_flux(stack, amb),
        buoyancy_flux(stack, amb, form),
        amb.mean_wind_mps,
        x_m,
        amb.entrainment,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeRise {
    pub delta_z_m: f64,
    /// Number of rise evaluations performed.
    pub iterations: usize,
    pub converged: bool,
}

/// Rise with the wind evaluated at the plume's own height.
///
/// Starts with the wind at stack top; every step re-evaluates the wind at
/// the midpoint between stack top and plume top. Stops once successive
/// rises differ by less than `tol`. If `max_iter` is exhausted the last
/// iterate is returned with `converged == false`.
pub fn rise_iterative<F>(
    stack: &StackSpec,
    amb: &AmbientConditions,
    wind_profile: F,
    x_m: f64,
    tol: f64,
    max_iter: usize,
    form: BuoyancyForm,
) -> Result<IterativeRise>
where
    F: Fn(f64) -> f64,
{
    stack.validate()?;
    let f_m = momentum_flux(stack, amb);
    let f_b = buoyancy_flux(stack, amb, form);
    let mut prev = 0.0;
    let mut last = IterativeRise {
        delta_z_m: 0.0,
        iterations: 0,
        converged: false,
    };
    for k in 1..=max_iter.max(1) {
        let u = wind_profile(stack.height_m + prev / 2.0);
        if !(u > 0.0) {
            return Err(BriggsError::InvalidInput(format!(
                "wind profile is not positive at {:.1} m",
                stack.height_m + prev / 2.0
            )));
        }
        let dz = rise_at_distance(f_m, f_b, u, x_m, amb.entrainment)?;
        last = IterativeRise {
            delta_z_m: dz,
            iterations: k,
            converged: false,
        };
        // the stack-top starting guess counts as iterate zero
        if (dz - prev).abs() < tol {
            last.converged = true;
            return Ok(last);
        }
        prev = dz;
    }
    Ok(last)
}
