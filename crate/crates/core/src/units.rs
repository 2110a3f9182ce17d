//! Strontium-87 presets and unit conversions.
//!
//! Internal units are microseconds, micrometres and radians with `hbar = 1`,
//! so every energy is an angular frequency in rad/us. A velocity in um/us is
//! numerically equal to the same velocity in m/s.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

pub const SR87_MASS_AMU: f64 = 86.909;
/// Intercombination line wavelength in um.
pub const SR87_WAVELENGTH_UM: f64 = 0.689;

pub fn sr87_mass_kg() -> f64 {
    SR87_MASS_AMU * ATOMIC_MASS_UNIT
}

/// `k = 2 pi / lambda` in rad/um.
pub fn wavenumber(wavelength_um: f64) -> f64 {
    2.0 * PI / wavelength_um
}

/// `omega_R = hbar k^2 / (2 M)` in rad/us.
pub fn recoil_frequency(wavelength_um: f64, mass_kg: f64) -> f64 {
    let k_si = wavenumber(wavelength_um) * 1e6;
    HBAR * k_si * k_si / (2.0 * mass_kg) * 1e-6
}

/// Sr-87 recoil frequency on the 689 nm line, about 2 pi x 4.84 kHz.
pub fn sr87_recoil_frequency() -> f64 {
    recoil_frequency(SR87_WAVELENGTH_UM, sr87_mass_kg())
}

/// Recoil temperature `hbar omega_R / k_B` in uK.
pub fn recoil_temperature_uk(recoil_rad_per_us: f64) -> f64 {
    HBAR * recoil_rad_per_us * 1e6 / K_B * 1e6
}

/// Thermal velocity `sqrt(k_B T / M)` in um/us for a temperature in uK;
/// `NaN` when `T < 0`.
pub fn thermal_velocity(temperature_uk: f64, mass_kg: f64) -> f64 {
    (K_B * temperature_uk * 1e-6 / mass_kg).sqrt()
}

/// Inverse of [`thermal_velocity`], in uK.
pub fn temperature_from_velocity(velocity: f64, mass_kg: f64) -> f64 {
    mass_kg * velocity * velocity / K_B * 1e6
}

pub fn sr87_thermal_velocity(temperature_uk: f64) -> f64 {
    thermal_velocity(temperature_uk, sr87_mass_kg())
}

pub fn sr87_temperature(velocity: f64) -> f64 {
    temperature_from_velocity(velocity, sr87_mass_kg())
}

/// Mass in kg implied by a wavenumber (rad/um) and recoil frequency (rad/us).
pub fn mass_from_recoil(k: f64, recoil: f64) -> f64 {
    let k_si = k * 1e6;
    HBAR * k_si * k_si / (2.0 * recoil * 1e6)
}

/// Converts a frequency in kHz to an angular frequency in rad/us.
pub fn khz_to_rad_per_us(khz: f64) -> f64 {
    2.0 * PI * khz * 1e-3
}

pub fn rad_per_us_to_khz(w: f64) -> f64 {
    w / (2.0 * PI) * 1e3
}
