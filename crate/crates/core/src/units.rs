//! Unit conversions. Everything inside the engines is in Hartree atomic
//! units; these constants convert at the I/O boundary.

/// Hartree energy in electron volts.
pub const HARTREE_EV: f64 = 27.211386245988;

/// Atomic unit of time in femtoseconds.
pub const AU_TIME_FS: f64 = 2.4188843265857e-2;

/// Boltzmann constant in Hartree per kelvin.
pub const KB_AU: f64 = 3.166811563e-6;

pub fn ev_to_au(e: f64) -> f64 {
    e / HARTREE_EV
}

pub fn au_to_ev(e: f64) -> f64 {
    e * HARTREE_EV
}

pub fn fs_to_au(t: f64) -> f64 {
    t / AU_TIME_FS
}

pub fn au_to_fs(t: f64) -> f64 {
    t * AU_TIME_FS
}

/// Inverse temperature beta = 1/(k_B T) in atomic units from kelvin.
pub fn kelvin_to_beta(t_kelvin: f64) -> f64 {
    1.0 / (KB_AU * t_kelvin)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_temperature_beta() {
        let beta = kelvin_to_beta(298.0);
        assert!((beta - 1059.86).abs() / 1059.86 < 1e-3);
    }

    #[test]
    fn roundtrips() {
        assert!((au_to_ev(ev_to_au(1.7)) - 1.7).abs() < 1e-14);
        assert!((au_to_fs(fs_to_au(24.0)) - 24.0).abs() < 1e-12);
    }
}
