//! Physical parameters of the mirror–cavity–atom system.
//!
//! Every rate and frequency is dimensionless in units of `gamma1` and ħ = 1.
//! The mirror enters the steady states only through the elastic constant
//! `kappa = M omega_M^2 l^2`; `omega_M`, `l` and `gammaM` matter for stability
//! and dynamics, so they are free but explicit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{ConfigError, ParamError};

/// Mirror damping rate as a fraction of `M * omega_M` when `gammaM` is not given.
pub const DEFAULT_MIRROR_DAMPING_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub gamma1: f64,
    /// Cavity decay rate.
    pub gamma0: f64,
    /// Decay of the metastable level |c>.
    pub gamma2: f64,
    /// Mirror damping. `None` means `0.1 * M * omega_M`.
    pub gamma_m: Option<f64>,
    /// Control-field Rabi frequency.
    pub omega: f64,
    /// Collective coupling g·sqrt(N).
    pub g_n: f64,
    /// Real input-drive amplitude.
    pub alpha_in: f64,
    /// Atomic |a>–|b> transition frequency.
    pub omega_a: f64,
    /// Control-field detuning.
    pub delta_c: f64,
    /// Elastic constant M omega_M^2 l^2.
    pub kappa: f64,
    pub omega_m: f64,
    /// Equilibrium cavity length.
    pub l: f64,
    /// Susceptibility prefactor mu^2 N / (eps0 V).
    pub f_scale: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

impl SystemParams {
    /// Showcase parameter set at kappa = 100.
    pub fn paper_defaults() -> Self {
        Self {
            gamma1: 1.0,
            gamma0: 1e-6,
            gamma2: 1e-4,
            gamma_m: None,
            omega: 2.0,
            g_n: 1e2,
            alpha_in: 10.0,
            omega_a: 1e6,
            delta_c: 0.0,
            kappa: 1e2,
            omega_m: 1.0,
            l: 1.0,
            f_scale: 1.0,
        }
    }

    /// Reduced-stiffness set for time-domain tests: rates span four decades
    /// instead of twelve, and multistability survives at kappa = 100.
    pub fn stiffness_reduced() -> Self {
        Self {
            gamma0: 1e-2,
            gamma2: 1e-2,
            omega_a: 1e3,
            g_n: 10.0,
            omega: 2.0,
            alpha_in: 2.0,
            kappa: 1e2,
            ..Self::paper_defaults()
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("gamma0", self.gamma0),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("omega_a", self.omega_a),
            ("omega_M", self.omega_m),
            ("l", self.l),
            ("kappa", self.kappa),
            ("alpha_in", self.alpha_in),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamError::new(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if let Some(g) = self.gamma_m {
            if !(g.is_finite() && g > 0.0) {
                return Err(ParamError::new("gammaM", format!("must be finite and > 0, got {g}")));
            }
        }
        for (field, v) in [("Omega", self.omega), ("gN", self.g_n)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ParamError::new(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (field, v) in [("Delta_c", self.delta_c), ("F_scale", self.f_scale)] {
            if !v.is_finite() {
                return Err(ParamError::new(field, format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Bare cavity frequency for a given atom–cavity detuning.
    pub fn omega0(&self, delta0: f64) -> f64 {
        self.omega_a - delta0
    }

    pub fn mirror_mass(&self) -> f64 {
        self.kappa / (self.omega_m * self.omega_m * self.l * self.l)
    }

    pub fn mirror_damping(&self) -> f64 {
        self.gamma_m
            .unwrap_or(DEFAULT_MIRROR_DAMPING_RATIO * self.mirror_mass() * self.omega_m)
    }

    /// Slope of the right-hand side Y_R: gamma0 kappa / (4 alpha_in^2 omega0^2).
    pub fn pressure_slope(&self, delta0: f64) -> f64 {
        let w0 = self.omega0(delta0);
        self.gamma0 * self.kappa / (4.0 * self.alpha_in * self.alpha_in * w0 * w0)
    }

    /// Optomechanical frequency pull omega0 / l.
    pub fn pull(&self, delta0: f64) -> f64 {
        self.omega0(delta0) / self.l
    }

    pub fn from_config_str(text: &str) -> Result<Self, ConfigError> {
        let mut p = Self::paper_defaults();
        let mut seen: Vec<&str> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let num: f64 = value.parse().map_err(|_| ConfigError::BadNumber {
                line,
                key: key.to_string(),
                value: value.to_string(),
            })?;
            let canonical = CONFIG_KEYS
                .iter()
                .copied()
                .find(|k| *k == key)
                .ok_or_else(|| ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                })?;
            if seen.contains(&canonical) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            seen.push(canonical);
            match canonical {
                "gamma1" => p.gamma1 = num,
                "gamma0" => p.gamma0 = num,
                "gamma2" => p.gamma2 = num,
                "gammaM" => p.gamma_m = Some(num),
                "Omega" => p.omega = num,
                "gN" => p.g_n = num,
                "alpha_in" => p.alpha_in = num,
                "omega_a" => p.omega_a = num,
                "Delta_c" => p.delta_c = num,
                "kappa" => p.kappa = num,
                "omega_M" => p.omega_m = num,
                "l" => p.l = num,
                _ => p.f_scale = num,
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn from_config_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_config_str(&text)
    }

    /// `(key, value)` pairs in config order, `gammaM` resolved to the value in use.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("gamma1", self.gamma1),
            ("gamma0", self.gamma0),
            ("gamma2", self.gamma2),
            ("gammaM", self.mirror_damping()),
            ("Omega", self.omega),
            ("gN", self.g_n),
            ("alpha_in", self.alpha_in),
            ("omega_a", self.omega_a),
            ("Delta_c", self.delta_c),
            ("kappa", self.kappa),
            ("omega_M", self.omega_m),
            ("l", self.l),
            ("F_scale", self.f_scale),
        ]
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v:e}");
        }
        out
    }
}

pub const CONFIG_KEYS: [&str; 13] = [
    "gamma1", "gamma0", "gamma2", "gammaM", "Omega", "gN", "alpha_in", "omega_a", "Delta_c",
    "kappa", "omega_M", "l", "F_scale",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_defaults_are_valid() {
        let p = SystemParams::paper_defaults();
        assert!(p.validate().is_ok());
        assert_eq!(p.kappa, 1e2);
        assert_eq!(p.delta_c, 0.0);
        assert_eq!(p.omega_a, 1e6);
    }

    #[test]
    fn zero_drive_is_rejected() {
        let p = SystemParams {
            alpha_in: 0.0,
            ..SystemParams::paper_defaults()
        };
        assert_eq!(p.validate().unwrap_err().field, "alpha_in");
    }

    #[test]
    fn negative_kappa_is_rejected() {
        let p = SystemParams::paper_defaults().with_kappa(-1.0);
        assert_eq!(p.validate().unwrap_err().field, "kappa");
    }

    #[test]
    fn omega0_subtracts_detuning() {
        let p = SystemParams::paper_defaults();
        assert_eq!(p.omega0(0.0), 1e6);
        assert_eq!(p.omega0(25.0), 999_975.0);
        assert_eq!(p.omega0(-5.0), 1_000_005.0);
    }

    #[test]
    fn mirror_mass_from_kappa() {
        let p = SystemParams::paper_defaults();
        assert_eq!(p.mirror_mass(), 1e2);
        assert_eq!(p.with_kappa(1e4).mirror_mass(), 1e4);
        let q = SystemParams {
            omega_m: 2.0,
            l: 5.0,
            ..p
        };
        assert_eq!(q.mirror_mass(), 1.0);
    }

    #[test]
    fn y_right_slope_example() {
        let p = SystemParams::paper_defaults();
        assert!((p.pressure_slope(0.0) - 2.5e-19).abs() < 1e-33);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let p = SystemParams::from_config_str("kappa = 1e4 # stiff\n\n# comment\nDelta_c=2\n")
            .unwrap();
        assert_eq!(p.kappa, 1e4);
        assert_eq!(p.delta_c, 2.0);
        assert_eq!(p.gamma_m, None);
        let q = SystemParams::from_config_str(&p.to_config_string()).unwrap();
        assert_eq!(q.kappa, p.kappa);
        assert_eq!(q.mirror_damping(), p.mirror_damping());

        assert!(matches!(
            SystemParams::from_config_str("kapa = 3"),
            Err(ConfigError::UnknownKey { line: 1, .. })
        ));
        assert!(matches!(
            SystemParams::from_config_str("kappa 3"),
            Err(ConfigError::Syntax { .. })
        ));
        assert!(matches!(
            SystemParams::from_config_str("kappa = x"),
            Err(ConfigError::BadNumber { .. })
        ));
        assert!(matches!(
            SystemParams::from_config_str("kappa = 1\nkappa = 2"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            SystemParams::from_config_str("alpha_in = 0"),
            Err(ConfigError::Invalid(ParamError { field: "alpha_in", .. }))
        ));
        let g = SystemParams::from_config_str("gammaM = 3.5").unwrap();
        assert_eq!(g.mirror_damping(), 3.5);
    }
}
