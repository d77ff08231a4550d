//! Per-subcommand configuration. Every subcommand has a flag struct with
//! optional fields and a resolved struct with defaults; a JSON config file
//! fills the defaults and explicit flags override the file.

use anyhow::{bail, Context};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{Map, Value};

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Generates `$args` (clap flags, all optional) and `$res` (resolved
/// values with defaults). Fields in the `optional` block stay optional
/// after resolution.
macro_rules! config {
    (
        $args:ident => $res:ident {
            $( $(#[doc = $doc:literal])* $([$($extra:tt)*])? $field:ident : $ty:ty = $def:expr ),* $(,)?
        }
        $( optional { $( $(#[doc = $odoc:literal])* $ofield:ident : $oty:ty ),* $(,)? } )?
    ) => {
        #[derive(Debug, Clone, Default, clap::Args, Serialize)]
        pub struct $args {
            $(
                $(#[doc = $doc])*
                #[arg(long, allow_negative_numbers = true $(, $($extra)*)?)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
            $($(
                $(#[doc = $odoc])*
                #[arg(long, allow_negative_numbers = true)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $ofield: Option<$oty>,
            )*)?
        }

        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $res {
            $( pub $field: $ty, )*
            $($( pub $ofield: Option<$oty>, )*)?
        }

        impl Default for $res {
            fn default() -> Self {
                Self {
                    $( $field: $def, )*
                    $($( $ofield: None, )*)?
                }
            }
        }
    };
}

config! {
    ThermoArgs => ThermoConfig {
        d: u32 = 3,
        s: f64 = 2.0,
        beta: f64 = 1.0,
        mu: f64 = 0.0,
        rho_bar: f64 = 0.1172,
        /// Box sides, comma separated.
        [value_delimiter = ','] l_chain: Vec<f64> = vec![4.0, 8.0, 16.0],
        /// Relative tolerance on ρ_c and on the density residuals.
        tol: f64 = 1e-6,
        seed: u64 = DEFAULT_SEED,
    }
}

config! {
    OrderParamArgs => OrderParamConfig {
        d: u32 = 3,
        s: f64 = 2.0,
        beta: f64 = 1.0,
        mu: f64 = 0.0,
        rho_bar: f64 = 0.1172,
        [value_delimiter = ','] l_chain: Vec<f64> = vec![4.0, 8.0, 16.0],
        seed: u64 = DEFAULT_SEED,
    }
}

config! {
    MixingArgs => MixingConfig {
        s: f64 = 2.0,
        beta: f64 = 1.0,
        rho_bar: f64 = 0.1172,
        /// Number of random Gaussian test functions.
        grid: usize = 10,
        /// quadrature or mc.
        mode: String = "quadrature".into(),
        samples: usize = 1_000_000,
        tol: f64 = 1e-8,
        sigmas: f64 = 4.0,
        seed: u64 = DEFAULT_SEED,
    }
}

config! {
    DecomposeArgs => DecomposeConfig {
        s: f64 = 2.0,
        beta: f64 = 1.0,
        rho_bar: f64 = 0.1172,
        /// Weyl coefficient of f.
        lambda: f64 = 1.0,
        /// Weyl coefficient of g.
        nu: f64 = 1.0,
        /// Gaussian f̂ as re,im,sigma.
        [value_delimiter = ','] f: Vec<f64> = vec![0.4, 0.0, 1.0],
        [value_delimiter = ','] g: Vec<f64> = vec![0.4, 0.0, 1.0],
        chi_tol: f64 = 1e-9,
        seed: u64 = DEFAULT_SEED,
    }
}

config! {
    ClusteringArgs => ClusteringConfig {
        s: f64 = 2.0,
        beta: f64 = 1.0,
        rho_bar: f64 = 0.1172,
        /// bec, nonzero or component.
        form: String = "component".into(),
        /// Component label (r, θ) for form=component.
        r: f64 = 1.0,
        theta: f64 = 0.4,
        [value_delimiter = ','] f: Vec<f64> = vec![1.0, 0.0, 1.0],
        [value_delimiter = ','] g: Vec<f64> = vec![0.5, 0.0, 0.6],
        [value_delimiter = ','] u: Vec<f64> = vec![10.0, 100.0, 1000.0],
        /// Required ratio gap(u_max)/gap(0) for factorizing states.
        ratio_tol: f64 = 1e-2,
        /// Required distance of ψ_bec to its non-factorized limit.
        limit_tol: f64 = 1e-4,
        seed: u64 = DEFAULT_SEED,
    }
}

config! {
    PathspaceArgs => PathspaceConfig {
        /// matsubara, trace, markov, correlation or sample.
        check: String = "matsubara".into(),
        beta: f64 = 1.0,
        eps: f64 = 1.0,
        /// Matsubara truncation.
        [alias = "N"] n_max: u64 = 10_000,
        [value_delimiter = ','] t: Vec<f64> = vec![0.0, 0.25, 0.5],
        d: u32 = 3,
        s: f64 = 2.0,
        mu: f64 = 0.0,
        l: f64 = 4.0,
        n_mats: u32 = 2,
        k_max_index: i64 = 1,
        /// Matsubara index of the single-mode Markov path.
        mode_n: i64 = 1,
        grid_points: usize = 512,
        samples: usize = 100_000,
        shift: f64 = 0.3,
        sigmas: f64 = 4.0,
        tol: f64 = 1e-10,
        seed: u64 = DEFAULT_SEED,
    }
    optional {
        /// Regularizer exponents; the standard set for s when omitted.
        reg_r: f64,
        reg_u: f64,
        reg_a: f64,
    }
}

config! {
    QuasilocalArgs => QuasilocalConfig {
        /// L0,m1,m2,...
        chain: String = "1,2,2".into(),
        beta: f64 = 1.0,
        s: f64 = 2.0,
        d: u32 = 3,
        n_mats: u32 = 1,
        k_max: f64 = std::f64::consts::TAU,
        /// Random level-0 vectors in the algebraic checks.
        grid: usize = 6,
        samples: usize = 100_000,
        tol: f64 = 1e-14,
        sigmas: f64 = 4.0,
        seed: u64 = DEFAULT_SEED,
    }
}

config! {
    AllArgs => AllConfig {
        samples: usize = 100_000,
        mixing_samples: usize = 1_000_000,
        sigmas: f64 = 4.0,
        seed: u64 = DEFAULT_SEED,
    }
    optional {
        /// Run only these criteria.
        only: String,
    }
}

/// Loads a config file as a JSON object. A key named after the
/// subcommand selects a nested section; otherwise the whole object is used.
pub fn load_file(path: &std::path::Path, command: &str) -> anyhow::Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let Value::Object(mut map) = value else { bail!("config file must hold a JSON object") };
    match map.remove(command) {
        Some(Value::Object(section)) => Ok(section),
        Some(_) => bail!("config section `{command}` must be an object"),
        None => Ok(map),
    }
}

/// Defaults, then file values, then explicit flags.
pub fn resolve<A: Serialize, R: Serialize + DeserializeOwned + Default>(
    flags: &A,
    file: Option<Map<String, Value>>,
) -> anyhow::Result<R> {
    let Value::Object(mut merged) = serde_json::to_value(R::default())? else { unreachable!() };
    for (k, v) in file.into_iter().flatten() {
        merged.insert(k, v);
    }
    if let Value::Object(explicit) = serde_json::to_value(flags)? {
        merged.extend(explicit);
    }
    serde_json::from_value(Value::Object(merged)).context("invalid configuration")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults_fill_gaps() {
        let flags = ThermoArgs { beta: Some(2.0), ..Default::default() };
        let file: Map<String, Value> = serde_json::from_str(r#"{"beta": 0.5, "rho_bar": 0.3}"#).unwrap();
        let cfg: ThermoConfig = resolve(&flags, Some(file)).unwrap();
        assert_eq!(cfg.beta, 2.0);
        assert_eq!(cfg.rho_bar, 0.3);
        assert_eq!(cfg.l_chain, vec![4.0, 8.0, 16.0]);
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let file: Map<String, Value> = serde_json::from_str(r#"{"betta": 0.5}"#).unwrap();
        assert!(resolve::<_, ThermoConfig>(&ThermoArgs::default(), Some(file)).is_err());
    }

    #[test]
    fn optional_fields_stay_unset() {
        let cfg: PathspaceConfig = resolve(&PathspaceArgs::default(), None).unwrap();
        assert_eq!(cfg.reg_a, None);
        assert_eq!(cfg.n_max, 10_000);
    }
}
