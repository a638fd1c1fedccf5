//! JSON run configuration.
//!
//! ```json
//! {
//!   "n_max": 16, "dt": 0.001, "t_end": 0.5, "seed": 7,
//!   "scheme": "splitting", "project_each_step": true, "snapshot_stride": 0,
//!   "noise": { "m": 2, "c": [[0.6, 0.0], [0.0, 0.6]] },
//!   "initial": { "kind": "random", "decay": 3.0, "seed": 0 }
//! }
//! ```
//!
//! `scheme`, `project_each_step` and `snapshot_stride` are optional. The
//! initial datum is either `{"kind": "random", "decay", "seed"}` or
//! `{"kind": "eigenmode", "k": [k1, k2]}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{InitialCondition, Scheme, SimConfig};
use crate::operators::NoiseModel;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseDoc {
    m: usize,
    c: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    n_max: usize,
    dt: f64,
    t_end: f64,
    #[serde(default)]
    scheme: Scheme,
    #[serde(default = "default_projection")]
    project_each_step: bool,
    seed: u64,
    #[serde(default)]
    snapshot_stride: usize,
    noise: NoiseDoc,
    initial: InitialCondition,
}

fn default_projection() -> bool {
    true
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: ConfigDoc = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_err(&path, e.into_inner().to_string())
    })?;

    if doc.noise.m != doc.noise.c.len() {
        return Err(config_err(
            "noise.m",
            format!("m = {} but {} vectors were given", doc.noise.m, doc.noise.c.len()),
        ));
    }
    let noise = NoiseModel::new(doc.noise.c).map_err(|e| config_err("noise.c", e.to_string()))?;
    if !(doc.dt > 0.0 && doc.dt.is_finite()) {
        return Err(config_err("dt", format!("must be positive, got {}", doc.dt)));
    }
    if !(doc.t_end > 0.0 && doc.t_end.is_finite()) {
        return Err(config_err("t_end", format!("must be positive, got {}", doc.t_end)));
    }
    if doc.n_max == 0 {
        return Err(config_err("n_max", "must be at least 1"));
    }
    let cfg = SimConfig {
        n_max: doc.n_max,
        dt: doc.dt,
        t_end: doc.t_end,
        scheme: doc.scheme,
        project_each_step: doc.project_each_step,
        seed: doc.seed,
        snapshot_stride: doc.snapshot_stride,
        noise,
        initial: doc.initial,
    };
    cfg.steps().map_err(|e| config_err("t_end", e.to_string()))?;
    cfg.initial_field()
        .map_err(|e| config_err("initial", e.to_string()))?;
    Ok(cfg)
}

/// Serialize a configuration in the same schema, with every key explicit.
pub fn config_to_json(cfg: &SimConfig) -> String {
    let doc = ConfigDoc {
        n_max: cfg.n_max,
        dt: cfg.dt,
        t_end: cfg.t_end,
        scheme: cfg.scheme,
        project_each_step: cfg.project_each_step,
        seed: cfg.seed,
        snapshot_stride: cfg.snapshot_stride,
        noise: NoiseDoc {
            m: cfg.noise.m(),
            c: cfg.noise.vectors().to_vec(),
        },
        initial: cfg.initial.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("config serialization cannot fail")
}

pub(crate) fn config_to_value(cfg: &SimConfig) -> serde_json::Value {
    serde_json::from_str(&config_to_json(cfg)).expect("config json is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"{
        "n_max": 16, "dt": 0.001, "t_end": 0.5, "seed": 7,
        "noise": {"m": 2, "c": [[0.6, 0], [0, 0.6]]},
        "initial": {"kind": "random", "decay": 3.0, "seed": 0}
    }"#;

    fn path_of(e: Error) -> String {
        match e {
            Error::Config { path, .. } => path,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn reference_with_defaults() {
        let cfg = parse_config(REFERENCE).unwrap();
        assert_eq!(cfg.noise.k_c(), 0.6);
        assert_eq!(cfg.scheme, Scheme::Splitting);
        assert!(cfg.project_each_step);
        assert_eq!(cfg.snapshot_stride, 0);
        assert_eq!(cfg.steps().unwrap(), 500);
    }

    #[test]
    fn strong_noise_cites_assumption() {
        let text = REFERENCE.replace("[[0.6, 0], [0, 0.6]]", "[[1.0, 0.2]]").replace("\"m\": 2", "\"m\": 1");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(A.1)"), "{msg}");
        assert!(msg.contains("1.0198"), "{msg}");
        assert_eq!(path_of(err), "noise.c");
    }

    #[test]
    fn errors_name_keys() {
        let missing = REFERENCE.replace("\"dt\": 0.001, ", "");
        let err = parse_config(&missing).unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");

        let negative = REFERENCE.replace("0.001", "-0.001");
        assert_eq!(path_of(parse_config(&negative).unwrap_err()), "dt");

        let unknown = REFERENCE.replace("\"seed\": 7", "\"seed\": 7, \"viscosity\": 2");
        let err = parse_config(&unknown).unwrap_err();
        assert!(err.to_string().contains("viscosity"), "{err}");

        let malformed = REFERENCE.replace("[0, 0.6]", "[0, 0.6, 1]");
        assert_eq!(path_of(parse_config(&malformed).unwrap_err()), "noise.c[1]");

        let count = REFERENCE.replace("\"m\": 2", "\"m\": 3");
        assert_eq!(path_of(parse_config(&count).unwrap_err()), "noise.m");

        let decay = REFERENCE.replace("\"decay\": 3.0", "\"decay\": 1.5");
        assert_eq!(path_of(parse_config(&decay).unwrap_err()), "initial");

        let ragged = REFERENCE.replace("\"t_end\": 0.5", "\"t_end\": 0.5005");
        assert_eq!(path_of(parse_config(&ragged).unwrap_err()), "t_end");
    }

    #[test]
    fn round_trip() {
        let mut cfg = parse_config(REFERENCE).unwrap();
        cfg.dt = 0.1 + 0.2 - 0.3 + 1e-3;
        cfg.t_end = cfg.dt * 10.0;
        cfg.seed = u64::MAX;
        cfg.scheme = Scheme::Heun;
        cfg.snapshot_stride = 3;
        cfg.initial = InitialCondition::Eigenmode { k: [2, -1] };
        let back = parse_config(&config_to_json(&cfg)).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.dt.to_bits(), cfg.dt.to_bits());
    }
}
