use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sofsyn::simulator::random_on_sphere;
use sofsyn::synthesis::SynthesisResult;
use sofsyn::system::{load_system, DisturbanceSignal, UncertainSystem, UncertaintySignal};
use sofsyn::{Matrix, SymmetricMatrix};

use crate::Failure;

pub fn system(path: &Path) -> Result<UncertainSystem, Failure> {
    load_system(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// A gain read from disk, with the certificate when the file carries one.
pub struct LoadedGain {
    pub k: Matrix,
    pub p: Option<SymmetricMatrix>,
    pub result: Option<SynthesisResult>,
}

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Accepts a results file (`{"result": {...}}`), a bare result object, or a
/// matrix given as an array of rows.
pub fn gain(path: &Path) -> Result<LoadedGain, Failure> {
    let value = read_json(path)?;
    let bad = |field: &str, e: String| Failure::Input(format!("{}: {field}: {e}", path.display()));
    if value.is_array() {
        let k: Matrix = serde_json::from_value(value).map_err(|e| bad("gain", e.to_string()))?;
        return Ok(LoadedGain {
            k,
            p: None,
            result: None,
        });
    }
    let inner = value.get("result").cloned().unwrap_or(value);
    let result: SynthesisResult = serde_json::from_value(inner).map_err(|e| bad("result", e.to_string()))?;
    let Some(k) = result.k.clone() else {
        return Err(bad(
            "result.k",
            format!("no gain recorded (status {:?})", result.status),
        ));
    };
    Ok(LoadedGain {
        k,
        p: result.p.clone(),
        result: Some(result),
    })
}

pub fn matrix(path: &Path) -> Result<Matrix, Failure> {
    serde_json::from_value(read_json(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Wraps a payload with a metadata block; the timestamp lives only there.
pub fn document(command: &str, payload: Value) -> Value {
    let seconds = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut doc = json!({
        "metadata": {
            "tool": "sofsyn",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "timestamp_unix": seconds,
        }
    });
    if let (Value::Object(d), Value::Object(p)) = (&mut doc, payload) {
        d.extend(p);
    }
    doc
}

pub fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn emit_json(out: Option<&PathBuf>, doc: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(doc).expect("json values serialize");
    match out {
        Some(path) => write(path, &(text + "\n")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn initial_state(spec: &str, n: usize, seed: u64) -> Result<Vec<f64>, Failure> {
    match spec {
        "random" => Ok(random_on_sphere(&mut ChaCha8Rng::seed_from_u64(seed), n, 1.0)),
        "zero" => Ok(vec![0.0; n]),
        list => {
            let values: Result<Vec<f64>, _> = list.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match values {
                Ok(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v),
                Ok(v) => Err(Failure::Input(format!(
                    "x0: expected {n} finite values, got {}",
                    v.len()
                ))),
                Err(e) => Err(Failure::Input(format!("x0: {e}"))),
            }
        }
    }
}

fn number(flag: &str, s: &str) -> Result<f64, Failure> {
    s.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Failure::Input(format!("{flag}: '{s}' is not a finite number")))
}

pub fn uncertainty(spec: &str, seed: u64) -> Result<UncertaintySignal, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["zero"] => Ok(UncertaintySignal::Zero),
        ["switching"] => Ok(UncertaintySignal::RandomSwitching { seed }),
        ["sinusoid", omega] => Ok(UncertaintySignal::Sinusoidal {
            omega: number("uncertainty", omega)?,
            phase: 0.0,
        }),
        ["sinusoid", omega, phase] => Ok(UncertaintySignal::Sinusoidal {
            omega: number("uncertainty", omega)?,
            phase: number("uncertainty", phase)?,
        }),
        _ => Err(Failure::Input(format!("uncertainty: unknown signal '{spec}'"))),
    }
}

pub fn disturbance(spec: &str, seed: u64) -> Result<DisturbanceSignal, Failure> {
    if let Some(path) = spec.strip_prefix("file:") {
        return DisturbanceSignal::load(path).map_err(|e| Failure::Input(format!("disturbance: {e}")));
    }
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["zero"] => Ok(DisturbanceSignal::Zero),
        ["impulse", amp] => Ok(DisturbanceSignal::Impulse {
            amplitude: number("disturbance", amp)?,
            at: 0,
        }),
        ["random", horizon, amp] => Ok(DisturbanceSignal::FiniteRandom {
            seed,
            horizon: horizon
                .parse()
                .map_err(|_| Failure::Input(format!("disturbance: '{horizon}' is not a step count")))?,
            amplitude: number("disturbance", amp)?,
        }),
        _ => Err(Failure::Input(format!("disturbance: unknown signal '{spec}'"))),
    }
}
