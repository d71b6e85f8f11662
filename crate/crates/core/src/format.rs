//! Versioned plain-text model files.
//!
//! Every file is a JSON object with a fixed envelope:
//!
//! ```text
//! {
//!   "format": "abcgan-model",
//!   "version": 1,
//!   "kind": "prior" | "gan",
//!   "scalar": "f64" | "f32",
//!   "payload": { ... }
//! }
//! ```
//!
//! The payload layouts are documented in `docs/FORMATS.md`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gan::{GanModel, GanVariant};
use crate::neural::Network;
use crate::priors::PriorModel;
use crate::scalar::Scalar;

pub const FORMAT_NAME: &str = "abcgan-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<P> {
    format: String,
    version: u32,
    kind: String,
    scalar: String,
    payload: P,
}

fn scalar_name<T: Scalar>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

fn to_text<T: Scalar, P: Serialize>(kind: &str, payload: &P) -> Result<String> {
    let env = Envelope {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        kind: kind.into(),
        scalar: scalar_name::<T>().into(),
        payload,
    };
    Ok(serde_json::to_string_pretty(&env)? + "\n")
}

fn from_text<T: Scalar, P: DeserializeOwned>(kind: &str, text: &str) -> Result<P> {
    let env: Envelope<serde_json::Value> = serde_json::from_str(text)?;
    if env.format != FORMAT_NAME {
        return Err(Error::Format(format!("format `{}`", env.format)));
    }
    if env.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "version {} (this build reads {FORMAT_VERSION})",
            env.version
        )));
    }
    if env.kind != kind {
        return Err(Error::Format(format!("expected a {kind} file, found `{}`", env.kind)));
    }
    if env.scalar != scalar_name::<T>() {
        return Err(Error::Format(format!(
            "file holds {} values, expected {}",
            env.scalar,
            scalar_name::<T>()
        )));
    }
    Ok(serde_json::from_value(env.payload)?)
}

pub fn prior_to_string<T: Scalar + Serialize>(model: &PriorModel<T>) -> Result<String> {
    to_text::<T, _>("prior", model)
}

pub fn prior_from_str<T: Scalar + DeserializeOwned>(text: &str) -> Result<PriorModel<T>> {
    from_text::<T, _>("prior", text)
}

pub fn gan_to_string<T: Scalar + Serialize>(model: &GanModel<T>) -> Result<String> {
    to_text::<T, _>("gan", model)
}

pub fn gan_from_str<T: Scalar + DeserializeOwned>(text: &str) -> Result<GanModel<T>> {
    let model: GanModel<T> = from_text::<T, _>("gan", text)?;
    let g = Network::new(model.generator.layers.clone())?;
    let d = Network::new(model.discriminator.layers.clone())?;
    if g.input_dim() != model.feature_dim + model.noise_dim || g.output_dim() != 1 {
        return Err(Error::Format(format!("generator dims {:?} do not fit the model", g.dims())));
    }
    if d.input_dim() != model.feature_dim + 1 || d.output_dim() != 1 {
        return Err(Error::Format(format!(
            "discriminator dims {:?} do not fit the model",
            d.dims()
        )));
    }
    if (model.variant == GanVariant::SkipGan) != model.skip.is_some() {
        return Err(Error::Format("skip state does not match the variant".into()));
    }
    Ok(model)
}

pub fn save_prior<T: Scalar + Serialize>(model: &PriorModel<T>, path: &Path) -> Result<()> {
    crate::data::write_atomic(path, prior_to_string(model)?.as_bytes())
}

pub fn load_prior<T: Scalar + DeserializeOwned>(path: &Path) -> Result<PriorModel<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    prior_from_str(&text)
}

pub fn save_gan<T: Scalar + Serialize>(model: &GanModel<T>, path: &Path) -> Result<()> {
    crate::data::write_atomic(path, gan_to_string(model)?.as_bytes())
}

pub fn load_gan<T: Scalar + DeserializeOwned>(path: &Path) -> Result<GanModel<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    gan_from_str(&text)
}
