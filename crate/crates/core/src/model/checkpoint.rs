//! Binary checkpoint format: the magic bytes `TSMTCKPT`, a little-endian
//! `u64` header length, a JSON header, then every array as little-endian
//! `f64` values at the offsets the header lists.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{TrainConfig, TsmtConfig};
use super::train::{EpochLog, TrainState};
use super::tsmt::Tsmt;
use crate::audio::FeatureStats;
use crate::error::{Error, Result};
use crate::motion::QuantizationSpec;
use crate::numerics::{AdamConfig, AdamState, Array};
use crate::Scalar;

pub const MAGIC: &[u8; 8] = b"TSMTCKPT";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model plus everything needed to feed it.
#[derive(Debug, Clone)]
pub struct Checkpoint<S> {
    pub model: Tsmt<S>,
    pub spec: QuantizationSpec,
    pub stats: FeatureStats,
    /// Dataset mean pose, the default generation seed.
    pub mean_pose: Vec<f64>,
    pub train: Option<(TrainConfig, TrainState<S>)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the payload.
    offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainHeader {
    config: TrainConfig,
    epoch: usize,
    adam: AdamConfig,
    adam_step: u64,
    log: Vec<EpochLog>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    config: TsmtConfig,
    quantization: QuantizationSpec,
    feature_stats: FeatureStats,
    mean_pose: Vec<f64>,
    arrays: Vec<ArrayEntry>,
    train: Option<TrainHeader>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl<S: Scalar> Checkpoint<S> {
    pub fn new(
        model: Tsmt<S>,
        spec: QuantizationSpec,
        stats: FeatureStats,
        mean_pose: Vec<f64>,
    ) -> Result<Self> {
        let ck = Self {
            model,
            spec,
            stats,
            mean_pose,
            train: None,
        };
        ck.validate()?;
        Ok(ck)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.model.config();
        self.spec.validate()?;
        if self.spec.dims() != c.pose_dims || self.spec.bins != c.bins {
            return Err(corrupt(format!(
                "quantization spec ({} dims, {} bins) does not match the model ({} dims, {} bins)",
                self.spec.dims(),
                self.spec.bins,
                c.pose_dims,
                c.bins
            )));
        }
        if self.mean_pose.len() != c.pose_dims {
            return Err(corrupt(format!(
                "mean pose has {} values, expected {}",
                self.mean_pose.len(),
                c.pose_dims
            )));
        }
        if self.stats.mean.len() != c.audio_dims || self.stats.std.len() != c.audio_dims {
            return Err(corrupt(
                "feature statistics do not match the audio feature width",
            ));
        }
        if !self.model.params().all_finite() {
            return Err(corrupt("non-finite parameter values"));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut arrays = Vec::new();
        let mut payload: Vec<u8> = Vec::new();
        let mut push = |name: String, a: &Array<S>, arrays: &mut Vec<ArrayEntry>| {
            arrays.push(ArrayEntry {
                name,
                shape: a.shape().to_vec(),
                offset: payload.len() as u64,
            });
            for v in a.data() {
                payload.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        };
        for (name, a) in self.model.params().iter() {
            push(name.to_string(), a, &mut arrays);
        }
        let train = match &self.train {
            Some((cfg, st)) => {
                for (i, (name, _)) in self.model.params().iter().enumerate() {
                    push(format!("adam.m/{name}"), &st.adam.m[i], &mut arrays);
                    push(format!("adam.v/{name}"), &st.adam.v[i], &mut arrays);
                }
                Some(TrainHeader {
                    config: cfg.clone(),
                    epoch: st.epoch,
                    adam: st.adam.config,
                    adam_step: st.adam.step,
                    log: st.log.clone(),
                })
            }
            None => None,
        };
        let header = Header {
            version: FORMAT_VERSION,
            config: self.model.config().clone(),
            quantization: self.spec.clone(),
            feature_stats: self.stats.clone(),
            mean_pose: self.mean_pose.clone(),
            arrays,
            train,
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(corrupt("missing checkpoint magic bytes"));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(16..16usize.saturating_add(hlen))
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| corrupt(format!("bad header: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(corrupt(format!(
                "unsupported checkpoint version {} (expected {FORMAT_VERSION})",
                header.version
            )));
        }
        let payload = &bytes[16 + hlen..];
        let read = |e: &ArrayEntry| -> Result<Array<S>> {
            let n: usize = e.shape.iter().product();
            let start = e.offset as usize;
            let raw = payload
                .get(start..start + n * 8)
                .ok_or_else(|| corrupt(format!("array {} runs past the payload", e.name)))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| S::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
                .collect();
            Array::new(&e.shape, data)
        };
        let find = |name: &str| -> Result<Array<S>> {
            let e = header
                .arrays
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| corrupt(format!("missing array {name}")))?;
            read(e)
        };
        let mut model = Tsmt::<S>::new(header.config.clone(), 0)?;
        let names: Vec<String> = model.params().iter().map(|(n, _)| n.to_string()).collect();
        for name in &names {
            model
                .params_mut()
                .set(name, find(name)?)
                .map_err(|e| corrupt(format!("{name}: {e}")))?;
        }
        let train = match header.train {
            Some(th) => {
                let mut m = Vec::with_capacity(names.len());
                let mut v = Vec::with_capacity(names.len());
                for name in &names {
                    m.push(find(&format!("adam.m/{name}"))?);
                    v.push(find(&format!("adam.v/{name}"))?);
                }
                let adam = AdamState {
                    config: th.adam,
                    step: th.adam_step,
                    m,
                    v,
                };
                Some((
                    th.config,
                    TrainState {
                        adam,
                        epoch: th.epoch,
                        log: th.log,
                    },
                ))
            }
            None => None,
        };
        let ck = Self {
            model,
            spec: header.quantization,
            stats: header.feature_stats,
            mean_pose: header.mean_pose,
            train,
        };
        ck.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable summary of the header.
    pub fn describe(&self) -> String {
        let c = self.model.config();
        let mut s = format!(
            "format version {FORMAT_VERSION}\nparameters {}\npose stream: D={} heads={}x{} blocks={}\n",
            self.model.parameter_count(),
            c.pose.model_dim,
            c.pose.heads,
            c.pose.head_dim,
            c.pose.blocks
        );
        if c.use_audio {
            s += &format!(
                "audio stream: D={} heads={}x{} blocks={} causal={}\n",
                c.audio.model_dim, c.audio.heads, c.audio.head_dim, c.audio.blocks, c.audio_causal
            );
        } else {
            s += "audio stream: disabled\n";
        }
        s += &format!("tokens: {} coordinates x {} bins\n", c.pose_dims, c.bins);
        match &self.train {
            Some((_, st)) => {
                s += &format!("trained epochs {}\n", st.epoch);
                if let Some(last) = st.log.last() {
                    s += &format!("last loss {:.6} at lr {:e}\n", last.loss, last.lr);
                }
            }
            None => s += "no training state\n",
        }
        s
    }
}
