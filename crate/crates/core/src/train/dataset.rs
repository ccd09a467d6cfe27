use super::manifest::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::model::{Inputs, Modality, ModelConfig};
use crate::tensor::Tensor;
use crate::text::EMBEDDING_DIM;

/// One labelled example with only the modalities the model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub clip_id: String,
    pub audio: Option<Tensor>,
    pub lyrics: Option<Tensor>,
    pub label: usize,
}

impl Sample {
    pub fn inputs(&self) -> Inputs<'_> {
        Inputs {
            audio: self.audio.as_ref(),
            lyrics: self.lyrics.as_ref(),
        }
    }
}

/// Errors with a config error when the manifest's grid or feature shapes
/// disagree with the model.
pub fn check_compatible(manifest: &DatasetManifest, config: &ModelConfig) -> Result<()> {
    if config.has(Modality::Lyrics) && manifest.grid != config.text_grid {
        return Err(Error::config(format!(
            "manifest lyrics grid {}×{} does not match model grid {}×{}",
            manifest.grid.lines, manifest.grid.words, config.text_grid.lines, config.text_grid.words
        )));
    }
    Ok(())
}

pub fn load_samples(manifest: &DatasetManifest, config: &ModelConfig, split: Option<Split>) -> Result<Vec<Sample>> {
    check_compatible(manifest, config)?;
    let [h, w] = config.audio_input;
    let audio_shape = [h, w, 1];
    let lyrics_shape = [config.text_grid.lines, config.text_grid.words, EMBEDDING_DIM];
    manifest
        .records_in(split)
        .map(|r| {
            let load = |p, expected: &[usize]| -> Result<Tensor> {
                let path = manifest.resolve(p);
                let t = Tensor::load(&path)?;
                if t.shape() != expected {
                    return Err(Error::config(format!(
                        "{}: feature shape {:?} but model expects {:?}",
                        path.display(),
                        t.shape(),
                        expected
                    )));
                }
                Ok(t)
            };
            Ok(Sample {
                clip_id: r.clip_id.clone(),
                audio: config
                    .has(Modality::Audio)
                    .then(|| load(&r.audio_feat, &audio_shape))
                    .transpose()?,
                lyrics: config
                    .has(Modality::Lyrics)
                    .then(|| load(&r.lyrics_feat, &lyrics_shape))
                    .transpose()?,
                label: r.label.index(),
            })
        })
        .collect()
}
