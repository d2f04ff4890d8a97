use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;

use crate::data::AnnotationTable;
use crate::dsp::{center_frame_offset, random_frame_offset, Spectrogram};
use crate::error::{Error, Result};

/// One song: its whole-length spectrogram and whichever annotations exist.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub spec: Arc<Spectrogram>,
    pub midlevel: Option<Vec<f64>>,
    pub emotion: Option<Vec<f64>>,
}

/// Examples keyed by song id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    examples: BTreeMap<String, Example>,
}

impl Dataset {
    /// Joins spectrograms with annotation tables.
    ///
    /// Songs are those of `emotion` when given, otherwise those of `midlevel`;
    /// the other table only contributes annotations. Every song needs a spectrogram.
    pub fn assemble(
        specs: &HashMap<String, Arc<Spectrogram>>,
        midlevel: Option<&AnnotationTable>,
        emotion: Option<&AnnotationTable>,
    ) -> Result<Dataset> {
        let primary = emotion.or(midlevel).ok_or_else(|| Error::EmptyInput("no annotation table".into()))?;
        let missing: Vec<String> = primary.ids().iter().filter(|id| !specs.contains_key(id.as_str())).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::Join { missing });
        }
        let examples = primary
            .ids()
            .iter()
            .map(|id| {
                let ex = Example {
                    id: id.clone(),
                    spec: specs[id].clone(),
                    midlevel: midlevel.and_then(|t| t.get(id)).map(<[f64]>::to_vec),
                    emotion: emotion.and_then(|t| t.get(id)).map(<[f64]>::to_vec),
                };
                (id.clone(), ex)
            })
            .collect();
        Ok(Dataset { examples })
    }

    pub fn from_examples(examples: Vec<Example>) -> Result<Dataset> {
        let mut map = BTreeMap::new();
        for ex in examples {
            if map.contains_key(&ex.id) {
                return Err(Error::Duplicate(ex.id));
            }
            map.insert(ex.id.clone(), ex);
        }
        Ok(Dataset { examples: map })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Sorted ids.
    pub fn ids(&self) -> Vec<String> {
        self.examples.keys().cloned().collect()
    }

    /// Ids of songs carrying the requested annotations.
    pub fn ids_with(&self, midlevel: bool, emotion: bool) -> Vec<String> {
        self.examples
            .values()
            .filter(|e| (!midlevel || e.midlevel.is_some()) && (!emotion || e.emotion.is_some()))
            .map(|e| e.id.clone())
            .collect()
    }

    pub fn get(&self, id: &str) -> Result<&Example> {
        self.examples.get(id).ok_or_else(|| Error::Lookup(id.to_string()))
    }

    /// Examples for `ids`, failing with a join error listing absent ids.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&Example>> {
        let missing: Vec<String> = ids.iter().filter(|id| !self.examples.contains_key(*id)).cloned().collect();
        if !missing.is_empty() {
            return Err(Error::Join { missing });
        }
        Ok(ids.iter().map(|id| &self.examples[id]).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Example> {
        self.examples.values()
    }
}

/// Network-sized crop of an example's spectrogram.
pub fn crop_for(ex: &Example, n_frames: usize, hop: usize, floor: f32, offset: usize) -> Result<Spectrogram> {
    ex.spec.crop(offset, n_frames, hop, floor)
}

pub fn random_crop<R: Rng + ?Sized>(ex: &Example, n_frames: usize, hop: usize, floor: f32, rng: &mut R) -> Result<Spectrogram> {
    crop_for(ex, n_frames, hop, floor, random_frame_offset(ex.spec.frames, n_frames, rng))
}

pub fn center_crop(ex: &Example, n_frames: usize, hop: usize, floor: f32) -> Result<Spectrogram> {
    crop_for(ex, n_frames, hop, floor, center_frame_offset(ex.spec.frames, n_frames))
}
