//! Semantic-drift scores over externally produced captions and scene graphs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cosine similarity of two caption embeddings, clamped to `[-1, 1]`.
pub fn caption_agreement(e1: &[f32], e2: &[f32]) -> Result<f64> {
    if e1.len() != e2.len() {
        return Err(Error::Shape(format!(
            "embedding lengths differ: {} vs {}",
            e1.len(),
            e2.len()
        )));
    }
    if e1.is_empty() {
        return Err(Error::Degenerate("empty embedding".into()));
    }
    let (mut dot, mut n1, mut n2) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in e1.iter().zip(e2) {
        let (a, b) = (a as f64, b as f64);
        dot += a * b;
        n1 += a * a;
        n2 += b * b;
    }
    if !(n1 > 0.0 && n2 > 0.0) || !dot.is_finite() {
        return Err(Error::Degenerate("zero or non-finite embedding".into()));
    }
    Ok((dot / (n1.sqrt() * n2.sqrt())).clamp(-1.0, 1.0))
}

/// `(subject, predicate, object)`.
pub type Triplet = (String, String, String);

/// Set of normalized relation triplets. Serialized as an array of 3-string arrays.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<[String; 3]>", into = "Vec<[String; 3]>")]
pub struct TripletSet {
    triplets: BTreeSet<Triplet>,
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl TripletSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, subject: &str, predicate: &str, object: &str) -> bool {
        self.triplets
            .insert((normalize(subject), normalize(predicate), normalize(object)))
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }
    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
    pub fn iter(&self) -> impl Iterator<Item = &Triplet> {
        self.triplets.iter()
    }
}

impl<S: AsRef<str>> FromIterator<[S; 3]> for TripletSet {
    fn from_iter<I: IntoIterator<Item = [S; 3]>>(iter: I) -> Self {
        let mut set = TripletSet::new();
        for [s, p, o] in iter {
            set.insert(s.as_ref(), p.as_ref(), o.as_ref());
        }
        set
    }
}

impl From<Vec<[String; 3]>> for TripletSet {
    fn from(v: Vec<[String; 3]>) -> Self {
        v.into_iter().collect()
    }
}

impl From<TripletSet> for Vec<[String; 3]> {
    fn from(t: TripletSet) -> Self {
        t.triplets.into_iter().map(|(s, p, o)| [s, p, o]).collect()
    }
}

/// Jaccard overlap; two empty sets are identical.
pub fn triplet_similarity(t1: &TripletSet, t2: &TripletSet) -> f64 {
    if t1.is_empty() && t2.is_empty() {
        return 1.0;
    }
    let inter = t1.triplets.intersection(&t2.triplets).count();
    let union = t1.len() + t2.len() - inter;
    inter as f64 / union as f64
}
