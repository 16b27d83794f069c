//! Domain types for videos, shots, concepts, queries and summaries, plus the
//! JSON dataset format.
//!
//! Past ingestion, concepts are identified by their index into the
//! [`ConceptDictionary`]. Shot indices are positions within their video.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, duplicate-free concept vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptDictionary {
    names: Vec<String>,
}

impl ConceptDictionary {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::validation("dictionary", "must contain at least one concept"));
        }
        let mut seen = HashSet::new();
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::validation(
                    format!("dictionary entry {i}"),
                    "concept name is empty",
                ));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::validation(
                    format!("dictionary entry {i}"),
                    format!("duplicate concept name '{name}'"),
                ));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// The set of concepts tagged in one shot, kept sorted and duplicate-free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SemanticVector {
    concepts: Vec<usize>,
}

impl SemanticVector {
    pub fn new<I: IntoIterator<Item = usize>>(concepts: I) -> Self {
        let mut concepts: Vec<usize> = concepts.into_iter().collect();
        concepts.sort_unstable();
        concepts.dedup();
        Self { concepts }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn contains(&self, concept: usize) -> bool {
        self.concepts.binary_search(&concept).is_ok()
    }

    pub fn intersects(&self, concepts: &[usize]) -> bool {
        concepts.iter().any(|&c| self.contains(c))
    }

    /// `|self ∩ other|` by a merge over both sorted lists.
    pub fn intersection_len(&self, other: &SemanticVector) -> usize {
        let (a, b) = (&self.concepts, &other.concepts);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    pub fn union_len(&self, other: &SemanticVector) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }

    pub fn max_index(&self) -> Option<usize> {
        self.concepts.last().copied()
    }
}

impl FromIterator<usize> for SemanticVector {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self::new(iter)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shot {
    pub tags: SemanticVector,
    /// `K` frame feature vectors; may be empty when only tags are needed.
    pub frames: Vec<Vec<f64>>,
}

impl Shot {
    pub fn tagged<I: IntoIterator<Item = usize>>(concepts: I) -> Self {
        Self {
            tags: SemanticVector::new(concepts),
            frames: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub id: String,
    /// Shot `i` of the video is `shots[i]`.
    pub shots: Vec<Shot>,
    pub segment_size: usize,
}

impl Video {
    pub fn new(id: impl Into<String>, shots: Vec<Shot>, segment_size: usize) -> Self {
        Self {
            id: id.into(),
            shots,
            segment_size,
        }
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    /// Frames per shot, if the video carries frame features.
    pub fn frames_per_shot(&self) -> Option<usize> {
        self.shots
            .first()
            .map(|s| s.frames.len())
            .filter(|&k| k > 0)
    }

    pub fn frame_dim(&self) -> Option<usize> {
        self.shots.first().and_then(|s| s.frames.first()).map(Vec::len)
    }

    pub fn has_frames(&self) -> bool {
        self.frames_per_shot().is_some()
    }

    pub fn segments(&self) -> Vec<Range<usize>> {
        segments(self.len(), self.segment_size)
    }

    fn validate(&self, dict: &ConceptDictionary) -> Result<()> {
        let entity = || format!("video '{}'", self.id);
        if self.id.is_empty() {
            return Err(Error::validation("video", "empty id"));
        }
        if self.segment_size == 0 {
            return Err(Error::validation(entity(), "segment_size must be >= 1"));
        }
        let k = self.shots.first().map_or(0, |s| s.frames.len());
        let d = self.frame_dim().unwrap_or(0);
        for (i, shot) in self.shots.iter().enumerate() {
            if let Some(max) = shot.tags.max_index() {
                if max >= dict.len() {
                    return Err(Error::validation(
                        format!("video '{}' shot {i}", self.id),
                        format!("concept index {max} out of range ({})", dict.len()),
                    ));
                }
            }
            if shot.frames.len() != k {
                return Err(Error::validation(
                    format!("video '{}' shot {i}", self.id),
                    format!("has {} frames, expected {k}", shot.frames.len()),
                ));
            }
            for frame in &shot.frames {
                if frame.len() != d || d == 0 {
                    return Err(Error::validation(
                        format!("video '{}' shot {i}", self.id),
                        format!("frame dimension {} differs from {d}", frame.len()),
                    ));
                }
                if frame.iter().any(|x| !x.is_finite()) {
                    return Err(Error::validation(
                        format!("video '{}' shot {i}", self.id),
                        "non-finite frame feature",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Consecutive shot ranges of length `segment_size`; the last may be shorter.
pub fn segments(n_shots: usize, segment_size: usize) -> Vec<Range<usize>> {
    assert!(segment_size >= 1, "segment_size must be >= 1");
    (0..n_shots)
        .step_by(segment_size)
        .map(|start| start..(start + segment_size).min(n_shots))
        .collect()
}

/// Query taxonomy by presence of the query concepts in the video.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// All concepts appear together in at least one shot.
    #[serde(rename = "i")]
    I,
    /// All concepts present, never jointly in a shot.
    #[serde(rename = "ii")]
    II,
    /// Exactly one concept present.
    #[serde(rename = "iii")]
    III,
    /// No concept present.
    #[serde(rename = "iv")]
    IV,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::I, Scenario::II, Scenario::III, Scenario::IV];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::I => "i",
            Scenario::II => "ii",
            Scenario::III => "iii",
            Scenario::IV => "iv",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub id: String,
    pub video: String,
    /// Sorted, duplicate-free concept indices.
    pub concepts: Vec<usize>,
    pub scenario: Option<Scenario>,
}

impl Query {
    pub fn new<I: IntoIterator<Item = usize>>(
        id: impl Into<String>,
        video: impl Into<String>,
        concepts: I,
        scenario: Option<Scenario>,
    ) -> Self {
        let mut concepts: Vec<usize> = concepts.into_iter().collect();
        concepts.sort_unstable();
        concepts.dedup();
        Self {
            id: id.into(),
            video: video.into(),
            concepts,
            scenario,
        }
    }
}

/// Dense 0/1 indicator of the query concepts over the dictionary.
pub fn indicator_vector(query: &Query, dict: &ConceptDictionary) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dict.len()];
    for &c in &query.concepts {
        if c >= dict.len() {
            return Err(Error::IndexOutOfRange {
                context: "query concepts",
                index: c,
                len: dict.len(),
            });
        }
        out[c] = 1.0;
    }
    Ok(out)
}

/// A set of shots of one video, optionally tied to a query and an annotator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summary {
    pub video: String,
    pub query: Option<String>,
    pub user: Option<String>,
    shots: Vec<usize>,
}

impl Summary {
    pub fn new<I: IntoIterator<Item = usize>>(video: impl Into<String>, shots: I) -> Self {
        let mut shots: Vec<usize> = shots.into_iter().collect();
        shots.sort_unstable();
        shots.dedup();
        Self {
            video: video.into(),
            query: None,
            user: None,
            shots,
        }
    }

    pub fn with_query(mut self, query: impl Into<String>) -> Self {
        self.query = Some(query.into());
        self
    }

    pub fn with_user(mut self, user: impl Into<String>) -> Self {
        self.user = Some(user.into());
        self
    }

    pub fn shots(&self) -> &[usize] {
        &self.shots
    }

    pub fn len(&self) -> usize {
        self.shots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    pub fn contains(&self, shot: usize) -> bool {
        self.shots.binary_search(&shot).is_ok()
    }

    /// Copy of this summary with a different shot set; labels are kept.
    pub fn with_shots<I: IntoIterator<Item = usize>>(&self, shots: I) -> Self {
        let mut out = Summary::new(self.video.clone(), shots);
        out.query = self.query.clone();
        out.user = self.user.clone();
        out
    }

    pub(crate) fn check_against(&self, video: &Video) -> Result<()> {
        if self.video != video.id {
            return Err(Error::VideoMismatch {
                expected: video.id.clone(),
                actual: self.video.clone(),
            });
        }
        if let Some(&last) = self.shots.last() {
            if last >= video.len() {
                return Err(Error::IndexOutOfRange {
                    context: "summary shots",
                    index: last,
                    len: video.len(),
                });
            }
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!(
            "summary (query '{}', user '{}')",
            self.query.as_deref().unwrap_or("-"),
            self.user.as_deref().unwrap_or("-")
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub dictionary: ConceptDictionary,
    pub videos: Vec<Video>,
    pub queries: Vec<Query>,
    pub user_summaries: Vec<Summary>,
    pub oracle_summaries: Option<Vec<Summary>>,
}

impl Dataset {
    pub fn video(&self, id: &str) -> Option<&Video> {
        self.videos.iter().find(|v| v.id == id)
    }

    pub fn query(&self, id: &str) -> Option<&Query> {
        self.queries.iter().find(|q| q.id == id)
    }

    pub fn queries_for<'a>(&'a self, video: &'a str) -> impl Iterator<Item = &'a Query> + 'a {
        self.queries.iter().filter(move |q| q.video == video)
    }

    pub fn user_summaries_for(&self, query: &str) -> Vec<&Summary> {
        self.user_summaries
            .iter()
            .filter(|s| s.query.as_deref() == Some(query))
            .collect()
    }

    pub fn oracle_for(&self, query: &str) -> Option<&Summary> {
        self.oracle_summaries
            .as_ref()?
            .iter()
            .find(|s| s.query.as_deref() == Some(query))
    }

    /// Checks every cross-reference and index in the dataset.
    pub fn validate(&self) -> Result<()> {
        let mut video_ids = HashSet::new();
        for video in &self.videos {
            if !video_ids.insert(video.id.as_str()) {
                return Err(Error::validation(
                    format!("video '{}'", video.id),
                    "duplicate video id",
                ));
            }
            video.validate(&self.dictionary)?;
        }

        let mut query_videos: HashMap<&str, &Video> = HashMap::new();
        for query in &self.queries {
            let entity = || format!("query '{}'", query.id);
            let video = self.video(&query.video).ok_or_else(|| {
                Error::validation(entity(), format!("unknown video '{}'", query.video))
            })?;
            if query_videos.insert(query.id.as_str(), video).is_some() {
                return Err(Error::validation(entity(), "duplicate query id"));
            }
            if query.concepts.is_empty() {
                return Err(Error::validation(entity(), "query has no concepts"));
            }
            if query.concepts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(entity(), "concepts not sorted and unique"));
            }
            if let Some(&c) = query.concepts.iter().find(|&&c| c >= self.dictionary.len()) {
                return Err(Error::validation(
                    entity(),
                    format!("concept index {c} out of range ({})", self.dictionary.len()),
                ));
            }
        }

        let oracles = self.oracle_summaries.iter().flatten();
        for summary in self.user_summaries.iter().chain(oracles) {
            let entity = || summary.describe();
            let query = summary
                .query
                .as_deref()
                .ok_or_else(|| Error::validation(entity(), "summary has no query"))?;
            let video = query_videos
                .get(query)
                .ok_or_else(|| Error::validation(entity(), format!("unknown query '{query}'")))?;
            if summary.video != video.id {
                return Err(Error::validation(
                    entity(),
                    format!("video '{}' differs from query video '{}'", summary.video, video.id),
                ));
            }
            if summary.shots.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(entity(), "duplicate shot index"));
            }
            if let Some(&s) = summary.shots.iter().find(|&&s| s >= video.len()) {
                return Err(Error::validation(
                    entity(),
                    format!("shot index {s} out of range for video '{}' ({} shots)", video.id, video.len()),
                ));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "dataset".into(),
            message: e.to_string(),
        })?;
        Self::from_file_repr(file)
    }

    /// Compact JSON with fixed field order; equal datasets give equal bytes.
    pub fn to_json_string(&self) -> String {
        let mut out = serde_json::to_string(&self.to_file_repr()).expect("dataset serializes");
        out.push('\n');
        out
    }

    fn from_file_repr(file: DatasetFile) -> Result<Self> {
        let dictionary = ConceptDictionary::new(file.dictionary)?;
        let videos = file
            .videos
            .into_iter()
            .map(|v| {
                let shots = v
                    .shots
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let tags = SemanticVector::new(s.concepts.iter().copied());
                        if tags.len() != s.concepts.len() {
                            return Err(Error::validation(
                                format!("video '{}' shot {i}", v.id),
                                "duplicate concept in shot tags",
                            ));
                        }
                        Ok(Shot {
                            tags,
                            frames: s.frames,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Video::new(v.id, shots, v.segment_size))
            })
            .collect::<Result<Vec<_>>>()?;

        let queries = file
            .queries
            .into_iter()
            .map(|q| {
                let query = Query::new(q.id.clone(), q.video, q.concepts.iter().copied(), q.scenario);
                if query.concepts.len() != q.concepts.len() {
                    return Err(Error::validation(
                        format!("query '{}'", q.id),
                        "duplicate concept in query",
                    ));
                }
                Ok(query)
            })
            .collect::<Result<Vec<_>>>()?;

        let query_video: HashMap<&str, &str> = queries
            .iter()
            .map(|q| (q.id.as_str(), q.video.as_str()))
            .collect();
        let to_summary = |r: SummaryRecord| -> Result<Summary> {
            let video = query_video.get(r.query.as_str()).ok_or_else(|| {
                Error::validation(
                    format!("summary (query '{}', user '{}')", r.query, r.user),
                    format!("unknown query '{}'", r.query),
                )
            })?;
            let summary = Summary::new(*video, r.shots.iter().copied())
                .with_query(r.query.clone())
                .with_user(r.user.clone());
            if summary.len() != r.shots.len() {
                return Err(Error::validation(summary.describe(), "duplicate shot index"));
            }
            Ok(summary)
        };
        let user_summaries = file
            .user_summaries
            .into_iter()
            .map(to_summary)
            .collect::<Result<Vec<_>>>()?;
        let oracle_summaries = file
            .oracle_summaries
            .map(|v| v.into_iter().map(to_summary).collect::<Result<Vec<_>>>())
            .transpose()?;

        let dataset = Dataset {
            dictionary,
            videos,
            queries,
            user_summaries,
            oracle_summaries,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    fn to_file_repr(&self) -> DatasetFile {
        let record = |s: &Summary| SummaryRecord {
            query: s.query.clone().unwrap_or_default(),
            user: s.user.clone().unwrap_or_default(),
            shots: s.shots.clone(),
        };
        DatasetFile {
            dictionary: self.dictionary.names.clone(),
            videos: self
                .videos
                .iter()
                .map(|v| VideoRecord {
                    id: v.id.clone(),
                    segment_size: v.segment_size,
                    shots: v
                        .shots
                        .iter()
                        .map(|s| ShotRecord {
                            concepts: s.tags.concepts.clone(),
                            frames: s.frames.clone(),
                        })
                        .collect(),
                })
                .collect(),
            queries: self
                .queries
                .iter()
                .map(|q| QueryRecord {
                    id: q.id.clone(),
                    video: q.video.clone(),
                    concepts: q.concepts.clone(),
                    scenario: q.scenario,
                })
                .collect(),
            user_summaries: self.user_summaries.iter().map(record).collect(),
            oracle_summaries: self
                .oracle_summaries
                .as_ref()
                .map(|v| v.iter().map(record).collect()),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let repr: DatasetFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
    Dataset::from_file_repr(repr)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writer
        .write_all(dataset.to_json_string().as_bytes())
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    dictionary: Vec<String>,
    videos: Vec<VideoRecord>,
    queries: Vec<QueryRecord>,
    user_summaries: Vec<SummaryRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle_summaries: Option<Vec<SummaryRecord>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VideoRecord {
    id: String,
    segment_size: usize,
    shots: Vec<ShotRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShotRecord {
    concepts: Vec<usize>,
    #[serde(default)]
    frames: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryRecord {
    id: String,
    video: String,
    concepts: Vec<usize>,
    scenario: Option<Scenario>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryRecord {
    query: String,
    user: String,
    shots: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "dictionary": ["Car", "Street", "Tree"],
        "videos": [{"id": "v1", "segment_size": 10,
                    "shots": [{"concepts": [0, 1], "frames": []},
                              {"concepts": [2], "frames": []}]}],
        "queries": [{"id": "q1", "video": "v1", "concepts": [0, 2], "scenario": "ii"}],
        "user_summaries": [{"query": "q1", "user": "u0", "shots": [1]}]
    }"#;

    #[test]
    fn loads_minimal_file() {
        let d = Dataset::from_json_str(MINIMAL).unwrap();
        assert_eq!(d.videos.len(), 1);
        assert_eq!(d.videos[0].len(), 2);
        assert_eq!(d.queries.len(), 1);
        assert_eq!(d.queries[0].scenario, Some(Scenario::II));
        assert_eq!(d.user_summaries.len(), 1);
        assert_eq!(d.user_summaries[0].video, "v1");
        assert!(d.oracle_summaries.is_none());
    }

    #[test]
    fn summary_with_bad_shot_is_rejected() {
        let text = MINIMAL.replace(r#""shots": [1]"#, r#""shots": [99]"#);
        let err = Dataset::from_json_str(&text).unwrap_err();
        let msg = err.to_string();
        assert_eq!(err.kind(), "validation");
        assert!(msg.contains("query 'q1'") && msg.contains("user 'u0'"), "{msg}");
        assert!(msg.contains("99"), "{msg}");
    }

    #[test]
    fn single_field_corruptions_are_rejected() {
        let cases = [
            (r#""concepts": [0, 1]"#, r#""concepts": [0, 7]"#),
            (r#""video": "v1""#, r#""video": "v9""#),
            (r#""shots": [1]"#, r#""shots": [1, 1]"#),
            (r#""concepts": [0, 2]"#, r#""concepts": [0, 5]"#),
            (r#""query": "q1""#, r#""query": "q7""#),
            (r#""segment_size": 10"#, r#""segment_size": 0"#),
            (r#""dictionary": ["Car", "Street", "Tree"]"#, r#""dictionary": ["Car", "Car", "Tree"]"#),
        ];
        for (from, to) in cases {
            let text = MINIMAL.replacen(from, to, 1);
            assert_ne!(text, MINIMAL, "pattern {from} not found");
            assert!(Dataset::from_json_str(&text).is_err(), "accepted corruption {to}");
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        let err = Dataset::from_json_str("{\"dictionary\": [").unwrap_err();
        assert_eq!(err.kind(), "parse");
    }

    #[test]
    fn inconsistent_frames_are_rejected() {
        let text = MINIMAL
            .replacen(r#""frames": []"#, r#""frames": [[0.1, 0.2]]"#, 1)
            .replacen(r#""frames": []"#, r#""frames": [[0.1]]"#, 1);
        assert!(Dataset::from_json_str(&text).is_err());
    }

    #[test]
    fn empty_query_list_is_written_as_array() {
        let mut d = Dataset::from_json_str(MINIMAL).unwrap();
        d.queries.clear();
        d.user_summaries.clear();
        let text = d.to_json_string();
        assert!(text.contains(r#""queries":[]"#), "{text}");
        assert!(text.contains(r#""user_summaries":[]"#), "{text}");
        assert!(!text.contains("oracle_summaries"));
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let d = Dataset::from_json_str(MINIMAL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        save_dataset(&d, &a).unwrap();
        save_dataset(&d, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(load_dataset(&a).unwrap(), d);
    }

    #[test]
    fn indicator_vector_marks_query_concepts() {
        let dict = ConceptDictionary::new(["a", "b", "c", "d"]).unwrap();
        let q = Query::new("q", "v", [1, 3], None);
        assert_eq!(indicator_vector(&q, &dict).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
        let empty = Query::new("q", "v", [], None);
        assert_eq!(indicator_vector(&empty, &dict).unwrap(), vec![0.0; 4]);
        let bad = Query::new("q", "v", [4], None);
        assert!(indicator_vector(&bad, &dict).is_err());
    }

    #[test]
    fn segments_keep_short_tail() {
        assert_eq!(segments(25, 10), vec![0..10, 10..20, 20..25]);
        assert_eq!(segments(10, 10), vec![0..10]);
        assert!(segments(0, 10).is_empty());
    }

    #[test]
    fn semantic_vector_set_ops() {
        let a = SemanticVector::new([0, 1]);
        let b = SemanticVector::new([1, 2, 3]);
        assert_eq!(a.intersection_len(&b), 1);
        assert_eq!(a.union_len(&b), 4);
        assert_eq!(SemanticVector::new([3, 1, 3]).as_slice(), &[1, 3]);
    }
}
