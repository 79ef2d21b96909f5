//! Benchmark ingestion and the canonical instance model.
//!
//! Each public benchmark ships its dev split as JSON lines, sometimes with a
//! separate label file. [`load_benchmark`] turns any of them into an
//! [`InstanceSet`] whose instances carry a single prompt string, the ordered
//! choices and a 0-based correct index. The original record fields are kept
//! in `meta`, so the prompt join never loses information.
//!
//! | benchmark | prompt                    | choices                     | labels      |
//! |-----------|---------------------------|-----------------------------|-------------|
//! | aNLI      | `obs1 obs2`               | `hyp1`, `hyp2`              | `1`/`2`     |
//! | PIQA      | `goal`                    | `sol1`, `sol2`              | `0`/`1`     |
//! | SocialIQA | `context question`        | `answerA`..`answerC`        | `1`/`2`/`3` |
//! | HellaSwag | `ctx_a ctx_b`             | `endings[0..4]`             | `0`..`3`    |
//!
//! Field names can be overridden per call through a field map from the
//! logical names above to the keys actually present in the file.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probes::Lineage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Benchmark {
    Anli,
    Hellaswag,
    Piqa,
    Socialiqa,
    Synthetic,
}

impl Benchmark {
    pub const PUBLIC: [Benchmark; 4] = [Benchmark::Anli, Benchmark::Hellaswag, Benchmark::Piqa, Benchmark::Socialiqa];

    /// Fixed choice count of the public benchmarks; synthetic sets choose their own.
    pub fn num_choices(self) -> Option<usize> {
        match self {
            Benchmark::Anli | Benchmark::Piqa => Some(2),
            Benchmark::Socialiqa => Some(3),
            Benchmark::Hellaswag => Some(4),
            Benchmark::Synthetic => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Benchmark::Anli => "ANLI",
            Benchmark::Hellaswag => "HELLASWAG",
            Benchmark::Piqa => "PIQA",
            Benchmark::Socialiqa => "SOCIALIQA",
            Benchmark::Synthetic => "SYNTHETIC",
        }
    }

    fn id_prefix(self) -> &'static str {
        match self {
            Benchmark::Anli => "anli",
            Benchmark::Hellaswag => "hellaswag",
            Benchmark::Piqa => "piqa",
            Benchmark::Socialiqa => "socialiqa",
            Benchmark::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anli" | "alphanli" => Ok(Benchmark::Anli),
            "hellaswag" => Ok(Benchmark::Hellaswag),
            "piqa" => Ok(Benchmark::Piqa),
            "socialiqa" | "siqa" | "social_iqa" => Ok(Benchmark::Socialiqa),
            "synthetic" => Ok(Benchmark::Synthetic),
            _ => Err(Error::UnknownBenchmark(s.to_string())),
        }
    }
}

/// A prompt with an ordered choice set. Perturbed instances additionally
/// carry their probe lineage in `probe`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub benchmark: Benchmark,
    pub prompt: String,
    pub choices: Vec<String>,
    pub correct: Option<usize>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<Lineage>,
}

impl Instance {
    pub fn num_choices(&self) -> usize {
        self.choices.len()
    }

    pub fn correct_choice(&self) -> Option<&str> {
        self.correct.map(|i| self.choices[i].as_str())
    }

    pub fn is_perturbed(&self) -> bool {
        self.probe.is_some()
    }

    /// Per-instance invariants that do not depend on the enclosing set.
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::Schema { id: self.id.clone(), message };
        if self.id.is_empty() {
            return Err(fail("empty id".into()));
        }
        if self.choices.len() < 2 {
            return Err(fail(format!("{} choices, need at least 2", self.choices.len())));
        }
        if let Some(c) = self.correct {
            if c >= self.choices.len() {
                return Err(fail(format!("correct index {c} out of range for {} choices", self.choices.len())));
            }
        }
        if !self.is_perturbed() {
            if let Some(i) = self.choices.iter().position(|c| c.is_empty()) {
                return Err(fail(format!("choice {i} is empty")));
            }
        }
        if let Some(lineage) = &self.probe {
            lineage.validate_indices(self.choices.len()).map_err(fail)?;
        }
        Ok(())
    }
}

/// Instances of one benchmark sharing one choice count.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    pub benchmark: Benchmark,
    pub instances: Vec<Instance>,
    pub num_choices: usize,
}

impl InstanceSet {
    pub fn new(benchmark: Benchmark, instances: Vec<Instance>) -> Result<Self> {
        let first =
            instances.first().ok_or_else(|| Error::InvalidArgument(format!("empty {benchmark} instance set")))?;
        let num_choices = first.num_choices();
        let mut seen = HashSet::with_capacity(instances.len());
        for inst in &instances {
            inst.validate()?;
            let schema = |message: String| Error::Schema { id: inst.id.clone(), message };
            if inst.benchmark != benchmark {
                return Err(schema(format!("benchmark {} in a {benchmark} set", inst.benchmark)));
            }
            if !seen.insert(inst.id.as_str()) {
                return Err(schema("duplicate id".into()));
            }
            if inst.num_choices() != num_choices {
                return Err(schema(format!("{} choices, set has {num_choices}", inst.num_choices())));
            }
            // Choice paralysis deliberately widens the choice set.
            if let (Some(fixed), false) = (benchmark.num_choices(), inst.is_perturbed()) {
                if inst.num_choices() != fixed {
                    return Err(schema(format!("{} choices, {benchmark} has {fixed}", inst.num_choices())));
                }
            }
        }
        Ok(InstanceSet { benchmark, instances, num_choices })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Instance> {
        self.instances.iter()
    }
}

/// Logical field names of one benchmark layout, overridable by a field map.
#[derive(Debug, Clone)]
struct Layout {
    benchmark: Benchmark,
    fields: HashMap<&'static str, String>,
}

impl Layout {
    fn new(benchmark: Benchmark, field_map: Option<&HashMap<String, String>>) -> Result<Self> {
        let logical: &[&'static str] = match benchmark {
            Benchmark::Anli => &["id", "obs1", "obs2", "hyp1", "hyp2", "label"],
            Benchmark::Piqa => &["id", "goal", "sol1", "sol2", "label"],
            Benchmark::Socialiqa => &["id", "context", "question", "answerA", "answerB", "answerC", "label"],
            Benchmark::Hellaswag => &["id", "ctx_a", "ctx_b", "endings", "label"],
            Benchmark::Synthetic => {
                return Err(Error::InvalidArgument("synthetic sets are stored in the canonical format".into()))
            }
        };
        let mut fields: HashMap<&'static str, String> = logical
            .iter()
            .map(|&name| {
                let key = match (benchmark, name) {
                    (Benchmark::Anli, "id") => "story_id",
                    (Benchmark::Hellaswag, "id") => "ind",
                    _ => name,
                };
                (name, key.to_string())
            })
            .collect();
        if let Some(map) = field_map {
            for (from, to) in map {
                match fields.get_mut(from.as_str()) {
                    Some(slot) => *slot = to.clone(),
                    None => {
                        return Err(Error::InvalidArgument(format!("unknown {benchmark} field `{from}` in field map")))
                    }
                }
            }
        }
        Ok(Layout { benchmark, fields })
    }

    fn key(&self, logical: &str) -> &str {
        &self.fields[logical]
    }

    fn get<'r>(&self, record: &'r BTreeMap<String, String>, logical: &str) -> Result<&'r str> {
        let key = self.key(logical);
        record.get(key).map(String::as_str).ok_or_else(|| Error::MissingField { field: key.to_string() })
    }

    fn prompt(&self, record: &BTreeMap<String, String>) -> Result<String> {
        let parts: &[&str] = match self.benchmark {
            Benchmark::Anli => &["obs1", "obs2"],
            Benchmark::Piqa => &["goal"],
            Benchmark::Socialiqa => &["context", "question"],
            Benchmark::Hellaswag => &["ctx_a", "ctx_b"],
            Benchmark::Synthetic => unreachable!("layout is never built for synthetic"),
        };
        let parts = parts.iter().map(|p| self.get(record, p)).collect::<Result<Vec<_>>>()?;
        Ok(parts.join(" "))
    }

    fn choices(&self, record: &BTreeMap<String, String>) -> Result<Vec<String>> {
        let fields: &[&str] = match self.benchmark {
            Benchmark::Anli => &["hyp1", "hyp2"],
            Benchmark::Piqa => &["sol1", "sol2"],
            Benchmark::Socialiqa => &["answerA", "answerB", "answerC"],
            Benchmark::Hellaswag => {
                let raw = self.get(record, "endings")?;
                return serde_json::from_str::<Vec<String>>(raw).map_err(|e| {
                    Error::InvalidArgument(format!("`{}` is not a string list: {e}", self.key("endings")))
                });
            }
            Benchmark::Synthetic => unreachable!("layout is never built for synthetic"),
        };
        fields.iter().map(|f| self.get(record, f).map(str::to_string)).collect()
    }

    /// Maps a raw label to a 0-based index.
    fn label(&self, raw: &str) -> std::result::Result<usize, String> {
        let value: i64 =
            raw.trim().trim_matches('"').parse().map_err(|_| format!("label `{raw}` is not an integer"))?;
        let (base, n) = match self.benchmark {
            Benchmark::Anli => (1, 2),
            Benchmark::Socialiqa => (1, 3),
            Benchmark::Piqa => (0, 2),
            Benchmark::Hellaswag => (0, 4),
            Benchmark::Synthetic => unreachable!("layout is never built for synthetic"),
        };
        let idx = value - base;
        if (0..n).contains(&idx) {
            Ok(idx as usize)
        } else {
            Err(format!("label {value} outside {base}..{}", base + n - 1))
        }
    }
}

/// Joins a record's prompt fields with single spaces, using the benchmark's
/// default field names.
pub fn build_prompt(record: &BTreeMap<String, String>, kind: Benchmark) -> Result<String> {
    Layout::new(kind, None)?.prompt(record)
}

fn parse_record(line: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let serde_json::Value::Object(map) = value else {
        return Err("record is not a JSON object".into());
    };
    Ok(map
        .into_iter()
        .map(|(k, v)| {
            let v = match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            (k, v)
        })
        .collect())
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

/// Loads a benchmark split. `labels_path` is for layouts that keep labels in
/// a separate file; without it an inline label field is used when present,
/// otherwise instances are left unlabeled.
pub fn load_benchmark(
    kind: Benchmark,
    data_path: &Path,
    labels_path: Option<&Path>,
    field_map: Option<&HashMap<String, String>>,
) -> Result<InstanceSet> {
    if kind == Benchmark::Synthetic {
        let set = read_canonical(data_path)?;
        if set.benchmark != Benchmark::Synthetic {
            return Err(Error::InvalidArgument(format!("{} holds {} instances", data_path.display(), set.benchmark)));
        }
        return Ok(set);
    }
    let layout = Layout::new(kind, field_map)?;
    let lines = read_lines(data_path)?;
    if lines.is_empty() {
        return Err(Error::NoRecords { path: data_path.to_path_buf() });
    }
    let labels = match labels_path {
        Some(p) => {
            let labels = read_lines(p)?;
            if labels.len() != lines.len() {
                return Err(Error::LabelCount { records: lines.len(), labels: labels.len() });
            }
            Some((p, labels))
        }
        None => None,
    };

    let mut instances = Vec::with_capacity(lines.len());
    for (idx, (line_no, line)) in lines.iter().enumerate() {
        let parse_err = |message: String| Error::Parse { path: data_path.to_path_buf(), line: *line_no, message };
        let record = parse_record(line).map_err(parse_err)?;
        let prompt = layout.prompt(&record).map_err(|e| parse_err(e.to_string()))?;
        let choices = layout.choices(&record).map_err(|e| parse_err(e.to_string()))?;
        let correct = match &labels {
            Some((path, labels)) => {
                let (label_line, raw) = &labels[idx];
                Some(layout.label(raw).map_err(|message| Error::Parse {
                    path: path.to_path_buf(),
                    line: *label_line,
                    message,
                })?)
            }
            None => match record.get(layout.key("label")) {
                Some(raw) if raw != "null" => Some(layout.label(raw).map_err(parse_err)?),
                _ => None,
            },
        };
        let instance = Instance {
            id: format!("{}-{:05}", kind.id_prefix(), idx),
            benchmark: kind,
            prompt,
            choices,
            correct,
            meta: record,
            probe: None,
        };
        instance.validate().map_err(|e| parse_err(e.to_string()))?;
        instances.push(instance);
    }
    InstanceSet::new(kind, instances)
}

/// Writes one canonical JSON object per line.
pub fn write_canonical(set: &InstanceSet, path: &Path) -> Result<()> {
    write_instances(&set.instances, path)
}

pub(crate) fn write_instances(instances: &[Instance], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_canonical(path: &Path) -> Result<InstanceSet> {
    let lines = read_lines(path)?;
    if lines.is_empty() {
        return Err(Error::NoRecords { path: path.to_path_buf() });
    }
    let mut instances = Vec::with_capacity(lines.len());
    for (line_no, line) in lines {
        let inst: Instance = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        inst.validate()?;
        instances.push(inst);
    }
    let benchmark = instances[0].benchmark;
    InstanceSet::new(benchmark, instances)
}
