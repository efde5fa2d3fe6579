//! Attribute-tagged corpus to severity-split attacked dataset.
//!
//! Every image that survives filtering gets one severity, one seed and one
//! output file; the manifest lists it once per environmental group it
//! belongs to.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::attack::{apply_swap, derive_seed, sample_plan, AttackPlan, SamplerConfig, SeverityLevel, StripSpec};
use crate::bayer::BayerPattern;
use crate::image::{load_image, save_image, RgbImage};
use crate::packet::simulate_packet_loss;
use crate::rng::Xoshiro256;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: record {index}: {message}")]
    Parse {
        path: String,
        index: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("{path}: record {index} ({name}) has no {field}")]
    MissingField {
        path: String,
        index: usize,
        name: String,
        field: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Weather,
    Scene,
    Timeofday,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::Weather, Group::Scene, Group::Timeofday];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Weather => "weather",
            Group::Scene => "scene",
            Group::Timeofday => "timeofday",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Group::Weather => "Weather",
            Group::Scene => "Scene",
            Group::Timeofday => "Time of Day",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Channel-swap approximation.
    #[default]
    Swap,
    /// Row-packet loss model.
    Packet,
}

impl Engine {
    pub fn apply(self, img: &RgbImage, plan: &AttackPlan, pattern: BayerPattern) -> Result<RgbImage, String> {
        match self {
            Engine::Swap => apply_swap(img, plan, pattern).map_err(|e| e.to_string()),
            Engine::Packet => simulate_packet_loss(img, plan, pattern).map_err(|e| e.to_string()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Swap => "swap",
            Engine::Packet => "packet",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "swap" => Ok(Engine::Swap),
            "packet" => Ok(Engine::Packet),
            _ => Err(format!("unknown engine '{s}' (expected swap or packet)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageAttributes {
    pub name: String,
    pub weather: String,
    pub scene: String,
    pub timeofday: String,
}

impl ImageAttributes {
    pub fn new(name: &str, weather: &str, scene: &str, timeofday: &str) -> Self {
        Self {
            name: name.trim().to_owned(),
            weather: normalize(weather),
            scene: normalize(scene),
            timeofday: normalize(timeofday),
        }
    }

    pub fn value(&self, group: Group) -> &str {
        match group {
            Group::Weather => &self.weather,
            Group::Scene => &self.scene,
            Group::Timeofday => &self.timeofday,
        }
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

fn is_safe_relative(name: &str) -> bool {
    let p = Path::new(name);
    !name.is_empty() && p.components().all(|c| matches!(c, Component::Normal(_)))
}

/// Reads a JSON array of `{name, attributes: {weather, scene, timeofday}}`
/// records. Other keys are ignored.
pub fn ingest_attributes(path: &Path) -> Result<Vec<ImageAttributes>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_attributes(&text, &path.display().to_string())
}

pub fn parse_attributes(text: &str, origin: &str) -> Result<Vec<ImageAttributes>, DatasetError> {
    let root: Value = serde_json::from_str(text).map_err(|e| DatasetError::Json {
        path: origin.to_owned(),
        message: e.to_string(),
    })?;
    let Value::Array(records) = root else {
        return Err(DatasetError::Json {
            path: origin.to_owned(),
            message: "top level must be a JSON array".into(),
        });
    };
    records
        .iter()
        .enumerate()
        .map(|(index, rec)| {
            let parse = |message: String| DatasetError::Parse {
                path: origin.to_owned(),
                index,
                message,
            };
            let obj = rec.as_object().ok_or_else(|| parse("record is not an object".into()))?;
            let name = match obj.get("name") {
                Some(Value::String(s)) => s.trim().to_owned(),
                Some(_) => return Err(parse("name is not a string".into())),
                None => {
                    return Err(DatasetError::MissingField {
                        path: origin.to_owned(),
                        index,
                        name: "<unnamed>".into(),
                        field: "name".into(),
                    })
                }
            };
            if !is_safe_relative(&name) {
                return Err(parse(format!("name {name:?} must be a plain relative path")));
            }
            let missing = |field: &str| DatasetError::MissingField {
                path: origin.to_owned(),
                index,
                name: name.clone(),
                field: field.to_owned(),
            };
            let attrs = match obj.get("attributes") {
                Some(Value::Object(a)) => a,
                Some(_) => return Err(parse("attributes is not an object".into())),
                None => return Err(missing("attributes")),
            };
            let field = |key: &str| match attrs.get(key) {
                Some(Value::String(s)) => Ok(s.as_str()),
                Some(_) => Err(parse(format!("attributes.{key} is not a string"))),
                None => Err(missing(&format!("attributes.{key}"))),
            };
            Ok(ImageAttributes::new(
                &name,
                field("weather")?,
                field("scene")?,
                field("timeofday")?,
            ))
        })
        .collect()
}

/// Which subcategories of each group take part in the dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubcategoryFilter {
    pub weather: Vec<String>,
    pub scene: Vec<String>,
    pub timeofday: Vec<String>,
    /// Allowed subcategories with fewer images than this are dropped too.
    pub min_images: usize,
}

impl Default for SubcategoryFilter {
    fn default() -> Self {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        Self {
            weather: owned(&["overcast", "clear", "rainy", "snowy", "partly cloudy"]),
            scene: owned(&["city street", "highway", "residential"]),
            timeofday: owned(&["daytime", "night", "dawn"]),
            min_images: 0,
        }
    }
}

/// Subcategory of each group an item belongs to, if any.
pub type Membership = [Option<String>; 3];

impl SubcategoryFilter {
    pub fn allowed(&self, group: Group) -> &[String] {
        match group {
            Group::Weather => &self.weather,
            Group::Scene => &self.scene,
            Group::Timeofday => &self.timeofday,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for g in Group::ALL {
            if self.allowed(g).is_empty() {
                return Err(DatasetError::Config(format!("empty allow-list for {g}")));
            }
        }
        Ok(())
    }

    /// Applies the allow-lists, then the per-subcategory `min_images` floor.
    pub fn memberships(&self, items: &[ImageAttributes]) -> Vec<Membership> {
        let mut out: Vec<Membership> = items
            .iter()
            .map(|it| {
                Group::ALL.map(|g| {
                    let v = it.value(g);
                    self.allowed(g)
                        .iter()
                        .any(|a| normalize(a) == v)
                        .then(|| v.to_owned())
                })
            })
            .collect();
        if self.min_images > 0 {
            for gi in 0..3 {
                let mut counts: HashMap<String, usize> = HashMap::new();
                for m in &out {
                    if let Some(v) = &m[gi] {
                        *counts.entry(v.clone()).or_default() += 1;
                    }
                }
                for m in &mut out {
                    if m[gi].as_ref().is_some_and(|v| counts[v] < self.min_images) {
                        m[gi] = None;
                    }
                }
            }
        }
        out
    }
}

/// Assigns one severity per item, every attribute value counting as a
/// subcategory. See [`partition_memberships`].
pub fn partition_severity(items: &[ImageAttributes], seed: u64) -> Vec<SeverityLevel> {
    let members: Vec<Membership> = items
        .iter()
        .map(|it| Group::ALL.map(|g| Some(it.value(g).to_owned())))
        .collect();
    partition_memberships(&members, seed)
}

/// Splits items into four severity groups that are as equal as possible
/// inside every subcategory of every group at once.
///
/// Items are bucketed by their full (weather, scene, timeofday) cell. Each
/// cell, in sorted order, is shuffled with a seed derived from `seed` and
/// the cell name, then dealt round-robin Unattacked, Mild, Moderate, Severe,
/// the deal continuing from where the previous cell stopped. A greedy pass
/// then moves single items to another severity while that lowers the summed
/// squared imbalance over all subcategories. An item in only one group is
/// always balanced to within one; with overlapping groups the local optimum
/// is usually, not provably, within one.
pub fn partition_memberships(members: &[Membership], seed: u64) -> Vec<SeverityLevel> {
    let mut cells: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, m) in members.iter().enumerate() {
        let key = Group::ALL
            .iter()
            .zip(m)
            .map(|(g, v)| format!("{g}={}", v.as_deref().unwrap_or("-")))
            .collect::<Vec<_>>()
            .join("|");
        cells.entry(key).or_default().push(i);
    }

    let mut assigned = vec![SeverityLevel::Unattacked; members.len()];
    let mut deal = 0usize;
    for (key, mut idx) in cells {
        Xoshiro256::seed_from_u64(derive_seed(seed, &key)).shuffle(&mut idx);
        for i in idx {
            assigned[i] = SeverityLevel::ALL[deal % 4];
            deal += 1;
        }
    }
    balance(members, &mut assigned);
    assigned
}

type SubKey<'a> = (usize, &'a str);

struct Balancer<'a> {
    keys: Vec<Vec<SubKey<'a>>>,
    counts: BTreeMap<SubKey<'a>, [i64; 4]>,
    assigned: Vec<usize>,
}

impl<'a> Balancer<'a> {
    fn new(members: &'a [Membership], assigned: &[SeverityLevel]) -> Self {
        let keys: Vec<Vec<SubKey>> = members
            .iter()
            .map(|m| {
                m.iter()
                    .enumerate()
                    .filter_map(|(g, v)| v.as_deref().map(|v| (g, v)))
                    .collect()
            })
            .collect();
        let mut counts: BTreeMap<SubKey, [i64; 4]> = BTreeMap::new();
        for (ks, s) in keys.iter().zip(assigned) {
            for k in ks {
                counts.entry(*k).or_default()[*s as usize] += 1;
            }
        }
        Self {
            keys,
            counts,
            assigned: assigned.iter().map(|&s| s as usize).collect(),
        }
    }

    // Moving one item from a to b changes sum_k (4 c_k - n)^2 of each of its
    // subcategories by 32 (c_b - c_a + 1); this returns the sum of those
    // brackets.
    fn delta(&self, item: usize, to: usize) -> i64 {
        let from = self.assigned[item];
        self.keys[item]
            .iter()
            .map(|k| self.counts[k][to] - self.counts[k][from] + 1)
            .sum()
    }

    fn apply(&mut self, item: usize, to: usize) {
        let from = self.assigned[item];
        for k in &self.keys[item] {
            let c = self.counts.get_mut(k).expect("counted");
            c[from] -= 1;
            c[to] += 1;
        }
        self.assigned[item] = to;
    }

    fn single_moves(&mut self) -> bool {
        let mut improved = false;
        for i in 0..self.assigned.len() {
            if self.keys[i].is_empty() {
                continue;
            }
            let a = self.assigned[i];
            let (d, b) = (0..4)
                .filter(|&b| b != a)
                .map(|b| (self.delta(i, b), b))
                .min()
                .expect("three alternatives");
            if d < 0 {
                self.apply(i, b);
                improved = true;
            }
        }
        improved
    }

    /// For a subcategory whose largest and smallest severity groups differ
    /// by two or more, trades an item of the largest group inside it for an
    /// item of the smallest group anywhere.
    fn pair_swap(&mut self) -> bool {
        let skewed: Vec<(SubKey, usize, usize)> = self
            .counts
            .iter()
            .filter_map(|(k, c)| {
                let hi = (0..4).max_by_key(|&s| (c[s], std::cmp::Reverse(s)))?;
                let lo = (0..4).min_by_key(|&s| (c[s], s))?;
                (c[hi] - c[lo] >= 2).then_some((*k, hi, lo))
            })
            .collect();
        for (key, hi, lo) in skewed {
            for i in 0..self.assigned.len() {
                if self.assigned[i] != hi || !self.keys[i].contains(&key) {
                    continue;
                }
                let di = self.delta(i, lo);
                self.apply(i, lo);
                for j in 0..self.assigned.len() {
                    if j != i && self.assigned[j] == lo && di + self.delta(j, hi) < 0 {
                        self.apply(j, hi);
                        return true;
                    }
                }
                self.apply(i, hi);
            }
        }
        false
    }
}

fn balance(members: &[Membership], assigned: &mut [SeverityLevel]) {
    let mut b = Balancer::new(members, assigned);
    while b.single_moves() || b.pair_swap() {}
    for (out, s) in assigned.iter_mut().zip(&b.assigned) {
        *out = SeverityLevel::ALL[*s];
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub source: String,
    pub output: String,
    pub group: Group,
    pub subcategory: String,
    pub severity: SeverityLevel,
    pub seed: u64,
    pub strips: Vec<StripSpec>,
    pub width: usize,
    pub height: usize,
    pub engine: Engine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ManifestRecord {
    pub fn plan(&self) -> AttackPlan {
        AttackPlan {
            severity: self.severity,
            seed: self.seed,
            strips: self.strips.clone(),
            image_height: self.height,
            image_width: self.width,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GenerateConfig {
    pub master_seed: u64,
    pub engine: Engine,
    pub pattern: BayerPattern,
    pub filter: SubcategoryFilter,
    pub sampler: SamplerConfig,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl GenerateConfig {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            engine: Engine::default(),
            pattern: BayerPattern::default(),
            filter: SubcategoryFilter::default(),
            sampler: SamplerConfig::default(),
            jobs: 0,
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";
pub const IMAGES_DIR: &str = "images";

/// Per-group, per-subcategory, per-severity record counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub master_seed: u64,
    pub engine: Engine,
    pub pattern: BayerPattern,
    pub corpus: String,
    pub images: usize,
    pub records: usize,
    pub failed: usize,
    pub groups: BTreeMap<Group, BTreeMap<String, BTreeMap<SeverityLevel, usize>>>,
}

impl Summary {
    fn group_total(&self, g: Group) -> usize {
        self.groups.get(&g).map_or(0, |subs| subs.values().flat_map(|c| c.values()).sum())
    }

    /// Group totals with per-subcategory counts in parentheses, largest
    /// subcategory first.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for g in Group::ALL {
            let mut subs: Vec<(&String, usize)> = self
                .groups
                .get(&g)
                .map(|s| s.iter().map(|(k, c)| (k, c.values().sum())).collect())
                .unwrap_or_default();
            subs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            let listed: Vec<String> = subs.iter().map(|(k, n)| format!("{k} ({n})")).collect();
            out.push_str(&format!("{} ({}): {}\n", g.title(), self.group_total(g), listed.join(", ")));
        }
        out.push_str(&format!(
            "images: {}, records: {}, failed: {}\n",
            self.images, self.records, self.failed
        ));
        out
    }
}

#[derive(Clone, Debug)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    pub summary: Summary,
    pub manifest_path: PathBuf,
}

/// Resolves a listed name inside the corpus; a missing file falls back to a
/// `.png` sibling with the same stem.
fn resolve_source(corpus: &Path, name: &str) -> String {
    if corpus.join(name).is_file() {
        return name.to_owned();
    }
    let png = Path::new(name).with_extension("png");
    let png = png.to_string_lossy().replace('\\', "/");
    if corpus.join(&png).is_file() {
        png
    } else {
        name.to_owned()
    }
}

struct Outcome {
    width: usize,
    height: usize,
    strips: Vec<StripSpec>,
    error: Option<String>,
}

fn process_one(
    corpus: &Path,
    out_dir: &Path,
    source: &str,
    severity: SeverityLevel,
    seed: u64,
    config: &GenerateConfig,
) -> Outcome {
    let mut outcome = Outcome {
        width: 0,
        height: 0,
        strips: Vec::new(),
        error: None,
    };
    let src = corpus.join(source);
    let dst = out_dir.join(IMAGES_DIR).join(source);
    let img = match load_image(&src) {
        Ok(img) => img,
        Err(e) => {
            outcome.error = Some(e.to_string());
            return outcome;
        }
    };
    (outcome.width, outcome.height) = (img.width(), img.height());
    let result = (|| -> Result<Vec<StripSpec>, String> {
        if let Some(parent) = dst.parent() {
            fs::create_dir_all(parent).map_err(|e| e.to_string())?;
        }
        if severity == SeverityLevel::Unattacked {
            fs::copy(&src, &dst).map_err(|e| e.to_string())?;
            return Ok(Vec::new());
        }
        let plan = sample_plan(severity, img.width(), img.height(), seed, &config.sampler)
            .map_err(|e| e.to_string())?;
        let attacked = config.engine.apply(&img, &plan, config.pattern)?;
        save_image(&attacked, &dst).map_err(|e| e.to_string())?;
        Ok(plan.strips)
    })();
    match result {
        Ok(strips) => outcome.strips = strips,
        Err(e) => {
            // no stale output from an earlier run
            let _ = fs::remove_file(&dst);
            outcome.error = Some(e);
        }
    }
    outcome
}

/// Runs the whole protocol and writes `images/`, `manifest.jsonl`,
/// `summary.json` and `summary.txt` under `out_dir`.
///
/// Per-image failures become manifest records with `error` set. Output
/// bytes do not depend on `config.jobs`.
pub fn generate(
    corpus_dir: &Path,
    attributes: &Path,
    out_dir: &Path,
    config: &GenerateConfig,
) -> Result<DatasetManifest, DatasetError> {
    config.filter.validate()?;
    config
        .sampler
        .validate()
        .map_err(|e| DatasetError::Config(e.to_string()))?;
    let items = ingest_attributes(attributes)?;
    fs::create_dir_all(out_dir.join(IMAGES_DIR)).map_err(io_err(out_dir))?;

    // one entry per distinct source file, in sorted order
    let members = config.filter.memberships(&items);
    let mut by_source: BTreeMap<String, (ImageAttributes, Membership)> = BTreeMap::new();
    for (it, m) in items.into_iter().zip(members) {
        if m.iter().all(Option::is_none) {
            continue;
        }
        let source = resolve_source(corpus_dir, &it.name);
        by_source.entry(source).or_insert((it, m));
    }
    let sources: Vec<(&String, &Membership)> = by_source.iter().map(|(s, (_, m))| (s, m)).collect();
    let member_list: Vec<Membership> = sources.iter().map(|(_, m)| (*m).clone()).collect();
    let severities = partition_memberships(&member_list, config.master_seed);

    let work = || {
        sources
            .par_iter()
            .zip(severities.par_iter())
            .map(|((source, _), &sev)| {
                let seed = derive_seed(config.master_seed, source);
                (seed, process_one(corpus_dir, out_dir, source, sev, seed, config))
            })
            .collect::<Vec<_>>()
    };
    let outcomes = if config.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| DatasetError::Config(e.to_string()))?
            .install(work)
    } else {
        work()
    };

    let mut records = Vec::new();
    for (((source, m), &severity), (seed, o)) in sources.iter().zip(&severities).zip(outcomes) {
        for (g, value) in Group::ALL.iter().zip(m.iter()) {
            let Some(value) = value else { continue };
            records.push(ManifestRecord {
                source: (*source).clone(),
                output: format!("{IMAGES_DIR}/{source}"),
                group: *g,
                subcategory: value.clone(),
                severity,
                seed,
                strips: o.strips.clone(),
                width: o.width,
                height: o.height,
                engine: config.engine,
                error: o.error.clone(),
            });
        }
    }

    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_manifest(&manifest_path, &records)?;

    let mut summary = Summary {
        master_seed: config.master_seed,
        engine: config.engine,
        pattern: config.pattern,
        corpus: fs::canonicalize(corpus_dir)
            .unwrap_or_else(|_| corpus_dir.to_path_buf())
            .display()
            .to_string(),
        images: sources.len(),
        records: records.len(),
        failed: 0,
        groups: BTreeMap::new(),
    };
    for r in &records {
        *summary
            .groups
            .entry(r.group)
            .or_default()
            .entry(r.subcategory.clone())
            .or_default()
            .entry(r.severity)
            .or_default() += 1;
    }
    summary.failed = records
        .iter()
        .filter(|r| r.error.is_some())
        .map(|r| &r.source)
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let summary_path = out_dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(io_err(&summary_path))?;
    let text_path = out_dir.join(SUMMARY_TEXT_FILE);
    fs::write(&text_path, summary.render_text()).map_err(io_err(&text_path))?;

    Ok(DatasetManifest {
        records,
        summary,
        manifest_path,
    })
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).expect("record serializes");
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Parse {
                path: path.display().to_string(),
                index: i,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Summary, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(n: usize, w: &str, s: &str, t: &str) -> Vec<ImageAttributes> {
        (0..n).map(|i| ImageAttributes::new(&format!("{i:03}.png"), w, s, t)).collect()
    }

    fn sizes(sev: &[SeverityLevel]) -> [usize; 4] {
        let mut c = [0; 4];
        for s in sev {
            c[*s as usize] += 1;
        }
        c
    }

    #[test]
    fn parses_records() {
        let text = r#"[{"name": "a.jpg", "attributes": {"weather": " Clear", "scene": "highway", "timeofday": "night", "x": 1}, "labels": []}]"#;
        let got = parse_attributes(text, "t").unwrap();
        assert_eq!(got, vec![ImageAttributes::new("a.jpg", "clear", "highway", "night")]);
    }

    #[test]
    fn missing_field_names_the_record() {
        let text = r#"[{"name": "ok.png", "attributes": {"weather": "clear", "scene": "highway", "timeofday": "night"}},
                       {"name": "b.png", "attributes": {"weather": "clear", "timeofday": "night"}}]"#;
        match parse_attributes(text, "t") {
            Err(DatasetError::MissingField { index, name, field, .. }) => {
                assert_eq!((index, name.as_str(), field.as_str()), (1, "b.png", "attributes.scene"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_attributes("{}", "t"), Err(DatasetError::Json { .. })));
        assert!(matches!(parse_attributes("[1]", "t"), Err(DatasetError::Parse { index: 0, .. })));
        let escape = r#"[{"name": "../x.png", "attributes": {"weather": "a", "scene": "b", "timeofday": "c"}}]"#;
        assert!(matches!(parse_attributes(escape, "t"), Err(DatasetError::Parse { .. })));
    }

    #[test]
    fn round_robin_sizes() {
        let p = partition_severity(&attrs(8, "clear", "highway", "night"), 1);
        assert_eq!(sizes(&p), [2, 2, 2, 2]);
        let p = partition_severity(&attrs(10, "clear", "highway", "night"), 1);
        assert_eq!(sizes(&p), [3, 3, 2, 2]);
        assert_eq!(p, partition_severity(&attrs(10, "clear", "highway", "night"), 1));
        assert_ne!(
            partition_severity(&attrs(40, "clear", "highway", "night"), 1),
            partition_severity(&attrs(40, "clear", "highway", "night"), 2)
        );
    }

    #[test]
    fn overlapping_groups_stay_balanced() {
        let ws = ["clear", "overcast", "rainy", "snowy", "partly cloudy"];
        let ss = ["city street", "highway", "residential"];
        let ts = ["daytime", "night", "dawn"];
        for (n, seed) in [(97, 1u64), (1000, 5), (1000, 6), (4000, 7)] {
            let mut rng = Xoshiro256::seed_from_u64(seed);
            let items: Vec<ImageAttributes> = (0..n)
                .map(|i| {
                    ImageAttributes::new(
                        &format!("{i}.png"),
                        ws[rng.below(5) as usize],
                        ss[rng.below(3) as usize],
                        ts[rng.below(3) as usize],
                    )
                })
                .collect();
            let sev = partition_severity(&items, seed);
            for g in Group::ALL {
                let mut per: HashMap<&str, [usize; 4]> = HashMap::new();
                for (it, s) in items.iter().zip(&sev) {
                    per.entry(it.value(g)).or_default()[*s as usize] += 1;
                }
                for (v, c) in per {
                    let spread = c.iter().max().unwrap() - c.iter().min().unwrap();
                    assert!(spread <= 1, "n={n} {g}/{v}: {c:?}");
                }
            }
        }
    }

    #[test]
    fn filter_drops_values_per_group() {
        let items = vec![
            ImageAttributes::new("a.png", "foggy", "highway", "night"),
            ImageAttributes::new("b.png", "clear", "highway", "undefined"),
        ];
        let m = SubcategoryFilter::default().memberships(&items);
        assert_eq!(m[0], [None, Some("highway".into()), Some("night".into())]);
        assert_eq!(m[1], [Some("clear".into()), Some("highway".into()), None]);
        let strict = SubcategoryFilter {
            min_images: 2,
            ..Default::default()
        };
        let m = strict.memberships(&items);
        assert_eq!(m[0], [None, Some("highway".into()), None]);
        assert!(SubcategoryFilter {
            scene: vec![],
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn manifest_field_names() {
        let r = ManifestRecord {
            source: "a.png".into(),
            output: "images/a.png".into(),
            group: Group::Timeofday,
            subcategory: "night".into(),
            severity: SeverityLevel::Mild,
            seed: u64::MAX,
            strips: vec![StripSpec::new(2, 6)],
            width: 8,
            height: 16,
            engine: Engine::Packet,
            error: None,
        };
        let v: Value = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expect = [
            "source", "output", "group", "subcategory", "severity", "seed", "strips", "width", "height", "engine",
        ];
        expect.sort_unstable();
        let mut keys = keys;
        keys.sort_unstable();
        assert_eq!(keys, expect);
        assert_eq!(v["group"], "timeofday");
        assert_eq!(v["engine"], "packet");
        assert_eq!(v["seed"].as_u64(), Some(u64::MAX));
        assert_eq!(v["strips"][0]["start_row"], 2);
        let back: ManifestRecord = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
