//! Declarative runs: a versioned TOML file listing tasks and tolerance gates.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context as _, Result};
use log::info;
use serde::{Deserialize, Serialize};

use codazzi::io::{write_json, SCHEMA_VERSION};

use crate::tasks::{build_task, Context, Task};

#[derive(Deserialize, Debug, Clone, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Gate {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// `task.metric` of an earlier task, used as the target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
}

impl Gate {
    fn validate(&self) -> Result<()> {
        let bounds = self.max.is_some() || self.min.is_some();
        let target = self.target.is_some() || self.reference.is_some();
        let tols = self.tol.is_some() || self.rel_tol.is_some();
        if self.target.is_some() && self.reference.is_some() {
            bail!(
                "gate on `{}` has both `target` and `reference`",
                self.metric
            );
        }
        if bounds == target {
            bail!(
                "gate on `{}` needs either `max`/`min` or one of `target`/`reference`",
                self.metric
            );
        }
        if target != tols {
            bail!(
                "gate on `{}`: `tol`/`rel_tol` go with `target`/`reference` only",
                self.metric
            );
        }
        for v in [self.max, self.min, self.target, self.tol, self.rel_tol]
            .into_iter()
            .flatten()
        {
            if !v.is_finite() {
                bail!("gate on `{}` has a non-finite bound", self.metric);
            }
        }
        Ok(())
    }

    fn evaluate(
        &self,
        value: f64,
        done: &BTreeMap<String, BTreeMap<String, f64>>,
    ) -> Result<(bool, f64)> {
        let mut pass = value.is_finite();
        if let Some(m) = self.max {
            pass &= value <= m;
        }
        if let Some(m) = self.min {
            pass &= value >= m;
        }
        let target = match (&self.target, &self.reference) {
            (Some(t), _) => Some(*t),
            (None, Some(r)) => Some(lookup(r, done)?),
            _ => None,
        };
        if let Some(t) = target {
            let err = (value - t).abs();
            if let Some(tol) = self.tol {
                pass &= err <= tol;
            }
            if let Some(rel) = self.rel_tol {
                pass &= err <= rel * t.abs();
            }
            return Ok((pass, t));
        }
        Ok((pass, f64::NAN))
    }
}

fn split_reference(r: &str) -> Result<(&str, &str)> {
    r.rsplit_once('.')
        .ok_or_else(|| anyhow!("reference `{r}` must have the form task.metric"))
}

fn lookup(r: &str, done: &BTreeMap<String, BTreeMap<String, f64>>) -> Result<f64> {
    let (task, metric) = split_reference(r)?;
    done.get(task)
        .and_then(|m| m.get(metric))
        .copied()
        .ok_or_else(|| anyhow!("reference `{r}` did not produce a value"))
}

pub struct PlannedTask {
    pub name: String,
    pub task: Box<dyn Task>,
    pub gates: Vec<Gate>,
}

pub struct Config {
    pub name: String,
    pub threads: Option<usize>,
    pub tasks: Vec<PlannedTask>,
}

fn check_output_name(name: &str) -> Result<()> {
    let p = Path::new(name);
    if name.is_empty()
        || p.is_absolute()
        || p.components().any(|c| !matches!(c, Component::Normal(_)))
    {
        bail!("output `{name}` must be a relative path inside the output directory");
    }
    Ok(())
}

/// Parses and validates a config without running anything.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut root: toml::Table = text.parse().context("config is not valid TOML")?;
    let version = root
        .remove("schema_version")
        .ok_or_else(|| anyhow!("config has no schema_version"))?
        .as_integer()
        .ok_or_else(|| anyhow!("schema_version must be an integer"))?;
    if version != SCHEMA_VERSION as i64 {
        bail!("unsupported config schema_version {version} (expected {SCHEMA_VERSION})");
    }
    let name = match root.remove("name") {
        Some(v) => v
            .as_str()
            .ok_or_else(|| anyhow!("name must be a string"))?
            .to_string(),
        None => "pipeline".to_string(),
    };
    let threads = match root.remove("threads") {
        Some(v) => Some(usize::try_from(
            v.as_integer()
                .ok_or_else(|| anyhow!("threads must be an integer"))?,
        )?),
        None => None,
    };
    let tasks = match root.remove("tasks") {
        Some(toml::Value::Array(a)) => a,
        Some(_) => bail!("tasks must be an array of tables"),
        None => bail!("config has no tasks"),
    };
    if let Some(k) = root.keys().next() {
        bail!("unknown config key `{k}`");
    }
    if tasks.is_empty() {
        bail!("config has no tasks");
    }

    let mut planned: Vec<PlannedTask> = Vec::new();
    let mut outputs = BTreeSet::new();
    for (i, t) in tasks.into_iter().enumerate() {
        let mut table = match t {
            toml::Value::Table(t) => t,
            _ => bail!("task {i} is not a table"),
        };
        let take_str = |table: &mut toml::Table, key: &str| -> Result<String> {
            match table.remove(key) {
                Some(toml::Value::String(s)) => Ok(s),
                Some(_) => bail!("task {i}: `{key}` must be a string"),
                None => bail!("task {i}: missing `{key}`"),
            }
        };
        let name = take_str(&mut table, "name")?;
        let kind = take_str(&mut table, "kind")?;
        let gates: Vec<Gate> = match table.remove("gates") {
            Some(v) => v
                .try_into()
                .with_context(|| format!("task `{name}`: malformed gates"))?,
            None => Vec::new(),
        };
        if name.contains('.') || name.is_empty() {
            bail!("task name `{name}` must be non-empty and contain no dots");
        }
        if planned.iter().any(|p| p.name == name) {
            bail!("duplicate task name `{name}`");
        }
        let task = build_task(&kind, toml::Value::Table(table))
            .with_context(|| format!("task `{name}`"))?;
        if let Some(dep) = task.requires() {
            match planned.iter().find(|p| p.name == dep) {
                Some(p) if p.task.kind() == "solve" => {}
                Some(_) => bail!("task `{name}`: `{dep}` does not produce a density"),
                None => bail!("task `{name}`: density `{dep}` must come from an earlier task"),
            }
        }
        for o in task.outputs() {
            check_output_name(&o).with_context(|| format!("task `{name}`"))?;
            if !outputs.insert(o.clone()) || o == SUMMARY {
                bail!("task `{name}`: output `{o}` is written twice");
            }
        }
        for g in &gates {
            g.validate().with_context(|| format!("task `{name}`"))?;
            if !task.metrics().contains(&g.metric.as_str()) {
                bail!(
                    "task `{name}`: unknown metric `{}` (available: {})",
                    g.metric,
                    task.metrics().join(", ")
                );
            }
            if let Some(r) = &g.reference {
                let (t, m) = split_reference(r)?;
                let p = planned.iter().find(|p| p.name == t).ok_or_else(|| {
                    anyhow!("task `{name}`: reference `{r}` must name an earlier task")
                })?;
                if !p.task.metrics().contains(&m) {
                    bail!("task `{name}`: task `{t}` has no metric `{m}`");
                }
            }
        }
        planned.push(PlannedTask { name, task, gates });
    }
    Ok(Config {
        name,
        threads,
        tasks: planned,
    })
}

pub const SUMMARY: &str = "summary.json";

#[derive(Serialize)]
struct GateResult {
    #[serde(flatten)]
    gate: Gate,
    value: f64,
    resolved_target: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct TaskResult {
    name: String,
    kind: &'static str,
    metrics: BTreeMap<String, f64>,
    gates: Vec<GateResult>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Summary {
    schema_version: u32,
    name: String,
    pass: bool,
    tasks: Vec<TaskResult>,
}

/// Outcome of a completed run.
pub struct RunReport {
    pub pass: bool,
    pub failed_gates: Vec<String>,
    pub summary: PathBuf,
}

/// Runs every task in order. Outputs are staged and moved into `out_dir`
/// only after all tasks have completed; gate results are in `summary.json`.
pub fn run_pipeline(config: &Config, base_dir: &Path, out_dir: &Path) -> Result<RunReport> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let stage = out_dir.join(format!(".codazzi-stage-{}", std::process::id()));
    if stage.exists() {
        fs::remove_dir_all(&stage)?;
    }
    fs::create_dir_all(&stage)?;
    let result = execute(config, base_dir, &stage);
    let outcome = result.and_then(|(summary, files)| {
        for f in files.iter().chain(std::iter::once(&SUMMARY.to_string())) {
            let to = out_dir.join(f);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::rename(stage.join(f), &to).with_context(|| format!("moving {f} into place"))?;
        }
        Ok(summary)
    });
    let _ = fs::remove_dir_all(&stage);
    let summary = outcome?;
    let failed_gates = summary
        .tasks
        .iter()
        .flat_map(|t| {
            t.gates
                .iter()
                .filter(|g| !g.pass)
                .map(move |g| format!("{}.{}", t.name, g.gate.metric))
        })
        .collect();
    Ok(RunReport {
        pass: summary.pass,
        failed_gates,
        summary: out_dir.join(SUMMARY),
    })
}

fn execute(config: &Config, base_dir: &Path, stage: &Path) -> Result<(Summary, Vec<String>)> {
    let mut ctx = Context {
        base_dir: base_dir.to_path_buf(),
        ..Default::default()
    };
    let mut done: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut results = Vec::new();
    let mut files = Vec::new();
    for p in &config.tasks {
        let start = Instant::now();
        let out = p
            .task
            .run(&ctx)
            .with_context(|| format!("task `{}` failed", p.name))?;
        info!(
            "task {} ({}) finished in {:.2} s",
            p.name,
            p.task.kind(),
            start.elapsed().as_secs_f64()
        );
        let mut gates = Vec::new();
        for g in &p.gates {
            let value = out.metrics.get(&g.metric).copied().unwrap_or(f64::NAN);
            let (pass, target) = g.evaluate(value, &done)?;
            info!(
                "gate {}.{}: {value:e} {}",
                p.name,
                g.metric,
                if pass { "pass" } else { "FAIL" }
            );
            gates.push(GateResult {
                gate: g.clone(),
                value,
                resolved_target: if target.is_nan() { None } else { Some(target) },
                pass,
            });
        }
        let mut outputs = Vec::new();
        for a in &out.artifacts {
            a.write(stage)?;
            outputs.push(a.name().to_string());
        }
        files.extend(outputs.iter().cloned());
        if let Some(d) = out.density {
            ctx.densities.insert(p.name.clone(), d);
        }
        done.insert(p.name.clone(), out.metrics.clone());
        results.push(TaskResult {
            name: p.name.clone(),
            kind: p.task.kind(),
            metrics: out.metrics,
            gates,
            outputs,
        });
    }
    let pass = results.iter().all(|t| t.gates.iter().all(|g| g.pass));
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        pass,
        tasks: results,
    };
    write_json(&stage.join(SUMMARY), &summary)?;
    Ok((summary, files))
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("invalid config {}", path.display()))
}
