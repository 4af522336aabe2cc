use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use super::{KnowledgeError, KnowledgeMap, MapEntry, MapProvenance};
use crate::corpus::{escape_field, unescape_field, ClassId};
use crate::metrics::{Delta, MetricId, MetricKind, ScoreVector};
use crate::search::{Setting, StrategyKind};

pub const MAGIC: &str = "# synthsearch-knowledge-map v1";

const FIXED_COLUMNS: [&str; 5] = ["strategy", "metric", "class", "best_value", "baseline_value"];

/// Serializes a map as TSV: magic line, `#` provenance block, header row, one row per entry.
pub fn save_map_string(map: &KnowledgeMap) -> String {
    let mut out = format!("{MAGIC}\n");
    let p = &map.provenance;
    out.push_str(&format!("# dataset_hash\t{:016x}\n", p.dataset_hash));
    out.push_str(&format!("# budget\t{}\n", p.budget));
    out.push_str(&format!("# config_hash\t{:016x}\n", p.config_hash));
    let schema: Vec<String> = map.schema.iter().map(|c| escape_field(c.as_str())).collect();
    out.push_str(&format!("# schema\t{}\n", schema.join("\t")));
    let base: Vec<String> = map.baseline.values.iter().map(|v| format!("{v}")).collect();
    out.push_str(&format!("# baseline\t{}\n", base.join("\t")));
    let undef: Vec<String> = map.baseline.undefined.iter().map(|m| escape_field(&m.to_string())).collect();
    out.push_str(&format!("# baseline_undefined\t{}\n", undef.join("\t")));

    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(MetricId::columns(&map.schema).iter().map(|m| escape_field(&m.to_string())));
    out.push_str(&header.join("\t"));
    out.push('\n');
    for e in &map.entries {
        let mut row = vec![
            e.setting.strategy.to_string(),
            e.setting.metric.to_string(),
            escape_field(e.setting.class.as_str()),
            format!("{}", e.best_value),
            format!("{}", e.baseline_value),
        ];
        row.extend(e.deltas.iter().map(|d| d.to_string()));
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

pub fn save_map(path: &Path, map: &KnowledgeMap) -> Result<(), KnowledgeError> {
    fs::write(path, save_map_string(map)).map_err(|source| KnowledgeError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_map(path: &Path) -> Result<KnowledgeMap, KnowledgeError> {
    let text = fs::read_to_string(path).map_err(|source| KnowledgeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_map(&text)
}

fn fmt_err(line: usize, reason: impl Into<String>) -> KnowledgeError {
    KnowledgeError::Format {
        line,
        reason: reason.into(),
    }
}

fn parse_f64(line: usize, s: &str) -> Result<f64, KnowledgeError> {
    s.parse().map_err(|_| fmt_err(line, format!("{s:?} is not a number")))
}

fn parse_hex(line: usize, s: &str) -> Result<u64, KnowledgeError> {
    u64::from_str_radix(s, 16).map_err(|_| fmt_err(line, format!("{s:?} is not a hex hash")))
}

/// Splits a `# key<TAB>values...` line.
fn comment_fields(line: &str) -> Option<(&str, Vec<&str>)> {
    let rest = line.strip_prefix("# ")?;
    let mut parts = rest.split('\t');
    let key = parts.next()?;
    Some((key, parts.filter(|s| !s.is_empty()).collect()))
}

pub fn parse_map(text: &str) -> Result<KnowledgeMap, KnowledgeError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let first = lines.next().map(|(_, l)| l).unwrap_or("");
    if first != MAGIC {
        return Err(KnowledgeError::Magic {
            expected: MAGIC.to_string(),
            found: first.to_string(),
        });
    }
    let mut provenance = MapProvenance::default();
    let mut schema: Option<Vec<ClassId>> = None;
    let mut baseline_values: Option<Vec<f64>> = None;
    let mut undefined = BTreeSet::new();
    let mut header_seen = false;
    let mut entries = Vec::new();
    let mut columns = Vec::new();

    for (n, line) in lines {
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            let (key, vals) = comment_fields(line).ok_or_else(|| fmt_err(n, "malformed provenance line"))?;
            let one = || vals.first().copied().ok_or_else(|| fmt_err(n, format!("{key} has no value")));
            match key {
                "dataset_hash" => provenance.dataset_hash = parse_hex(n, one()?)?,
                "config_hash" => provenance.config_hash = parse_hex(n, one()?)?,
                "budget" => provenance.budget = one()?.parse().map_err(|_| fmt_err(n, "budget is not an integer"))?,
                "schema" => schema = Some(vals.iter().map(|c| ClassId::new(unescape_field(c))).collect()),
                "baseline" => baseline_values = Some(vals.iter().map(|v| parse_f64(n, v)).collect::<Result<_, _>>()?),
                "baseline_undefined" => {
                    for v in vals {
                        undefined.insert(unescape_field(v).parse::<MetricId>()?);
                    }
                }
                _ => {}
            }
            continue;
        }
        let schema = schema.as_ref().ok_or_else(|| fmt_err(n, "schema line missing before the table"))?;
        let fields: Vec<&str> = line.split('\t').collect();
        if !header_seen {
            columns = MetricId::columns(schema);
            let expected: Vec<String> = FIXED_COLUMNS
                .iter()
                .map(|s| s.to_string())
                .chain(columns.iter().map(|m| escape_field(&m.to_string())))
                .collect();
            if fields != expected.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(fmt_err(n, "header does not match the schema's metric columns"));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != FIXED_COLUMNS.len() + columns.len() {
            return Err(fmt_err(n, format!("expected {} fields, found {}", FIXED_COLUMNS.len() + columns.len(), fields.len())));
        }
        let strategy: StrategyKind = fields[0].parse().map_err(|e: crate::search::SearchError| fmt_err(n, e.to_string()))?;
        let metric: MetricKind = fields[1].parse()?;
        let deltas = fields[5..]
            .iter()
            .map(|s| s.parse::<Delta>().map_err(|_| fmt_err(n, format!("{s:?} is not a delta"))))
            .collect::<Result<Vec<_>, _>>()?;
        entries.push(MapEntry {
            setting: Setting::new(strategy, metric, ClassId::new(unescape_field(fields[2]))),
            deltas,
            best_value: parse_f64(n, fields[3])?,
            baseline_value: parse_f64(n, fields[4])?,
        });
    }
    let schema = schema.ok_or_else(|| fmt_err(1, "schema line missing"))?;
    if !header_seen {
        return Err(fmt_err(1, "table header missing"));
    }
    let values = baseline_values.ok_or_else(|| fmt_err(1, "baseline line missing"))?;
    if values.len() != columns.len() {
        return Err(fmt_err(1, "baseline has the wrong number of values"));
    }
    let mut seen = BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.setting.clone()) {
            return Err(KnowledgeError::DuplicateSetting(e.setting.to_string()));
        }
    }
    Ok(KnowledgeMap {
        baseline: ScoreVector {
            schema: schema.clone(),
            values,
            undefined,
        },
        schema,
        entries,
        provenance,
    })
}
