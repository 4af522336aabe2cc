//! Markdown and TSV renderings of a knowledge map.
//!
//! * the strategy grid: own-objective Δ per (example class, metric, strategy),
//! * the best-strategy summary under a tie band,
//! * one cross-impact table per (strategy, metric) with every Δ column and
//!   the baseline scores as the last row.
//!
//! Infinite Δ renders as `######`. Negative Δ gets a `-` flag.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::{summarize_best, KnowledgeMap, MapEntry};
use crate::corpus::{escape_field, ClassId};
use crate::metrics::{Delta, MetricId, MetricKind};
use crate::search::StrategyKind;

#[derive(Clone, Debug, PartialEq)]
pub struct CrossImpactTable {
    pub strategy: StrategyKind,
    pub metric: MetricKind,
    pub markdown: String,
    pub tsv: String,
}

impl CrossImpactTable {
    pub fn stem(&self) -> String {
        format!("cross_impact_{}_{}", self.strategy, self.metric)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub grid_markdown: String,
    pub grid_tsv: String,
    pub summary_markdown: String,
    pub summary_tsv: String,
    pub tables: Vec<CrossImpactTable>,
}

fn flag(d: &Delta) -> &'static str {
    if d.is_negative() {
        "-"
    } else {
        ""
    }
}

fn md_cell(d: &Delta) -> String {
    if d.is_negative() {
        format!("{} (-)", d.render())
    } else {
        d.render()
    }
}

fn md_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn md_header(cells: &[String]) -> String {
    let rule: Vec<String> = cells.iter().map(|_| "---".to_string()).collect();
    md_row(cells) + &md_row(&rule)
}

fn present<T: Copy + PartialEq>(all: &[T], has: impl Fn(T) -> bool) -> Vec<T> {
    all.iter().copied().filter(|&x| has(x)).collect()
}

fn entries_for<'a>(map: &'a KnowledgeMap, strategy: StrategyKind, metric: MetricKind) -> Vec<&'a MapEntry> {
    // schema order of the example class
    let mut es: Vec<&MapEntry> = map
        .entries
        .iter()
        .filter(|e| e.setting.strategy == strategy && e.setting.metric == metric)
        .collect();
    es.sort_by_key(|e| map.schema.iter().position(|c| c == &e.setting.class));
    es
}

fn grid(map: &KnowledgeMap, strategies: &[StrategyKind], metrics: &[MetricKind]) -> (String, String) {
    let mut header = vec!["class".to_string()];
    for m in metrics {
        for s in strategies {
            header.push(format!("Δ{m} {s}"));
        }
    }
    let mut md = md_header(&header);
    let mut tsv = String::from("strategy\tmetric\tclass\tdelta\tflag\n");
    for class in &map.schema {
        let mut row = vec![class.to_string()];
        for &m in metrics {
            for &s in strategies {
                let d = map
                    .entries
                    .iter()
                    .find(|e| e.setting.strategy == s && e.setting.metric == m && &e.setting.class == class)
                    .and_then(|e| e.own_delta(&map.schema));
                row.push(d.map(|d| md_cell(&d)).unwrap_or_default());
            }
        }
        md.push_str(&md_row(&row));
    }
    for &s in strategies {
        for &m in metrics {
            for e in entries_for(map, s, m) {
                if let Some(d) = e.own_delta(&map.schema) {
                    tsv.push_str(&format!("{s}\t{m}\t{}\t{d}\t{}\n", escape_field(e.setting.class.as_str()), flag(&d)));
                }
            }
        }
    }
    (md, tsv)
}

fn summary(map: &KnowledgeMap, band: f64, metrics: &[MetricKind]) -> (String, String) {
    let s = summarize_best(map, band);
    let mut header = vec!["class".to_string()];
    header.extend(metrics.iter().map(|m| m.to_string()));
    let mut md = format!("Best strategies (within {band} points of the best Δ)\n\n") + &md_header(&header);
    let mut tsv = String::from("metric\tclass\tstrategies\n");
    let names = |class: &ClassId, m: MetricKind| -> String {
        s.get(m, class)
            .map(|set| set.iter().map(|x| x.name()).collect::<Vec<_>>().join("/"))
            .unwrap_or_default()
    };
    for class in &map.schema {
        let mut row = vec![class.to_string()];
        row.extend(metrics.iter().map(|&m| names(class, m)));
        md.push_str(&md_row(&row));
    }
    for &m in metrics {
        for class in &map.schema {
            let n = names(class, m);
            if !n.is_empty() {
                tsv.push_str(&format!("{m}\t{}\t{n}\n", escape_field(class.as_str())));
            }
        }
    }
    (md, tsv)
}

fn cross_impact(map: &KnowledgeMap, strategy: StrategyKind, metric: MetricKind) -> CrossImpactTable {
    let cols = MetricId::columns(&map.schema);
    let mut header = vec!["class".to_string()];
    header.extend(cols.iter().map(|c| format!("Δ{c}%")));
    let mut md = format!("### {strategy}, objective {metric}\n\n") + &md_header(&header);
    let tsv_header: Vec<String> = std::iter::once("class".to_string())
        .chain(cols.iter().map(|c| escape_field(&c.to_string())))
        .collect();
    let mut tsv = tsv_header.join("\t") + "\n";
    for e in entries_for(map, strategy, metric) {
        let mut row = vec![e.setting.class.to_string()];
        row.extend(e.deltas.iter().map(md_cell));
        md.push_str(&md_row(&row));
        let vals: Vec<String> = e.deltas.iter().map(|d| d.render()).collect();
        tsv.push_str(&format!("{}\t{}\n", escape_field(e.setting.class.as_str()), vals.join("\t")));
    }
    let base: Vec<String> = map.baseline.values.iter().map(|v| format!("{v:.4}")).collect();
    let mut row = vec!["baseline".to_string()];
    row.extend(base.iter().cloned());
    md.push_str(&md_row(&row));
    tsv.push_str(&format!("baseline\t{}\n", base.join("\t")));
    CrossImpactTable {
        strategy,
        metric,
        markdown: md,
        tsv,
    }
}

/// Renders every table for the strategies and metrics present in `map`.
pub fn render(map: &KnowledgeMap, band: f64) -> Report {
    let strategies = present(&StrategyKind::ALL, |s| map.entries.iter().any(|e| e.setting.strategy == s));
    let metrics = present(&MetricKind::ALL, |m| map.entries.iter().any(|e| e.setting.metric == m));
    let (grid_markdown, grid_tsv) = grid(map, &strategies, &metrics);
    let (summary_markdown, summary_tsv) = summary(map, band, &metrics);
    let mut tables = Vec::new();
    for &s in &strategies {
        for &m in &metrics {
            if !entries_for(map, s, m).is_empty() {
                tables.push(cross_impact(map, s, m));
            }
        }
    }
    Report {
        grid_markdown,
        grid_tsv,
        summary_markdown,
        summary_tsv,
        tables,
    }
}

impl Report {
    /// All tables in one markdown document.
    pub fn markdown(&self) -> String {
        let mut out = String::from("# Knowledge map\n\n## Own-objective Δ% by strategy\n\n");
        out.push_str(&self.grid_markdown);
        out.push_str("\n## Best strategies\n\n");
        out.push_str(&self.summary_markdown);
        out.push_str("\n## Cross-impact tables\n\n");
        for t in &self.tables {
            out.push_str(&t.markdown);
            out.push('\n');
        }
        out
    }

    /// Writes `report.md`, `grid.tsv`, `best.tsv` and one TSV per cross-impact table.
    pub fn write(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut files = vec![
            (dir.join("report.md"), self.markdown()),
            (dir.join("grid.tsv"), self.grid_tsv.clone()),
            (dir.join("best.tsv"), self.summary_tsv.clone()),
        ];
        for t in &self.tables {
            files.push((dir.join(format!("{}.tsv", t.stem())), t.tsv.clone()));
        }
        for (p, text) in &files {
            fs::write(p, text)?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{baseline, entry, schema};
    use super::super::MapProvenance;
    use super::*;

    fn full_map() -> KnowledgeMap {
        let mut entries = Vec::new();
        for s in StrategyKind::ALL {
            for m in MetricKind::ALL {
                for c in ["A", "B"] {
                    let mut d = vec![Delta::Finite(1.5); 6];
                    d[1] = Delta::Finite(-2.0);
                    d[3] = Delta::Infinite;
                    entries.push(entry(s, m, c, d));
                }
            }
        }
        KnowledgeMap {
            schema: schema(),
            baseline: baseline(),
            entries,
            provenance: MapProvenance::default(),
        }
    }

    #[test]
    fn twelve_tables_with_baseline_last() {
        let r = render(&full_map(), 0.03);
        assert_eq!(r.tables.len(), 12);
        for t in &r.tables {
            let last = t.tsv.lines().last().unwrap();
            assert!(last.starts_with("baseline\t"), "{last}");
            assert_eq!(t.tsv.lines().count(), 1 + 2 + 1);
            assert!(t.tsv.contains("######"));
        }
    }

    #[test]
    fn negative_cells_are_flagged() {
        let r = render(&full_map(), 0.03);
        // CR on class B is the negative column
        let line = r.grid_tsv.lines().find(|l| l.starts_with("SW\tCR\tB\t")).unwrap();
        assert!(line.ends_with("\t-"), "{line}");
        let line = r.grid_tsv.lines().find(|l| l.starts_with("SW\tCR\tA\t")).unwrap();
        assert!(line.ends_with('\t'), "{line}");
        assert!(r.grid_markdown.contains("(-)"));
    }

    #[test]
    fn restricted_map_renders_fewer_tables() {
        let mut m = full_map();
        m.entries.retain(|e| e.setting.strategy == StrategyKind::Sw);
        let r = render(&m, 0.03);
        assert_eq!(r.tables.len(), 4);
        assert!(r.summary_tsv.lines().skip(1).all(|l| l.ends_with("\tSW")));
    }

    #[test]
    fn write_creates_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = render(&full_map(), 0.03).write(dir.path()).unwrap();
        assert_eq!(files.len(), 3 + 12);
        assert!(files.iter().all(|p| p.exists()));
    }
}
