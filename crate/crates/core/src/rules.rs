//! Decision rules from search trajectories.
//!
//! Each searched sample contributes its root-decision path: the sequence of
//! acquisitions and the final classification. Acquired values are binned by
//! per-feature quantiles, paths sharing the same (action, bin) prefix are
//! merged, and nodes visited fewer than `min_visits` times are pruned. A node
//! may have any number of children.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::Action;
use crate::mcts::{VisitLog, VisitRecord};
use crate::{Error, Result};

pub const DEFAULT_MIN_VISITS: u64 = 50;
pub const DEFAULT_BINS: usize = 3;
pub const RULES_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Each sample's trajectory counts once.
    Trajectories,
    /// Each decision counts with the root visit count of the chosen action.
    Simulations,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOptions {
    pub bins: usize,
    pub min_visits: u64,
    pub mode: CountMode,
}

impl Default for RuleOptions {
    fn default() -> Self {
        Self { bins: DEFAULT_BINS, min_visits: DEFAULT_MIN_VISITS, mode: CountMode::Trajectories }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleAction {
    Acquire { feature: usize },
    Classify { class: usize },
}

impl From<Action> for RuleAction {
    fn from(a: Action) -> Self {
        match a {
            Action::Acquire(feature) => RuleAction::Acquire { feature },
            Action::Classify(class) => RuleAction::Classify { class },
        }
    }
}

/// Value condition on the parent's feature: `lo <= value < hi`, with
/// `None` meaning unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCondition {
    pub feature: usize,
    pub bin: usize,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleNode {
    pub action: RuleAction,
    pub condition: Option<BinCondition>,
    pub visits: u64,
    pub children: Vec<RuleNode>,
}

impl RuleNode {
    fn count(&self) -> usize {
        1 + self.children.iter().map(RuleNode::count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleTree {
    pub schema: u32,
    pub min_visits: u64,
    pub mode: CountMode,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
    /// Quantile cut points per feature.
    pub bin_edges: Vec<Vec<f64>>,
    pub roots: Vec<RuleNode>,
    pub warning: Option<String>,
}

fn quantile_edges(mut values: Vec<f64>, bins: usize) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mut edges: Vec<f64> = Vec::new();
    for i in 1..bins {
        let e = values[(i * n / bins).min(n - 1)];
        if e > values[0] && edges.last().is_none_or(|&last| e > last) {
            edges.push(e);
        }
    }
    edges
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.iter().take_while(|&&e| e <= v).count()
}

#[derive(Default)]
struct Trie {
    visits: u64,
    children: BTreeMap<(Option<usize>, RuleAction), Trie>,
}

impl Trie {
    fn into_nodes(
        self,
        parent_feature: Option<usize>,
        edges: &[Vec<f64>],
        min_visits: u64,
    ) -> Vec<RuleNode> {
        self.children
            .into_iter()
            .filter(|(_, t)| t.visits >= min_visits)
            .map(|((bin, action), t)| {
                let condition = match (parent_feature, bin) {
                    (Some(feature), Some(bin)) => {
                        let e = &edges[feature];
                        Some(BinCondition {
                            feature,
                            bin,
                            lo: bin.checked_sub(1).map(|b| e[b]),
                            hi: e.get(bin).copied(),
                        })
                    }
                    _ => None,
                };
                let next_feature = match action {
                    RuleAction::Acquire { feature } => Some(feature),
                    RuleAction::Classify { .. } => None,
                };
                RuleNode {
                    action,
                    condition,
                    visits: t.visits,
                    children: t.into_nodes(next_feature, edges, min_visits),
                }
            })
            .collect()
    }
}

/// Builds the rule tree from a visit log.
pub fn aggregate(log: &VisitLog, opts: &RuleOptions) -> Result<RuleTree> {
    if log.records.is_empty() {
        return Err(Error::validation("visit log has no records"));
    }
    if opts.bins < 2 {
        return Err(Error::validation("need at least 2 bins per feature"));
    }
    let p = log.n_features();
    let n_classes = log.header.class_names.len();
    let decode = |r: &VisitRecord| Action::from_index(r.action, p, n_classes).map(RuleAction::from);

    let mut per_feature = vec![Vec::new(); p];
    for r in &log.records {
        if let (RuleAction::Acquire { feature }, Some(v)) = (decode(r)?, r.revealed) {
            per_feature[feature].push(v);
        }
    }
    let edges: Vec<Vec<f64>> = per_feature.into_iter().map(|v| quantile_edges(v, opts.bins)).collect();

    let mut by_sample: BTreeMap<usize, Vec<&VisitRecord>> = BTreeMap::new();
    for r in &log.records {
        by_sample.entry(r.sample).or_default().push(r);
    }

    let mut root = Trie::default();
    for records in by_sample.values_mut() {
        records.sort_by_key(|r| r.ordinal);
        let mut node = &mut root;
        let mut condition_bin = None;
        for r in records.iter() {
            let action = decode(r)?;
            let weight = match opts.mode {
                CountMode::Trajectories => 1,
                CountMode::Simulations => u64::from(r.visits.get(r.action).copied().unwrap_or(0)),
            };
            node = node.children.entry((condition_bin, action)).or_default();
            node.visits += weight;
            condition_bin = match (action, r.revealed) {
                (RuleAction::Acquire { feature }, Some(v)) => Some(bin_of(&edges[feature], v)),
                _ => None,
            };
        }
    }

    let roots = root.into_nodes(None, &edges, opts.min_visits.max(1));
    let warning = roots.is_empty().then(|| {
        format!("no path reaches {} visits; the rule tree is empty", opts.min_visits)
    });
    Ok(RuleTree {
        schema: RULES_SCHEMA,
        min_visits: opts.min_visits,
        mode: opts.mode,
        feature_names: log.header.feature_names.clone(),
        class_names: log.header.class_names.clone(),
        bin_edges: edges,
        roots,
        warning,
    })
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn fmt_bound(v: Option<f64>, inf: &str) -> String {
    v.map_or_else(|| inf.to_string(), |x| format!("{x:.4}"))
}

impl RuleTree {
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.roots.iter().map(RuleNode::count).sum()
    }

    fn feature_name(&self, i: usize) -> String {
        self.feature_names.get(i).cloned().unwrap_or_else(|| format!("f{i}"))
    }

    fn class_name(&self, k: usize) -> String {
        self.class_names.get(k).cloned().unwrap_or_else(|| k.to_string())
    }

    pub fn node_label(&self, node: &RuleNode) -> String {
        match node.action {
            RuleAction::Acquire { feature } => {
                format!("acquire {} (N={})", self.feature_name(feature), node.visits)
            }
            RuleAction::Classify { class } => {
                format!("classify {} (N={})", self.class_name(class), node.visits)
            }
        }
    }

    pub fn condition_label(&self, c: &BinCondition) -> String {
        format!(
            "{} ∈ [{}, {})",
            self.feature_name(c.feature),
            fmt_bound(c.lo, "-inf"),
            fmt_bound(c.hi, "+inf")
        )
    }

    /// Graphviz `digraph` source.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph rules {\n");
        if !self.is_empty() {
            out.push_str("  node [shape=box, fontname=\"Helvetica\"];\n");
        }
        let mut next_id = 0usize;
        fn walk(tree: &RuleTree, node: &RuleNode, parent: Option<usize>, next_id: &mut usize, out: &mut String) {
            let id = *next_id;
            *next_id += 1;
            out.push_str(&format!("  n{id} [label=\"{}\"];\n", escape(&tree.node_label(node))));
            if let Some(pid) = parent {
                match &node.condition {
                    Some(c) => out.push_str(&format!(
                        "  n{pid} -> n{id} [label=\"{}\"];\n",
                        escape(&tree.condition_label(c))
                    )),
                    None => out.push_str(&format!("  n{pid} -> n{id};\n")),
                }
            }
            for child in &node.children {
                walk(tree, child, Some(id), next_id, out);
            }
        }
        for root in &self.roots {
            walk(self, root, None, &mut next_id, &mut out);
        }
        out.push_str("}\n");
        out
    }

    /// Structured text (pretty JSON); [`RuleTree::from_text`] reads it back.
    pub fn to_text(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let tree: Self = serde_json::from_str(text)?;
        if tree.schema != RULES_SCHEMA {
            return Err(Error::validation(format!("unsupported rules schema {}", tree.schema)));
        }
        Ok(tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcts::VisitLogHeader;

    fn header(p: usize) -> VisitLogHeader {
        VisitLogHeader {
            schema: crate::mcts::VISIT_LOG_SCHEMA,
            feature_names: (0..p).map(|i| format!("v{i}")).collect(),
            class_names: vec!["no".into(), "yes".into()],
        }
    }

    fn record(sample: usize, ordinal: usize, action: usize, revealed: Option<f64>) -> VisitRecord {
        VisitRecord {
            sample,
            ordinal,
            label: 0,
            acquired: Vec::new(),
            action,
            revealed,
            policy: Vec::new(),
            visits: vec![0; 5],
        }
    }

    /// Sample path: acquire f0 (value), then `next`, then classify.
    fn path(sample: usize, v0: f64, next: Option<(usize, f64)>, class: usize) -> Vec<VisitRecord> {
        let mut out = vec![record(sample, 0, 0, Some(v0))];
        if let Some((f, v)) = next {
            out.push(record(sample, 1, f, Some(v)));
        }
        out.push(record(sample, out.len(), 3 + class, None));
        out
    }

    fn opts(min_visits: u64) -> RuleOptions {
        RuleOptions { bins: 3, min_visits, mode: CountMode::Trajectories }
    }

    #[test]
    fn single_sample_gives_its_path() {
        let log = VisitLog { header: header(3), records: path(0, 0.4, Some((2, -1.0)), 1) };
        let tree = aggregate(&log, &opts(1)).unwrap();
        assert_eq!(tree.roots.len(), 1);
        let r = &tree.roots[0];
        assert_eq!(r.action, RuleAction::Acquire { feature: 0 });
        assert_eq!(r.children[0].action, RuleAction::Acquire { feature: 2 });
        assert_eq!(r.children[0].children[0].action, RuleAction::Classify { class: 1 });
        assert_eq!(tree.node_count(), 3);
    }

    #[test]
    fn different_bins_branch() {
        let mut records = Vec::new();
        for s in 0..30 {
            let v = f64::from(s as u32) / 30.0;
            records.extend(path(s, v, None, usize::from(v > 0.5)));
        }
        let log = VisitLog { header: header(3), records };
        let tree = aggregate(&log, &opts(1)).unwrap();
        assert_eq!(tree.roots.len(), 1);
        assert_eq!(tree.roots[0].visits, 30);
        // three quantile bins of f0, with a class split inside the middle bin
        let bins: std::collections::BTreeSet<usize> =
            tree.roots[0].children.iter().map(|c| c.condition.as_ref().unwrap().bin).collect();
        assert_eq!(bins.len(), 3);
        let sum: u64 = tree.roots[0].children.iter().map(|c| c.visits).sum();
        assert_eq!(sum, 30);
    }

    #[test]
    fn two_samples_same_actions_different_bins() {
        let mut records = path(0, -5.0, None, 0);
        records.extend(path(1, 5.0, None, 0));
        let log = VisitLog { header: header(3), records };
        let tree = aggregate(&log, &RuleOptions { bins: 2, ..opts(1) }).unwrap();
        assert_eq!(tree.roots[0].children.len(), 2);
    }

    #[test]
    fn fig_shaped_tree_renders_root_and_three_branches() {
        let mut records = Vec::new();
        for s in 0..90 {
            let bin = s % 3;
            let v0 = bin as f64 + 0.5;
            records.extend(path(s, v0, Some((1 + bin % 2, 0.0)), 0));
        }
        let log = VisitLog { header: header(3), records };
        let tree = aggregate(&log, &opts(10)).unwrap();
        assert_eq!(tree.roots.len(), 1);
        assert_eq!(tree.roots[0].children.len(), 3);
        let dot = tree.to_dot();
        assert_eq!(dot.matches("n0 -> ").count(), 3);
        assert!(dot.contains("acquire v0 (N=90)"));
        assert!(dot.contains("v0 ∈ [-inf,"));
    }

    #[test]
    fn pruning_and_empty_tree() {
        let log = VisitLog { header: header(3), records: path(0, 0.4, None, 1) };
        let tree = aggregate(&log, &opts(50)).unwrap();
        assert!(tree.is_empty());
        assert!(tree.warning.is_some());
        assert_eq!(tree.to_dot(), "digraph rules {\n}\n");
        assert!(aggregate(&VisitLog { header: header(3), records: vec![] }, &opts(1)).is_err());
    }

    #[test]
    fn text_round_trip_is_byte_identical() {
        let mut records = Vec::new();
        for s in 0..12 {
            records.extend(path(s, 0.1 * s as f64 - 0.37, Some((1 + s % 2, 0.3)), s % 2));
        }
        let log = VisitLog { header: header(3), records };
        let tree = aggregate(&log, &opts(2)).unwrap();
        let text = tree.to_text().unwrap();
        let back = RuleTree::from_text(&text).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_text().unwrap(), text);
    }

    #[test]
    fn simulation_counts_weight_by_root_visits() {
        let mut records = path(0, 0.4, None, 1);
        records[0].visits[0] = 120;
        records[1].visits[4] = 80;
        let log = VisitLog { header: header(3), records };
        let tree = aggregate(&log, &RuleOptions { mode: CountMode::Simulations, ..opts(50) }).unwrap();
        assert_eq!(tree.roots[0].visits, 120);
        assert_eq!(tree.roots[0].children[0].visits, 80);
    }
}
