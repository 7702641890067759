//! Plot-chain operations: completion marking, id-keyed diffs and the
//! reflection edit bound.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::model::{Plot, PlotChain};
use super::ScriptError;

/// Tags `plot_id` as complete. Idempotent.
pub fn mark_complete(chain: &PlotChain, plot_id: &str) -> Result<PlotChain, ScriptError> {
    let mut next = chain.clone();
    let plot = next
        .plots
        .iter_mut()
        .find(|p| p.id == plot_id)
        .ok_or_else(|| ScriptError::UnknownPlot(plot_id.to_string()))?;
    plot.completed = true;
    Ok(next)
}

/// True when every plot is complete. An empty chain is vacuously complete.
pub fn is_scene_complete(chain: &PlotChain) -> bool {
    chain.plots.iter().all(|p| p.completed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotEdit {
    pub id: String,
    pub old_description: String,
    pub new_description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotInsertion {
    /// Index in the new chain.
    pub position: usize,
    pub plot: Plot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionChange {
    pub id: String,
    pub old: bool,
    pub new: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlotChainDiff {
    pub modified: Vec<PlotEdit>,
    pub inserted: Vec<PlotInsertion>,
    pub removed: Vec<String>,
    pub completion_changes: Vec<CompletionChange>,
}

impl PlotChainDiff {
    pub fn is_empty(&self) -> bool {
        self.modified.is_empty()
            && self.inserted.is_empty()
            && self.removed.is_empty()
            && self.completion_changes.is_empty()
    }
}

fn ensure_unique(chain: &PlotChain) -> Result<(), ScriptError> {
    let mut seen = HashSet::new();
    for plot in &chain.plots {
        if !seen.insert(plot.id.as_str()) {
            return Err(ScriptError::AmbiguousDiff(plot.id.clone()));
        }
    }
    Ok(())
}

/// Longest common subsequence of two id sequences, returned as the set of
/// ids kept in place. Ties prefer keeping earlier plots of `old`.
fn kept_ids<'a>(old: &[&'a str], new: &[&'a str]) -> HashSet<&'a str> {
    let (n, m) = (old.len(), new.len());
    let mut table = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i][j] = if old[i] == new[j] {
                table[i + 1][j + 1] + 1
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }
    let mut kept = HashSet::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if old[i] == new[j] {
            kept.insert(old[i]);
            i += 1;
            j += 1;
        } else if table[i][j + 1] > table[i + 1][j] {
            j += 1;
        } else {
            i += 1;
        }
    }
    kept
}

/// Classifies the edits turning `old` into `new`, keyed by plot id.
///
/// Plots that keep their id but change owner or origin, or that fall out of
/// relative order, are reported as a removal plus an insertion.
pub fn diff_chains(old: &PlotChain, new: &PlotChain) -> Result<PlotChainDiff, ScriptError> {
    ensure_unique(old)?;
    ensure_unique(new)?;

    let old_by_id: HashMap<&str, &Plot> = old.plots.iter().map(|p| (p.id.as_str(), p)).collect();
    let new_by_id: HashMap<&str, &Plot> = new.plots.iter().map(|p| (p.id.as_str(), p)).collect();

    let same_identity = |id: &str| {
        let (a, b) = (old_by_id[id], new_by_id[id]);
        a.owner == b.owner && a.origin == b.origin
    };
    let old_common: Vec<&str> = old
        .plots
        .iter()
        .map(|p| p.id.as_str())
        .filter(|id| new_by_id.contains_key(id) && same_identity(id))
        .collect();
    let new_common: Vec<&str> = new
        .plots
        .iter()
        .map(|p| p.id.as_str())
        .filter(|id| old_by_id.contains_key(id) && same_identity(id))
        .collect();
    let kept = kept_ids(&old_common, &new_common);

    let mut diff = PlotChainDiff::default();
    for plot in &old.plots {
        let id = plot.id.as_str();
        if !kept.contains(id) {
            diff.removed.push(plot.id.clone());
            continue;
        }
        let replacement = new_by_id[id];
        if replacement.description != plot.description {
            diff.modified.push(PlotEdit {
                id: plot.id.clone(),
                old_description: plot.description.clone(),
                new_description: replacement.description.clone(),
            });
        }
        if replacement.completed != plot.completed {
            diff.completion_changes.push(CompletionChange {
                id: plot.id.clone(),
                old: plot.completed,
                new: replacement.completed,
            });
        }
    }
    for (position, plot) in new.plots.iter().enumerate() {
        if !kept.contains(plot.id.as_str()) {
            diff.inserted.push(PlotInsertion {
                position,
                plot: plot.clone(),
            });
        }
    }
    Ok(diff)
}

/// Applies a diff produced by [`diff_chains`] to the chain it was computed from.
pub fn apply_diff(old: &PlotChain, diff: &PlotChainDiff) -> Result<PlotChain, ScriptError> {
    let removed: HashSet<&str> = diff.removed.iter().map(String::as_str).collect();
    let mut plots: Vec<Plot> = old
        .plots
        .iter()
        .filter(|p| !removed.contains(p.id.as_str()))
        .cloned()
        .collect();

    for edit in &diff.modified {
        let plot = plots
            .iter_mut()
            .find(|p| p.id == edit.id)
            .ok_or_else(|| ScriptError::UnknownPlot(edit.id.clone()))?;
        plot.description = edit.new_description.clone();
    }
    for change in &diff.completion_changes {
        let plot = plots
            .iter_mut()
            .find(|p| p.id == change.id)
            .ok_or_else(|| ScriptError::UnknownPlot(change.id.clone()))?;
        plot.completed = change.new;
    }

    let mut insertions: Vec<&PlotInsertion> = diff.inserted.iter().collect();
    insertions.sort_by_key(|ins| ins.position);
    for ins in insertions {
        if ins.position > plots.len() {
            return Err(ScriptError::InvalidDiff(format!(
                "insertion position {} beyond chain length {}",
                ins.position,
                plots.len()
            )));
        }
        plots.insert(ins.position, ins.plot.clone());
    }
    Ok(PlotChain::new(plots))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundViolation {
    DuplicateIds { id: String },
    PlotRemoved { id: String },
    CompletedPlotRemoved { id: String },
    CompletedPlotModified { id: String },
    CompletionReverted { id: String },
    InsertedCompleted { id: String },
    EmptyDescription { id: String },
    BudgetExceeded { used: u32, budget: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ReflectionVerdict {
    Accepted {
        chain: PlotChain,
        diff: PlotChainDiff,
    },
    Rejected {
        chain: PlotChain,
        violations: Vec<BoundViolation>,
    },
}

impl ReflectionVerdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, ReflectionVerdict::Accepted { .. })
    }

    /// The chain the session continues with.
    pub fn chain(&self) -> &PlotChain {
        match self {
            ReflectionVerdict::Accepted { chain, .. } | ReflectionVerdict::Rejected { chain, .. } => {
                chain
            }
        }
    }
}

/// Limits how far one reflection may move the plot chain.
///
/// A change is either one rewritten incomplete plot or one inserted plot;
/// `budget` caps their sum. Removals, reorderings, edits to completed plots and
/// reverted completions are never allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionBound {
    pub budget: u32,
}

impl Default for ReflectionBound {
    fn default() -> Self {
        Self { budget: 1 }
    }
}

impl ReflectionBound {
    pub fn new(budget: u32) -> Self {
        Self { budget }
    }

    pub fn check(&self, old: &PlotChain, new: &PlotChain) -> ReflectionVerdict {
        let reject = |violations| ReflectionVerdict::Rejected {
            chain: old.clone(),
            violations,
        };
        let diff = match diff_chains(old, new) {
            Ok(diff) => diff,
            Err(ScriptError::AmbiguousDiff(id)) => {
                return reject(vec![BoundViolation::DuplicateIds { id }])
            }
            Err(other) => unreachable!("diff_chains only fails on duplicates: {other}"),
        };

        let was_completed = |id: &str| old.get(id).map(|p| p.completed).unwrap_or(false);
        let mut violations = Vec::new();
        for id in &diff.removed {
            violations.push(BoundViolation::PlotRemoved { id: id.clone() });
            if was_completed(id) {
                violations.push(BoundViolation::CompletedPlotRemoved { id: id.clone() });
            }
        }
        let mut used = 0u32;
        for edit in &diff.modified {
            if was_completed(&edit.id) {
                violations.push(BoundViolation::CompletedPlotModified {
                    id: edit.id.clone(),
                });
            } else {
                used += 1;
            }
        }
        for change in &diff.completion_changes {
            if change.old && !change.new {
                violations.push(BoundViolation::CompletionReverted {
                    id: change.id.clone(),
                });
            }
        }
        for ins in &diff.inserted {
            used += 1;
            if ins.plot.completed {
                violations.push(BoundViolation::InsertedCompleted {
                    id: ins.plot.id.clone(),
                });
            }
        }
        for plot in &new.plots {
            if plot.description.trim().is_empty() {
                violations.push(BoundViolation::EmptyDescription {
                    id: plot.id.clone(),
                });
            }
        }
        if used > self.budget {
            violations.push(BoundViolation::BudgetExceeded {
                used,
                budget: self.budget,
            });
        }

        if violations.is_empty() {
            ReflectionVerdict::Accepted {
                chain: new.clone(),
                diff,
            }
        } else {
            reject(violations)
        }
    }
}

/// [`ReflectionBound::check`] with the default budget of one change.
pub fn enforce_reflection_bound(old: &PlotChain, new: &PlotChain) -> ReflectionVerdict {
    ReflectionBound::default().check(old, new)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(spec: &[(&str, &str, bool)]) -> PlotChain {
        spec.iter()
            .map(|(id, d, c)| Plot::new(*id, *d).completed(*c))
            .collect()
    }

    #[test]
    fn mark_complete_sets_flag_and_is_idempotent() {
        let c = chain(&[("A", "a", false), ("B", "b", false)]);
        let marked = mark_complete(&c, "A").unwrap();
        assert_eq!(marked, chain(&[("A", "a", true), ("B", "b", false)]));
        let done = chain(&[("A", "a", true)]);
        assert_eq!(mark_complete(&done, "A").unwrap(), done);
    }

    #[test]
    fn mark_complete_unknown_plot() {
        let c = chain(&[("A", "a", false)]);
        assert!(matches!(
            mark_complete(&c, "C"),
            Err(ScriptError::UnknownPlot(id)) if id == "C"
        ));
    }

    #[test]
    fn scene_completion() {
        assert!(is_scene_complete(&chain(&[("A", "a", true), ("B", "b", true)])));
        assert!(!is_scene_complete(&chain(&[("A", "a", true), ("B", "b", false)])));
        assert!(is_scene_complete(&PlotChain::default()));
    }

    #[test]
    fn diff_single_modification() {
        let old = chain(&[("A", "a", false), ("B", "b", false)]);
        let new = chain(&[("A", "a", false), ("B", "b prime", false)]);
        let diff = diff_chains(&old, &new).unwrap();
        assert_eq!(diff.modified.len(), 1);
        assert_eq!(diff.modified[0].id, "B");
        assert!(diff.inserted.is_empty() && diff.removed.is_empty());
        assert_eq!(apply_diff(&old, &diff).unwrap(), new);
    }

    #[test]
    fn diff_single_insert() {
        let old = chain(&[("A", "a", false), ("B", "b", false)]);
        let new = chain(&[("A", "a", false), ("X", "x", false), ("B", "b", false)]);
        let diff = diff_chains(&old, &new).unwrap();
        assert_eq!(diff.inserted.len(), 1);
        assert_eq!(diff.inserted[0].position, 1);
        assert_eq!(diff.inserted[0].plot.id, "X");
        assert!(diff.modified.is_empty() && diff.removed.is_empty());
    }

    #[test]
    fn diff_reorder_is_remove_plus_insert() {
        let old = chain(&[("A", "a", false), ("B", "b", false)]);
        let new = chain(&[("B", "b", false), ("A", "a", false)]);
        let diff = diff_chains(&old, &new).unwrap();
        assert_eq!(diff.removed.len(), 1);
        assert_eq!(diff.inserted.len(), 1);
        assert_eq!(diff.removed[0], diff.inserted[0].plot.id);
        assert_eq!(apply_diff(&old, &diff).unwrap(), new);
    }

    #[test]
    fn diff_rejects_duplicate_ids() {
        let dup = chain(&[("A", "a", false), ("A", "b", false)]);
        let ok = chain(&[("A", "a", false)]);
        assert!(matches!(diff_chains(&dup, &ok), Err(ScriptError::AmbiguousDiff(_))));
        assert!(matches!(diff_chains(&ok, &dup), Err(ScriptError::AmbiguousDiff(_))));
    }

    #[test]
    fn owner_change_is_identity_change() {
        let old = PlotChain::new(vec![Plot::new("A", "a").owned_by("Ada")]);
        let new = PlotChain::new(vec![Plot::new("A", "a").owned_by("Bo")]);
        let diff = diff_chains(&old, &new).unwrap();
        assert_eq!(diff.removed, vec!["A".to_string()]);
        assert_eq!(apply_diff(&old, &diff).unwrap(), new);
    }

    #[test]
    fn bound_accepts_one_incomplete_adjustment() {
        let old = chain(&[("A", "a", true), ("B", "b", false)]);
        let new = chain(&[("A", "a", true), ("B", "b prime", false)]);
        assert!(enforce_reflection_bound(&old, &new).is_accepted());
    }

    #[test]
    fn bound_rejects_insert_plus_modify() {
        let old = chain(&[("A", "a", true), ("B", "b", false)]);
        let new = chain(&[("A", "a", true), ("X", "x", false), ("B", "b prime", false)]);
        match enforce_reflection_bound(&old, &new) {
            ReflectionVerdict::Rejected { chain, violations } => {
                assert_eq!(chain, old);
                assert_eq!(violations, vec![BoundViolation::BudgetExceeded { used: 2, budget: 1 }]);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn inclusive_budget_allows_insert_plus_modify() {
        let old = chain(&[("A", "a", true), ("B", "b", false)]);
        let new = chain(&[("A", "a", true), ("X", "x", false), ("B", "b prime", false)]);
        assert!(ReflectionBound::new(2).check(&old, &new).is_accepted());
    }

    #[test]
    fn bound_rejects_touching_completed_plot() {
        let old = chain(&[("A", "a", true), ("B", "b", false)]);
        let new = chain(&[("A", "a prime", true), ("B", "b", false)]);
        match enforce_reflection_bound(&old, &new) {
            ReflectionVerdict::Rejected { violations, .. } => assert_eq!(
                violations,
                vec![BoundViolation::CompletedPlotModified { id: "A".into() }]
            ),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn bound_rejects_removal_and_reversion() {
        let old = chain(&[("A", "a", true), ("B", "b", false)]);
        let removed = chain(&[("A", "a", true)]);
        assert!(!enforce_reflection_bound(&old, &removed).is_accepted());
        let reverted = chain(&[("A", "a", false), ("B", "b", false)]);
        assert!(!enforce_reflection_bound(&old, &reverted).is_accepted());
    }

    #[test]
    fn unchanged_chain_is_accepted() {
        let old = chain(&[("A", "a", true), ("B", "b", false)]);
        assert!(enforce_reflection_bound(&old, &old).is_accepted());
    }
}
