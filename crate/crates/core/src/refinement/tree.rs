//! Unrolling a color into the finite tree of colors it was derived from.

use serde::{Deserialize, Serialize};

use super::{ColorId, Flavor, RefinementError, RefinementTranscript, Variant};
use crate::geometry::Ticks;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Children {
    /// FWL: `n` entries, each holding the `k` jointly replaced tuples.
    Joint(Vec<Vec<TreeNode>>),
    /// WL: `k` slots, each a multiset of `n` replaced tuples.
    Slots(Vec<Vec<TreeNode>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub round: usize,
    pub color: ColorId,
    /// Sorted pairwise ticks of the tuples with this color.
    pub init: Vec<Ticks>,
    pub children: Option<Children>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WLTree {
    pub variant: Variant,
    pub depth: usize,
    pub root: TreeNode,
}

/// Unrolls the final color of `tuple` for `depth` levels.
pub fn unroll_tree(t: &RefinementTranscript, tuple: &[usize], depth: usize) -> Result<WLTree, RefinementError> {
    let color = t.color_of(t.rounds(), tuple)?;
    Ok(WLTree {
        variant: t.variant(),
        depth,
        root: unroll_color(t, t.rounds(), color, depth)?,
    })
}

/// Unrolls `color` of round `round`; reads only the interning tables.
pub fn unroll_color(
    t: &RefinementTranscript,
    round: usize,
    color: ColorId,
    depth: usize,
) -> Result<TreeNode, RefinementError> {
    if depth > round {
        return Err(RefinementError::DepthExceedsRounds { depth, rounds: round });
    }
    let init = t.init_signature(round, color).to_vec();
    if depth == 0 {
        return Ok(TreeNode {
            round,
            color,
            init,
            children: None,
        });
    }
    let rule = t.rule(round, color);
    let groups = rule
        .groups(t.variant(), t.n())
        .into_iter()
        .map(|g| g.iter().map(|&c| unroll_color(t, round - 1, c, depth - 1)).collect())
        .collect::<Result<Vec<Vec<TreeNode>>, _>>()?;
    let children = match t.variant().flavor() {
        Flavor::Fwl => Children::Joint(groups),
        Flavor::Wl => Children::Slots(groups),
    };
    Ok(TreeNode {
        round,
        color,
        init,
        children: Some(children),
    })
}
