//! The numbering procedure: squares joined by a splice get the same label,
//! transitively.

use serde::{Deserialize, Serialize};

use super::{Grouping, NERows};
use crate::geometry::Ticks;

/// One new-edge square: position `position` of element `element` in row
/// `row`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotId {
    pub row: usize,
    pub element: usize,
    pub position: usize,
}

impl SlotId {
    pub fn index(self, m: usize) -> usize {
        (self.row * m + self.element) * 2 + self.position
    }

    pub fn from_index(idx: usize, m: usize) -> SlotId {
        SlotId {
            row: idx / 2 / m,
            element: (idx / 2) % m,
            position: idx % 2,
        }
    }

    pub fn ticks(self, rows: &NERows) -> Ticks {
        rows.rows[self.row][self.element][self.position]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualityClass {
    pub slots: Vec<SlotId>,
    /// Shared length, `None` when the class mixes lengths.
    pub length: Option<Ticks>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EqualityClasses {
    /// Numbered by smallest member, so the partition has one canonical form.
    pub classes: Vec<EqualityClass>,
    pub feasible: bool,
}

impl EqualityClasses {
    /// Class number of every slot, by flat index.
    pub fn labels(&self, m: usize) -> Vec<usize> {
        let mut out = vec![0; 6 * m];
        for (k, class) in self.classes.iter().enumerate() {
            for s in &class.slots {
                out[s.index(m)] = k;
            }
        }
        out
    }
}

/// Labels the `6m` squares under the red splices of `g` and, if given, the
/// black splices of the real grouping.
pub fn label_equality_classes(g: &Grouping, rows: &NERows, real: Option<&Grouping>) -> EqualityClasses {
    let m = rows.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); 6 * m];
    for grouping in std::iter::once(g).chain(real) {
        for group in &grouping.groups {
            for (x, y) in group.splices() {
                let (x, y) = (x.index(m), y.index(m));
                adj[x].push(y);
                adj[y].push(x);
            }
        }
    }
    let mut label = vec![usize::MAX; 6 * m];
    let mut classes = Vec::new();
    for start in 0..6 * m {
        if label[start] != usize::MAX {
            continue;
        }
        let k = classes.len();
        label[start] = k;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(x) = stack.pop() {
            members.push(x);
            for &y in &adj[x] {
                if label[y] == usize::MAX {
                    label[y] = k;
                    stack.push(y);
                }
            }
        }
        members.sort_unstable();
        let slots: Vec<SlotId> = members.iter().map(|&x| SlotId::from_index(x, m)).collect();
        let first = slots[0].ticks(rows);
        let length = slots.iter().all(|s| s.ticks(rows) == first).then_some(first);
        classes.push(EqualityClass { slots, length });
    }
    let feasible = classes.iter().all(|c| c.length.is_some());
    EqualityClasses { classes, feasible }
}
