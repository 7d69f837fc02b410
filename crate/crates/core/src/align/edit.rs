use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Match,
    Substitute,
    /// ASR token with no reference counterpart.
    Insert,
    /// Reference token missing from the ASR output.
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlignOp {
    pub kind: OpKind,
    pub asr_index: Option<usize>,
    pub ref_index: Option<usize>,
}

impl AlignOp {
    fn pair(kind: OpKind, a: usize, r: usize) -> Self {
        Self {
            kind,
            asr_index: Some(a),
            ref_index: Some(r),
        }
    }

    fn insert(a: usize) -> Self {
        Self {
            kind: OpKind::Insert,
            asr_index: Some(a),
            ref_index: None,
        }
    }

    fn delete(r: usize) -> Self {
        Self {
            kind: OpKind::Delete,
            asr_index: None,
            ref_index: Some(r),
        }
    }

    pub fn cost(&self) -> usize {
        usize::from(self.kind != OpKind::Match)
    }
}

const DIAG: u8 = 0;
const INS: u8 = 1;
const DEL: u8 = 2;

/// Minimum-cost global alignment of `asr` onto `reference` under unit costs.
///
/// Costs are computed over suffixes so that the forward walk from `(0, 0)` can
/// pick, at each step, the first optimal move in the order
/// match/substitute, insert, delete. Memory is one byte per cell.
pub fn align_tokens<T: AsRef<str>>(asr: &[T], reference: &[T]) -> Vec<AlignOp> {
    let n = asr.len();
    let m = reference.len();
    let width = m + 1;
    let mut choice = vec![0u8; (n + 1) * width];
    let mut next: Vec<u32> = (0..=m).map(|j| (m - j) as u32).collect();
    let mut cur = vec![0u32; width];
    for j in 0..m {
        choice[n * width + j] = DEL;
    }
    for i in (0..n).rev() {
        cur[m] = (n - i) as u32;
        choice[i * width + m] = INS;
        let a = asr[i].as_ref();
        for j in (0..m).rev() {
            let diag = next[j + 1] + u32::from(a != reference[j].as_ref());
            let ins = next[j] + 1;
            let del = cur[j + 1] + 1;
            let (best, c) = if diag <= ins && diag <= del {
                (diag, DIAG)
            } else if ins <= del {
                (ins, INS)
            } else {
                (del, DEL)
            };
            cur[j] = best;
            choice[i * width + j] = c;
        }
        std::mem::swap(&mut cur, &mut next);
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        match choice[i * width + j] {
            DIAG => {
                let kind = if asr[i].as_ref() == reference[j].as_ref() {
                    OpKind::Match
                } else {
                    OpKind::Substitute
                };
                ops.push(AlignOp::pair(kind, i, j));
                i += 1;
                j += 1;
            }
            INS => {
                ops.push(AlignOp::insert(i));
                i += 1;
            }
            _ => {
                ops.push(AlignOp::delete(j));
                j += 1;
            }
        }
    }
    ops
}

pub fn alignment_cost(ops: &[AlignOp]) -> usize {
    ops.iter().map(AlignOp::cost).sum()
}

/// Apply `ops` to `asr`, producing the reference sequence they describe.
/// Returns `None` when an op is inconsistent with the inputs.
pub fn replay<T: AsRef<str>>(ops: &[AlignOp], asr: &[T], reference: &[T]) -> Option<Vec<String>> {
    let mut out = Vec::with_capacity(reference.len());
    let mut next_asr = 0;
    for op in ops {
        match (op.kind, op.asr_index, op.ref_index) {
            (OpKind::Match, Some(a), Some(r)) => {
                if a != next_asr || asr.get(a)?.as_ref() != reference.get(r)?.as_ref() {
                    return None;
                }
                out.push(asr[a].as_ref().to_string());
                next_asr += 1;
            }
            (OpKind::Substitute, Some(a), Some(r)) => {
                if a != next_asr {
                    return None;
                }
                asr.get(a)?;
                out.push(reference.get(r)?.as_ref().to_string());
                next_asr += 1;
            }
            (OpKind::Insert, Some(a), None) => {
                if a != next_asr || a >= asr.len() {
                    return None;
                }
                next_asr += 1;
            }
            (OpKind::Delete, None, Some(r)) => out.push(reference.get(r)?.as_ref().to_string()),
            _ => return None,
        }
    }
    (next_asr == asr.len()).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn identity_is_all_match() {
        let a = toks("a b c d e f g h i j");
        let ops = align_tokens(&a, &a);
        assert_eq!(ops.len(), 10);
        assert!(ops.iter().all(|o| o.kind == OpKind::Match));
        assert_eq!(alignment_cost(&ops), 0);
    }

    #[test]
    fn one_replacement() {
        let a = toks("a b c d e f g h i j");
        let r = toks("a b c d X f g h i j");
        let ops = align_tokens(&a, &r);
        assert_eq!(ops.iter().filter(|o| o.kind == OpKind::Match).count(), 9);
        assert_eq!(ops[4], AlignOp::pair(OpKind::Substitute, 4, 4));
        assert_eq!(alignment_cost(&ops), 1);
    }

    #[test]
    fn empty_asr_deletes_everything() {
        let r = toks("x y z");
        let ops = align_tokens(&[], &r);
        assert_eq!(
            ops,
            vec![AlignOp::delete(0), AlignOp::delete(1), AlignOp::delete(2)]
        );
        let ops = align_tokens(&r, &[]);
        assert!(ops.iter().all(|o| o.kind == OpKind::Insert));
        assert!(align_tokens::<String>(&[], &[]).is_empty());
    }

    #[test]
    fn tie_prefers_substitute_then_insert() {
        // "a" vs "b": substitute (1) beats insert+delete (2).
        assert_eq!(
            align_tokens(&toks("a"), &toks("b")),
            vec![AlignOp::pair(OpKind::Substitute, 0, 0)]
        );
        // "x a" vs "a": insert of x first, then match.
        let ops = align_tokens(&toks("x a"), &toks("a"));
        assert_eq!(
            ops,
            vec![AlignOp::insert(0), AlignOp::pair(OpKind::Match, 1, 0)]
        );
        // "a b" vs "c": substitute at position 0 is preferred over leading insert.
        let ops = align_tokens(&toks("a b"), &toks("c"));
        assert_eq!(
            ops,
            vec![AlignOp::pair(OpKind::Substitute, 0, 0), AlignOp::insert(1)]
        );
    }

    #[test]
    fn replay_reconstructs_and_detects_garbage() {
        let a = toks("i um want to to cut back");
        let r = toks("i want to cut down now");
        let ops = align_tokens(&a, &r);
        assert_eq!(replay(&ops, &a, &r).unwrap(), r);
        let bad = vec![AlignOp::insert(3)];
        assert!(replay(&bad, &a, &r).is_none());
    }
}
