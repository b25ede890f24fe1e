//! Cross-checks for finite systems that retrace the library's answers
//! by direct simulation over the transition tables.

use std::collections::BTreeSet;

use nerode::finite::{FiniteSystem, Partition};

/// A pair of states that can stay distinct forever. Iterating the pair
/// map one step past the number of distinct pairs empties the set
/// exactly when the pair graph is acyclic, so any survivor sits
/// downstream of a cycle and witnesses a failure of the echo property.
pub fn sustained_pair(sys: &FiniteSystem) -> Option<(usize, usize)> {
    let n = sys.n_states();
    let mut alive: BTreeSet<(usize, usize)> = (0..n)
        .flat_map(|x| ((x + 1)..n).map(move |y| (x, y)))
        .collect();
    let cutoff = n * n.saturating_sub(1) / 2 + 1;
    for _ in 0..cutoff {
        if alive.is_empty() {
            return None;
        }
        alive = alive
            .iter()
            .flat_map(|&(x, y)| {
                (0..sys.arity()).filter_map(move |z| {
                    let (fx, fy) = (sys.step(x, z), sys.step(y, z));
                    (fx != fy).then(|| (fx.min(fy), fx.max(fy)))
                })
            })
            .collect();
    }
    alive.into_iter().next()
}

/// Whether the word drives every state to one place.
pub fn word_synchronizes(sys: &FiniteSystem, word: &[usize]) -> bool {
    let images: BTreeSet<usize> = (0..sys.n_states()).map(|x| sys.run(x, word)).collect();
    images.len() <= 1
}

/// Whether the class map is a homomorphism onto the quotient: outputs
/// agree and transitions commute for every classified state.
pub fn quotient_is_exact(
    sys: &FiniteSystem,
    quotient: &FiniteSystem,
    partition: &Partition,
) -> bool {
    (0..sys.n_states()).all(|x| {
        let Some(cx) = partition.class_of(x) else {
            return true;
        };
        sys.output_of(x) == quotient.output_of(cx)
            && (0..sys.arity()).all(|z| {
                partition.class_of(sys.step(x, z)) == Some(quotient.step(cx, z))
            })
    })
}
