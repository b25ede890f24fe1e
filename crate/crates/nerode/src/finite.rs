//! Finite-state systems with exhaustively checkable semantics.
//!
//! A finite system moves between finitely many states under finitely
//! many input symbols and emits an integer output per state. Everything
//! the rest of the crate estimates numerically is decidable here: the
//! echo property reduces to acyclicity of a pair graph, the reachable
//! set is a fixed point of a shrinking image map, and indistinguishable
//! states are found by partition refinement. That makes these systems
//! the ground truth the linear-algebra paths are tested against.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FiniteSystemRepr {
    transition: Vec<Vec<usize>>,
    output: Vec<i64>,
}

/// A deterministic finite-state system. `transition[x][z]` is the state
/// reached from `x` on input symbol `z`, and `output[x]` is the readout
/// in state `x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FiniteSystemRepr", into = "FiniteSystemRepr")]
pub struct FiniteSystem {
    transition: Vec<Vec<usize>>,
    output: Vec<i64>,
}

impl FiniteSystem {
    pub fn new(transition: Vec<Vec<usize>>, output: Vec<i64>) -> Result<Self> {
        let n = transition.len();
        if n == 0 {
            return Err(Error::InvalidParameter(
                "finite system needs at least one state".into(),
            ));
        }
        if output.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} states but {} outputs",
                n,
                output.len()
            )));
        }
        let arity = transition[0].len();
        if arity == 0 {
            return Err(Error::InvalidParameter(
                "finite system needs at least one input symbol".into(),
            ));
        }
        for (x, row) in transition.iter().enumerate() {
            if row.len() != arity {
                return Err(Error::DimensionMismatch(format!(
                    "state {x} has {} transitions, expected {arity}",
                    row.len()
                )));
            }
            for (z, &next) in row.iter().enumerate() {
                if next >= n {
                    return Err(Error::InvalidParameter(format!(
                        "transition from state {x} on symbol {z} targets \
                         missing state {next}"
                    )));
                }
            }
        }
        Ok(Self { transition, output })
    }

    pub fn n_states(&self) -> usize {
        self.transition.len()
    }

    pub fn arity(&self) -> usize {
        self.transition[0].len()
    }

    pub fn output_of(&self, state: usize) -> i64 {
        self.output[state]
    }

    pub fn step(&self, state: usize, symbol: usize) -> usize {
        self.transition[state][symbol]
    }

    /// Runs the system from `start` through `word`, returning the final
    /// state. Symbols must be below the arity.
    pub fn run(&self, start: usize, word: &[usize]) -> usize {
        word.iter().fold(start, |x, &z| self.transition[x][z])
    }
}

impl TryFrom<FiniteSystemRepr> for FiniteSystem {
    type Error = Error;

    fn try_from(repr: FiniteSystemRepr) -> Result<Self> {
        FiniteSystem::new(repr.transition, repr.output)
    }
}

impl From<FiniteSystem> for FiniteSystemRepr {
    fn from(sys: FiniteSystem) -> FiniteSystemRepr {
        FiniteSystemRepr { transition: sys.transition, output: sys.output }
    }
}

/// Outcome of the exact echo-property decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteEspReport {
    pub esp: bool,
    /// Number of steps after which any two trajectories driven by the
    /// same input word are guaranteed to coincide. `None` when the
    /// property fails.
    pub merge_steps: Option<usize>,
}

fn pair_id(n: usize, x: usize, y: usize) -> usize {
    debug_assert!(x < y);
    x * n + y
}

/// Decides the echo property exactly. Two trajectories driven by the
/// same inputs evolve a pair of states; the property holds exactly when
/// the graph of distinct pairs is acyclic, and the longest path in that
/// graph bounds how long any two trajectories can stay apart.
pub fn esp_check(sys: &FiniteSystem) -> FiniteEspReport {
    let n = sys.n_states();
    let arity = sys.arity();
    let mut nodes = Vec::new();
    for x in 0..n {
        for y in (x + 1)..n {
            nodes.push((x, y));
        }
    }

    // Kahn's algorithm over the pair graph; a leftover node means a
    // cycle, hence two trajectories that never merge.
    let mut in_degree = vec![0usize; n * n];
    let successors = |(x, y): (usize, usize)| {
        let mut next = Vec::with_capacity(arity);
        for z in 0..arity {
            let (fx, fy) = (sys.step(x, z), sys.step(y, z));
            if fx != fy {
                next.push((fx.min(fy), fx.max(fy)));
            }
        }
        next
    };
    for &p in &nodes {
        for q in successors(p) {
            in_degree[pair_id(n, q.0, q.1)] += 1;
        }
    }

    let mut queue: Vec<(usize, usize)> = nodes
        .iter()
        .copied()
        .filter(|&(x, y)| in_degree[pair_id(n, x, y)] == 0)
        .collect();
    let mut topo = Vec::with_capacity(nodes.len());
    while let Some(p) = queue.pop() {
        topo.push(p);
        for q in successors(p) {
            let d = &mut in_degree[pair_id(n, q.0, q.1)];
            *d -= 1;
            if *d == 0 {
                queue.push(q);
            }
        }
    }
    if topo.len() < nodes.len() {
        return FiniteEspReport { esp: false, merge_steps: None };
    }

    // Height of a pair: longest word that keeps it distinct. Processing
    // in reverse topological order sees every successor first.
    let mut height = vec![0usize; n * n];
    let mut max_height = 0;
    for &(x, y) in topo.iter().rev() {
        let mut h = 0;
        for z in 0..sys.arity() {
            let (fx, fy) = (sys.step(x, z), sys.step(y, z));
            if fx != fy {
                h = h.max(1 + height[pair_id(n, fx.min(fy), fx.max(fy))]);
            }
        }
        height[pair_id(n, x, y)] = h;
        max_height = max_height.max(h);
    }
    let merge_steps = if nodes.is_empty() { 0 } else { max_height + 1 };
    FiniteEspReport { esp: true, merge_steps: Some(merge_steps) }
}

fn require_esp(sys: &FiniteSystem) -> Result<()> {
    if esp_check(sys).esp {
        Ok(())
    } else {
        Err(Error::EspFails(
            "two state trajectories can stay distinct forever".into(),
        ))
    }
}

/// States that persist arbitrarily deep into the past: the limit of
/// repeatedly taking the image of the full state set under all inputs.
/// Only meaningful under the echo property, so that gate is enforced.
pub fn reachable_states(sys: &FiniteSystem) -> Result<Vec<usize>> {
    require_esp(sys)?;
    let n = sys.n_states();
    let mut current: Vec<bool> = vec![true; n];
    loop {
        let mut next = vec![false; n];
        for x in 0..n {
            if current[x] {
                for z in 0..sys.arity() {
                    next[sys.step(x, z)] = true;
                }
            }
        }
        if next == current {
            break;
        }
        current = next;
    }
    Ok((0..n).filter(|&x| current[x]).collect())
}

/// Grouping of the reachable states into indistinguishability classes.
/// Unreachable states carry no class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    class_of: Vec<Option<usize>>,
    n_classes: usize,
}

impl Partition {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_of(&self, state: usize) -> Option<usize> {
        self.class_of.get(state).copied().flatten()
    }

    /// Members of each class, in increasing state order.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut classes = vec![Vec::new(); self.n_classes];
        for (state, class) in self.class_of.iter().enumerate() {
            if let Some(k) = class {
                classes[*k].push(state);
            }
        }
        classes
    }
}

/// Partition refinement: start from output classes and split any class
/// whose members disagree on where some input sends them, until stable.
/// Two reachable states land in the same class exactly when no input
/// word can make their outputs differ.
pub fn nerode_partition(sys: &FiniteSystem) -> Result<Partition> {
    let reachable = reachable_states(sys)?;
    let n = sys.n_states();

    let mut class_of: Vec<Option<usize>> = vec![None; n];
    let mut by_output = BTreeMap::new();
    let mut n_classes = 0;
    for &x in &reachable {
        let next_id = by_output.len();
        let id = *by_output.entry(sys.output_of(x)).or_insert(next_id);
        class_of[x] = Some(id);
        n_classes = n_classes.max(id + 1);
    }

    loop {
        let mut signature_ids: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut refined: Vec<Option<usize>> = vec![None; n];
        for &x in &reachable {
            let mut signature = vec![class_of[x].unwrap()];
            for z in 0..sys.arity() {
                // images of reachable states stay reachable
                signature.push(class_of[sys.step(x, z)].unwrap());
            }
            let next_id = signature_ids.len();
            let id = *signature_ids.entry(signature).or_insert(next_id);
            refined[x] = Some(id);
        }
        let refined_count = signature_ids.len();
        if refined_count == n_classes {
            break;
        }
        class_of = refined;
        n_classes = refined_count;
    }
    Ok(Partition { class_of, n_classes })
}

/// The quotient of `sys` by indistinguishability, together with the
/// partition that produced it. The quotient keeps one state per class
/// of the reachable part, realizes the same input-output behaviour, and
/// has no further collapse available.
pub fn reduce(sys: &FiniteSystem) -> Result<(FiniteSystem, Partition)> {
    let partition = nerode_partition(sys)?;
    let k = partition.n_classes();
    let classes = partition.classes();

    let mut transition = vec![vec![0usize; sys.arity()]; k];
    let mut output = vec![0i64; k];
    for (class, members) in classes.iter().enumerate() {
        let rep = members[0];
        output[class] = sys.output_of(rep);
        for z in 0..sys.arity() {
            let image = partition
                .class_of(sys.step(rep, z))
                .ok_or_else(|| Error::Internal("class image left the reachable set".into()))?;
            transition[class][z] = image;
        }
        for &member in members {
            if sys.output_of(member) != output[class] {
                return Err(Error::Internal(
                    "states in one class disagree on output".into(),
                ));
            }
            for z in 0..sys.arity() {
                if partition.class_of(sys.step(member, z)) != Some(transition[class][z]) {
                    return Err(Error::Internal(
                        "states in one class disagree on a transition".into(),
                    ));
                }
            }
        }
    }
    let quotient = FiniteSystem::new(transition, output)?;
    Ok((quotient, partition))
}

/// Observed output gaps when two different pasts share a continuation.
///
/// Both runs start in state 0, play their own past word, then the
/// common continuation. Entry `t` is 1 when the outputs differ after
/// `t` continuation symbols and 0 when they agree, so a decaying
/// sequence shows the pasts being forgotten.
pub fn ifp_empirical(
    sys: &FiniteSystem,
    past_u: &[usize],
    past_v: &[usize],
    continuation: &[usize],
) -> Result<Vec<f64>> {
    require_esp(sys)?;
    for &z in past_u.iter().chain(past_v).chain(continuation) {
        if z >= sys.arity() {
            return Err(Error::InvalidParameter(format!(
                "input symbol {z} is outside the alphabet of size {}",
                sys.arity()
            )));
        }
    }
    let mut x = sys.run(0, past_u);
    let mut y = sys.run(0, past_v);
    let mut gaps = Vec::with_capacity(continuation.len() + 1);
    gaps.push(if sys.output_of(x) == sys.output_of(y) { 0.0 } else { 1.0 });
    for &z in continuation {
        x = sys.step(x, z);
        y = sys.step(y, z);
        gaps.push(if sys.output_of(x) == sys.output_of(y) { 0.0 } else { 1.0 });
    }
    Ok(gaps)
}

/// A word that drives every state to `target`, or `None` when `target`
/// is not reachable. Under the echo property any sufficiently long word
/// ends in a start-independent state, so the word returned here (length
/// `n_states^2`) reaches `target` from everywhere at once.
pub fn witness_word(sys: &FiniteSystem, target: usize) -> Result<Option<Vec<usize>>> {
    require_esp(sys)?;
    let n = sys.n_states();
    if target >= n {
        return Err(Error::InvalidParameter(format!(
            "target {target} is not a state index below {n}"
        )));
    }
    let depth = n * n;
    // layers[k][x] holds a predecessor of x among states alive k-1 steps
    // earlier, or None when no length-k word lands on x
    let mut layers: Vec<Vec<Option<(usize, usize)>>> = Vec::with_capacity(depth + 1);
    let mut alive: Vec<bool> = vec![true; n];
    layers.push(vec![None; n]);
    for _ in 0..depth {
        let mut layer = vec![None; n];
        let mut next_alive = vec![false; n];
        for x in 0..n {
            if !alive[x] {
                continue;
            }
            for z in 0..sys.arity() {
                let image = sys.step(x, z);
                if layer[image].is_none() {
                    layer[image] = Some((x, z));
                }
                next_alive[image] = true;
            }
        }
        layers.push(layer);
        alive = next_alive;
    }
    if !alive[target] {
        return Ok(None);
    }
    let mut word = vec![0usize; depth];
    let mut state = target;
    for k in (1..=depth).rev() {
        let (prev, z) = layers[k][state].expect("alive states have recorded predecessors");
        word[k - 1] = z;
        state = prev;
    }
    Ok(Some(word))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resetting() -> FiniteSystem {
        // symbol 0 resets to state 0, symbol 1 climbs and saturates
        FiniteSystem::new(
            vec![vec![0, 1], vec![0, 2], vec![0, 2]],
            vec![0, 1, 2],
        )
        .unwrap()
    }

    fn rotating() -> FiniteSystem {
        FiniteSystem::new(vec![vec![1], vec![2], vec![0]], vec![0, 1, 2]).unwrap()
    }

    #[test]
    fn constant_maps_echo_in_one_step() {
        let sys =
            FiniteSystem::new(vec![vec![0, 2], vec![0, 2], vec![0, 2]], vec![5, 5, 7]).unwrap();
        let report = esp_check(&sys);
        assert!(report.esp);
        assert_eq!(report.merge_steps, Some(1));
    }

    #[test]
    fn a_rotation_never_echoes() {
        let report = esp_check(&rotating());
        assert!(!report.esp);
        assert_eq!(report.merge_steps, None);
    }

    #[test]
    fn single_state_is_trivially_echoing() {
        let sys = FiniteSystem::new(vec![vec![0]], vec![3]).unwrap();
        let report = esp_check(&sys);
        assert!(report.esp);
        assert_eq!(report.merge_steps, Some(0));
    }

    #[test]
    fn reset_then_advance_merges_after_saturation() {
        let report = esp_check(&resetting());
        assert!(report.esp);
        // climbing keeps a pair apart until both hit the top state
        assert_eq!(report.merge_steps, Some(2));
    }

    #[test]
    fn reachability_drops_states_without_deep_pasts() {
        // state 2 has no incoming edge at all
        let sys = FiniteSystem::new(
            vec![vec![1, 0], vec![1, 0], vec![1, 0]],
            vec![0, 1, 9],
        )
        .unwrap();
        assert_eq!(reachable_states(&sys).unwrap(), vec![0, 1]);
    }

    #[test]
    fn reachability_requires_the_echo_property() {
        assert!(matches!(
            reachable_states(&rotating()),
            Err(Error::EspFails(_))
        ));
    }

    fn mergeable() -> FiniteSystem {
        // states 1 and 2 emit the same output and act identically;
        // symbol 1 resets so every state keeps a deep past
        FiniteSystem::new(
            vec![vec![1, 0], vec![2, 0], vec![2, 0]],
            vec![0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn partition_merges_output_twins() {
        let partition = nerode_partition(&mergeable()).unwrap();
        assert_eq!(partition.n_classes(), 2);
        assert_eq!(partition.class_of(1), partition.class_of(2));
        assert_ne!(partition.class_of(0), partition.class_of(1));
    }

    #[test]
    fn equal_outputs_can_still_be_distinguished_later() {
        // a register remembering the last two input bits, flagging 11;
        // states 00 and 01 agree now but disagree after reading a 1
        let sys = FiniteSystem::new(
            vec![vec![0, 1], vec![2, 3], vec![0, 1], vec![2, 3]],
            vec![0, 0, 0, 1],
        )
        .unwrap();
        let partition = nerode_partition(&sys).unwrap();
        assert_eq!(partition.n_classes(), 3);
        assert_ne!(partition.class_of(0), partition.class_of(1));
        assert_eq!(partition.class_of(0), partition.class_of(2));
    }

    #[test]
    fn quotient_replays_the_original_outputs() {
        let sys = mergeable();
        let (quotient, partition) = reduce(&sys).unwrap();
        assert_eq!(quotient.n_states(), 2);
        let word = [0, 1, 1, 0, 0, 1, 0];
        let x = sys.run(0, &word);
        let q = quotient.run(partition.class_of(0).unwrap(), &word);
        assert_eq!(sys.output_of(x), quotient.output_of(q));
    }

    #[test]
    fn quotient_of_a_quotient_is_the_quotient() {
        let (quotient, _) = reduce(&mergeable()).unwrap();
        let (again, partition) = reduce(&quotient).unwrap();
        assert_eq!(again.n_states(), quotient.n_states());
        assert_eq!(partition.n_classes(), quotient.n_states());
    }

    #[test]
    fn different_pasts_are_forgotten() {
        let sys = resetting();
        let gaps = ifp_empirical(&sys, &[1, 1], &[], &[1, 0, 1, 1]).unwrap();
        assert_eq!(gaps.len(), 5);
        // once a reset symbol appears the pasts cannot matter
        assert_eq!(&gaps[2..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn witness_words_reach_from_every_start() {
        let sys = resetting();
        for &target in &reachable_states(&sys).unwrap() {
            let word = witness_word(&sys, target).unwrap().unwrap();
            for start in 0..sys.n_states() {
                assert_eq!(sys.run(start, &word), target);
            }
        }
    }

    #[test]
    fn unreachable_targets_have_no_witness() {
        let sys = FiniteSystem::new(
            vec![vec![1, 0], vec![1, 0], vec![1, 0]],
            vec![0, 1, 9],
        )
        .unwrap();
        assert_eq!(witness_word(&sys, 2).unwrap(), None);
    }

    #[test]
    fn ragged_transition_tables_are_rejected() {
        assert!(matches!(
            FiniteSystem::new(vec![vec![0, 1], vec![0]], vec![0, 1]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            FiniteSystem::new(vec![vec![0, 5]], vec![0]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn serde_uses_transition_and_output_fields() {
        let sys = resetting();
        let json = serde_json::to_string(&sys).unwrap();
        assert_eq!(
            json,
            r#"{"transition":[[0,1],[0,2],[0,2]],"output":[0,1,2]}"#
        );
        let back: FiniteSystem = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sys);
    }
}
