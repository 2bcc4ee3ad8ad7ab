//! Transition systems, counterexamples and state groupings.
//!
//! All types here are immutable after validation and safe to share across
//! parallel workers without synchronization.

use thiserror::Error;

/// Dense state index; always `< num_states` of the owning system.
pub type StateId = u32;

/// A set of states or players, backed by a bit vector with a cached
/// population count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coalition {
    bits: Vec<u64>,
    len: usize,
    size: usize,
}

impl Coalition {
    pub fn empty(len: usize) -> Self {
        Coalition {
            bits: vec![0; len.div_ceil(64)],
            len,
            size: 0,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut c = Self::empty(len);
        for i in 0..len {
            c.insert(i as StateId);
        }
        c
    }

    /// Coalition over `len` players from the low bits of `mask`.
    pub fn from_mask(mask: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut c = Self::empty(len);
        c.bits[0] = mask & if len == 64 { !0 } else { (1 << len) - 1 };
        c.size = c.bits[0].count_ones() as usize;
        c
    }

    pub fn from_members(members: &[StateId], len: usize) -> Self {
        let mut c = Self::empty(len);
        for &m in members {
            c.insert(m);
        }
        c
    }

    pub fn contains(&self, i: StateId) -> bool {
        self.bits[i as usize / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert(&mut self, i: StateId) {
        debug_assert!((i as usize) < self.len);
        let w = &mut self.bits[i as usize / 64];
        if *w >> (i % 64) & 1 == 0 {
            *w |= 1 << (i % 64);
            self.size += 1;
        }
    }

    pub fn remove(&mut self, i: StateId) {
        let w = &mut self.bits[i as usize / 64];
        if *w >> (i % 64) & 1 == 1 {
            *w &= !(1 << (i % 64));
            self.size -= 1;
        }
    }

    pub fn union_with(&mut self, other: &Coalition) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        self.size = self.bits.iter().map(|w| w.count_ones() as usize).sum();
    }

    pub fn clear(&mut self) {
        self.bits.fill(0);
        self.size = 0;
    }

    /// Number of members.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Capacity (the player count), not the member count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn is_subset_of(&self, other: &Coalition) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.bits.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros();
                    w &= w - 1;
                    Some(wi as StateId * 64 + b)
                }
            })
        })
    }

    pub fn members(&self) -> Vec<StateId> {
        self.iter().collect()
    }
}

/// Unvalidated system data, as produced by parsers or generators.
#[derive(Clone, Debug, Default)]
pub struct RawSystem {
    pub num_states: usize,
    pub names: Vec<Option<String>>,
    pub transitions: Vec<(StateId, StateId)>,
    pub initial: StateId,
    pub bad: Vec<StateId>,
}

/// A validated, canonical transition system.
///
/// Every state has at least one successor, successor lists are sorted and
/// duplicate-free, and all endpoints are in range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSystem {
    num_states: usize,
    names: Vec<String>,
    succ: Vec<Vec<StateId>>,
    initial: StateId,
    bad: Coalition,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("transition ({0}, {1}) leaves the state space")]
    DanglingTransition(StateId, StateId),
    #[error("state {0} has no successor (runs are infinite; consider --complete-sinks)")]
    NoSuccessor(StateId),
    #[error("initial state {0} is out of range")]
    BadInitial(StateId),
    #[error("bad state {0} is out of range")]
    BadStateOutOfRange(StateId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    /// No bad states: every responsibility is 0.
    EmptyBadSet,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::EmptyBadSet => {
                write!(f, "no bad states; all responsibilities are 0")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ValidateOptions {
    /// Add a self-loop to successor-less states instead of rejecting them.
    pub complete_sinks: bool,
}

/// Canonicalizes and checks a raw system. On failure, every violated
/// invariant is reported.
pub fn validate_system(
    raw: &RawSystem,
    opts: ValidateOptions,
) -> Result<(TransitionSystem, Vec<Warning>), Vec<SystemError>> {
    let n = raw.num_states;
    let mut errors = Vec::new();
    let mut succ: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for &(src, dst) in &raw.transitions {
        if (src as usize) >= n || (dst as usize) >= n {
            errors.push(SystemError::DanglingTransition(src, dst));
        } else {
            succ[src as usize].push(dst);
        }
    }
    for (s, list) in succ.iter_mut().enumerate() {
        list.sort_unstable();
        list.dedup();
        if list.is_empty() {
            if opts.complete_sinks {
                list.push(s as StateId);
            } else {
                errors.push(SystemError::NoSuccessor(s as StateId));
            }
        }
    }
    if (raw.initial as usize) >= n {
        errors.push(SystemError::BadInitial(raw.initial));
    }
    let mut bad = Coalition::empty(n);
    for &b in &raw.bad {
        if (b as usize) >= n {
            errors.push(SystemError::BadStateOutOfRange(b));
        } else {
            bad.insert(b);
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut warnings = Vec::new();
    if bad.is_empty() {
        warnings.push(Warning::EmptyBadSet);
    }
    let names = (0..n)
        .map(|i| match raw.names.get(i) {
            Some(Some(name)) => name.clone(),
            _ => i.to_string(),
        })
        .collect();
    Ok((
        TransitionSystem {
            num_states: n,
            names,
            succ,
            initial: raw.initial,
            bad,
        },
        warnings,
    ))
}

impl TransitionSystem {
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn name(&self, s: StateId) -> &str {
        &self.names[s as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn successors(&self, s: StateId) -> &[StateId] {
        &self.succ[s as usize]
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn bad(&self) -> &Coalition {
        &self.bad
    }

    pub fn is_bad(&self, s: StateId) -> bool {
        self.bad.contains(s)
    }

    pub fn num_transitions(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    /// Looks a state up by display name.
    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.names.iter().position(|n| n == name).map(|i| i as StateId)
    }
}

/// A validated counterexample: a loop-free run prefix from the initial state
/// that ends at its first bad state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    run: Vec<StateId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CounterexampleError {
    #[error("counterexample run is empty")]
    Empty,
    #[error("run state at position {0} is out of range")]
    StateOutOfRange(usize),
    #[error("run does not start at the initial state")]
    NotFromInitial,
    #[error("run step {0} is not a transition of the system")]
    NotATransition(usize),
    #[error("run visits a bad state at position {0} before the end")]
    EarlyBadState(usize),
    #[error("last run state is not a bad state")]
    LastNotBad,
    #[error("run state repeated at positions {0} and {1}")]
    RepeatedState(usize, usize),
}

/// Checks the four definitional clauses and returns the first violated one.
pub fn validate_counterexample(
    ts: &TransitionSystem,
    run: &[StateId],
) -> Result<Counterexample, CounterexampleError> {
    if run.is_empty() {
        return Err(CounterexampleError::Empty);
    }
    for (i, &s) in run.iter().enumerate() {
        if (s as usize) >= ts.num_states() {
            return Err(CounterexampleError::StateOutOfRange(i));
        }
    }
    if run[0] != ts.initial() {
        return Err(CounterexampleError::NotFromInitial);
    }
    for i in 0..run.len() - 1 {
        if !ts.successors(run[i]).contains(&run[i + 1]) {
            return Err(CounterexampleError::NotATransition(i));
        }
    }
    for (i, &s) in run[..run.len() - 1].iter().enumerate() {
        if ts.is_bad(s) {
            return Err(CounterexampleError::EarlyBadState(i));
        }
    }
    if !ts.is_bad(*run.last().unwrap()) {
        return Err(CounterexampleError::LastNotBad);
    }
    for i in 0..run.len() {
        for j in i + 1..run.len() {
            if run[i] == run[j] {
                return Err(CounterexampleError::RepeatedState(i, j));
            }
        }
    }
    Ok(Counterexample { run: run.to_vec() })
}

impl Counterexample {
    pub fn run(&self) -> &[StateId] {
        &self.run
    }

    pub fn len(&self) -> usize {
        self.run.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Set of run states as a coalition over the system's states.
    pub fn state_set(&self, num_states: usize) -> Coalition {
        Coalition::from_members(&self.run, num_states)
    }
}

/// One block of a state grouping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub name: String,
    pub members: Vec<StateId>,
}

/// A partition of all states into named blocks. States absent from every
/// explicit group become singleton blocks, so ungrouped analysis is the
/// special case where every block is a singleton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateGrouping {
    groups: Vec<Group>,
    /// Number of groups that were given explicitly (the rest are singletons).
    explicit: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GroupingError {
    #[error("group {0:?} lists state {1}, which is out of range")]
    UnknownState(String, StateId),
    #[error("state {0} appears in more than one group")]
    OverlappingGroups(StateId),
    #[error("group name {0:?} is not unique")]
    DuplicateGroupName(String),
    #[error("group {0:?} is empty")]
    EmptyGroup(String),
}

impl StateGrouping {
    /// Canonicalizes explicit groups against a system: validates the partial
    /// partition and completes it with singleton blocks. Explicit groups are
    /// ordered by name, singletons by state index.
    pub fn canonicalize(
        ts: &TransitionSystem,
        explicit: &[(String, Vec<StateId>)],
    ) -> Result<StateGrouping, GroupingError> {
        let n = ts.num_states();
        let mut seen_names = std::collections::HashSet::new();
        let mut owner: Vec<bool> = vec![false; n];
        let mut groups = Vec::new();
        for (name, members) in explicit {
            if !seen_names.insert(name.clone()) {
                return Err(GroupingError::DuplicateGroupName(name.clone()));
            }
            if members.is_empty() {
                return Err(GroupingError::EmptyGroup(name.clone()));
            }
            let mut members = members.clone();
            members.sort_unstable();
            members.dedup();
            for &m in &members {
                if (m as usize) >= n {
                    return Err(GroupingError::UnknownState(name.clone(), m));
                }
                if owner[m as usize] {
                    return Err(GroupingError::OverlappingGroups(m));
                }
                owner[m as usize] = true;
            }
            groups.push(Group {
                name: name.clone(),
                members,
            });
        }
        groups.sort_by(|a, b| a.name.cmp(&b.name));
        let explicit_count = groups.len();
        for s in 0..n {
            if !owner[s] {
                groups.push(Group {
                    name: ts.name(s as StateId).to_string(),
                    members: vec![s as StateId],
                });
            }
        }
        Ok(StateGrouping {
            groups,
            explicit: explicit_count,
        })
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// The groups that were given explicitly, i.e. without the singleton fill.
    pub fn explicit_groups(&self) -> &[Group] {
        &self.groups[..self.explicit]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn train_raw() -> RawSystem {
        // Three-switch railway network: s1 branches to s2/s3, both reach the
        // destination or the accident, sinks self-loop.
        RawSystem {
            num_states: 5,
            names: ["s1", "s2", "s3", "✓", "✗"]
                .iter()
                .map(|s| Some(s.to_string()))
                .collect(),
            transitions: vec![
                (0, 1),
                (0, 2),
                (1, 3),
                (1, 4),
                (2, 3),
                (2, 4),
                (3, 3),
                (4, 4),
            ],
            initial: 0,
            bad: vec![4],
        }
    }

    #[test]
    fn train_system_validates() {
        let (ts, warnings) = validate_system(&train_raw(), ValidateOptions::default()).unwrap();
        assert_eq!(ts.num_states(), 5);
        assert!(warnings.is_empty());
        assert_eq!(ts.successors(0), &[1, 2]);
        assert!(ts.is_bad(4));
    }

    #[test]
    fn empty_bad_set_is_a_warning() {
        let raw = RawSystem {
            num_states: 1,
            names: vec![],
            transitions: vec![(0, 0)],
            initial: 0,
            bad: vec![],
        };
        let (_, warnings) = validate_system(&raw, ValidateOptions::default()).unwrap();
        assert_eq!(warnings, vec![Warning::EmptyBadSet]);
    }

    #[test]
    fn dangling_transition_is_reported_with_location() {
        let mut raw = train_raw();
        raw.transitions.push((0, 7));
        let errors = validate_system(&raw, ValidateOptions::default()).unwrap_err();
        assert_eq!(errors, vec![SystemError::DanglingTransition(0, 7)]);
    }

    #[test]
    fn sink_rejected_unless_completion_enabled() {
        let raw = RawSystem {
            num_states: 2,
            names: vec![],
            transitions: vec![(0, 1)],
            initial: 0,
            bad: vec![1],
        };
        let errors = validate_system(&raw, ValidateOptions::default()).unwrap_err();
        assert_eq!(errors, vec![SystemError::NoSuccessor(1)]);
        let (ts, _) = validate_system(
            &raw,
            ValidateOptions {
                complete_sinks: true,
            },
        )
        .unwrap();
        assert_eq!(ts.successors(1), &[1]);
    }

    #[test]
    fn train_counterexample_validates() {
        let (ts, _) = validate_system(&train_raw(), ValidateOptions::default()).unwrap();
        let ce = validate_counterexample(&ts, &[0, 1, 4]).unwrap();
        assert_eq!(ce.run(), &[0, 1, 4]);
    }

    #[test]
    fn safe_run_is_not_a_counterexample() {
        let (ts, _) = validate_system(&train_raw(), ValidateOptions::default()).unwrap();
        assert_eq!(
            validate_counterexample(&ts, &[0, 1, 3]),
            Err(CounterexampleError::LastNotBad)
        );
    }

    #[test]
    fn repeated_state_positions_are_reported() {
        let (ts, _) = validate_system(&train_raw(), ValidateOptions::default()).unwrap();
        // 0 1 0 is not loop-free; the transition check fires only later steps,
        // so build a run that is otherwise fine.
        let raw = RawSystem {
            num_states: 3,
            names: vec![],
            transitions: vec![(0, 1), (1, 0), (1, 2), (2, 2)],
            initial: 0,
            bad: vec![2],
        };
        let (ts2, _) = validate_system(&raw, ValidateOptions::default()).unwrap();
        assert_eq!(
            validate_counterexample(&ts2, &[0, 1, 0, 1, 2]),
            Err(CounterexampleError::RepeatedState(0, 2))
        );
        drop(ts);
    }

    #[test]
    fn counterexample_other_clauses() {
        let (ts, _) = validate_system(&train_raw(), ValidateOptions::default()).unwrap();
        assert_eq!(
            validate_counterexample(&ts, &[1, 4]),
            Err(CounterexampleError::NotFromInitial)
        );
        assert_eq!(
            validate_counterexample(&ts, &[0, 4]),
            Err(CounterexampleError::NotATransition(0))
        );
        assert_eq!(
            validate_counterexample(&ts, &[]),
            Err(CounterexampleError::Empty)
        );
    }

    #[test]
    fn grouping_fills_singletons() {
        let (ts, _) = validate_system(&train_raw(), ValidateOptions::default()).unwrap();
        let g = StateGrouping::canonicalize(&ts, &[("switches".to_string(), vec![1, 2])]).unwrap();
        assert_eq!(g.num_groups(), 4);
        assert_eq!(g.groups()[0].name, "switches");
        assert_eq!(g.groups()[1].members, vec![0]);
        // Partition property: disjoint cover of all states.
        let mut seen = vec![false; ts.num_states()];
        for grp in g.groups() {
            for &m in &grp.members {
                assert!(!seen[m as usize]);
                seen[m as usize] = true;
            }
        }
        assert!(seen.iter().all(|&x| x));
    }

    #[test]
    fn coalition_bitset_basics() {
        let mut c = Coalition::empty(130);
        c.insert(0);
        c.insert(129);
        c.insert(129);
        assert_eq!(c.size(), 2);
        assert!(c.contains(129));
        assert!(!c.contains(64));
        assert_eq!(c.members(), vec![0, 129]);
        c.remove(0);
        assert_eq!(c.size(), 1);
        assert!(Coalition::from_mask(0b101, 3).is_subset_of(&Coalition::full(3)));
    }
}
