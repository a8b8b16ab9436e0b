use std::collections::BTreeSet;

use super::Nfa;

/// Strongly connected components of the state graph together with the
/// condensation digraph.
#[derive(Debug, Clone)]
pub struct SccDecomposition {
    /// Components in topological order (sources first); states sorted inside.
    pub components: Vec<Vec<usize>>,
    /// Component id of each state.
    pub comp_of: Vec<usize>,
    /// Condensation edges (from, to) between distinct components.
    pub edges: BTreeSet<(usize, usize)>,
    /// `true` for components with no outgoing condensation edge.
    pub bottom: Vec<bool>,
    /// `true` for components containing at least one internal transition.
    pub has_cycle: Vec<bool>,
}

impl SccDecomposition {
    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn successors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((c, 0)..(c + 1, 0))
            .map(|&(_, to)| to)
    }
}

struct Tarjan<'a> {
    graph: &'a [Vec<usize>],
    index: usize,
    idx: Vec<Option<usize>>,
    low: Vec<usize>,
    stack: Vec<usize>,
    on_stack: Vec<bool>,
    comps: Vec<Vec<usize>>,
}

impl<'a> Tarjan<'a> {
    fn connect(&mut self, v: usize) {
        self.idx[v] = Some(self.index);
        self.low[v] = self.index;
        self.index += 1;
        self.stack.push(v);
        self.on_stack[v] = true;

        for &w in &self.graph[v] {
            if self.idx[w].is_none() {
                self.connect(w);
                self.low[v] = self.low[v].min(self.low[w]);
            } else if self.on_stack[w] {
                self.low[v] = self.low[v].min(self.idx[w].unwrap());
            }
        }

        if self.low[v] == self.idx[v].unwrap() {
            let mut comp = Vec::new();
            loop {
                let w = self.stack.pop().expect("stack underflow");
                self.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            self.comps.push(comp);
        }
    }
}

/// Tarjan SCC decomposition of the automaton's state graph. Components come
/// out in topological order of the (acyclic) condensation; bottom components
/// are those without outgoing condensation edges.
pub fn scc_decompose(a: &Nfa) -> SccDecomposition {
    let n = a.num_states();
    let mut graph: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in a.transitions() {
        graph[t.source].push(t.target);
    }
    let mut st = Tarjan {
        graph: &graph,
        index: 0,
        idx: vec![None; n],
        low: vec![0; n],
        stack: Vec::new(),
        on_stack: vec![false; n],
        comps: Vec::new(),
    };
    for v in 0..n {
        if st.idx[v].is_none() {
            st.connect(v);
        }
    }
    // Tarjan emits components in reverse topological order
    st.comps.reverse();
    let components = st.comps;
    let mut comp_of = vec![0usize; n];
    for (c, comp) in components.iter().enumerate() {
        for &q in comp {
            comp_of[q] = c;
        }
    }
    let mut edges = BTreeSet::new();
    let mut has_cycle = vec![false; components.len()];
    for t in a.transitions() {
        let (cs, ct) = (comp_of[t.source], comp_of[t.target]);
        if cs == ct {
            has_cycle[cs] = true;
        } else {
            edges.insert((cs, ct));
        }
    }
    let mut bottom = vec![true; components.len()];
    for &(from, _) in &edges {
        bottom[from] = false;
    }
    SccDecomposition {
        components,
        comp_of,
        edges,
        bottom,
        has_cycle,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::parse_automaton;

    #[test]
    fn three_cycle_is_one_bottom_component() {
        let a = parse_automaton(
            "nfa c3\nalphabet a\nstate x init accept\nstate y\nstate z\n\
             trans x a y\ntrans y a z\ntrans z a x\nend",
        )
        .unwrap()
        .into_nfa();
        let scc = scc_decompose(&a);
        assert_eq!(scc.num_components(), 1);
        assert!(scc.bottom[0]);
        assert!(scc.has_cycle[0]);
    }

    #[test]
    fn fig1b_two_components_qf_bottom() {
        let a = parse_automaton(include_str!("../../fixtures/fig1b.nfa"))
            .unwrap()
            .into_nfa();
        let scc = scc_decompose(&a);
        assert_eq!(scc.num_components(), 2);
        let qf = a.state_index("qf").unwrap();
        let q0 = a.state_index("q0").unwrap();
        assert!(scc.bottom[scc.comp_of[qf]]);
        assert!(!scc.bottom[scc.comp_of[q0]]);
    }

    #[test]
    fn fnfa4_all_singletons_qf_bottom() {
        let a = parse_automaton(include_str!("../../fixtures/fnfa4.nfa"))
            .unwrap()
            .into_nfa();
        let scc = scc_decompose(&a);
        assert_eq!(scc.num_components(), a.num_states());
        for (c, comp) in scc.components.iter().enumerate() {
            assert_eq!(comp.len(), 1);
            let name = &a.states()[comp[0]];
            assert_eq!(scc.bottom[c], name == "qf", "component {name}");
        }
        // self-loop states are their own (cyclic) components
        for name in ["q1", "q3", "q4", "q5", "q6", "qf"] {
            let q = a.state_index(name).unwrap();
            assert!(scc.has_cycle[scc.comp_of[q]], "state {name}");
        }
    }

    #[test]
    fn condensation_is_acyclic_and_topologically_ordered() {
        let a = parse_automaton(include_str!("../../fixtures/fnfa4.nfa"))
            .unwrap()
            .into_nfa();
        let scc = scc_decompose(&a);
        for &(from, to) in &scc.edges {
            assert!(from < to, "edge ({from},{to}) violates topological order");
        }
        for (c, is_bottom) in scc.bottom.iter().enumerate() {
            let has_out = scc.successors(c).next().is_some();
            assert_eq!(*is_bottom, !has_out);
        }
    }
}
