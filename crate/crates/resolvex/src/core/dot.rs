use std::collections::BTreeMap;

use super::Nfa;

/// Graphviz DOT rendering of an automaton. Parallel transitions between the
/// same pair of states are merged into one edge with a comma-joined label.
pub fn nfa_to_dot(a: &Nfa) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph \"{}\" {{\n", a.name));
    out.push_str("  rankdir=LR;\n  node [shape=circle];\n");
    out.push_str("  __init [shape=point];\n");
    for (i, s) in a.states().iter().enumerate() {
        let shape = if a.is_accepting(i) {
            "doublecircle"
        } else {
            "circle"
        };
        out.push_str(&format!("  \"{s}\" [shape={shape}];\n"));
    }
    out.push_str(&format!(
        "  __init -> \"{}\";\n",
        a.states()[a.initial()]
    ));
    let mut labels: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for t in a.transitions() {
        labels
            .entry((t.source, t.target))
            .or_default()
            .push(a.alphabet()[t.symbol].clone());
    }
    for ((src, dst), mut syms) in labels {
        syms.sort();
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
            a.states()[src],
            a.states()[dst],
            syms.join(",")
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::parse_automaton;

    #[test]
    fn dot_contains_all_states_and_merged_labels() {
        let a = parse_automaton(include_str!("../../fixtures/fnfa4.nfa"))
            .unwrap()
            .into_nfa();
        let dot = nfa_to_dot(&a);
        for s in a.states() {
            assert!(dot.contains(&format!("\"{s}\"")));
        }
        assert!(dot.contains("label=\"a,b\"")); // q6 -> qf on a and b
    }
}
