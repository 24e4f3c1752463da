//! Newick with event annotations.
//!
//! Gene trees use `name@species` leaves and bracket annotations after a
//! node: `[&ev=s]`, `[&ev=d]`, `[&ev=t]` on internal nodes and `[&tr=1]` on a
//! node whose incoming edge is a transfer edge. Keys may be combined, as in
//! `[&ev=t,tr=1]`. Other keys and plain `[...]` comments are ignored, and so
//! are branch lengths and internal node names.

use std::collections::HashMap;

use crate::aux::SpeciesTree;
use crate::error::{Error, Result};
use crate::gene::{validate_axioms, AxiomReport, EventLabel, GeneTree, ValidGeneTree};
use crate::tree::{RootedTree, VertexId};

#[derive(Debug)]
struct RawNode {
    name: Option<String>,
    annotations: Vec<(String, String)>,
    children: Vec<usize>,
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        })
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn expect(&mut self, want: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => self.error(format!("expected '{want}', found '{c}'")),
            None => self.error(format!("expected '{want}', found end of input")),
        }
    }

    fn name(&mut self) -> Result<Option<String>> {
        self.skip_ws();
        match self.peek() {
            Some('\'') => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None => return self.error("unterminated quoted name"),
                        Some('\'') if self.peek() == Some('\'') => {
                            self.bump();
                            s.push('\'');
                        }
                        Some('\'') => return Ok(Some(s)),
                        Some(c) => s.push(c),
                    }
                }
            }
            _ => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || "(),:;[]'".contains(c) {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Ok((!s.is_empty()).then_some(s))
            }
        }
    }

    /// Zero or more `[...]` blocks; key/value pairs from `[&...]` ones.
    fn annotations(&mut self, out: &mut Vec<(String, String)>) -> Result<()> {
        loop {
            self.skip_ws();
            if self.peek() != Some('[') {
                return Ok(());
            }
            self.bump();
            let mut body = String::new();
            loop {
                match self.bump() {
                    None => return self.error("unterminated annotation"),
                    Some(']') => break,
                    Some(c) => body.push(c),
                }
            }
            if let Some(rest) = body.strip_prefix('&') {
                for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    match item.split_once('=') {
                        Some((k, v)) => out.push((k.trim().to_string(), v.trim().to_string())),
                        None => return self.error(format!("annotation '{item}' is not key=value")),
                    }
                }
            }
        }
    }

    fn length(&mut self) -> Result<()> {
        self.skip_ws();
        if self.peek() != Some(':') {
            return Ok(());
        }
        self.bump();
        self.skip_ws();
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || "+-.eE".contains(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if s.parse::<f64>().is_err() {
            return self.error(format!("invalid branch length '{s}'"));
        }
        Ok(())
    }
}

fn parse_raw(text: &str) -> Result<(Vec<RawNode>, usize)> {
    let mut lx = Lexer::new(text);
    let mut nodes: Vec<RawNode> = Vec::new();
    // explicit stack of open internal nodes to avoid recursion on deep trees
    let mut open: Vec<usize> = Vec::new();
    lx.skip_ws();
    let root = loop {
        lx.skip_ws();
        let (line, column) = (lx.line, lx.column);
        let id = if lx.peek() == Some('(') {
            lx.bump();
            nodes.push(RawNode {
                name: None,
                annotations: vec![],
                children: vec![],
                line,
                column,
            });
            open.push(nodes.len() - 1);
            continue;
        } else {
            let name = lx.name()?;
            if name.is_none() {
                return match lx.peek() {
                    Some(c) => lx.error(format!("expected a node, found '{c}'")),
                    None => lx.error("expected a node, found end of input"),
                };
            }
            nodes.push(RawNode {
                name,
                annotations: vec![],
                children: vec![],
                line,
                column,
            });
            let id = nodes.len() - 1;
            node_suffix(&mut lx, &mut nodes[id])?;
            id
        };
        // attach `id`, closing parents as long as their lists end
        let mut cur = id;
        loop {
            let Some(&p) = open.last() else {
                break;
            };
            nodes[p].children.push(cur);
            lx.skip_ws();
            match lx.peek() {
                Some(',') => {
                    lx.bump();
                    break;
                }
                Some(')') => {
                    lx.bump();
                    open.pop();
                    let name = lx.name()?;
                    nodes[p].name = name;
                    node_suffix(&mut lx, &mut nodes[p])?;
                    cur = p;
                }
                Some(c) => return lx.error(format!("expected ',' or ')', found '{c}'")),
                None => return lx.error("unbalanced parentheses"),
            }
        }
        if open.is_empty() {
            break cur;
        }
    };
    lx.expect(';')?;
    lx.skip_ws();
    if let Some(c) = lx.peek() {
        return lx.error(format!("unexpected '{c}' after ';'"));
    }
    Ok((nodes, root))
}

fn node_suffix(lx: &mut Lexer, node: &mut RawNode) -> Result<()> {
    lx.annotations(&mut node.annotations)?;
    lx.length()?;
    lx.annotations(&mut node.annotations)
}

fn raw_error<T>(n: &RawNode, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line: n.line,
        column: n.column,
        message: message.into(),
    })
}

/// Vertex ids follow preorder of the input.
fn to_tree<L: crate::tree::Label>(
    nodes: &[RawNode],
    root: usize,
    allow_unary: bool,
    mut leaf: impl FnMut(&RawNode) -> Result<L>,
) -> Result<(RootedTree<L>, Vec<usize>)> {
    let mut order = Vec::with_capacity(nodes.len());
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        stack.extend(nodes[v].children.iter().rev());
    }
    let mut id = vec![0usize; nodes.len()];
    for (i, &v) in order.iter().enumerate() {
        id[v] = i;
    }
    let mut children = Vec::with_capacity(order.len());
    let mut labels = Vec::with_capacity(order.len());
    for &v in &order {
        let n = &nodes[v];
        if n.children.len() == 1 && !allow_unary {
            return raw_error(n, "internal node with a single child");
        }
        children.push(n.children.iter().map(|&c| VertexId::from(id[c])).collect());
        labels.push(if n.children.is_empty() { Some(leaf(n)?) } else { None });
    }
    Ok((RootedTree::from_parts(VertexId(0), children, labels)?, order))
}

/// Plain Newick species tree; leaf names are species.
pub fn parse_species_tree(text: &str) -> Result<RootedTree<String>> {
    let (nodes, root) = parse_raw(text)?;
    let (tree, order) = to_tree(&nodes, root, false, |n| Ok(n.name.clone().expect("leaf has a name")))?;
    if let Err(Error::DuplicateLabel(l)) = tree.leaf_index() {
        let n = order.iter().rev().map(|&v| &nodes[v]).find(|n| n.name.as_deref() == Some(l.as_str()));
        return raw_error(n.expect("duplicate exists"), format!("duplicate species {l}"));
    }
    Ok(tree)
}

/// Two tab-separated columns, gene then species. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_species_map(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        if cols.len() != 2 || cols[0].is_empty() || cols[1].is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                column: 1,
                message: "expected two tab-separated columns: gene, species".into(),
            });
        }
        out.push((cols[0].to_string(), cols[1].to_string()));
    }
    Ok(out)
}

/// Parses a gene tree and checks its structure, but not the axioms.
pub fn parse_gene_tree_unchecked(text: &str, species_map: Option<&[(String, String)]>) -> Result<GeneTree> {
    let (nodes, root) = parse_raw(text)?;
    let mut map: HashMap<&str, &str> = HashMap::new();
    if let Some(m) = species_map {
        for (gene, sp) in m {
            if let Some(prev) = map.insert(gene, sp) {
                if prev != sp {
                    return Err(Error::InvalidGeneTree(format!(
                        "species map assigns {gene} to both {prev} and {sp}"
                    )));
                }
            }
        }
    }
    let mut species_of_leaf: HashMap<String, Option<String>> = HashMap::new();
    let (tree, order) = to_tree(&nodes, root, true, |n| {
        let full = n.name.as_deref().expect("leaf has a name");
        let (gene, sp) = match full.rsplit_once('@') {
            Some((g, s)) if !g.is_empty() && !s.is_empty() => (g, Some(s)),
            Some(_) => return raw_error(n, format!("malformed leaf name '{full}'")),
            None => (full, None),
        };
        let sp = map.get(gene).copied().or(sp);
        species_of_leaf.insert(gene.to_string(), sp.map(str::to_string));
        Ok(gene.to_string())
    })?;
    if let Err(Error::DuplicateLabel(l)) = tree.leaf_index() {
        return Err(Error::InvalidGeneTree(format!("duplicate gene name {l}")));
    }
    if let Some(m) = species_map {
        if let Some((gene, _)) = m.iter().find(|(g, _)| !species_of_leaf.contains_key(g)) {
            return Err(Error::InvalidGeneTree(format!("species map names unknown gene {gene}")));
        }
    }
    let mut events = Vec::with_capacity(order.len());
    let mut transfer = Vec::with_capacity(order.len());
    let mut leaf_species = Vec::with_capacity(order.len());
    for (i, &v) in order.iter().enumerate() {
        let n = &nodes[v];
        let leaf = n.children.is_empty();
        let mut ev = None;
        let mut tr = false;
        for (k, val) in &n.annotations {
            match k.as_str() {
                "ev" => {
                    ev = Some(match EventLabel::from_code(val) {
                        Some(e) if e != EventLabel::Leaf => e,
                        _ => return raw_error(n, format!("unknown event code '{val}'")),
                    })
                }
                "tr" => {
                    tr = match val.as_str() {
                        "1" => true,
                        "0" => false,
                        _ => return raw_error(n, format!("transfer mark must be 0 or 1, got '{val}'")),
                    }
                }
                _ => {}
            }
        }
        if tr && i == 0 {
            return raw_error(n, "the root cannot carry a transfer mark");
        }
        events.push(match (leaf, ev) {
            (true, None) => EventLabel::Leaf,
            (true, Some(_)) => return raw_error(n, "leaves take no event label"),
            (false, Some(e)) => e,
            (false, None) => return raw_error(n, "internal node without an event label"),
        });
        transfer.push(tr);
        leaf_species.push(if leaf {
            let gene = tree.label(VertexId::from(i)).expect("leaf");
            match species_of_leaf.get(gene).cloned().flatten() {
                Some(s) => Some(s),
                None => return raw_error(n, format!("leaf {gene} has no species")),
            }
        } else {
            None
        });
    }
    GeneTree::new(tree, events, transfer, leaf_species)
}

/// Parses a gene tree; axiom violations are fatal.
pub fn parse_gene_tree(text: &str, species_map: Option<&[(String, String)]>) -> Result<ValidGeneTree> {
    parse_gene_tree_unchecked(text, species_map)?.validate()
}

/// Parses a gene tree and reports axiom violations instead of failing.
pub fn parse_gene_tree_lenient(
    text: &str,
    species_map: Option<&[(String, String)]>,
) -> Result<(GeneTree, AxiomReport)> {
    let g = parse_gene_tree_unchecked(text, species_map)?;
    let report = validate_axioms(&g);
    Ok((g, report))
}

/// Relabels a species tree by the species ids of `g`.
pub fn species_tree_for(g: &GeneTree, s: &RootedTree<String>) -> Result<SpeciesTree> {
    for l in s.leaf_labels() {
        if g.species_id(&l).is_none() {
            return Err(Error::LeafSetMismatch(format!("species {l} does not occur in the gene tree")));
        }
    }
    let t = s.map_labels(|l| g.species_id(l).expect("checked"));
    crate::aux::species_leaves(g, &t)?;
    Ok(t)
}

/// Names species vertices by species names.
pub fn species_tree_names(g: &GeneTree, s: &SpeciesTree) -> RootedTree<String> {
    s.map_labels(|&id| g.species_name(id).to_string())
}

fn quote(name: &str) -> String {
    let plain = !name.is_empty() && !name.chars().any(|c| c.is_whitespace() || "(),:;[]'".contains(c));
    if plain {
        name.to_string()
    } else {
        format!("'{}'", name.replace('\'', "''"))
    }
}

/// Children ordered by their smallest leaf label; `leaf` renders a leaf and
/// `suffix` appends annotations to any vertex.
fn emit<L: crate::tree::Label>(
    tree: &RootedTree<L>,
    leaf: impl Fn(VertexId) -> String,
    suffix: impl Fn(VertexId) -> String,
) -> String {
    let mut min_label: Vec<Option<&L>> = vec![None; tree.len()];
    for v in tree.postorder() {
        min_label[v.index()] = match tree.label(v) {
            Some(l) => Some(l),
            None => tree.children(v).iter().filter_map(|c| min_label[c.index()]).min(),
        };
    }
    let mut out = String::new();
    enum Step {
        Enter(VertexId),
        Comma,
        Close(VertexId),
    }
    let mut stack = vec![Step::Enter(tree.root())];
    while let Some(step) = stack.pop() {
        match step {
            Step::Enter(v) if tree.is_leaf(v) => {
                out.push_str(&leaf(v));
                out.push_str(&suffix(v));
            }
            Step::Enter(v) => {
                out.push('(');
                let mut ch = tree.children(v).to_vec();
                ch.sort_by_key(|c| min_label[c.index()]);
                stack.push(Step::Close(v));
                for (i, &c) in ch.iter().enumerate().rev() {
                    stack.push(Step::Enter(c));
                    if i > 0 {
                        stack.push(Step::Comma);
                    }
                }
            }
            Step::Comma => out.push(','),
            Step::Close(v) => {
                out.push(')');
                out.push_str(&suffix(v));
            }
        }
    }
    out.push(';');
    out
}

pub fn emit_species_tree(tree: &RootedTree<String>) -> String {
    emit(tree, |v| quote(tree.label(v).expect("leaf")), |_| String::new())
}

pub fn emit_gene_tree(g: &GeneTree) -> String {
    let t = g.tree();
    emit(
        t,
        |v| {
            let sp = g.species_name(g.species_of(v).expect("leaf"));
            quote(&format!("{}@{}", t.label(v).expect("leaf"), sp))
        },
        |v| {
            let mut keys = Vec::new();
            if let Some(c) = g.event(v).code() {
                keys.push(format!("ev={c}"));
            }
            if g.is_transfer_edge(v) {
                keys.push("tr=1".to_string());
            }
            if keys.is_empty() {
                String::new()
            } else {
                format!("[&{}]", keys.join(","))
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_leaf_speciation() {
        let g = parse_gene_tree("(a@A,b@B)[&ev=s];", None).unwrap();
        assert_eq!(g.tree().leaf_count(), 2);
        assert_eq!(g.event(g.tree().root()), EventLabel::Speciation);
        assert_eq!(g.species_count(), 2);
    }

    #[test]
    fn single_transfer_parses() {
        let text = "((a@A,b@B)[&ev=s],c@C[&tr=1])[&ev=t];";
        let g = parse_gene_tree(text, None).unwrap();
        assert_eq!(g.transfer_edges().len(), 1);
        assert_eq!(emit_gene_tree(&g), text);
    }

    #[test]
    fn transfer_only_children_violate_axioms() {
        let text = "(a@A[&tr=1],b@B[&tr=1])[&ev=t];";
        assert!(matches!(parse_gene_tree(text, None), Err(Error::Axioms(_))));
        let (_, report) = parse_gene_tree_lenient(text, None).unwrap();
        assert!(!report.ok());
    }

    #[test]
    fn unary_transfer_child_is_an_axiom_error() {
        assert!(matches!(
            parse_gene_tree("(a@A,(b@B)[&ev=s,tr=1])[&ev=t];", None),
            Err(Error::Axioms(_))
        ));
        assert!(matches!(parse_species_tree("(A,(B));"), Err(Error::Parse { .. })));
    }

    #[test]
    fn errors_carry_positions() {
        match parse_gene_tree("(a@A,\n  b@B)[&ev=x];", None) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 1)),
            other => panic!("{other:?}"),
        }
        match parse_species_tree("(A,B;") {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (1, 5)),
            other => panic!("{other:?}"),
        }
        match parse_species_tree("(A,B)\n);") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_gene_tree("(a,b@B)[&ev=s];", None), Err(Error::Parse { .. })));
        assert!(matches!(parse_gene_tree("(a@A,b@B);", None), Err(Error::Parse { .. })));
        assert!(matches!(parse_gene_tree("(a@A,b@B)[&ev=s]", None), Err(Error::Parse { .. })));
    }

    #[test]
    fn map_overrides_suffix() {
        let map = parse_species_map("# gene\tspecies\na\tX\n\nb\tY\n").unwrap();
        let g = parse_gene_tree("(a@A,b)[&ev=s];", Some(&map)).unwrap();
        assert_eq!(g.species_names(), &["X".to_string(), "Y".to_string()]);
        assert!(parse_species_map("a X\n").is_err());
        let bad = vec![("zz".to_string(), "Q".to_string())];
        assert!(parse_gene_tree("(a@A,b@B)[&ev=s];", Some(&bad)).is_err());
    }

    #[test]
    fn species_tree_emission_is_canonical() {
        let t = parse_species_tree("(C,(B,A):0.5)root;").unwrap();
        assert_eq!(emit_species_tree(&t), "((A,B),C);");
        let star = RootedTree::star(["B".to_string(), "A".into(), "C".into()]).unwrap();
        assert_eq!(emit_species_tree(&star), "(A,B,C);");
        assert_eq!(emit_species_tree(&parse_species_tree(" A ;").unwrap()), "A;");
    }

    #[test]
    fn quoting_round_trips() {
        let t = parse_species_tree("('x y','it''s');").unwrap();
        let text = emit_species_tree(&t);
        assert_eq!(text, "('it''s','x y');");
        assert_eq!(emit_species_tree(&parse_species_tree(&text).unwrap()), text);
    }

    #[test]
    fn comments_and_lengths_are_ignored() {
        let g = parse_gene_tree("((a@A:1,b@B:2e-1)[&ev=s][note]:3,c@C)[&ev=d, foo=bar];", None).unwrap();
        assert_eq!(g.tree().leaf_count(), 3);
    }
}
