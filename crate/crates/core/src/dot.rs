//! Graphviz output for skeletons, structures and chain levels.

use std::fmt::Write;

use crate::structures::{RelStruct, Signature};
use crate::types::{Child, Skeleton};

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn skeleton_body(skel: &Skeleton, prefix: &str, out: &mut String) {
    for i in 0..skel.leaves() {
        let _ = writeln!(out, "    {prefix}l{i} [label=\"l{i}\", shape=box];");
    }
    for (rank, kids) in skel.internals().iter().enumerate() {
        let _ = writeln!(out, "    {prefix}n{rank} [label=\"{rank}\", shape=circle];");
        for c in kids {
            let target = match *c {
                Child::Leaf(i) => format!("{prefix}l{i}"),
                Child::Node(q) => format!("{prefix}n{q}"),
            };
            let _ = writeln!(out, "    {prefix}n{rank} -> {target};");
        }
    }
}

/// One cluster per skeleton, each labelled with its encoding.
pub fn skeletons_dot(list: &[Skeleton]) -> String {
    let mut out = String::from("digraph types {\n  node [fontname=\"monospace\"];\n");
    for (k, skel) in list.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{k} {{");
        let _ = writeln!(out, "    label={};", quote(&skel.to_string()));
        skeleton_body(skel, &format!("t{k}_"), &mut out);
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}

fn structure_body(s: &RelStruct, sig: &Signature, prefix: &str, highlight: &[usize], out: &mut String) {
    for i in 0..s.size() {
        let style = if highlight.contains(&i) { ", style=filled, fillcolor=lightgray" } else { "" };
        let _ = writeln!(out, "    {prefix}{i} [label=\"v{i}\"{style}];");
    }
    let labelled = sig.len() > 1;
    for symbol in sig.symbols() {
        let label = if labelled { format!(", label={}", quote(&symbol.name)) } else { String::new() };
        for &(i, j) in s.relation(&symbol.name).into_iter().flatten() {
            if symbol.symmetric {
                if i < j {
                    let _ = writeln!(out, "    {prefix}{i} -> {prefix}{j} [dir=none{label}];");
                }
            } else {
                let _ = writeln!(out, "    {prefix}{i} -> {prefix}{j} [{}];", label.trim_start_matches(", "));
            }
        }
    }
}

/// A structure as a relation diagram; `highlight` marks host points.
pub fn structure_dot(name: &str, s: &RelStruct, sig: &Signature, highlight: &[usize]) -> String {
    let mut out = format!("digraph {} {{\n  rankdir=LR;\n", quote(name));
    structure_body(s, sig, "v", highlight, &mut out);
    out.push_str("}\n");
    out
}

/// Chain levels, one cluster each.
pub fn levels_dot(levels: &[RelStruct], sig: &Signature) -> String {
    let mut out = String::from("digraph levels {\n  rankdir=LR;\n");
    for (n, level) in levels.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_{n} {{");
        let _ = writeln!(out, "    label=\"level {n}\";");
        structure_body(level, sig, &format!("L{n}_"), &[], &mut out);
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}
