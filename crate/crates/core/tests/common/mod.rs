#![allow(dead_code)]

use chclin::ast::{parse_program, print_clause, Clause, PrintStyle, Program, Var};
use chclin::linarith::ConstraintSet;
use rand::Rng;
use std::collections::BTreeMap;
use std::path::PathBuf;

pub fn crate_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn load(rel: &str) -> Program {
    let path = crate_path(rel);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_program(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// The bundled corpus as (file stem, program), sorted by name.
pub fn corpus() -> Vec<(String, Program)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(crate_path("corpus"))
        .expect("corpus directory")
        .map(|e| e.expect("directory entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "chc"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let name = f.file_stem().unwrap().to_string_lossy().into_owned();
            let p = parse_program(&std::fs::read_to_string(&f).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, p)
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for i in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(i, n - 1);
            out.push(p);
        }
    }
    out
}

/// A rendering of `c` that does not depend on variable names, body atom order
/// or constraint order: the least rendering over all body orders, with
/// variables renamed by first occurrence in head and body and the constraints
/// normalised and sorted.
fn clause_key(c: &Clause) -> String {
    let mut best: Option<String> = None;
    for perm in permutations(c.body.len()) {
        let mut d = c.clone();
        d.body = perm.iter().map(|&i| c.body[i].clone()).collect();
        let mut order: Vec<Var> = Vec::new();
        for e in d.head.args().iter().chain(d.body.iter().flat_map(|b| b.args.iter())) {
            for v in e.vars() {
                if !order.contains(v) {
                    order.push(v.clone());
                }
            }
        }
        // variables that occur only in constraints keep their relative order
        for v in d.vars() {
            if !order.contains(&v) {
                order.push(v);
            }
        }
        let names: BTreeMap<Var, Var> = order.iter().enumerate().map(|(i, v)| (v.clone(), Var::named(&format!("V{i:03}")))).collect();
        let mut r = d.rename(&|v| names[v].clone());
        let mut cs: Vec<_> = ConstraintSet::new(r.constraints.clone()).constraints().to_vec();
        cs.sort_by_key(|k| k.to_string());
        r.constraints = cs;
        let text = print_clause(&r, PrintStyle::Exchange);
        if best.as_ref().is_none_or(|b| text < *b) {
            best = Some(text);
        }
    }
    best.expect("at least one body order")
}

/// Sorted clause keys; two programs are alpha-equivalent iff their keys are equal.
pub fn alpha_key(p: &Program) -> Vec<String> {
    let mut keys: Vec<String> = p.clauses.iter().map(clause_key).collect();
    keys.sort();
    keys
}

fn random_constraint(rng: &mut impl Rng, vars: &[String]) -> String {
    let mut terms = Vec::new();
    for v in vars {
        let k: i64 = rng.gen_range(-3..=3);
        if k != 0 {
            terms.push(format!("{k}*{v}"));
        }
    }
    if terms.is_empty() {
        terms.push(vars[rng.gen_range(0..vars.len())].clone());
    }
    let rel = ["=", ">=", ">", "=<", "<"][rng.gen_range(0..5)];
    let c: i64 = rng.gen_range(-3..=3);
    format!("{} {rel} {c}", terms.join(" + "))
}

/// A random program of at most five clauses over `p/1` and `q/2` with
/// coefficients in [-3, 3]; the last clause is an integrity constraint.
pub fn fuzz_program(rng: &mut impl Rng) -> Program {
    let arity = |p: &str| if p == "p" { 1 } else { 2 };
    let n = rng.gen_range(1..=5);
    let mut text = String::new();
    for i in 0..n {
        let mut vars: Vec<String> = Vec::new();
        let fresh = |vars: &mut Vec<String>| {
            let v = format!("V{}", vars.len());
            vars.push(v.clone());
            v
        };
        let head = if i + 1 == n {
            "false".to_string()
        } else {
            let h = if rng.gen_bool(0.5) { "p" } else { "q" };
            let args: Vec<String> = (0..arity(h)).map(|_| fresh(&mut vars)).collect();
            format!("{h}({})", args.join(","))
        };
        let nbody = [0, 0, 1, 1, 2][rng.gen_range(0..5)];
        let mut body = Vec::new();
        for _ in 0..nbody {
            let b = if rng.gen_bool(0.5) { "p" } else { "q" };
            let args: Vec<String> = (0..arity(b)).map(|_| fresh(&mut vars)).collect();
            body.push(format!("{b}({})", args.join(",")));
        }
        if vars.is_empty() {
            fresh(&mut vars);
        }
        let mut parts: Vec<String> = (0..rng.gen_range(1..=2)).map(|_| random_constraint(rng, &vars)).collect();
        parts.extend(body);
        text.push_str(&format!("{head} :- {}.\n", parts.join(", ")));
    }
    parse_program(&text).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{text}"))
}
