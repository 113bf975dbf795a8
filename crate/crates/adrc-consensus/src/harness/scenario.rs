//! Scenario files: a line-oriented sectioned text format.
//!
//! A scenario is UTF-8 text made of `[section]` headers followed by
//! `key = value` pairs. Values are comma-separated numbers, bare tokens, or
//! — for expressions — double-quoted strings. Lines whose first non-blank
//! character is `#` are comments; inline comments are not supported. The
//! `[topology]` section additionally accepts bare `j -> i` edge lines,
//! one edge per line, with vertex 0 denoting the leader.
//!
//! Sections: `[meta]` (name, order), `[topology]`, `[leader]`,
//! `[agent.1]` … `[agent.m]`, `[observer]`, `[protocol]`, `[sim]`.
//! Parsing validates every cross-invariant it can and reports all
//! violations at once, each tagged with the offending line.

use crate::engine::{SimConfig, System, TraceMeta};
use crate::expr::{self, Expr, Signal};
use crate::observer::EsoGains;
use crate::plant::{FollowerSpec, LeaderSpec, MAX_ORDER, S_NAMES, X_NAMES};
use crate::protocol::{design_gains, Design, DesignError};
use crate::topology::{Digraph, MAX_AGENTS};
use thiserror::Error;

/// Consensus-term and compensation-term shaping. The saturation levels are
/// configuration values: the theoretical construction sizes them from
/// suprema over an invariant set, which are not computable from scenario
/// data alone.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    /// Saturation level of the consensus feedback term.
    pub m_level: f64,
    /// Per-agent saturation levels of the disturbance compensation term.
    pub n_levels: Vec<f64>,
    /// Add the leader's input to every agent's input. The full protocol
    /// includes this feedforward; the benchmark simulation omits it.
    pub leader_feedforward: bool,
}

/// Everything needed to design the protocol and integrate the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    /// Chain order of every agent.
    pub n: usize,
    /// Number of followers.
    pub m: usize,
    pub graph: Digraph,
    pub leader: LeaderSpec,
    pub followers: Vec<FollowerSpec>,
    pub eso: EsoGains,
    pub protocol: ProtocolConfig,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    /// Unrecoverable syntax error; parsing stopped at `line`.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Semantic violations, all collected. Line 0 marks file-level issues.
    #[error("invalid scenario:\n{}", render_issues(.issues))]
    Invalid { issues: Vec<(usize, String)> },
}

fn render_issues(issues: &[(usize, String)]) -> String {
    let rows: Vec<String> = issues
        .iter()
        .map(|(line, msg)| {
            if *line > 0 {
                format!("  line {line}: {msg}")
            } else {
                format!("  {msg}")
            }
        })
        .collect();
    rows.join("\n")
}

// ---------------------------------------------------------------------------
// Raw tokenization
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct Pair {
    line: usize,
    key: String,
    value: String,
    quoted: bool,
}

#[derive(Debug)]
struct RawSection {
    name: String,
    line: usize,
    pairs: Vec<Pair>,
    /// `(line, from, to)` edge rows; only `[topology]` accepts them.
    edges: Vec<(usize, usize, usize)>,
}

fn tokenize(src: &str) -> Result<Vec<RawSection>, ScenarioError> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if let Some(inner) = text.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or(ScenarioError::Parse {
                line,
                msg: "section header must be `[name]`".into(),
            })?;
            sections.push(RawSection {
                name: name.trim().to_string(),
                line,
                pairs: Vec::new(),
                edges: Vec::new(),
            });
            continue;
        }
        let Some(section) = sections.last_mut() else {
            return Err(ScenarioError::Parse {
                line,
                msg: "content before the first section header".into(),
            });
        };
        if let Some((key, value)) = text.split_once('=') {
            let key = key.trim().to_string();
            let value = value.trim();
            let (value, quoted) = if let Some(rest) = value.strip_prefix('"') {
                let inner = rest.strip_suffix('"').ok_or(ScenarioError::Parse {
                    line,
                    msg: "unterminated quoted string".into(),
                })?;
                (inner.to_string(), true)
            } else {
                (value.to_string(), false)
            };
            section.pairs.push(Pair {
                line,
                key,
                value,
                quoted,
            });
        } else if text.contains("->") {
            // Edge rows are tokenized wherever they appear; validation
            // rejects them outside [topology] so a misspelled section
            // header still yields a full issue report.
            let (from, to) = text.split_once("->").expect("checked above");
            let parse_vertex = |s: &str| {
                s.trim().parse::<usize>().map_err(|_| ScenarioError::Parse {
                    line,
                    msg: format!("`{}` is not a vertex number", s.trim()),
                })
            };
            section
                .edges
                .push((line, parse_vertex(from)?, parse_vertex(to)?));
        } else {
            return Err(ScenarioError::Parse {
                line,
                msg: "expected `key = value` (or `j -> i` inside [topology])".into(),
            });
        }
    }
    Ok(sections)
}

// ---------------------------------------------------------------------------
// Typed readers over raw sections
// ---------------------------------------------------------------------------

type Issues = Vec<(usize, String)>;

fn get<'a>(sec: &'a RawSection, key: &str) -> Option<&'a Pair> {
    sec.pairs.iter().find(|p| p.key == key)
}

fn require<'a>(sec: &'a RawSection, key: &str, issues: &mut Issues) -> Option<&'a Pair> {
    let found = get(sec, key);
    if found.is_none() {
        issues.push((sec.line, format!("[{}] is missing key `{key}`", sec.name)));
    }
    found
}

fn unquoted<'a>(pair: &'a Pair, issues: &mut Issues) -> Option<&'a str> {
    if pair.quoted {
        issues.push((
            pair.line,
            format!("`{}` must not be a quoted string", pair.key),
        ));
        return None;
    }
    Some(&pair.value)
}

fn parse_f64(pair: &Pair, issues: &mut Issues) -> Option<f64> {
    let text = unquoted(pair, issues)?;
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            issues.push((
                pair.line,
                format!("`{}` is not a finite number: `{text}`", pair.key),
            ));
            None
        }
    }
}

fn parse_usize(pair: &Pair, issues: &mut Issues) -> Option<usize> {
    let text = unquoted(pair, issues)?;
    match text.parse::<usize>() {
        Ok(v) => Some(v),
        Err(_) => {
            issues.push((
                pair.line,
                format!("`{}` is not a nonnegative integer: `{text}`", pair.key),
            ));
            None
        }
    }
}

fn parse_bool(pair: &Pair, issues: &mut Issues) -> Option<bool> {
    match unquoted(pair, issues)? {
        "true" => Some(true),
        "false" => Some(false),
        other => {
            issues.push((
                pair.line,
                format!("`{}` must be `true` or `false`, got `{other}`", pair.key),
            ));
            None
        }
    }
}

fn parse_f64_list(pair: &Pair, want: usize, issues: &mut Issues) -> Option<Vec<f64>> {
    let text = unquoted(pair, issues)?;
    let mut out = Vec::new();
    for piece in text.split(',') {
        match piece.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => {
                issues.push((
                    pair.line,
                    format!("`{}` has a non-numeric entry: `{}`", pair.key, piece.trim()),
                ));
                return None;
            }
        }
    }
    if out.len() != want {
        issues.push((
            pair.line,
            format!("`{}` must list {want} numbers, got {}", pair.key, out.len()),
        ));
        return None;
    }
    Some(out)
}

fn parse_expr_pair(pair: &Pair, vars: &[&str], issues: &mut Issues) -> Option<Expr> {
    if !pair.quoted {
        issues.push((
            pair.line,
            format!("`{}` is an expression and must be double-quoted", pair.key),
        ));
        return None;
    }
    match expr::parse(&pair.value, vars) {
        Ok(e) => Some(e),
        Err(err) => {
            issues.push((pair.line, format!("`{}`: {err}", pair.key)));
            None
        }
    }
}

/// Flag duplicate and unexpected keys in a section.
fn check_keys(sec: &RawSection, allowed: &[&str], issues: &mut Issues) {
    for (i, pair) in sec.pairs.iter().enumerate() {
        if !allowed.contains(&pair.key.as_str()) {
            issues.push((
                pair.line,
                format!("unknown key `{}` in [{}]", pair.key, sec.name),
            ));
        }
        if sec.pairs[..i].iter().any(|p| p.key == pair.key) {
            issues.push((
                pair.line,
                format!("duplicate key `{}` in [{}]", pair.key, sec.name),
            ));
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario assembly
// ---------------------------------------------------------------------------

impl Scenario {
    /// Parse and fully validate a scenario from text.
    pub fn parse(src: &str) -> Result<Scenario, ScenarioError> {
        let sections = tokenize(src)?;
        let mut issues: Issues = Vec::new();

        for (i, sec) in sections.iter().enumerate() {
            if sections[..i].iter().any(|s| s.name == sec.name) {
                issues.push((sec.line, format!("duplicate section [{}]", sec.name)));
            }
            let known = matches!(
                sec.name.as_str(),
                "meta" | "topology" | "leader" | "observer" | "protocol" | "sim"
            ) || agent_index(&sec.name).is_some();
            if !known {
                issues.push((sec.line, format!("unknown section [{}]", sec.name)));
            }
            if sec.name != "topology" && !sec.edges.is_empty() {
                issues.push((
                    sec.edges[0].0,
                    format!("edge lines are only allowed in [topology], not [{}]", sec.name),
                ));
            }
        }
        let find = |name: &str| sections.iter().find(|s| s.name == name);

        // Structural stage: the chain order and follower count shape every
        // later check, so bail out if either is unusable.
        let mut n = None;
        let mut m = None;
        match find("meta") {
            Some(sec) => {
                if let Some(pair) = require(sec, "order", &mut issues) {
                    match parse_usize(pair, &mut issues) {
                        Some(v) if (1..=MAX_ORDER).contains(&v) => n = Some(v),
                        Some(v) => issues.push((
                            pair.line,
                            format!("`order` must be between 1 and {MAX_ORDER}, got {v}"),
                        )),
                        None => {}
                    }
                }
            }
            None => issues.push((0, "missing [meta] section".into())),
        }
        match find("topology") {
            Some(sec) => {
                if let Some(pair) = require(sec, "followers", &mut issues) {
                    match parse_usize(pair, &mut issues) {
                        Some(v) if (1..=MAX_AGENTS).contains(&v) => m = Some(v),
                        Some(v) => issues.push((
                            pair.line,
                            format!("`followers` must be between 1 and {MAX_AGENTS}, got {v}"),
                        )),
                        None => {}
                    }
                }
            }
            None => issues.push((0, "missing [topology] section".into())),
        }
        let (Some(n), Some(m)) = (n, m) else {
            return Err(ScenarioError::Invalid { issues });
        };

        // [meta]
        let meta = find("meta").expect("checked above");
        check_keys(meta, &["name", "order"], &mut issues);
        let mut name = String::new();
        if let Some(pair) = require(meta, "name", &mut issues) {
            if let Some(text) = unquoted(pair, &mut issues) {
                if text.is_empty() || text.contains(char::is_whitespace) {
                    issues.push((
                        pair.line,
                        "`name` must be a single nonempty token".into(),
                    ));
                } else {
                    name = text.to_string();
                }
            }
        }

        // [topology]
        let topo = find("topology").expect("checked above");
        check_keys(topo, &["followers"], &mut issues);
        let edge_list: Vec<(usize, usize)> =
            topo.edges.iter().map(|&(_, from, to)| (from, to)).collect();
        let graph = match Digraph::new(m, &edge_list) {
            Ok(g) => {
                if !g.check_spanning_tree() {
                    issues.push((
                        topo.line,
                        "the leader has no directed path to every follower (no spanning tree)"
                            .into(),
                    ));
                }
                Some(g)
            }
            Err(err) => {
                issues.push((topo.line, err.to_string()));
                None
            }
        };

        // [leader]
        let mut leader = None;
        match find("leader") {
            Some(sec) => {
                check_keys(sec, &["x0", "u0"], &mut issues);
                let x_init = require(sec, "x0", &mut issues)
                    .and_then(|p| parse_f64_list(p, n, &mut issues));
                let u0 = require(sec, "u0", &mut issues)
                    .and_then(|p| parse_expr_pair(p, &S_NAMES[..n], &mut issues));
                if let (Some(x_init), Some(u0)) = (x_init, u0) {
                    leader = Some(LeaderSpec { u0, x_init });
                }
            }
            None => issues.push((0, "missing [leader] section".into())),
        }

        // [agent.i]
        for sec in &sections {
            if let Some(idx) = agent_index(&sec.name) {
                if idx == 0 || idx > m {
                    issues.push((
                        sec.line,
                        format!("[{}] is out of range: agents are 1..={m}", sec.name),
                    ));
                }
            }
        }
        let mut followers = Vec::with_capacity(m);
        for i in 1..=m {
            let Some(sec) = find(&format!("agent.{i}")) else {
                issues.push((0, format!("missing [agent.{i}] section")));
                continue;
            };
            let mut allowed: Vec<String> = vec!["x0".into(), "w".into()];
            for j in 1..=n {
                allowed.push(format!("h{j}"));
                allowed.push(format!("d{j}"));
            }
            let allowed_refs: Vec<&str> = allowed.iter().map(String::as_str).collect();
            check_keys(sec, &allowed_refs, &mut issues);

            let x_init = require(sec, "x0", &mut issues)
                .and_then(|p| parse_f64_list(p, n, &mut issues));
            let mut h = Vec::with_capacity(n);
            let mut d = Vec::with_capacity(n);
            for j in 1..=n {
                // h_j may read the first j states plus its channel's
                // disturbance value.
                let mut vars: Vec<&str> = X_NAMES[..j].to_vec();
                vars.push("d");
                if let Some(e) = require(sec, &format!("h{j}"), &mut issues)
                    .and_then(|p| parse_expr_pair(p, &vars, &mut issues))
                {
                    h.push(e);
                }
                if let Some(e) = require(sec, &format!("d{j}"), &mut issues)
                    .and_then(|p| parse_expr_pair(p, &["t"], &mut issues))
                {
                    d.push(Signal::new(e, n));
                }
            }
            let w = require(sec, "w", &mut issues)
                .and_then(|p| parse_expr_pair(p, &["t"], &mut issues));
            if let (Some(x_init), Some(w)) = (x_init, w) {
                if h.len() == n && d.len() == n {
                    followers.push(FollowerSpec {
                        h,
                        d,
                        w: Signal::new(w, n + 1),
                        x_init,
                    });
                }
            }
        }

        // [observer]
        let mut eso = None;
        match find("observer") {
            Some(sec) => {
                check_keys(sec, &["k", "r"], &mut issues);
                let k = require(sec, "k", &mut issues)
                    .and_then(|p| parse_f64_list(p, n + 1, &mut issues));
                let r = require(sec, "r", &mut issues).and_then(|p| parse_f64(p, &mut issues));
                if let (Some(k), Some(r)) = (k, r) {
                    let gains = EsoGains { k, r };
                    match gains.validate(n) {
                        Ok(()) => eso = Some(gains),
                        Err(err) => issues.push((sec.line, err.to_string())),
                    }
                }
            }
            None => issues.push((0, "missing [observer] section".into())),
        }

        // [protocol] — entirely optional; defaults follow the benchmark.
        let mut protocol = ProtocolConfig {
            m_level: 5.0,
            n_levels: vec![5.0; m],
            leader_feedforward: true,
        };
        if let Some(sec) = find("protocol") {
            check_keys(sec, &["m_level", "n_levels", "leader_feedforward"], &mut issues);
            if let Some(pair) = get(sec, "m_level") {
                if let Some(v) = parse_f64(pair, &mut issues) {
                    if v > 0.0 {
                        protocol.m_level = v;
                    } else {
                        issues.push((pair.line, format!("`m_level` must be positive, got {v}")));
                    }
                }
            }
            if let Some(pair) = get(sec, "n_levels") {
                if let Some(text) = unquoted(pair, &mut issues) {
                    let count = text.split(',').count();
                    let want = if count == 1 { 1 } else { m };
                    if let Some(vals) = parse_f64_list(pair, want, &mut issues) {
                        if let Some(&bad) = vals.iter().find(|&&v| v <= 0.0) {
                            issues.push((
                                pair.line,
                                format!("`n_levels` entries must be positive, got {bad}"),
                            ));
                        } else if vals.len() == 1 {
                            protocol.n_levels = vec![vals[0]; m];
                        } else {
                            protocol.n_levels = vals;
                        }
                    }
                }
            }
            if let Some(pair) = get(sec, "leader_feedforward") {
                if let Some(v) = parse_bool(pair, &mut issues) {
                    protocol.leader_feedforward = v;
                }
            }
        }

        // [sim] — optional with benchmark defaults.
        let mut sim = SimConfig {
            dt: 1e-3,
            t_final: 20.0,
            record_stride: 1,
        };
        if let Some(sec) = find("sim") {
            check_keys(sec, &["dt", "t_final", "record_stride"], &mut issues);
            if let Some(pair) = get(sec, "dt") {
                if let Some(v) = parse_f64(pair, &mut issues) {
                    if v > 0.0 {
                        sim.dt = v;
                    } else {
                        issues.push((pair.line, format!("`dt` must be positive, got {v}")));
                    }
                }
            }
            if let Some(pair) = get(sec, "t_final") {
                if let Some(v) = parse_f64(pair, &mut issues) {
                    sim.t_final = v;
                }
            }
            if let Some(pair) = get(sec, "record_stride") {
                if let Some(v) = parse_usize(pair, &mut issues) {
                    if v >= 1 {
                        sim.record_stride = v;
                    } else {
                        issues.push((pair.line, "`record_stride` must be at least 1".into()));
                    }
                }
            }
            if sim.t_final < sim.dt {
                issues.push((
                    sec.line,
                    format!(
                        "`t_final` = {} must cover at least one step of `dt` = {}",
                        sim.t_final, sim.dt
                    ),
                ));
            }
        }

        if !issues.is_empty() {
            return Err(ScenarioError::Invalid { issues });
        }
        Ok(Scenario {
            name,
            n,
            m,
            graph: graph.expect("no issues recorded"),
            leader: leader.expect("no issues recorded"),
            followers,
            eso: eso.expect("no issues recorded"),
            protocol,
            sim,
        })
    }

    /// Deterministic normalized serialization. `parse(canonical(s)) == s`
    /// for every valid scenario; the hash is taken over these bytes.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let floats = |vals: &[f64]| {
            vals.iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        out.push_str("[meta]\n");
        out.push_str(&format!("name = {}\n", self.name));
        out.push_str(&format!("order = {}\n\n", self.n));

        out.push_str("[topology]\n");
        out.push_str(&format!("followers = {}\n", self.m));
        for &(from, to) in self.graph.edges() {
            out.push_str(&format!("{from} -> {to}\n"));
        }
        out.push('\n');

        out.push_str("[leader]\n");
        out.push_str(&format!("x0 = {}\n", floats(&self.leader.x_init)));
        out.push_str(&format!("u0 = \"{}\"\n\n", self.leader.u0));

        for (idx, f) in self.followers.iter().enumerate() {
            out.push_str(&format!("[agent.{}]\n", idx + 1));
            out.push_str(&format!("x0 = {}\n", floats(&f.x_init)));
            for j in 0..self.n {
                out.push_str(&format!("h{} = \"{}\"\n", j + 1, f.h[j]));
                out.push_str(&format!("d{} = \"{}\"\n", j + 1, f.d[j].expr()));
            }
            out.push_str(&format!("w = \"{}\"\n\n", f.w.expr()));
        }

        out.push_str("[observer]\n");
        out.push_str(&format!("k = {}\n", floats(&self.eso.k)));
        out.push_str(&format!("r = {:?}\n\n", self.eso.r));

        out.push_str("[protocol]\n");
        out.push_str(&format!("m_level = {:?}\n", self.protocol.m_level));
        out.push_str(&format!("n_levels = {}\n", floats(&self.protocol.n_levels)));
        out.push_str(&format!(
            "leader_feedforward = {}\n\n",
            self.protocol.leader_feedforward
        ));

        out.push_str("[sim]\n");
        out.push_str(&format!("dt = {:?}\n", self.sim.dt));
        out.push_str(&format!("t_final = {:?}\n", self.sim.t_final));
        out.push_str(&format!("record_stride = {}\n", self.sim.record_stride));
        out
    }

    /// FNV-1a over the canonical serialization; stable across runs and
    /// platforms, recorded in every trace.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }

    /// Run the full gain-design pipeline for this scenario's topology.
    pub fn design(&self) -> Result<Design, DesignError> {
        design_gains(&self.graph, self.n)
    }

    /// Assemble the closed loop with the designed feedback row.
    pub fn to_system(&self, design: &Design) -> System {
        System {
            n: self.n,
            m: self.m,
            graph: self.graph.clone(),
            leader: self.leader.clone(),
            followers: self.followers.clone(),
            eso: self.eso.clone(),
            k_row: design.riccati.k.clone(),
            m_level: self.protocol.m_level,
            n_levels: self.protocol.n_levels.clone(),
            leader_feedforward: self.protocol.leader_feedforward,
        }
    }

    /// Provenance block recorded into the trace.
    pub fn trace_meta(&self, design: &Design, overrides: Vec<String>) -> TraceMeta {
        TraceMeta {
            scenario_name: self.name.clone(),
            scenario_hash: self.hash(),
            r: self.eso.r,
            dt: self.sim.dt,
            t_final: self.sim.t_final,
            record_stride: self.sim.record_stride,
            eso_k: self.eso.k.clone(),
            k_row: design.riccati.k.clone(),
            mu0: design.mu0,
            overrides,
            warnings: Vec::new(),
        }
    }
}

fn agent_index(section: &str) -> Option<usize> {
    section.strip_prefix("agent.")?.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenarios;

    #[test]
    fn shipped_benchmark_scenario_parses() {
        let s = Scenario::parse(scenarios::S4_PARA1).expect("shipped scenario");
        assert_eq!(s.name, "s4_para1");
        assert_eq!((s.n, s.m), (2, 5));
        assert_eq!(s.eso.k, vec![3.0, 3.0, 1.0]);
        assert_eq!(s.eso.r, 10.0);
        assert_eq!(s.followers[0].x_init, vec![0.1, -0.4]);
        assert_eq!(s.followers[4].x_init, vec![-0.8, 0.7]);
        assert_eq!(s.leader.x_init, vec![0.3, 0.2]);
        assert!(!s.protocol.leader_feedforward);
        assert_eq!(s.protocol.m_level, 5.0);
        assert_eq!(s.sim.dt, 1e-3);
        assert_eq!(s.sim.t_final, 20.0);
        assert_eq!(s.graph.edges().len(), 6);
    }

    #[test]
    fn theory_variant_differs_only_in_feedforward_and_name() {
        let base = Scenario::parse(scenarios::S4_PARA1).unwrap();
        let theory = Scenario::parse(scenarios::S4_THEORY).unwrap();
        assert!(theory.protocol.leader_feedforward);
        let mut patched = theory.clone();
        patched.protocol.leader_feedforward = false;
        patched.name = base.name.clone();
        assert_eq!(patched, base);
    }

    #[test]
    fn canonical_round_trips_all_shipped_scenarios() {
        for src in [scenarios::S4_PARA1, scenarios::S4_PARA2, scenarios::S4_THEORY] {
            let s = Scenario::parse(src).unwrap();
            let again = Scenario::parse(&s.canonical()).expect("canonical text reparses");
            assert_eq!(again, s);
            assert_eq!(again.hash(), s.hash());
        }
    }

    #[test]
    fn hash_is_sensitive_to_content() {
        let a = Scenario::parse(scenarios::S4_PARA1).unwrap();
        let mut b = a.clone();
        b.eso.r = 50.0;
        assert_ne!(a.hash(), b.hash());
    }

    fn tiny(src: &str) -> Result<Scenario, ScenarioError> {
        Scenario::parse(src)
    }

    const TINY: &str = "\
[meta]
name = tiny
order = 1

[topology]
followers = 1
0 -> 1

[leader]
x0 = 0
u0 = \"0\"

[agent.1]
x0 = 0.5
h1 = \"d\"
d1 = \"sin(t)\"
w = \"0\"

[observer]
k = 2, 1
r = 10
";

    #[test]
    fn minimal_scenario_uses_documented_defaults() {
        let s = tiny(TINY).unwrap();
        assert_eq!(s.protocol.m_level, 5.0);
        assert_eq!(s.protocol.n_levels, vec![5.0]);
        assert!(s.protocol.leader_feedforward, "feedforward defaults on");
        assert_eq!(s.sim.dt, 1e-3);
        assert_eq!(s.sim.t_final, 20.0);
        assert_eq!(s.sim.record_stride, 1);
    }

    #[test]
    fn missing_topology_section_is_named() {
        let src = TINY.replace("[topology]", "[topplogy]");
        match tiny(&src) {
            Err(ScenarioError::Invalid { issues }) => {
                assert!(
                    issues.iter().any(|(_, m)| m.contains("[topology]")),
                    "issues: {issues:?}"
                );
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn non_hurwitz_observer_gains_are_rejected() {
        let src = scenarios::S4_PARA1.replace("k = 3, 3, 1", "k = 1, 0, 1");
        match tiny(&src) {
            Err(ScenarioError::Invalid { issues }) => {
                assert!(
                    issues.iter().any(|(_, m)| m.contains("Hurwitz")),
                    "issues: {issues:?}"
                );
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn violations_are_collected_with_line_numbers() {
        // Two independent problems: a bad expression and a bad vector
        // length. Both must be reported, each with its own line.
        let src = TINY
            .replace("h1 = \"d\"", "h1 = \"d +\"")
            .replace("x0 = 0.5", "x0 = 0.5, 1.0");
        match tiny(&src) {
            Err(ScenarioError::Invalid { issues }) => {
                assert_eq!(issues.len(), 2, "issues: {issues:?}");
                let lines: Vec<usize> = issues.iter().map(|(l, _)| *l).collect();
                let x0_line = 1 + src.lines().position(|l| l.starts_with("x0 = 0.5,")).unwrap();
                let h1_line = 1 + src.lines().position(|l| l.starts_with("h1 =")).unwrap();
                assert!(lines.contains(&x0_line), "lines: {lines:?}");
                assert!(lines.contains(&h1_line), "lines: {lines:?}");
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn unquoted_expression_is_rejected() {
        let src = TINY.replace("u0 = \"0\"", "u0 = 0");
        match tiny(&src) {
            Err(ScenarioError::Invalid { issues }) => {
                assert!(issues.iter().any(|(_, m)| m.contains("double-quoted")));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_stop_with_the_offending_line() {
        let src = "[meta\nname = x\n";
        match tiny(src) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn undeclared_variable_in_expression_is_an_issue() {
        // The leader input may only read the leader state names.
        let src = TINY.replace("u0 = \"0\"", "u0 = \"x1\"");
        match tiny(&src) {
            Err(ScenarioError::Invalid { issues }) => {
                assert!(
                    issues.iter().any(|(_, m)| m.contains("x1")),
                    "issues: {issues:?}"
                );
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn missing_spanning_tree_is_reported() {
        let src = TINY.replace("0 -> 1", "");
        match tiny(&src) {
            Err(ScenarioError::Invalid { issues }) => {
                assert!(issues.iter().any(|(_, m)| m.contains("spanning tree")));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_keys_are_flagged() {
        let src = TINY.replace("r = 10", "r = 10\nr = 20");
        match tiny(&src) {
            Err(ScenarioError::Invalid { issues }) => {
                assert!(issues.iter().any(|(_, m)| m.contains("duplicate key `r`")));
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }
}
