//! Conditional-independence statements, premise sets, and their English
//! rendering.
//!
//! Premise grammar (sentences joined by single spaces):
//!
//! ```text
//! Suppose there is a closed system of 4 variables A, B, C, and D.
//! All the statistical relations among these 4 variables are as follows:
//! A correlates with B. ... However, B and D are independent given A. ...
//! ```
//!
//! A premise that opens with "All the statistical relations" is closed-world:
//! every (pair, conditioning set) it does not list as independent is
//! dependent. "Some of the statistical relations" marks a partial listing.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dag::{bit, Dag, RelationTemplate};
use crate::error::{Error, Result};
use crate::indep::dsep::d_separated_mask;

/// Largest variable count for which a closed-world premise is expanded into
/// explicit statements (66 pairs x 2^10 conditioning sets at the limit).
pub const CLOSED_WORLD_MAX_VARS: usize = 12;

/// `x ⟂ y | cond` (or its negation), stored with `x < y` and `cond` sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CiStatement {
    pub x: usize,
    pub y: usize,
    pub cond: Vec<usize>,
    pub independent: bool,
}

impl CiStatement {
    pub fn new(x: usize, y: usize, cond: &[usize], independent: bool) -> Result<Self> {
        if x == y {
            return Err(Error::Input("statement needs two distinct variables".into()));
        }
        let (x, y) = if x < y { (x, y) } else { (y, x) };
        let mut cond = cond.to_vec();
        cond.sort_unstable();
        cond.dedup();
        if cond.contains(&x) || cond.contains(&y) {
            return Err(Error::Input("conditioning set contains a queried variable".into()));
        }
        Ok(CiStatement {
            x,
            y,
            cond,
            independent,
        })
    }

    pub fn cond_mask(&self) -> u64 {
        self.cond.iter().fold(0, |m, &c| m | bit(c))
    }

    pub fn holds_in(&self, g: &Dag) -> bool {
        d_separated_mask(g, self.x, self.y, self.cond_mask()) == self.independent
    }

    fn sort_key(&self) -> (usize, usize, usize, &[usize]) {
        (self.x, self.y, self.cond.len(), &self.cond)
    }
}

/// The premise `P`: a set of CI statements over named variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PremiseSet {
    pub names: Vec<String>,
    pub statements: Vec<CiStatement>,
    pub closed_world: bool,
}

impl PremiseSet {
    /// Validates indices and uniqueness of `(x, y, cond)` and sorts the
    /// statements canonically (pair-major, then conditioning-set size, then
    /// lexicographic).
    pub fn new(names: Vec<String>, mut statements: Vec<CiStatement>, closed_world: bool) -> Result<Self> {
        let d = names.len();
        if d == 0 {
            return Err(Error::Input("premise needs at least one variable".into()));
        }
        for s in &statements {
            if s.y >= d || s.cond.iter().any(|&c| c >= d) {
                return Err(Error::Input(format!("statement index out of range for {d} variables")));
            }
        }
        statements.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        for w in statements.windows(2) {
            if (w[0].x, w[0].y, &w[0].cond) == (w[1].x, w[1].y, &w[1].cond) {
                return Err(Error::Input(format!(
                    "two statements about ({}, {} | {:?})",
                    names[w[0].x], names[w[0].y], w[0].cond
                )));
            }
        }
        Ok(PremiseSet {
            names,
            statements,
            closed_world,
        })
    }

    /// Closed-world premise: `listed` plus a dependence statement for every
    /// pair and conditioning set of size <= d - 2 that `listed` omits.
    pub fn closed(names: Vec<String>, listed: Vec<CiStatement>) -> Result<Self> {
        let d = names.len();
        if d > CLOSED_WORLD_MAX_VARS {
            return Err(Error::Input(format!(
                "closed-world premise over {d} variables is too large to expand (limit {CLOSED_WORLD_MAX_VARS})"
            )));
        }
        let known: HashSet<(usize, usize, Vec<usize>)> =
            listed.iter().map(|s| (s.x, s.y, s.cond.clone())).collect();
        let mut all = listed;
        for (x, y) in canonical_pairs(d) {
            let rest: Vec<usize> = (0..d).filter(|&v| v != x && v != y).collect();
            for cond in subsets_upto(&rest, rest.len()) {
                if !known.contains(&(x, y, cond.clone())) {
                    all.push(CiStatement {
                        x,
                        y,
                        cond,
                        independent: false,
                    });
                }
            }
        }
        Self::new(names, all, true)
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Whether `g` reproduces every statement.
    pub fn satisfied_by(&self, g: &Dag) -> bool {
        g.num_vars() == self.num_vars() && self.statements.iter().all(|s| s.holds_in(g))
    }

    pub fn violations(&self, g: &Dag) -> usize {
        self.statements.iter().filter(|s| !s.holds_in(g)).count()
    }

    /// The premise in English.
    pub fn text(&self) -> Result<String> {
        let d = self.num_vars();
        let mut sentences = vec![
            format!(
                "Suppose there is a closed system of {d} variables {}.",
                name_list(self.names.iter().map(String::as_str))
            ),
            format!(
                "{} the statistical relations among these {d} variables are as follows:",
                if self.closed_world { "All" } else { "Some of" }
            ),
        ];
        let mut correlations = Vec::new();
        let mut independences = Vec::new();
        for s in &self.statements {
            let (x, y) = (&self.names[s.x], &self.names[s.y]);
            match (s.independent, s.cond.is_empty()) {
                (false, true) => correlations.push(format!("{x} correlates with {y}.")),
                (true, true) => independences.push(format!("{x} and {y} are independent.")),
                (true, false) => independences.push(format!(
                    "{x} and {y} are independent given {}.",
                    name_list(s.cond.iter().map(|&c| self.names[c].as_str()))
                )),
                (false, false) if self.closed_world => {}
                (false, false) => {
                    return Err(Error::Input(
                        "conditional dependence cannot be stated in a partial premise".into(),
                    ))
                }
            }
        }
        let has_correlations = !correlations.is_empty();
        sentences.extend(correlations);
        for (i, s) in independences.into_iter().enumerate() {
            if i == 0 && has_correlations {
                sentences.push(format!("However, {s}"));
            } else {
                sentences.push(s);
            }
        }
        Ok(sentences.join(" "))
    }
}

/// Which CI statements a rendered premise includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CiPolicy {
    /// Every statement with conditioning sets up to d - 2 (closed world).
    Full,
    /// Every marginal statement, plus for each marginally dependent pair the
    /// first separating set found by increasing-size subset search, if its
    /// size is at most `max_size`.
    MinimalSeparators { max_size: usize },
}

impl CiPolicy {
    pub fn statements(self, g: &Dag) -> Vec<CiStatement> {
        let d = g.num_vars();
        match self {
            CiPolicy::Full => all_ci_statements(g, d.saturating_sub(2)),
            CiPolicy::MinimalSeparators { max_size } => {
                let mut out = Vec::new();
                for (x, y) in canonical_pairs(d) {
                    let marginal = d_separated_mask(g, x, y, 0);
                    out.push(CiStatement {
                        x,
                        y,
                        cond: Vec::new(),
                        independent: marginal,
                    });
                    if marginal || max_size == 0 || g.adjacent(x, y) {
                        continue;
                    }
                    let rest: Vec<usize> = (0..d).filter(|&v| v != x && v != y).collect();
                    let mut found = None;
                    'search: for k in 1..=max_size.min(rest.len()) {
                        for cond in combinations(&rest, k) {
                            let mask = cond.iter().fold(0, |m, &c| m | bit(c));
                            if d_separated_mask(g, x, y, mask) {
                                found = Some(cond);
                                break 'search;
                            }
                        }
                    }
                    if let Some(cond) = found {
                        out.push(CiStatement {
                            x,
                            y,
                            cond,
                            independent: true,
                        });
                    }
                }
                out
            }
        }
    }

    pub fn closed_world(self) -> bool {
        matches!(self, CiPolicy::Full)
    }
}

/// Every CI statement of `g` with conditioning sets of size <= `max_cond`,
/// pair-major, then by subset size, then lexicographic.
pub fn all_ci_statements(g: &Dag, max_cond: usize) -> Vec<CiStatement> {
    let d = g.num_vars();
    let max_cond = max_cond.min(d.saturating_sub(2));
    let mut out = Vec::new();
    for (x, y) in canonical_pairs(d) {
        let rest: Vec<usize> = (0..d).filter(|&v| v != x && v != y).collect();
        for cond in subsets_upto(&rest, max_cond) {
            let mask = cond.iter().fold(0, |m, &c| m | bit(c));
            out.push(CiStatement {
                x,
                y,
                independent: d_separated_mask(g, x, y, mask),
                cond,
            });
        }
    }
    out
}

/// Renders `g`'s premise under `policy`, returning the text and the
/// structured premise it encodes.
pub fn render_premise(g: &Dag, policy: CiPolicy) -> Result<(String, PremiseSet)> {
    let premise = PremiseSet::new(g.names().to_vec(), policy.statements(g), policy.closed_world())?;
    let text = premise.text()?;
    Ok((text, premise))
}

/// Parses premise text produced by [`PremiseSet::text`] (or in the same
/// grammar).
pub fn parse_premise(text: &str) -> Result<PremiseSet> {
    let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let sentences = split_sentences(&normalized);
    if sentences.is_empty() {
        return Err(Error::parse("sentence 1", "empty premise"));
    }
    let pos = |i: usize| format!("sentence {}", i + 1);

    let header = sentences[0]
        .strip_prefix("Suppose there is a closed system of ")
        .and_then(|s| s.strip_suffix('.'))
        .ok_or_else(|| Error::parse(pos(0), "expected 'Suppose there is a closed system of N variables ...'"))?;
    let (count, rest) = header
        .split_once(' ')
        .ok_or_else(|| Error::parse(pos(0), "missing variable count"))?;
    let d: usize = count
        .parse()
        .map_err(|_| Error::parse(pos(0), format!("invalid variable count '{count}'")))?;
    let list = rest
        .strip_prefix("variables ")
        .or_else(|| rest.strip_prefix("variable "))
        .ok_or_else(|| Error::parse(pos(0), "expected 'variables'"))?;
    let names: Vec<String> = parse_name_list(list).map_err(|m| Error::parse(pos(0), m))?;
    if names.len() != d {
        return Err(Error::parse(
            pos(0),
            format!("header declares {d} variables but lists {}", names.len()),
        ));
    }
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(Error::parse(pos(0), format!("duplicate variable '{n}'")));
        }
    }
    let lookup = |name: &str, i: usize| -> Result<usize> {
        names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::parse(pos(i), format!("unknown variable '{name}'")))
    };

    let mut idx = 1;
    let mut closed_world = false;
    if let Some(s) = sentences.get(1) {
        let all = format!("All the statistical relations among these {d} variables are as follows:");
        let some = format!("Some of the statistical relations among these {d} variables are as follows:");
        if *s == all {
            closed_world = true;
            idx = 2;
        } else if *s == some {
            idx = 2;
        }
    }

    let mut statements = Vec::new();
    let mut seen_independence = false;
    for (i, raw) in sentences.iter().enumerate().skip(idx) {
        let mut s = *raw;
        if let Some(rest) = s.strip_prefix("However, ") {
            if seen_independence {
                return Err(Error::parse(pos(i), "'However,' may only open the independence block"));
            }
            s = rest;
        }
        let body = s
            .strip_suffix('.')
            .ok_or_else(|| Error::parse(pos(i), "sentence must end with '.'"))?;
        if let Some((x, y)) = body.split_once(" correlates with ") {
            if seen_independence {
                return Err(Error::parse(pos(i), "correlation after the independence block"));
            }
            let (x, y) = (lookup(x, i)?, lookup(y, i)?);
            statements.push(CiStatement::new(x, y, &[], false).map_err(|e| Error::parse(pos(i), e.to_string()))?);
            continue;
        }
        let (pair, cond) = if let Some((pair, given)) = body.split_once(" are independent given ") {
            let cond = parse_name_list(given)
                .map_err(|m| Error::parse(pos(i), m))?
                .iter()
                .map(|n| lookup(n, i))
                .collect::<Result<Vec<_>>>()?;
            (pair, cond)
        } else if let Some(pair) = body.strip_suffix(" are independent") {
            (pair, Vec::new())
        } else {
            return Err(Error::parse(pos(i), format!("unrecognized sentence '{raw}'")));
        };
        let (x, y) = pair
            .split_once(" and ")
            .ok_or_else(|| Error::parse(pos(i), "expected 'X and Y are independent'"))?;
        let (x, y) = (lookup(x, i)?, lookup(y, i)?);
        statements.push(CiStatement::new(x, y, &cond, true).map_err(|e| Error::parse(pos(i), e.to_string()))?);
        seen_independence = true;
    }

    if closed_world {
        PremiseSet::closed(names, statements)
    } else {
        PremiseSet::new(names, statements, false)
    }
    .map_err(|e| match e {
        Error::Input(m) => Error::parse("premise", m),
        other => other,
    })
}

/// A causal hypothesis `template(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hypothesis {
    pub template: RelationTemplate,
    pub a: usize,
    pub b: usize,
}

impl Hypothesis {
    pub fn new(template: RelationTemplate, a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::Input("hypothesis needs two distinct variables".into()));
        }
        Ok(Hypothesis { template, a, b })
    }

    pub fn holds_in(&self, g: &Dag) -> Result<bool> {
        g.relation_holds(self.template, self.a, self.b)
    }

    pub fn text(&self, names: &[String]) -> String {
        let (a, b) = (&names[self.a], &names[self.b]);
        match self.template {
            RelationTemplate::Parent => format!("{a} directly causes {b}."),
            RelationTemplate::Child => format!("{b} directly causes {a}."),
            RelationTemplate::Ancestor => format!("{a} causes something else which causes {b}."),
            RelationTemplate::Descendant => format!("{b} causes something else which causes {a}."),
            RelationTemplate::Collider => {
                format!("There exists at least one collider (i.e., common effect) of {a} and {b}.")
            }
            RelationTemplate::Confounder => {
                format!("There exists at least one confounder (i.e., common cause) of {a} and {b}.")
            }
        }
    }

    /// Inverse of [`Hypothesis::text`]. "X directly causes Y." reads as
    /// `parent(X, Y)`; the child and descendant forms are never produced by
    /// parsing because they render identically to parent/ancestor with the
    /// roles swapped.
    pub fn parse(text: &str, names: &[String]) -> Result<Self> {
        let t = text.split_whitespace().collect::<Vec<_>>().join(" ");
        let body = t
            .strip_suffix('.')
            .ok_or_else(|| Error::parse("hypothesis", "sentence must end with '.'"))?;
        let lookup = |n: &str| {
            names
                .iter()
                .position(|x| x == n)
                .ok_or_else(|| Error::parse("hypothesis", format!("unknown variable '{n}'")))
        };
        let two = |s: &str, sep: &str| -> Result<(usize, usize)> {
            let (a, b) = s
                .split_once(sep)
                .ok_or_else(|| Error::parse("hypothesis", format!("unrecognized hypothesis '{text}'")))?;
            Ok((lookup(a)?, lookup(b)?))
        };
        let (template, a, b) = if let Some(rest) =
            body.strip_prefix("There exists at least one collider (i.e., common effect) of ")
        {
            let (a, b) = two(rest, " and ")?;
            (RelationTemplate::Collider, a, b)
        } else if let Some(rest) =
            body.strip_prefix("There exists at least one confounder (i.e., common cause) of ")
        {
            let (a, b) = two(rest, " and ")?;
            (RelationTemplate::Confounder, a, b)
        } else if body.contains(" causes something else which causes ") {
            let (a, b) = two(body, " causes something else which causes ")?;
            (RelationTemplate::Ancestor, a, b)
        } else if body.contains(" directly causes ") {
            let (a, b) = two(body, " directly causes ")?;
            (RelationTemplate::Parent, a, b)
        } else {
            return Err(Error::parse("hypothesis", format!("unrecognized hypothesis '{text}'")));
        };
        Hypothesis::new(template, a, b).map_err(|e| Error::parse("hypothesis", e.to_string()))
    }
}

pub(crate) fn canonical_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |x| ((x + 1)..d).map(move |y| (x, y)))
}

/// All `k`-subsets of `items` in lexicographic order.
pub(crate) fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(pos) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            break;
        };
        idx[pos] += 1;
        for j in (pos + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Subsets of size 0..=max_k, by size then lexicographic.
pub(crate) fn subsets_upto(items: &[usize], max_k: usize) -> Vec<Vec<usize>> {
    (0..=max_k.min(items.len()))
        .flat_map(|k| combinations(items, k))
        .collect()
}

/// "A", "A and B", "A, B, and C".
fn name_list<'a>(names: impl Iterator<Item = &'a str>) -> String {
    let names: Vec<&str> = names.collect();
    match names.len() {
        0 => String::new(),
        1 => names[0].to_string(),
        2 => format!("{} and {}", names[0], names[1]),
        n => format!("{}, and {}", names[..n - 1].join(", "), names[n - 1]),
    }
}

fn parse_name_list(list: &str) -> std::result::Result<Vec<String>, String> {
    let list = list.trim();
    if list.is_empty() {
        return Err("empty variable list".into());
    }
    let names: Vec<&str> = if let Some((head, last)) = list.rsplit_once(", and ") {
        let mut v: Vec<&str> = head.split(", ").collect();
        v.push(last);
        v
    } else if let Some((a, b)) = list.split_once(" and ") {
        vec![a, b]
    } else {
        vec![list]
    };
    if names.len() == 2 && list.contains(',') {
        return Err(format!("malformed variable list '{list}'"));
    }
    names
        .into_iter()
        .map(|n| {
            if !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                Ok(n.to_string())
            } else {
                Err(format!("invalid variable name '{n}'"))
            }
        })
        .collect()
}

/// Splits on '.' or ':' followed by a space or the end of text.
fn split_sentences(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..bytes.len() {
        let c = bytes[i];
        if (c == b'.' || c == b':') && (i + 1 == bytes.len() || bytes[i + 1] == b' ') {
            let s = text[start..=i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}
