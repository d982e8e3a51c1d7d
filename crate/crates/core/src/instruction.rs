//! Goal specifications and the text forms they are written in.
//!
//! The mini-language is
//!
//! ```text
//! spec   := clause (";" clause)* [";"]
//! clause := IDENT "(" obj ("," obj)* ["|" obj] ")"
//! obj    := "o" INTEGER | "o_" NAME
//! ```
//!
//! Identifiers are case-insensitive and resolved against a [`PatternDb`].
//! `o_NAME` references need a scene to resolve against.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::patterns::{Family, PatternDb, PatternPrior};
use crate::scene::{ObjectId, Scene};

pub mod llm;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubGoal {
    pub pattern: String,
    pub objects: Vec<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<ObjectId>,
}

impl SubGoal {
    pub fn new(pattern: &str, objects: &[u32]) -> SubGoal {
        SubGoal {
            pattern: pattern.to_string(),
            objects: objects.iter().map(|&i| ObjectId(i)).collect(),
            anchor: None,
        }
    }

    pub fn anchored(pattern: &str, objects: &[u32], anchor: u32) -> SubGoal {
        SubGoal {
            anchor: Some(ObjectId(anchor)),
            ..SubGoal::new(pattern, objects)
        }
    }

    pub fn family(&self) -> Option<Family> {
        Family::from_name(&self.pattern)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub subgoals: Vec<SubGoal>,
}

impl GoalSpec {
    pub fn new(subgoals: Vec<SubGoal>) -> GoalSpec {
        GoalSpec { subgoals }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("goal serializes")
    }

    pub fn from_json(text: &str) -> Result<GoalSpec, GoalError> {
        serde_json::from_str(text).map_err(|e| GoalError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// All goal objects, in sub-goal order.
    pub fn objects(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.subgoals.iter().flat_map(|g| g.objects.iter().copied())
    }

    /// Index of the sub-goal that places `id`.
    pub fn subgoal_of(&self, id: ObjectId) -> Option<usize> {
        self.subgoals.iter().position(|g| g.objects.contains(&id))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GoalError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: {source}")]
    At {
        line: usize,
        column: usize,
        #[source]
        source: Box<GoalError>,
    },
    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("ambiguous object name `{0}`")]
    AmbiguousObject(String),
    #[error("goal has no sub-goals")]
    Empty,
    #[error("sub-goal {0} lists no objects")]
    NoObjects(usize),
    #[error("{0} appears more than once among goal objects")]
    DuplicateObject(ObjectId),
    #[error("sub-goal {0}: anchor is also one of its objects")]
    AnchorIsObject(usize),
    #[error("sub-goal {0}: spatial pattern needs exactly one anchor")]
    MissingAnchor(usize),
    #[error("sub-goal {0}: only spatial patterns take an anchor")]
    UnexpectedAnchor(usize),
    #[error("cyclic goal")]
    CyclicGoal,
}

impl GoalError {
    /// Line and column, when the error came from parsing text.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            GoalError::Syntax { line, column, .. } | GoalError::At { line, column, .. } => {
                Some((*line, *column))
            }
            _ => None,
        }
    }

    /// The error with any position wrapper removed.
    pub fn kind(&self) -> &GoalError {
        match self {
            GoalError::At { source, .. } => source.kind(),
            e => e,
        }
    }
}

/// Scores how well a query matches a prior; 0 means no match.
pub trait KeyScorer {
    fn score(&self, query: &str, prior: &PatternPrior) -> f64;
}

const STOPWORDS: &[&str] = &[
    "a", "all", "an", "and", "arrange", "at", "by", "form", "in", "into", "items", "make",
    "objects", "of", "on", "pattern", "place", "please", "put", "set", "shape", "the", "them",
    "to", "with",
];

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn normalize(text: &str) -> String {
    tokens(text).collect::<Vec<_>>().join(" ")
}

fn content_tokens(text: &str) -> BTreeSet<String> {
    tokens(text)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

/// Number of query tokens found among the prior's synonym tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenOverlap;

impl KeyScorer for TokenOverlap {
    fn score(&self, query: &str, prior: &PatternPrior) -> f64 {
        let vocab: BTreeSet<String> = prior.keys.iter().flat_map(|k| content_tokens(k)).collect();
        content_tokens(query).intersection(&vocab).count() as f64
    }
}

fn first_by_name<'a>(
    candidates: impl Iterator<Item = &'a PatternPrior>,
) -> Option<&'a PatternPrior> {
    candidates.min_by(|a, b| a.name.cmp(&b.name))
}

pub fn resolve_pattern_key<'a>(
    key: &str,
    db: &'a PatternDb,
) -> Result<&'a PatternPrior, GoalError> {
    resolve_pattern_key_with(key, db, &TokenOverlap)
}

/// Exact match on name or synonym, then the same after normalizing case and
/// punctuation, then the best `scorer` score. Ties go to the
/// lexicographically smallest name.
pub fn resolve_pattern_key_with<'a>(
    key: &str,
    db: &'a PatternDb,
    scorer: &dyn KeyScorer,
) -> Result<&'a PatternPrior, GoalError> {
    let priors = db.priors();
    if let Some(p) = priors.iter().find(|p| p.name == key) {
        return Ok(p);
    }
    if let Some(p) = first_by_name(priors.iter().filter(|p| p.keys.iter().any(|k| k == key))) {
        return Ok(p);
    }
    let norm = normalize(key);
    if !norm.is_empty() {
        let hit = |p: &&PatternPrior| {
            normalize(&p.name) == norm || p.keys.iter().any(|k| normalize(k) == norm)
        };
        if let Some(p) = first_by_name(priors.iter().filter(hit)) {
            return Ok(p);
        }
    }
    let mut best: Option<(f64, &PatternPrior)> = None;
    for p in priors {
        let s = scorer.score(key, p);
        let better = match best {
            None => s > 0.0,
            Some((bs, bp)) => s > bs || (s == bs && p.name < bp.name),
        };
        if better {
            best = Some((s, p));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| GoalError::UnknownPattern(key.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(String),
    LParen,
    RParen,
    Comma,
    Bar,
    Semi,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Int(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, GoalError> {
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let mut advance = |chars: &mut std::iter::Peekable<std::str::Chars<'_>>| {
            let c = chars.next().expect("peeked");
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
            c
        };
        let tok = match c {
            c if c.is_whitespace() => {
                advance(&mut chars);
                continue;
            }
            '(' | ')' | ',' | '|' | ';' => {
                advance(&mut chars);
                match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '|' => Tok::Bar,
                    _ => Tok::Semi,
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || matches!(c, '_' | ':' | '+' | '-') {
                        s.push(advance(&mut chars));
                    } else {
                        break;
                    }
                }
                Tok::Ident(s)
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() {
                        s.push(advance(&mut chars));
                    } else {
                        break;
                    }
                }
                Tok::Int(s)
            }
            other => {
                return Err(GoalError::Syntax {
                    line: l,
                    column: col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push(Spanned {
            tok,
            line: l,
            column: col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

/// Object reference as written, before name resolution.
#[derive(Debug, Clone, PartialEq)]
enum ObjRef {
    Id(u32),
    Name(String),
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    db: &'a PatternDb,
    scene: Option<&'a Scene>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn syntax(at: &Spanned, message: String) -> GoalError {
        GoalError::Syntax {
            line: at.line,
            column: at.column,
            message,
        }
    }

    fn located(at: &Spanned, e: GoalError) -> GoalError {
        GoalError::At {
            line: at.line,
            column: at.column,
            source: Box::new(e),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), GoalError> {
        let t = self.bump();
        if t.tok == want {
            Ok(())
        } else {
            Err(Self::syntax(
                &t,
                format!("expected {}, found {}", want.describe(), t.tok.describe()),
            ))
        }
    }

    fn spec(&mut self) -> Result<GoalSpec, GoalError> {
        let mut subgoals = vec![self.clause()?];
        loop {
            let t = self.bump();
            match &t.tok {
                Tok::Eof => break,
                Tok::Semi if self.peek().tok == Tok::Eof => break,
                Tok::Semi => subgoals.push(self.clause()?),
                other => {
                    return Err(Self::syntax(
                        &t,
                        format!("expected `;` or end of input, found {}", other.describe()),
                    ))
                }
            }
        }
        Ok(GoalSpec { subgoals })
    }

    fn clause(&mut self) -> Result<SubGoal, GoalError> {
        let head = self.bump();
        let Tok::Ident(key) = &head.tok else {
            return Err(Self::syntax(
                &head,
                format!("expected pattern name, found {}", head.tok.describe()),
            ));
        };
        let prior = resolve_pattern_key(&key.to_lowercase(), self.db)
            .map_err(|e| Self::located(&head, e))?;
        self.expect(Tok::LParen)?;
        let mut objects = vec![self.obj()?];
        let mut anchor = None;
        loop {
            let t = self.bump();
            match &t.tok {
                Tok::Comma => objects.push(self.obj()?),
                Tok::Bar => {
                    anchor = Some(self.obj()?);
                    self.expect(Tok::RParen)?;
                    break;
                }
                Tok::RParen => break,
                other => {
                    return Err(Self::syntax(
                        &t,
                        format!("expected `,`, `|` or `)`, found {}", other.describe()),
                    ))
                }
            }
        }
        Ok(SubGoal {
            pattern: prior.name.clone(),
            objects,
            anchor,
        })
    }

    fn obj(&mut self) -> Result<ObjectId, GoalError> {
        let t = self.bump();
        let parsed = match &t.tok {
            Tok::Ident(s) => {
                let lower = s.to_lowercase();
                match lower.strip_prefix('o') {
                    Some(rest) if rest.starts_with('_') && rest.len() > 1 => {
                        Some(ObjRef::Name(rest[1..].to_string()))
                    }
                    Some(rest) if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) => {
                        rest.parse().ok().map(ObjRef::Id)
                    }
                    _ => None,
                }
            }
            _ => None,
        };
        let Some(r) = parsed else {
            return Err(Self::syntax(
                &t,
                format!(
                    "expected object reference like `o3`, found {}",
                    t.tok.describe()
                ),
            ));
        };
        self.resolve_obj(r).map_err(|e| Self::located(&t, e))
    }

    fn resolve_obj(&self, r: ObjRef) -> Result<ObjectId, GoalError> {
        match (r, self.scene) {
            (ObjRef::Id(i), None) => Ok(ObjectId(i)),
            (ObjRef::Id(i), Some(scene)) => {
                let id = ObjectId(i);
                if scene.contains(id) {
                    Ok(id)
                } else {
                    Err(GoalError::UnknownObject(id.to_string()))
                }
            }
            (ObjRef::Name(n), None) => Err(GoalError::UnknownObject(format!("o_{n}"))),
            (ObjRef::Name(n), Some(scene)) => {
                let wanted = normalize(&n);
                let hits: Vec<ObjectId> = scene
                    .objects()
                    .iter()
                    .filter(|o| normalize(&o.name) == wanted)
                    .map(|o| o.id)
                    .collect();
                match hits.as_slice() {
                    [id] => Ok(*id),
                    [] => Err(GoalError::UnknownObject(format!("o_{n}"))),
                    _ => Err(GoalError::AmbiguousObject(format!("o_{n}"))),
                }
            }
        }
    }
}

fn parse(text: &str, db: &PatternDb, scene: Option<&Scene>) -> Result<GoalSpec, GoalError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        db,
        scene,
    };
    p.spec()
}

/// Parse goal text with numeric object references only.
pub fn parse_dsl(text: &str, db: &PatternDb) -> Result<GoalSpec, GoalError> {
    let goal = parse(text, db, None)?;
    validate_structure(&goal, db)?;
    Ok(goal)
}

/// Parse goal text, resolving `o_NAME` references and validating against
/// `scene`.
pub fn parse_dsl_for_scene(
    text: &str,
    db: &PatternDb,
    scene: &Scene,
) -> Result<GoalSpec, GoalError> {
    let goal = parse(text, db, Some(scene))?;
    validate(&goal, scene, db)?;
    Ok(goal)
}

/// Canonical text form; `parse_dsl` inverts it.
pub fn render_dsl(goal: &GoalSpec) -> String {
    goal.subgoals
        .iter()
        .map(|g| {
            let objs: Vec<String> = g.objects.iter().map(ObjectId::to_string).collect();
            match g.anchor {
                Some(a) => format!("{}({}|{a})", g.pattern, objs.join(",")),
                None => format!("{}({})", g.pattern, objs.join(",")),
            }
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Checks that need no scene: patterns known, object lists well formed,
/// anchors where required, no cyclic anchoring.
pub fn validate_structure(goal: &GoalSpec, db: &PatternDb) -> Result<(), GoalError> {
    if goal.subgoals.is_empty() {
        return Err(GoalError::Empty);
    }
    let mut seen = BTreeSet::new();
    for (i, g) in goal.subgoals.iter().enumerate() {
        let prior = db
            .get(&g.pattern)
            .ok_or_else(|| GoalError::UnknownPattern(g.pattern.clone()))?;
        if g.objects.is_empty() {
            return Err(GoalError::NoObjects(i));
        }
        for &id in &g.objects {
            if !seen.insert(id) {
                return Err(GoalError::DuplicateObject(id));
            }
        }
        match (prior.family.is_spatial(), g.anchor) {
            (true, None) => return Err(GoalError::MissingAnchor(i)),
            (false, Some(_)) => return Err(GoalError::UnexpectedAnchor(i)),
            (true, Some(a)) if g.objects.contains(&a) => return Err(GoalError::AnchorIsObject(i)),
            _ => {}
        }
    }
    if anchor_order(goal).is_none() {
        return Err(GoalError::CyclicGoal);
    }
    Ok(())
}

/// Structural checks plus every referenced object existing in `scene`.
pub fn validate(goal: &GoalSpec, scene: &Scene, db: &PatternDb) -> Result<(), GoalError> {
    validate_structure(goal, db)?;
    for g in &goal.subgoals {
        for id in g.objects.iter().chain(g.anchor.iter()) {
            if !scene.contains(*id) {
                return Err(GoalError::UnknownObject(id.to_string()));
            }
        }
    }
    Ok(())
}

/// Sub-goal indices with every anchor's own sub-goal before the sub-goals
/// anchored on it, or `None` when anchoring is cyclic.
pub fn anchor_order(goal: &GoalSpec) -> Option<Vec<usize>> {
    let n = goal.subgoals.len();
    let deps: Vec<Option<usize>> = goal
        .subgoals
        .iter()
        .map(|g| g.anchor.and_then(|a| goal.subgoal_of(a)))
        .collect();
    let mut indegree = vec![0usize; n];
    let mut dependents: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, d) in deps.iter().enumerate() {
        if let Some(d) = *d {
            indegree[i] += 1;
            dependents.entry(d).or_default().push(i);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).rev().collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &j in dependents.get(&i).into_iter().flatten() {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                ready.push(j);
            }
        }
    }
    (order.len() == n).then_some(order)
}
