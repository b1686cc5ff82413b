use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::syntax::{parse_line, Expr, LineSyntax, ParsedLine};

/// Index carried by lines that do not come from the user's source file:
/// instrumentation probes and lines added by patches.
pub const SYNTHETIC_INDEX: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineKind {
    Assign,
    IfOpen,
    Else,
    BlockClose,
    WhileOpen,
    Print,
    Observe,
    Comment,
    Blank,
}

impl LineKind {
    /// Lines that execute as statements and therefore show up in coverage.
    pub fn is_executable(self) -> bool {
        matches!(self, LineKind::Assign | LineKind::IfOpen | LineKind::WhileOpen | LineKind::Print | LineKind::Observe)
    }

    /// Statements with a side effect on the environment or the output.
    pub fn is_effectful(self) -> bool {
        matches!(self, LineKind::Assign | LineKind::Print)
    }

    fn of(syntax: &LineSyntax) -> LineKind {
        match syntax {
            LineSyntax::Blank => LineKind::Blank,
            LineSyntax::Comment => LineKind::Comment,
            LineSyntax::Close => LineKind::BlockClose,
            LineSyntax::Else => LineKind::Else,
            LineSyntax::If { .. } => LineKind::IfOpen,
            LineSyntax::While { .. } => LineKind::WhileOpen,
            LineSyntax::Assign { .. } => LineKind::Assign,
            LineSyntax::Print { .. } => LineKind::Print,
            LineSyntax::Observe { .. } => LineKind::Observe,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLine {
    pub index: usize,
    pub text: String,
    pub kind: LineKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}:{line}: {message}")]
pub struct ParseError {
    pub path: String,
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Stmt {
    Assign { line: usize, target: String, value: Expr },
    Print { line: usize, value: Expr },
    Observe { at: usize, var: String },
    If { line: usize, cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    While { line: usize, cond: Expr, body: Vec<Stmt> },
}

/// A parsed MiniLang program.
///
/// Lines keep the index they had in the file they were read from. Programs
/// derived by deleting lines keep the surviving indices, so slices, coverage
/// and suspicious lists all share one coordinate system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    path: String,
    lines: Vec<SourceLine>,
    body: Vec<Stmt>,
    mirror_prints: bool,
}

enum Frame {
    If { line: usize, cond: Expr, then_body: Vec<Stmt>, else_body: Option<Vec<Stmt>> },
    While { line: usize, cond: Expr, body: Vec<Stmt> },
}

impl Frame {
    fn opener(&self) -> usize {
        match self {
            Frame::If { line, .. } | Frame::While { line, .. } => *line,
        }
    }

    fn current(&mut self) -> &mut Vec<Stmt> {
        match self {
            Frame::If { then_body, else_body: None, .. } => then_body,
            Frame::If { else_body: Some(e), .. } => e,
            Frame::While { body, .. } => body,
        }
    }

    fn close(self) -> Stmt {
        match self {
            Frame::If { line, cond, then_body, else_body } => {
                Stmt::If { line, cond, then_body, else_body: else_body.unwrap_or_default() }
            }
            Frame::While { line, cond, body } => Stmt::While { line, cond, body },
        }
    }
}

impl Program {
    /// Parses user source. Lines are numbered from 1. `observe` probes are
    /// reserved for instrumentation and rejected here.
    pub fn parse(source: &str) -> Result<Program, ParseError> {
        Program::parse_named("<input>", source)
    }

    pub fn parse_named(path: &str, source: &str) -> Result<Program, ParseError> {
        let mut lines = Vec::new();
        for (i, text) in source.lines().enumerate() {
            let index = i + 1;
            let parsed =
                parse_line(text).map_err(|message| ParseError { path: path.to_string(), line: index, message })?;
            if matches!(parsed.syntax, LineSyntax::Observe { .. }) {
                return Err(ParseError {
                    path: path.to_string(),
                    line: index,
                    message: "`observe` is reserved for instrumentation".into(),
                });
            }
            lines.push(SourceLine { index, text: text.to_string(), kind: LineKind::of(&parsed.syntax) });
        }
        Program::from_lines(path, lines)
    }

    fn from_lines(path: &str, mut lines: Vec<SourceLine>) -> Result<Program, ParseError> {
        let err = |line: usize, message: String| ParseError { path: path.to_string(), line, message };
        let mut stack: Vec<Frame> = Vec::new();
        let mut top: Vec<Stmt> = Vec::new();
        let next_index: Vec<usize> =
            (0..lines.len()).map(|pos| lines.get(pos + 1).map_or(SYNTHETIC_INDEX, |l| l.index)).collect();
        for (pos, line) in lines.iter_mut().enumerate() {
            let ParsedLine { syntax, .. } = parse_line(&line.text).map_err(|m| err(line.index, m))?;
            line.kind = LineKind::of(&syntax);
            let idx = line.index;
            let stmt = match syntax {
                LineSyntax::Blank | LineSyntax::Comment => None,
                LineSyntax::Assign { target, value } => Some(Stmt::Assign { line: idx, target, value }),
                LineSyntax::Print { value } => Some(Stmt::Print { line: idx, value }),
                LineSyntax::Observe { var } => Some(Stmt::Observe { at: next_index[pos], var }),
                LineSyntax::If { cond, .. } => {
                    stack.push(Frame::If { line: idx, cond, then_body: Vec::new(), else_body: None });
                    None
                }
                LineSyntax::While { cond, .. } => {
                    stack.push(Frame::While { line: idx, cond, body: Vec::new() });
                    None
                }
                LineSyntax::Else => match stack.last_mut() {
                    Some(Frame::If { else_body: e @ None, .. }) => {
                        *e = Some(Vec::new());
                        None
                    }
                    _ => return Err(err(idx, "`else` without a matching `if`".into())),
                },
                LineSyntax::Close => match stack.pop() {
                    Some(frame) => Some(frame.close()),
                    None => return Err(err(idx, "unbalanced block: `}` without an open block".into())),
                },
            };
            if let Some(stmt) = stmt {
                match stack.last_mut() {
                    Some(frame) => frame.current().push(stmt),
                    None => top.push(stmt),
                }
            }
        }
        if let Some(frame) = stack.last() {
            return Err(err(frame.opener(), "unbalanced block: opened here but never closed".into()));
        }
        Ok(Program { path: path.to_string(), lines, body: top, mirror_prints: false })
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    pub fn with_path(mut self, path: &str) -> Program {
        self.path = path.to_string();
        self
    }

    pub fn lines(&self) -> &[SourceLine] {
        &self.lines
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub(crate) fn body(&self) -> &[Stmt] {
        &self.body
    }

    pub fn mirrors_prints(&self) -> bool {
        self.mirror_prints
    }

    pub(crate) fn set_mirror_prints(&mut self, on: bool) {
        self.mirror_prints = on;
    }

    /// The line with the given original index. Synthetic lines are never
    /// returned.
    pub fn line(&self, index: usize) -> Option<&SourceLine> {
        if index == SYNTHETIC_INDEX {
            return None;
        }
        self.lines.iter().find(|l| l.index == index)
    }

    pub fn position_of(&self, index: usize) -> Option<usize> {
        if index == SYNTHETIC_INDEX {
            return None;
        }
        self.lines.iter().position(|l| l.index == index)
    }

    /// Original indices of every non-synthetic line.
    pub fn indices(&self) -> BTreeSet<usize> {
        self.lines.iter().map(|l| l.index).filter(|&i| i != SYNTHETIC_INDEX).collect()
    }

    pub fn executable_indices(&self) -> BTreeSet<usize> {
        self.lines.iter().filter(|l| l.kind.is_executable() && l.index != SYNTHETIC_INDEX).map(|l| l.index).collect()
    }

    /// Removes every non-synthetic line whose index is in `deleted`.
    pub fn without(&self, deleted: &BTreeSet<usize>) -> Result<Program, ParseError> {
        self.retain(|_, l| l.index == SYNTHETIC_INDEX || !deleted.contains(&l.index))
    }

    /// Keeps the lines for which `keep(position, line)` holds and re-checks
    /// the block structure.
    pub fn retain(&self, mut keep: impl FnMut(usize, &SourceLine) -> bool) -> Result<Program, ParseError> {
        let lines: Vec<SourceLine> =
            self.lines.iter().enumerate().filter(|(pos, l)| keep(*pos, l)).map(|(_, l)| l.clone()).collect();
        let mut p = Program::from_lines(&self.path, lines)?;
        p.mirror_prints = self.mirror_prints;
        Ok(p)
    }

    /// Replaces the line at `position` with `replacement` (index, text) pairs.
    pub fn splice(&self, position: usize, replacement: &[(usize, String)]) -> Result<Program, ParseError> {
        let mut lines: Vec<(usize, String)> = self.lines.iter().map(|l| (l.index, l.text.clone())).collect();
        lines.splice(position..=position, replacement.iter().cloned());
        let mut p = Program::from_indexed(&self.path, lines)?;
        p.mirror_prints = self.mirror_prints;
        Ok(p)
    }

    /// Inserts a line before `position`.
    pub(crate) fn insert(&self, position: usize, line: (usize, String)) -> Result<Program, ParseError> {
        let mut lines: Vec<(usize, String)> = self.lines.iter().map(|l| (l.index, l.text.clone())).collect();
        lines.insert(position, line);
        let mut p = Program::from_indexed(&self.path, lines)?;
        p.mirror_prints = self.mirror_prints;
        Ok(p)
    }

    /// Builds a program from already-indexed lines, re-deriving each line's
    /// kind and checking block structure. Accepts `observe` probes.
    pub fn from_indexed(path: &str, lines: Vec<(usize, String)>) -> Result<Program, ParseError> {
        let lines = lines.into_iter().map(|(index, text)| SourceLine { index, text, kind: LineKind::Blank }).collect();
        Program::from_lines(path, lines)
    }

    /// Every identifier the program mentions (assigned, read, or bound as an
    /// input), deduplicated in order of first occurrence.
    pub fn identifiers(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for line in &self.lines {
            let Ok(parsed) = parse_line(&line.text) else { continue };
            let mut names = Vec::new();
            match &parsed.syntax {
                LineSyntax::Assign { target, .. } => {
                    names.push(target.clone());
                    names.extend(parsed.sites.variables.iter().map(|(_, v)| v.clone()));
                }
                LineSyntax::Observe { .. } => {}
                _ => names.extend(parsed.sites.variables.iter().map(|(_, v)| v.clone())),
            }
            for n in names {
                if !seen.contains(&n) {
                    seen.push(n);
                }
            }
        }
        seen
    }

    /// Source text, one line per entry.
    pub fn source(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&l.text);
            s.push('\n');
        }
        s
    }

    /// Source text in which every line sits on the row named by its original
    /// index; rows of deleted lines are left blank. Re-parsing the result
    /// reproduces the same indices. Synthetic lines cannot be placed and are
    /// rejected.
    pub fn source_preserving_indices(&self) -> Option<String> {
        let mut rows = Vec::<&str>::new();
        for l in &self.lines {
            if l.index == SYNTHETIC_INDEX || l.index <= rows.len() {
                return None;
            }
            while rows.len() + 1 < l.index {
                rows.push("");
            }
            rows.push(&l.text);
        }
        let mut s = rows.join("\n");
        s.push('\n');
        Some(s)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source())
    }
}
