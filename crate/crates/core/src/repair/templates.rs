//! Fix templates.
//!
//! Each template mutates one source line. Operator, constant and variable
//! templates splice replacement tokens into the line text at the byte spans
//! recorded by the parser, so everything outside the edited token is kept
//! verbatim.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::syntax::{parse_line, BinOp, LineSyntax, OpClass, ParsedLine};
use crate::lang::{LineKind, Program, SourceLine, SYNTHETIC_INDEX};

use super::PatchCandidate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    OpRelSwap,
    OpArithSwap,
    ConstShift,
    VarReplace,
    GuardInsert,
    CondNegate,
    StmtDelete,
}

impl TemplateId {
    /// The global order in which the repair loop tries templates.
    pub const ORDER: [TemplateId; 7] = [
        TemplateId::OpRelSwap,
        TemplateId::OpArithSwap,
        TemplateId::ConstShift,
        TemplateId::VarReplace,
        TemplateId::GuardInsert,
        TemplateId::CondNegate,
        TemplateId::StmtDelete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::OpRelSwap => "OpRelSwap",
            TemplateId::OpArithSwap => "OpArithSwap",
            TemplateId::ConstShift => "ConstShift",
            TemplateId::VarReplace => "VarReplace",
            TemplateId::GuardInsert => "GuardInsert",
            TemplateId::CondNegate => "CondNegate",
            TemplateId::StmtDelete => "StmtDelete",
        }
    }

    /// Whether the template can apply to a line of this kind at all.
    pub fn applies_to(self, kind: LineKind) -> bool {
        match self {
            TemplateId::OpRelSwap | TemplateId::OpArithSwap | TemplateId::ConstShift | TemplateId::VarReplace => {
                matches!(kind, LineKind::Assign | LineKind::Print | LineKind::IfOpen | LineKind::WhileOpen)
            }
            TemplateId::GuardInsert | TemplateId::StmtDelete => matches!(kind, LineKind::Assign | LineKind::Print),
            TemplateId::CondNegate => matches!(kind, LineKind::IfOpen | LineKind::WhileOpen),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ORDER.into_iter().find(|t| t.name() == s).ok_or_else(|| format!("unknown template `{s}`"))
    }
}

/// Template-specific material for one concrete mutation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Donor {
    /// Replace the `site`-th operator of the template's class.
    Operator { site: usize, op: BinOp },
    /// Replace the `site`-th literal.
    Constant { site: usize, value: i64 },
    /// Replace the `site`-th variable read.
    Variable { site: usize, name: String },
    /// Wrap the line in `if <var> != 0 { ... }`.
    Guard { var: String },
    /// Templates with a single fixed edit.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("{template} does not apply to line {line}")]
    Inapplicable { template: TemplateId, line: usize },
}

fn operator_class(template: TemplateId) -> Option<(OpClass, &'static [BinOp])> {
    match template {
        TemplateId::OpRelSwap => Some((OpClass::Relational, &BinOp::RELATIONAL)),
        TemplateId::OpArithSwap => Some((OpClass::Arithmetic, &BinOp::ARITHMETIC)),
        _ => None,
    }
}

fn parsed(line: &SourceLine) -> Option<ParsedLine> {
    parse_line(&line.text).ok()
}

/// Donor material for `template` at `location`, in deterministic order:
/// textual occurrence first, then the template's value order.
pub fn search_donor_code(program: &Program, location: usize, template: TemplateId) -> Vec<Donor> {
    let Some(line) = program.line(location) else { return Vec::new() };
    if !template.applies_to(line.kind) {
        return Vec::new();
    }
    let Some(p) = parsed(line) else { return Vec::new() };
    match template {
        TemplateId::OpRelSwap | TemplateId::OpArithSwap => {
            let (class, alternatives) = operator_class(template).expect("operator template");
            p.sites
                .operators
                .iter()
                .filter(|(_, op)| op.class() == class)
                .enumerate()
                .flat_map(|(site, (_, current))| {
                    alternatives.iter().filter(move |alt| *alt != current).map(move |&op| Donor::Operator { site, op })
                })
                .collect()
        }
        TemplateId::ConstShift => p
            .sites
            .literals
            .iter()
            .enumerate()
            .flat_map(|(site, &(_, c))| {
                let mut values: Vec<i64> =
                    [c.checked_sub(1), c.checked_add(1), Some(0), Some(1)].into_iter().flatten().collect();
                values.retain(|&v| v != c);
                values.sort_unstable();
                values.dedup();
                values.into_iter().map(move |value| Donor::Constant { site, value })
            })
            .collect(),
        TemplateId::VarReplace => {
            let universe = program.identifiers();
            p.sites
                .variables
                .iter()
                .enumerate()
                .flat_map(|(site, (_, current))| {
                    universe
                        .iter()
                        .filter(move |v| *v != current)
                        .map(move |name| Donor::Variable { site, name: name.clone() })
                })
                .collect()
        }
        TemplateId::GuardInsert => {
            let mut vars: Vec<String> = p.sites.divisors.clone();
            vars.extend(p.sites.variables.iter().map(|(_, v)| v.clone()));
            let mut out = Vec::new();
            for v in vars {
                let d = Donor::Guard { var: v };
                if !out.contains(&d) {
                    out.push(d);
                }
            }
            out
        }
        TemplateId::CondNegate | TemplateId::StmtDelete => vec![Donor::Unit],
    }
}

fn splice_text(text: &str, span: std::ops::Range<usize>, with: &str) -> String {
    format!("{}{}{}", &text[..span.start], with, &text[span.end..])
}

fn indent_of(text: &str) -> &str {
    &text[..text.len() - text.trim_start().len()]
}

/// The replacement lines for one donor, as (index, text) pairs.
fn edit_for(line: &SourceLine, p: &ParsedLine, template: TemplateId, donor: &Donor) -> Option<Vec<(usize, String)>> {
    let text = &line.text;
    let single = |t: String| Some(vec![(line.index, t)]);
    match (template, donor) {
        (TemplateId::OpRelSwap | TemplateId::OpArithSwap, Donor::Operator { site, op }) => {
            let (class, _) = operator_class(template)?;
            let (span, _) = p.sites.operators.iter().filter(|(_, o)| o.class() == class).nth(*site)?;
            single(splice_text(text, span.clone(), op.symbol()))
        }
        (TemplateId::ConstShift, Donor::Constant { site, value }) => {
            let (span, _) = p.sites.literals.get(*site)?;
            single(splice_text(text, span.clone(), &value.to_string()))
        }
        (TemplateId::VarReplace, Donor::Variable { site, name }) => {
            let (span, _) = p.sites.variables.get(*site)?;
            single(splice_text(text, span.clone(), name))
        }
        (TemplateId::GuardInsert, Donor::Guard { var }) => {
            let indent = indent_of(text);
            Some(vec![
                (SYNTHETIC_INDEX, format!("{indent}if {var} != 0 {{")),
                (line.index, text.clone()),
                (SYNTHETIC_INDEX, format!("{indent}}}")),
            ])
        }
        (TemplateId::CondNegate, Donor::Unit) => {
            let span = match &p.syntax {
                LineSyntax::If { cond_span, .. } | LineSyntax::While { cond_span, .. } => cond_span.clone(),
                _ => return None,
            };
            let negated = format!("!({})", &text[span.clone()]);
            single(splice_text(text, span, &negated))
        }
        (TemplateId::StmtDelete, Donor::Unit) => Some(Vec::new()),
        _ => None,
    }
}

fn describe(line: &SourceLine, replacement: &[(usize, String)]) -> String {
    let before = line.text.trim();
    if replacement.is_empty() {
        return format!("line {}: delete `{before}`", line.index);
    }
    let after: Vec<&str> = replacement.iter().map(|(_, t)| t.trim()).collect();
    format!("line {}: `{before}` -> `{}`", line.index, after.join(" / "))
}

/// One candidate per donor, each a fresh program. Donors that would produce a
/// program identical to an earlier candidate are skipped.
pub fn generate_candidates(
    program: &Program,
    location: usize,
    template: TemplateId,
    donors: &[Donor],
) -> Result<Vec<PatchCandidate>, TemplateError> {
    let inapplicable = TemplateError::Inapplicable { template, line: location };
    let line = program.line(location).ok_or(inapplicable.clone())?;
    let position = program.position_of(location).ok_or(inapplicable.clone())?;
    if !template.applies_to(line.kind) || donors.is_empty() {
        return Err(inapplicable);
    }
    let parsed_line = parsed(line).ok_or(inapplicable.clone())?;
    let mut out: Vec<PatchCandidate> = Vec::new();
    for donor in donors {
        let Some(replacement) = edit_for(line, &parsed_line, template, donor) else {
            continue;
        };
        if out.iter().any(|c| c.replacement == replacement) {
            continue;
        }
        let patched = match program.splice(position, &replacement) {
            Ok(p) => p,
            Err(e) => panic!("{template} produced an unparsable edit at line {location}: {e}"),
        };
        out.push(PatchCandidate {
            location,
            template,
            description: describe(line, &replacement),
            replacement,
            patched_program: patched,
        });
    }
    if out.is_empty() {
        return Err(inapplicable);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_replace_donors_exclude_the_replaced_name() {
        let p = Program::parse("x = in1\ny = x * 2\nprint y").unwrap();
        let d = search_donor_code(&p, 2, TemplateId::VarReplace);
        assert_eq!(
            d,
            [Donor::Variable { site: 0, name: "in1".into() }, Donor::Variable { site: 0, name: "y".into() },]
        );
    }

    #[test]
    fn relational_alternatives() {
        let p = Program::parse("if a < b {\n}").unwrap();
        let d = search_donor_code(&p, 1, TemplateId::OpRelSwap);
        let ops: Vec<_> = d
            .iter()
            .map(|d| match d {
                Donor::Operator { op, .. } => op.symbol(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(ops, ["<=", ">", ">=", "==", "!="]);
    }

    #[test]
    fn stmt_delete_has_a_unit_donor() {
        let p = Program::parse("x = 1\nprint x").unwrap();
        assert_eq!(search_donor_code(&p, 1, TemplateId::StmtDelete), [Donor::Unit]);
        assert_eq!(search_donor_code(&p, 2, TemplateId::StmtDelete), [Donor::Unit]);
    }

    #[test]
    fn const_shift_deduplicates() {
        let p = Program::parse("y = x + 2").unwrap();
        let donors = search_donor_code(&p, 1, TemplateId::ConstShift);
        assert_eq!(donors.len(), 3);
        let c = generate_candidates(&p, 1, TemplateId::ConstShift, &donors).unwrap();
        let texts: Vec<_> = c.iter().map(|c| c.replacement[0].1.as_str()).collect();
        assert_eq!(texts, ["y = x + 0", "y = x + 1", "y = x + 3"]);
    }

    #[test]
    fn cond_negate_wraps_the_condition() {
        let p = Program::parse("if a < b {\n}").unwrap();
        let c = generate_candidates(&p, 1, TemplateId::CondNegate, &[Donor::Unit]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].patched_program.lines()[0].text, "if !(a < b) {");
    }

    #[test]
    fn guard_insert_wraps_the_line_and_keeps_indices() {
        let p = Program::parse("d = in1\nx = 7\nq = x / d\nprint q").unwrap();
        let donors = search_donor_code(&p, 3, TemplateId::GuardInsert);
        assert_eq!(donors[0], Donor::Guard { var: "d".into() });
        let c = generate_candidates(&p, 3, TemplateId::GuardInsert, &donors).unwrap();
        let lines: Vec<_> = c[0].patched_program.lines().iter().map(|l| (l.index, l.text.as_str())).collect();
        assert_eq!(
            lines,
            [(1, "d = in1"), (2, "x = 7"), (0, "if d != 0 {"), (3, "q = x / d"), (0, "}"), (4, "print q")]
        );
    }

    #[test]
    fn inapplicable_templates() {
        let p = Program::parse("x = a + 1\nif x > 0 {\n}").unwrap();
        let e = generate_candidates(&p, 1, TemplateId::OpRelSwap, &search_donor_code(&p, 1, TemplateId::OpRelSwap));
        assert!(matches!(e, Err(TemplateError::Inapplicable { .. })));
        assert!(generate_candidates(&p, 1, TemplateId::CondNegate, &[Donor::Unit]).is_err());
        assert!(generate_candidates(&p, 2, TemplateId::StmtDelete, &[Donor::Unit]).is_err());
        assert!(generate_candidates(&p, 9, TemplateId::StmtDelete, &[Donor::Unit]).is_err());
    }

    #[test]
    fn negative_constants_still_parse() {
        let p = Program::parse("x = a-0\nprint x").unwrap();
        let donors = search_donor_code(&p, 1, TemplateId::ConstShift);
        let c = generate_candidates(&p, 1, TemplateId::ConstShift, &donors).unwrap();
        assert_eq!(c[0].replacement[0].1, "x = a--1");
    }
}
