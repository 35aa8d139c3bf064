//! Parsing of perception-structured model responses.
//!
//! Every response goes through two independent tracks:
//!
//! * a **strict** conformance check that produces `format_ok` plus a list of
//!   [`Violation`]s, and
//! * a **lenient** extraction of the `<q1>`..`<q4>` answers that recovers
//!   whatever is recoverable from slightly malformed output.
//!
//! The format reward consumes the first, the answer rewards the second.
//! Parsing is total: any input yields a [`StructuredResponse`].

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Letter;
use crate::error::{Error, Result};
use crate::interval::{IntervalSet, CLIP_DURATION_SEC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grammar {
    /// `<think>` then `<answer>`.
    Benchmark,
    /// `<global_perception>`, `<segment_perception>`, `<think>`, `<answer>`.
    #[default]
    Structured,
}

impl Grammar {
    pub fn sections(&self) -> &'static [Section] {
        match self {
            Grammar::Benchmark => &[Section::Think, Section::Answer],
            Grammar::Structured => &[
                Section::GlobalPerception,
                Section::SegmentPerception,
                Section::Think,
                Section::Answer,
            ],
        }
    }
}

impl std::str::FromStr for Grammar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "benchmark" => Ok(Grammar::Benchmark),
            "structured" => Ok(Grammar::Structured),
            other => Err(Error::Schema(format!("unknown grammar `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    GlobalPerception,
    SegmentPerception,
    Think,
    Answer,
}

impl Section {
    pub fn tag(&self) -> &'static str {
        match self {
            Section::GlobalPerception => "global_perception",
            Section::SegmentPerception => "segment_perception",
            Section::Think => "think",
            Section::Answer => "answer",
        }
    }

    fn word_limit(&self) -> Option<usize> {
        match self {
            Section::GlobalPerception | Section::SegmentPerception => Some(80),
            Section::Think => Some(60),
            Section::Answer => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCode {
    MissingSection,
    SectionOutOfOrder,
    DuplicateSection,
    UnclosedTag,
    TrailingTextAfterAnswer,
    NonQtagInsideAnswer,
    UnparsableField,
    MarkdownFence,
    /// Non-whitespace text before the first section or between sections.
    TextBetweenSections,
    /// Input exceeded the length cap and was truncated before parsing.
    InputTooLong,
}

impl ViolationCode {
    pub const ALL: [ViolationCode; 10] = [
        ViolationCode::MissingSection,
        ViolationCode::SectionOutOfOrder,
        ViolationCode::DuplicateSection,
        ViolationCode::UnclosedTag,
        ViolationCode::TrailingTextAfterAnswer,
        ViolationCode::NonQtagInsideAnswer,
        ViolationCode::UnparsableField,
        ViolationCode::MarkdownFence,
        ViolationCode::TextBetweenSections,
        ViolationCode::InputTooLong,
    ];
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Character offset into the (possibly truncated) input.
    pub location: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerField {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl AnswerField {
    pub const ALL: [AnswerField; 4] = [
        AnswerField::Q1,
        AnswerField::Q2,
        AnswerField::Q3,
        AnswerField::Q4,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            AnswerField::Q1 => "q1",
            AnswerField::Q2 => "q2",
            AnswerField::Q3 => "q3",
            AnswerField::Q4 => "q4",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: AnswerField,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerBlock {
    pub q1: Option<Letter>,
    pub q2: Option<Letter>,
    pub q3: Option<Letter>,
    pub q4: Option<IntervalSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parse_errors: Vec<FieldError>,
}

impl AnswerBlock {
    pub fn is_complete(&self) -> bool {
        self.q1.is_some() && self.q2.is_some() && self.q3.is_some() && self.q4.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredResponse {
    pub grammar: Grammar,
    pub global_perception: Option<String>,
    pub segment_perception: Option<String>,
    pub think: Option<String>,
    pub answer: AnswerBlock,
    pub format_ok: bool,
    pub violations: Vec<Violation>,
    /// Advisory findings (word limits, clamped intervals) that never affect `format_ok`.
    pub warnings: Vec<String>,
}

impl StructuredResponse {
    pub fn has_violation(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    /// Inputs longer than this many bytes are truncated.
    pub max_len: usize,
    /// Clip duration that q4 intervals are clamped to.
    pub duration_sec: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_len: 64 * 1024,
            duration_sec: CLIP_DURATION_SEC,
        }
    }
}

// ---------------------------------------------------------------------------
// Interval field

/// Parses the inner text of a `<q4>` tag: `[]`, `[s,e]` or `[[s,e], ...]`.
/// Out-of-range bounds are clamped to `[0, duration]`; the flag reports it.
pub fn parse_intervals(text: &str, duration: f64) -> Result<(IntervalSet, bool)> {
    let mut p = ListParser {
        s: text.as_bytes(),
        i: 0,
    };
    let value = p.value(0)?;
    p.ws();
    if p.i != p.s.len() {
        return Err(Error::Interval(format!(
            "unexpected text after list at byte {}",
            p.i
        )));
    }
    let pairs: Vec<[f64; 2]> = match value {
        ListValue::List(items) if items.is_empty() => Vec::new(),
        ListValue::List(items) if items.iter().all(|v| matches!(v, ListValue::Num(_))) => {
            vec![pair_of(&items)?]
        }
        ListValue::List(items) => items
            .iter()
            .map(|v| match v {
                ListValue::List(inner) => pair_of(inner),
                ListValue::Num(_) => Err(Error::Interval("mixed numbers and lists".into())),
            })
            .collect::<Result<_>>()?,
        ListValue::Num(_) => return Err(Error::Interval("expected a bracketed list".into())),
    };
    IntervalSet::from_pairs_clamped(&pairs, duration)
}

fn pair_of(items: &[ListValue]) -> Result<[f64; 2]> {
    match items {
        [ListValue::Num(s), ListValue::Num(e)] => Ok([*s, *e]),
        _ => Err(Error::Interval(format!(
            "an interval needs exactly two numbers, got {} item(s)",
            items.len()
        ))),
    }
}

enum ListValue {
    Num(f64),
    List(Vec<ListValue>),
}

struct ListParser<'a> {
    s: &'a [u8],
    i: usize,
}

impl ListParser<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn value(&mut self, depth: usize) -> Result<ListValue> {
        self.ws();
        match self.s.get(self.i) {
            Some(b'[') => {
                if depth >= 2 {
                    return Err(Error::Interval("lists nested too deeply".into()));
                }
                self.i += 1;
                let mut items = Vec::new();
                self.ws();
                if self.s.get(self.i) == Some(&b']') {
                    self.i += 1;
                    return Ok(ListValue::List(items));
                }
                loop {
                    items.push(self.value(depth + 1)?);
                    self.ws();
                    match self.s.get(self.i) {
                        Some(b',') => self.i += 1,
                        Some(b']') => {
                            self.i += 1;
                            return Ok(ListValue::List(items));
                        }
                        _ => {
                            return Err(Error::Interval(format!(
                                "malformed list at byte {}",
                                self.i
                            )))
                        }
                    }
                }
            }
            Some(c) if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.') => {
                let start = self.i;
                while self.i < self.s.len()
                    && matches!(
                        self.s[self.i],
                        b'0'..=b'9' | b'.' | b'-' | b'+' | b'e' | b'E'
                    )
                {
                    self.i += 1;
                }
                let tok = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
                match tok.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(ListValue::Num(v)),
                    _ => Err(Error::Interval(format!("`{tok}` is not a number"))),
                }
            }
            Some(_) => Err(Error::Interval(format!(
                "unexpected token at byte {}",
                self.i
            ))),
            None => Err(Error::Interval("unexpected end of input".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// Letters

fn strict_letter(s: &str) -> Option<Letter> {
    s.parse().ok()
}

/// Accepts `A`, `(A)`, `A.`, `A)` and `A) text`, any case.
fn lenient_letter(s: &str) -> Option<Letter> {
    let t = s.trim();
    let t = t.strip_prefix('(').unwrap_or(t);
    let mut chars = t.chars();
    let letter = Letter::new(chars.next()?)?;
    let rest = chars.as_str();
    if rest.is_empty() {
        return Some(letter);
    }
    let after = rest.strip_prefix([')', '.', ':'])?;
    (after.is_empty() || after.starts_with(char::is_whitespace)).then_some(letter)
}

// ---------------------------------------------------------------------------
// Parsing

struct Input<'a> {
    text: &'a str,
}

impl<'a> Input<'a> {
    fn char_offset(&self, byte: usize) -> usize {
        self.text[..byte].chars().count()
    }

    fn find_all(&self, pat: &str) -> Vec<usize> {
        self.text.match_indices(pat).map(|(i, _)| i).collect()
    }
}

fn truncate_at_boundary(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

/// Parses a raw response under `grammar` with default options.
pub fn parse(raw: &str, grammar: Grammar) -> StructuredResponse {
    parse_with(raw, grammar, &ParseOptions::default())
}

pub fn parse_with(raw: &str, grammar: Grammar, opts: &ParseOptions) -> StructuredResponse {
    let text = truncate_at_boundary(raw, opts.max_len);
    let input = Input { text };
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    if text.len() < raw.len() {
        violations.push(Violation {
            code: ViolationCode::InputTooLong,
            location: input.char_offset(text.len()),
            detail: format!("input of {} bytes truncated to {}", raw.len(), text.len()),
        });
    }

    strict_check(&input, grammar, opts, &mut violations);

    let content = |s: Section| section_content(&input, s, grammar);
    let (gp, sp) = match grammar {
        Grammar::Structured => (
            content(Section::GlobalPerception),
            content(Section::SegmentPerception),
        ),
        Grammar::Benchmark => (None, None),
    };
    let think = content(Section::Think);
    let answer = lenient_answer(&input, opts, &mut warnings);

    if grammar == Grammar::Structured {
        for (section, body) in [
            (Section::GlobalPerception, &gp),
            (Section::SegmentPerception, &sp),
            (Section::Think, &think),
        ] {
            if let (Some(limit), Some(body)) = (section.word_limit(), body) {
                let words = body.split_whitespace().count();
                if words > limit {
                    warnings.push(format!(
                        "<{}> has {words} words (limit {limit})",
                        section.tag()
                    ));
                }
            }
        }
    }

    violations.sort_by_key(|v| v.location);
    StructuredResponse {
        grammar,
        global_perception: gp,
        segment_perception: sp,
        think,
        answer,
        format_ok: violations.is_empty(),
        violations,
        warnings,
    }
}

/// Parses many responses in parallel; output order matches input order.
pub fn parse_batch<S: AsRef<str> + Sync>(raws: &[S], grammar: Grammar) -> Vec<StructuredResponse> {
    raws.par_iter()
        .map(|r| parse(r.as_ref(), grammar))
        .collect()
}

struct SectionTags {
    section: Section,
    opens: Vec<usize>,
    closes: Vec<usize>,
}

fn open_tag(name: &str) -> String {
    format!("<{name}>")
}

fn close_tag(name: &str) -> String {
    format!("</{name}>")
}

fn strict_check(
    input: &Input<'_>,
    grammar: Grammar,
    opts: &ParseOptions,
    out: &mut Vec<Violation>,
) {
    let text = input.text;
    let mut push = |code, byte: usize, detail: String| {
        out.push(Violation {
            code,
            location: input.char_offset(byte),
            detail,
        })
    };

    if let Some(pos) = text.find("```") {
        push(
            ViolationCode::MarkdownFence,
            pos,
            "markdown fence in response".into(),
        );
    }

    let tags: Vec<SectionTags> = grammar
        .sections()
        .iter()
        .map(|&s| SectionTags {
            section: s,
            opens: input.find_all(&open_tag(s.tag())),
            closes: input.find_all(&close_tag(s.tag())),
        })
        .collect();

    let mut well_formed = true;
    for t in &tags {
        let name = t.section.tag();
        match (t.opens.len(), t.closes.len()) {
            (0, 0) => {
                push(
                    ViolationCode::MissingSection,
                    text.len(),
                    format!("<{name}> is missing"),
                );
                well_formed = false;
            }
            (1, 1) => {}
            (o, c) => {
                if o > 1 || c > 1 {
                    let at = if o > 1 { t.opens[1] } else { t.closes[1] };
                    push(
                        ViolationCode::DuplicateSection,
                        at,
                        format!("<{name}> appears more than once"),
                    );
                }
                if o != c {
                    let at = t.opens.first().or(t.closes.first()).copied().unwrap_or(0);
                    push(
                        ViolationCode::UnclosedTag,
                        at,
                        format!("<{name}> has {o} opening and {c} closing tag(s)"),
                    );
                }
                well_formed = false;
            }
        }
    }
    if !well_formed {
        return;
    }

    // exactly one open/close per section from here on
    let spans: Vec<(Section, usize, usize)> = tags
        .iter()
        .map(|t| (t.section, t.opens[0], t.closes[0]))
        .collect();
    for &(s, open, close) in &spans {
        if close < open {
            push(
                ViolationCode::UnclosedTag,
                open,
                format!("</{}> precedes <{}>", s.tag(), s.tag()),
            );
            return;
        }
    }
    let mut by_open = spans.clone();
    by_open.sort_by_key(|&(_, open, _)| open);
    if by_open.iter().map(|x| x.0).ne(spans.iter().map(|x| x.0)) {
        let (s, open, _) = by_open
            .iter()
            .zip(&spans)
            .find(|(a, b)| a.0 != b.0)
            .map(|(a, _)| *a)
            .expect("orders differ");
        push(
            ViolationCode::SectionOutOfOrder,
            open,
            format!("<{}> is out of order", s.tag()),
        );
        return;
    }
    for pair in spans.windows(2) {
        let (prev, _, prev_close) = pair[0];
        let (next, next_open, _) = pair[1];
        if prev_close > next_open {
            push(
                ViolationCode::UnclosedTag,
                next_open,
                format!("<{}> opens before </{}>", next.tag(), prev.tag()),
            );
            return;
        }
    }

    let first_open = spans[0].1;
    if !text[..first_open].trim().is_empty() {
        push(
            ViolationCode::TextBetweenSections,
            0,
            "text before the first section".into(),
        );
    }
    for pair in spans.windows(2) {
        let (prev, _, prev_close) = pair[0];
        let gap_start = prev_close + close_tag(prev.tag()).len();
        let gap = &text[gap_start..pair[1].1];
        if !gap.trim().is_empty() {
            push(
                ViolationCode::TextBetweenSections,
                gap_start,
                format!("text between </{}> and <{}>", prev.tag(), pair[1].0.tag()),
            );
        }
    }

    let (_, a_open, a_close) = *spans.last().expect("answer section");
    let tail_start = a_close + close_tag("answer").len();
    if !text[tail_start..].trim().is_empty() {
        push(
            ViolationCode::TrailingTextAfterAnswer,
            tail_start,
            "text after </answer>".into(),
        );
    }

    let body_start = a_open + open_tag("answer").len();
    strict_answer_body(input, body_start, a_close, opts, out);
}

/// Scans `<answer>` content: only whitespace-separated `<qN>..</qN>` tags.
fn strict_answer_body(
    input: &Input<'_>,
    start: usize,
    end: usize,
    opts: &ParseOptions,
    out: &mut Vec<Violation>,
) {
    let text = input.text;
    let mut push = |code, byte: usize, detail: String| {
        out.push(Violation {
            code,
            location: input.char_offset(byte),
            detail,
        })
    };
    let mut seen: [usize; 4] = [0; 4];
    let mut i = start;
    loop {
        while i < end && text.as_bytes()[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= end {
            break;
        }
        let rest = &text[i..end];
        let field = AnswerField::ALL
            .into_iter()
            .find(|f| rest.starts_with(&open_tag(f.tag())));
        let Some(field) = field else {
            push(
                ViolationCode::NonQtagInsideAnswer,
                i,
                "only <q1>..<q4> tags are allowed inside <answer>".into(),
            );
            return;
        };
        let inner_start = i + open_tag(field.tag()).len();
        let close = close_tag(field.tag());
        let Some(rel) = text[inner_start..end].find(&close) else {
            push(
                ViolationCode::UnclosedTag,
                i,
                format!("<{}> is not closed", field.tag()),
            );
            return;
        };
        let inner = &text[inner_start..inner_start + rel];
        seen[field as usize] += 1;
        if seen[field as usize] == 2 {
            push(
                ViolationCode::DuplicateSection,
                i,
                format!("<{}> appears more than once", field.tag()),
            );
        }
        let ok = match field {
            AnswerField::Q1 => {
                strict_letter(inner).is_some_and(|l| matches!(l.as_char(), 'A' | 'B'))
            }
            AnswerField::Q2 | AnswerField::Q3 => strict_letter(inner).is_some(),
            AnswerField::Q4 => parse_intervals(inner, opts.duration_sec).is_ok(),
        };
        if !ok {
            push(
                ViolationCode::UnparsableField,
                inner_start,
                format!(
                    "<{}> content `{}` is not valid",
                    field.tag(),
                    clip_text(inner)
                ),
            );
        }
        i = inner_start + rel + close.len();
    }
    for f in AnswerField::ALL {
        if seen[f as usize] == 0 {
            push(
                ViolationCode::MissingSection,
                end,
                format!("<{}> is missing from <answer>", f.tag()),
            );
        }
    }
}

fn clip_text(s: &str) -> String {
    let t = s.trim();
    if t.chars().count() > 40 {
        format!("{}...", t.chars().take(40).collect::<String>())
    } else {
        t.to_owned()
    }
}

/// Best-effort content of a section: first opening tag up to the first
/// matching closing tag, else up to the next known opening tag or the end.
fn section_content(input: &Input<'_>, section: Section, grammar: Grammar) -> Option<String> {
    let text = input.text;
    let open = open_tag(section.tag());
    let start = text.find(&open)? + open.len();
    let rest = &text[start..];
    let end = match rest.find(&close_tag(section.tag())) {
        Some(e) => e,
        None => grammar
            .sections()
            .iter()
            .filter_map(|s| rest.find(&open_tag(s.tag())))
            .min()
            .unwrap_or(rest.len()),
    };
    Some(rest[..end].trim().to_owned())
}

fn lenient_answer(
    input: &Input<'_>,
    opts: &ParseOptions,
    warnings: &mut Vec<String>,
) -> AnswerBlock {
    let text = input.text;
    let region = match text.rfind("<answer>") {
        Some(p) => {
            let body = &text[p + "<answer>".len()..];
            &body[..body.find("</answer>").unwrap_or(body.len())]
        }
        None => text,
    };

    let mut block = AnswerBlock::default();
    for field in AnswerField::ALL {
        let open = open_tag(field.tag());
        let Some(p) = region.find(&open) else {
            block.parse_errors.push(FieldError {
                field,
                message: "missing".into(),
            });
            continue;
        };
        let after = &region[p + open.len()..];
        let Some(e) = after.find(&close_tag(field.tag())) else {
            block.parse_errors.push(FieldError {
                field,
                message: "not closed".into(),
            });
            continue;
        };
        let inner = &after[..e];
        let bad = |msg: String| FieldError {
            field,
            message: msg,
        };
        match field {
            AnswerField::Q1 => match lenient_letter(inner) {
                Some(l) if matches!(l.as_char(), 'A' | 'B') => block.q1 = Some(l),
                _ => block
                    .parse_errors
                    .push(bad(format!("`{}` is not A or B", clip_text(inner)))),
            },
            AnswerField::Q2 | AnswerField::Q3 => match lenient_letter(inner) {
                Some(l) => {
                    if field == AnswerField::Q2 {
                        block.q2 = Some(l)
                    } else {
                        block.q3 = Some(l)
                    }
                }
                None => block.parse_errors.push(bad(format!(
                    "`{}` is not an option letter",
                    clip_text(inner)
                ))),
            },
            AnswerField::Q4 => match parse_intervals(inner, opts.duration_sec) {
                Ok((set, clamped)) => {
                    if clamped {
                        warnings.push(format!(
                            "<q4> `{}` clamped to [0, {}]",
                            clip_text(inner),
                            opts.duration_sec
                        ));
                    }
                    block.q4 = Some(set);
                }
                Err(e) => block.parse_errors.push(bad(e.to_string())),
            },
        }
    }
    block
}

// ---------------------------------------------------------------------------
// Rendering

fn render_q4(set: &IntervalSet, grammar: Grammar) -> String {
    match (grammar, set.as_slice()) {
        (_, []) => "[]".to_owned(),
        (Grammar::Structured, [iv]) => format!("[{},{}]", iv.start, iv.end),
        _ => set.to_string(),
    }
}

/// Canonical serialization of a conformant response; re-parses to an equal value.
pub fn render_canonical(resp: &StructuredResponse) -> Result<String> {
    if !resp.format_ok {
        return Err(Error::Contract(
            "render_canonical needs a conformant response".into(),
        ));
    }
    let a = &resp.answer;
    let (Some(q1), Some(q2), Some(q3), Some(q4)) = (a.q1, a.q2, a.q3, a.q4.as_ref()) else {
        return Err(Error::Contract(
            "conformant response without all four answers".into(),
        ));
    };
    let mut out = String::new();
    let mut section = |tag: &str, body: &str| {
        out.push_str(&format!("<{tag}>\n{body}\n</{tag}>\n"));
    };
    if resp.grammar == Grammar::Structured {
        section(
            "global_perception",
            resp.global_perception.as_deref().unwrap_or(""),
        );
        section(
            "segment_perception",
            resp.segment_perception.as_deref().unwrap_or(""),
        );
    }
    section("think", resp.think.as_deref().unwrap_or(""));
    out.push_str(&format!(
        "<answer>\n<q1>{q1}</q1>\n<q2>{q2}</q2>\n<q3>{q3}</q3>\n<q4>{}</q4>\n</answer>",
        render_q4(q4, resp.grammar)
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// SFT trace filtering

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome<T> {
    pub kept: Vec<T>,
    pub rejected: Vec<(T, Vec<Violation>)>,
}

impl<T> FilterOutcome<T> {
    pub fn counts(&self) -> (usize, usize) {
        (self.kept.len(), self.rejected.len())
    }
}

/// Keeps traces that are conformant and carry all four parsable answers.
pub fn filter_sft_traces<T, I>(
    traces: I,
    grammar: Grammar,
    text_of: impl Fn(&T) -> &str,
) -> FilterOutcome<T>
where
    I: IntoIterator<Item = T>,
{
    let mut outcome = FilterOutcome {
        kept: Vec::new(),
        rejected: Vec::new(),
    };
    for trace in traces {
        let verdict = trace_verdict(text_of(&trace), grammar);
        match verdict {
            None => outcome.kept.push(trace),
            Some(v) => outcome.rejected.push((trace, v)),
        }
    }
    outcome
}

/// `None` if the trace is kept, otherwise the reasons for rejection.
pub fn trace_verdict(raw: &str, grammar: Grammar) -> Option<Vec<Violation>> {
    let resp = parse(raw, grammar);
    if resp.format_ok && resp.answer.is_complete() {
        return None;
    }
    let mut v = resp.violations;
    if v.is_empty() {
        v.push(Violation {
            code: ViolationCode::UnparsableField,
            location: 0,
            detail: "answers incomplete".into(),
        });
    }
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const VALID: &str = "<global_perception>\nA glossy ceramic vase on a wooden floor.\n</global_perception>\n\
<segment_perception>\nA dark pit on the upper rim is visible from 0.5 s to 1.5 s.\n</segment_perception>\n\
<think>\nThe pit indicates a hole defect on a vase.\n</think>\n\
<answer>\n<q1>A</q1>\n<q2>F</q2>\n<q3>C</q3>\n<q4>[0.5,1.5]</q4>\n</answer>";

    fn codes(r: &StructuredResponse) -> Vec<ViolationCode> {
        r.violations.iter().map(|v| v.code).collect()
    }

    #[test]
    fn conformant_structured_response() {
        let r = parse(VALID, Grammar::Structured);
        assert!(r.format_ok, "{:?}", r.violations);
        assert_eq!(r.answer.q1.unwrap().as_char(), 'A');
        assert_eq!(r.answer.q2.unwrap().as_char(), 'F');
        assert_eq!(r.answer.q3.unwrap().as_char(), 'C');
        assert_eq!(r.answer.q4.as_ref().unwrap().to_pairs(), vec![[0.5, 1.5]]);
        assert_eq!(
            r.think.as_deref(),
            Some("The pit indicates a hole defect on a vase.")
        );
    }

    #[test]
    fn think_closed_with_answer_tag() {
        let raw = VALID.replace("vase.\n</think>", "vase.\n</answer>");
        let r = parse(&raw, Grammar::Structured);
        assert!(!r.format_ok);
        assert!(
            codes(&r).contains(&ViolationCode::UnclosedTag),
            "{:?}",
            codes(&r)
        );
        // lenient extraction still finds the answers
        assert_eq!(r.answer.q2.unwrap().as_char(), 'F');
    }

    #[test]
    fn interval_grammars() {
        let p = |s| parse_intervals(s, 2.0).map(|(set, _)| set.to_pairs());
        assert_eq!(p("[0.5, 1.5]").unwrap(), vec![[0.5, 1.5]]);
        assert_eq!(
            p("[[0.0,0.4],[1.2,2.0]]").unwrap(),
            vec![[0.0, 0.4], [1.2, 2.0]]
        );
        assert_eq!(p(" [ ] ").unwrap(), Vec::<[f64; 2]>::new());
        assert_eq!(p("[0.3,1.9]").unwrap(), vec![[0.3, 1.9]]);
        assert!(p("[[1.0,0.5]]").is_err());
        assert!(p("[[0.1,0.2]").is_err());
        assert!(p("[0.1,abc]").is_err());
        assert!(p("[[0.1,0.2],0.3]").is_err());
        assert!(p("[[[0.1,0.2]]]").is_err());
        assert!(p("[0.1,0.2,0.3]").is_err());
        assert!(p("[[]]").is_err());
        assert!(p("[1e999,2]").is_err());
        assert!(p("[0.1,0.2] x").is_err());
    }

    #[test]
    fn interval_clamping_is_a_warning() {
        let (set, clamped) = parse_intervals("[0.5,2.01]", 2.0).unwrap();
        assert!(clamped);
        assert_eq!(set.to_pairs(), vec![[0.5, 2.0]]);
        let raw = VALID.replace("[0.5,1.5]", "[0.5,2.01]");
        let r = parse(&raw, Grammar::Structured);
        assert!(r.format_ok);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn letters_case_and_whitespace() {
        let raw = VALID.replace("<q1>A</q1>", "<q1> a </q1>");
        let r = parse(&raw, Grammar::Structured);
        assert!(r.format_ok);
        assert_eq!(r.answer.q1.unwrap().as_char(), 'A');
        let raw = VALID.replace("<q1>A</q1>", "<q1>C</q1>");
        let r = parse(&raw, Grammar::Structured);
        assert!(codes(&r).contains(&ViolationCode::UnparsableField));
        assert!(r.answer.q1.is_none());
    }

    #[test]
    fn lenient_letter_forms() {
        for ok in ["A", "(a)", "A.", "A) Yes, a defect is present.", " b "] {
            assert!(lenient_letter(ok).is_some(), "{ok}");
        }
        for bad in ["A defect", "AB", "", "(", "1"] {
            assert!(lenient_letter(bad).is_none(), "{bad}");
        }
        let raw = VALID.replace("<q3>C</q3>", "<q3>(C)</q3>");
        let r = parse(&raw, Grammar::Structured);
        assert!(!r.format_ok);
        assert_eq!(r.answer.q3.unwrap().as_char(), 'C');
    }

    #[test]
    fn duplicated_answer_block() {
        let raw = format!("{VALID}\n<answer>\n<q1>B</q1>\n</answer>");
        let r = parse(&raw, Grammar::Structured);
        assert!(codes(&r).contains(&ViolationCode::DuplicateSection));
    }

    #[test]
    fn word_limits_are_advisory() {
        let long = vec!["word"; 90].join(" ");
        let raw = VALID.replace("A glossy ceramic vase on a wooden floor.", &long);
        let r = parse(&raw, Grammar::Structured);
        assert!(r.format_ok);
        assert!(r.warnings.iter().any(|w| w.contains("global_perception")));
    }

    #[test]
    fn benchmark_grammar() {
        let raw = "<think>\nlet me think, hmm, a crack.\n</think>\n<answer>\n<q1>A</q1>\n<q2>B</q2>\n<q3>D</q3>\n<q4>[[0.2, 0.9]]</q4>\n</answer>";
        let r = parse(raw, Grammar::Benchmark);
        assert!(r.format_ok, "{:?}", r.violations);
        assert!(r.global_perception.is_none());
        let r = parse(raw, Grammar::Structured);
        assert!(codes(&r).contains(&ViolationCode::MissingSection));
    }

    #[test]
    fn truncation_is_reported() {
        let raw = format!("{VALID}{}", " ".repeat(100));
        let opts = ParseOptions {
            max_len: VALID.len() + 10,
            ..Default::default()
        };
        let r = parse_with(&raw, Grammar::Structured, &opts);
        assert!(codes(&r).contains(&ViolationCode::InputTooLong));
        // multi-byte boundary
        let r = parse_with(
            "ééééé",
            Grammar::Structured,
            &ParseOptions {
                max_len: 3,
                ..Default::default()
            },
        );
        assert!(!r.format_ok);
    }

    #[test]
    fn render_round_trip_and_contract() {
        let r = parse(VALID, Grammar::Structured);
        let text = render_canonical(&r).unwrap();
        assert_eq!(parse(&text, Grammar::Structured), r);
        let bad = parse("garbage", Grammar::Structured);
        assert!(render_canonical(&bad).is_err());
    }

    #[test]
    fn canonical_forms() {
        let raw = VALID.replace("[0.5,1.5]", "[]");
        let r = parse(&raw, Grammar::Structured);
        let text = render_canonical(&r).unwrap();
        assert!(text.contains("<q4>[]</q4>"));
        let order: Vec<usize> = [
            "<global_perception>",
            "<segment_perception>",
            "<think>",
            "<answer>",
        ]
        .iter()
        .map(|t| text.find(t).unwrap())
        .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn filter_partitions() {
        let missing_sp = VALID
            .replace("<segment_perception>\nA dark pit on the upper rim is visible from 0.5 s to 1.5 s.\n</segment_perception>\n", "");
        let reordered = {
            let think = "<think>\nThe pit indicates a hole defect on a vase.\n</think>\n";
            let gp = "<global_perception>\nA glossy ceramic vase on a wooden floor.\n</global_perception>\n";
            VALID
                .replace(think, "")
                .replace(gp, &format!("{think}{gp}"))
        };
        let traces = vec![VALID.to_owned(), missing_sp, reordered];
        let out = filter_sft_traces(traces, Grammar::Structured, |s| s.as_str());
        assert_eq!(out.counts(), (1, 2));
        assert_eq!(out.kept[0], VALID);
        assert_eq!(out.rejected[0].1[0].code, ViolationCode::MissingSection);
        assert_eq!(out.rejected[1].1[0].code, ViolationCode::SectionOutOfOrder);
    }
}
