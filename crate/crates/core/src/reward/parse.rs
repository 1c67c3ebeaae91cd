use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Vec3};
use crate::qa::{KeyStep, KeyStepValue, PerceptionType};

const TAGS: [&str; 4] = ["<think>", "</think>", "<answer>", "</answer>"];

/// Accepted deviation from unit norm for an orientation step.
const UNIT_NORM_TOL: f64 = 0.01;

const NUM: &str = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?";

struct Patterns {
    strict: Regex,
    step_like: Regex,
    step: Regex,
    position: Regex,
    vector: Regex,
    size: Regex,
    final_point: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        let re = |s: String| Regex::new(&s).expect("static regex");
        Patterns {
            strict: re(r"(?s)\A\s*<think>(.*?)</think>\s*<answer>(.*?)</answer>\s*\z".into()),
            step_like: re(r"^\s*\[[A-Za-z][A-Za-z ]*\]\s*\[".into()),
            step: re(r"^\s*\[([A-Za-z][A-Za-z ]*)\]\s*\[([^\[\]]+)\]\s*:\s*(.+?)\s*$".into()),
            position: re(format!(r"^\[?\s*\(\s*({NUM})\s*,\s*({NUM})\s*\)\s*\]?$")),
            vector: re(format!(r"^[\[(]\s*({NUM})\s*,\s*({NUM})\s*,\s*({NUM})\s*[\])]$")),
            size: re(format!(r"^({NUM})\s*(?:m|meters?)?$")),
            final_point: re(format!(r"[\[(]\s*({NUM})\s*,\s*({NUM})\s*[\])]\s*(px|pixels?)?")),
        }
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub outcome_format_ok: bool,
    pub process_format_ok: bool,
}

/// A line of the think segment that looks like a step; `step` is `None`
/// when it does not parse or its value has the wrong type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedStep {
    pub raw: String,
    pub step: Option<KeyStep>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub think_text: Option<String>,
    pub answer_text: Option<String>,
    pub steps: Vec<ParsedStep>,
    pub final_point: Option<Point2>,
    pub flags: Flags,
}

fn segment<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let len = text[start..].find(close)?;
    Some(&text[start..start + len])
}

fn num(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Parses one `[Type] [target]: value` line.
pub fn parse_step_line(line: &str) -> Option<KeyStep> {
    let p = patterns();
    let c = p.step.captures(line)?;
    let target = c[2].trim().to_string();
    let value = c[3].trim();
    let (perception_type, value) = match c[1].trim().to_ascii_lowercase().as_str() {
        "position" => {
            let v = p.position.captures(value)?;
            let (x, y) = (num(&v[1])?, num(&v[2])?);
            if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
                return None;
            }
            (PerceptionType::Position, KeyStepValue::Point([x, y]))
        }
        "orientation" => {
            let v = p.vector.captures(value)?;
            let xyz = [num(&v[1])?, num(&v[2])?, num(&v[3])?];
            if (Vec3::from(xyz).norm() - 1.0).abs() > UNIT_NORM_TOL {
                return None;
            }
            (PerceptionType::Orientation, KeyStepValue::Vector(xyz))
        }
        "size" => {
            let v = p.size.captures(value)?;
            let m = num(&v[1])?;
            if m <= 0.0 {
                return None;
            }
            (PerceptionType::Size, KeyStepValue::Meters(m))
        }
        _ => return None,
    };
    Some(KeyStep {
        perception_type,
        target_text: target,
        value,
    })
}

fn final_point(answer: &str) -> Option<Point2> {
    let c = patterns().final_point.captures(answer)?;
    let (a, b) = (num(&c[1])?, num(&c[2])?);
    let normalized = c.get(3).is_none() && (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b);
    Some(if normalized {
        Point2::Normalized { x: a, y: b }
    } else {
        Point2::pixel(a, b)
    })
}

/// Total: never fails, problems show up in the flags.
pub fn parse_response(text: &str) -> ParsedResponse {
    let p = patterns();
    let outcome_format_ok = p.strict.captures(text).is_some_and(|c| {
        let inner = [c.get(1).map_or("", |m| m.as_str()), c.get(2).map_or("", |m| m.as_str())];
        inner.iter().all(|s| TAGS.iter().all(|t| !s.contains(t)))
    });
    let think_text = segment(text, "<think>", "</think>").map(str::to_string);
    let answer_text = segment(text, "<answer>", "</answer>").map(str::to_string);

    let steps: Vec<ParsedStep> = think_text
        .as_deref()
        .unwrap_or("")
        .lines()
        .filter(|l| p.step_like.is_match(l))
        .map(|l| ParsedStep {
            raw: l.to_string(),
            step: parse_step_line(l),
        })
        .collect();
    let process_format_ok = !steps.is_empty() && steps.iter().all(|s| s.step.is_some());

    ParsedResponse {
        final_point: answer_text.as_deref().and_then(final_point),
        think_text,
        answer_text,
        steps,
        flags: Flags {
            outcome_format_ok,
            process_format_ok,
        },
    }
}
