use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::descriptor::{AffordanceDescriptor, Arrangement, SwitchType, SymbolHint};
use super::AffordanceError;

struct Vocabulary {
    symbol: Regex,
    types: Vec<(SwitchType, Regex)>,
    arrangements: Vec<(Arrangement, Regex)>,
    count_digits: Regex,
    count_words: Regex,
}

fn vocab() -> &'static Vocabulary {
    static V: OnceLock<Vocabulary> = OnceLock::new();
    V.get_or_init(|| {
        let r = |p: &str| Regex::new(p).expect("static regex");
        Vocabulary {
            symbol: r(r"top\s*/\s*bot(?:tom)?\.?\s*push|top[\s-]*(?:and|/)?[\s-]*bottom[\s-]+push|top_bottom_push"),
            types: vec![
                (SwitchType::PushButton, r(r"push[\s_-]*buttons?|\bpushbuttons?\b|\bpush\b")),
                (SwitchType::Rocker, r(r"\brocker")),
                (SwitchType::TurnButton, r(r"turn[\s_-]*buttons?|\brotary\b|\bknob\b|\bdial\b|\bturn\b")),
                (SwitchType::Toggle, r(r"\btoggle")),
            ],
            arrangements: vec![
                (Arrangement::SideBySide, r(r"side[\s_-]*by[\s_-]*side|\bhorizontal(?:ly)?\b")),
                (Arrangement::StackedVertically, r(r"\bstacked\b|\bvertical(?:ly)?\b|one above the other")),
                (Arrangement::Single, r(r"\bsingle\b")),
            ],
            count_digits: r(r"\b(\d+)[\s-]*(?:[a-z]+[\s-]+)?(?:buttons?|gang|rockers?|switches)\b|\bcount\W{0,3}(\d+)"),
            count_words: r(
                r"\b(one|two|three|four|five|six|double|triple)\b[\s-]*(?:[a-z]+[\s-]+)?(?:buttons?|gang|rockers?|switches)\b|\b(double|triple)\b",
            ),
        }
    })
}

fn word_to_count(w: &str) -> Option<u32> {
    Some(match w {
        "one" => 1,
        "two" | "double" => 2,
        "three" | "triple" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        _ => return None,
    })
}

fn find_switch_type(text: &str) -> Option<SwitchType> {
    vocab()
        .types
        .iter()
        .filter_map(|(t, re)| re.find(text).map(|m| (m.start(), *t)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, t)| t)
}

fn find_arrangement(text: &str) -> Result<Option<Arrangement>, AffordanceError> {
    let found: Vec<Arrangement> =
        vocab().arrangements.iter().filter(|(_, re)| re.is_match(text)).map(|(a, _)| *a).collect();
    match found.as_slice() {
        [] => Ok(None),
        [a] => Ok(Some(*a)),
        _ => Err(AffordanceError::InconsistentDescriptor(format!(
            "conflicting arrangements in {text:?}"
        ))),
    }
}

fn find_count(text: &str) -> Result<Option<u32>, AffordanceError> {
    let v = vocab();
    if let Some(c) = v.count_digits.captures(text) {
        let digits = c.get(1).or_else(|| c.get(2)).map(|m| m.as_str()).unwrap_or_default();
        let n: u32 = digits
            .parse()
            .map_err(|_| AffordanceError::MalformedResponse(format!("bad count {digits:?}")))?;
        return Ok(Some(n));
    }
    if let Some(c) = v.count_words.captures(text) {
        let w = c.get(1).or_else(|| c.get(2)).map(|m| m.as_str()).unwrap_or_default();
        return Ok(word_to_count(w));
    }
    Ok(None)
}

fn assemble(
    switch_type: SwitchType,
    count: Option<u32>,
    arrangement: Option<Arrangement>,
    symbol_hint: SymbolHint,
) -> Result<AffordanceDescriptor, AffordanceError> {
    let (count, arrangement) = match (count, arrangement) {
        (None, None) | (None, Some(Arrangement::Single)) => (1, Arrangement::Single),
        (None, Some(a)) => (2, a),
        (Some(1), None) => (1, Arrangement::Single),
        (Some(n), None) => {
            return Err(AffordanceError::MalformedResponse(format!(
                "{n} buttons without an arrangement"
            )))
        }
        (Some(n), Some(a)) => (n, a),
    };
    AffordanceDescriptor::new(switch_type, count, arrangement, symbol_hint)
}

/// Map free oracle text onto a descriptor by case-insensitive keywords.
///
/// A missing count defaults to 1 (or 2 for a multi-button arrangement); a
/// missing arrangement defaults to single when the count is 1.
pub fn parse_affordance_response(text: &str) -> Result<AffordanceDescriptor, AffordanceError> {
    let lower = text.to_lowercase();
    let v = vocab();
    let symbol_hint =
        if v.symbol.is_match(&lower) { SymbolHint::TopBottomPush } else { SymbolHint::None };
    // Strip the symbol phrase so its "push" does not read as a switch type.
    let rest = v.symbol.replace_all(&lower, " ");
    let switch_type = find_switch_type(&rest)
        .ok_or_else(|| AffordanceError::MalformedResponse(format!("no switch type in {text:?}")))?;
    let arrangement = find_arrangement(&rest)?;
    let count = find_count(&rest)?;
    assemble(switch_type, count, arrangement, symbol_hint)
}

/// Parse one line of the structured oracle protocol:
/// `{"type": .., "count": .., "arrangement": .., "symbols": ..}`.
pub fn parse_json_response(line: &str) -> Result<AffordanceDescriptor, AffordanceError> {
    let value: Value = serde_json::from_str(line.trim())
        .map_err(|e| AffordanceError::MalformedResponse(format!("not JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| AffordanceError::MalformedResponse("response is not an object".into()))?;

    let type_text = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| AffordanceError::MalformedResponse("missing \"type\"".into()))?
        .to_lowercase();
    let switch_type = find_switch_type(&type_text)
        .ok_or_else(|| AffordanceError::MalformedResponse(format!("unknown type {type_text:?}")))?;

    let count = match obj.get("count") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => Some(
            n.as_u64()
                .and_then(|c| u32::try_from(c).ok())
                .ok_or_else(|| AffordanceError::MalformedResponse(format!("bad count {n}")))?,
        ),
        Some(Value::String(s)) => Some(
            s.trim()
                .parse::<u32>()
                .ok()
                .or_else(|| word_to_count(s.trim()))
                .ok_or_else(|| AffordanceError::MalformedResponse(format!("bad count {s:?}")))?,
        ),
        Some(other) => return Err(AffordanceError::MalformedResponse(format!("bad count {other}"))),
    };

    let arrangement = match obj.get("arrangement") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => {
            let s = s.to_lowercase();
            let a = find_arrangement(&s)?;
            if a.is_none() && !s.trim().is_empty() {
                return Err(AffordanceError::MalformedResponse(format!("unknown arrangement {s:?}")));
            }
            a
        }
        Some(other) => {
            return Err(AffordanceError::MalformedResponse(format!("bad arrangement {other}")))
        }
    };

    let symbol_text = match obj.get("symbols") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.to_lowercase(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|i| i.as_str().map(str::to_lowercase))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| AffordanceError::MalformedResponse("symbols must be strings".into()))?
            .join(" "),
        Some(other) => return Err(AffordanceError::MalformedResponse(format!("bad symbols {other}"))),
    };
    let symbol_hint =
        if vocab().symbol.is_match(&symbol_text) { SymbolHint::TopBottomPush } else { SymbolHint::None };

    assemble(switch_type, count, arrangement, symbol_hint)
}
